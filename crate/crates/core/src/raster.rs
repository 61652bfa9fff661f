use serde::{Deserialize, Serialize};

/// Square binary image, row-major with row 0 at the bottom (smallest y).
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Raster {
    pub res: usize,
    pub cells: Vec<bool>,
}

impl Raster {
    pub fn empty(res: usize) -> Raster {
        Raster { res, cells: vec![false; res * res] }
    }

    pub fn filled(res: usize) -> Raster {
        Raster { res, cells: vec![true; res * res] }
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        self.cells[row * self.res + col]
    }

    pub fn set(&mut self, col: usize, row: usize, v: bool) {
        self.cells[row * self.res + col] = v;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Mean `(col, row)` of filled cells.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for r in 0..self.res {
            for c in 0..self.res {
                if self.get(c, r) {
                    sx += c as f64;
                    sy += r as f64;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }

    /// Shifts content by whole cells; cells moved off the grid are dropped.
    pub fn shifted(&self, dc: i64, dr: i64) -> Raster {
        let mut out = Raster::empty(self.res);
        let n = self.res as i64;
        for r in 0..n {
            for c in 0..n {
                if self.get(c as usize, r as usize) {
                    let (nc, nr) = (c + dc, r + dr);
                    if (0..n).contains(&nc) && (0..n).contains(&nr) {
                        out.set(nc as usize, nr as usize, true);
                    }
                }
            }
        }
        out
    }

    /// Downsamples by an integer factor; a coarse cell is set when at least
    /// half of its fine cells are.
    pub fn downsample(&self, res: usize) -> Raster {
        assert!(res > 0 && self.res % res == 0, "downsample factor must divide");
        let f = self.res / res;
        let mut out = Raster::empty(res);
        for r in 0..res {
            for c in 0..res {
                let mut n = 0;
                for rr in 0..f {
                    for cc in 0..f {
                        n += self.get(c * f + cc, r * f + rr) as usize;
                    }
                }
                out.set(c, r, 2 * n >= f * f);
            }
        }
        out
    }

    pub fn iou(&self, other: &Raster) -> f64 {
        let mut inter = 0usize;
        let mut uni = 0usize;
        for (a, b) in self.cells.iter().zip(&other.cells) {
            inter += (*a && *b) as usize;
            uni += (*a || *b) as usize;
        }
        if uni == 0 {
            0.0
        } else {
            inter as f64 / uni as f64
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.cells.iter().map(|&c| c as u8 as f64).collect()
    }
}
