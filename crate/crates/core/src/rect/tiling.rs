use rand::seq::SliceRandom;
use rand::Rng;

use super::{Inventory, Placement, RectPieceKind, RegionGoal};

/// Search nodes explored before a tiling attempt gives up.
pub const DEFAULT_NODE_BUDGET: usize = 20_000;

struct Tiler<'a, R: Rng> {
    w: i32,
    h: i32,
    grid: Vec<bool>,
    remaining: Inventory,
    out: Vec<Placement>,
    nodes: usize,
    budget: usize,
    rng: &'a mut R,
}

impl<R: Rng> Tiler<'_, R> {
    fn first_free(&self) -> Option<(i32, i32)> {
        let i = self.grid.iter().position(|&c| !c)?;
        Some((i as i32 % self.w, i as i32 / self.w))
    }

    fn fits(&self, x: i32, y: i32, w: i32, h: i32) -> bool {
        if x + w > self.w || y + h > self.h {
            return false;
        }
        (y..y + h).all(|yy| (x..x + w).all(|xx| !self.grid[(yy * self.w + xx) as usize]))
    }

    fn mark(&mut self, x: i32, y: i32, w: i32, h: i32, v: bool) {
        for yy in y..y + h {
            for xx in x..x + w {
                self.grid[(yy * self.w + xx) as usize] = v;
            }
        }
    }

    fn solve(&mut self) -> bool {
        self.nodes += 1;
        if self.nodes > self.budget {
            return false;
        }
        let Some((x, y)) = self.first_free() else {
            return true;
        };
        // Scanning row by row, the first free cell is the lower-left corner
        // of whichever piece ends up covering it.
        let mut options: Vec<(RectPieceKind, u8)> =
            RectPieceKind::ALL.iter().flat_map(|&k| [(k, 0), (k, 1)]).collect();
        options.shuffle(self.rng);
        for (kind, rot) in options {
            if self.remaining.0[kind.index()] == 0 {
                continue;
            }
            let (w, h) = kind.dims(rot);
            if !self.fits(x, y, w, h) {
                continue;
            }
            self.mark(x, y, w, h, true);
            self.remaining.0[kind.index()] -= 1;
            self.out.push(Placement { kind, rot, x, y });
            if self.solve() {
                return true;
            }
            self.out.pop();
            self.remaining.0[kind.index()] += 1;
            self.mark(x, y, w, h, false);
            if self.nodes > self.budget {
                return false;
            }
        }
        false
    }
}

/// Randomized exact tiling of `region` by pieces drawn from `inventory`.
///
/// Placements are returned in canvas coordinates with the region centered.
/// `None` means no tiling was found within `budget` search nodes.
pub fn tile_region<R: Rng>(
    region: &RegionGoal,
    inventory: &Inventory,
    rng: &mut R,
    budget: usize,
) -> Option<Vec<Placement>> {
    if region.area() % 2 != 0 || region.area() > inventory.area() {
        return None;
    }
    let mut t = Tiler {
        w: region.w as i32,
        h: region.h as i32,
        grid: vec![false; region.area() as usize],
        remaining: *inventory,
        out: Vec::new(),
        nodes: 0,
        budget,
        rng,
    };
    if !t.solve() {
        return None;
    }
    let (x0, _, y0, _) = region.bounds();
    Some(t.out.into_iter().map(|p| Placement { x: p.x + x0, y: p.y + y0, ..p }).collect())
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::rect::no_collisions;

    #[test]
    fn tilings_cover_region_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut found = 0;
        for w in 3..=8 {
            for h in 3..=8 {
                let region = RegionGoal::new(w, h).unwrap();
                if let Some(ps) = tile_region(&region, &Inventory::TRAIN, &mut rng, DEFAULT_NODE_BUDGET) {
                    found += 1;
                    assert!(no_collisions(&ps));
                    assert!(ps.iter().all(|p| p.inside(&region)));
                    let area: u32 = ps.iter().map(|p| p.kind.area()).sum();
                    assert_eq!(area, region.area());
                }
            }
        }
        assert!(found > 10);
    }

    #[test]
    fn odd_area_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(tile_region(&RegionGoal::new(3, 3).unwrap(), &Inventory::TRAIN, &mut rng, 100).is_none());
    }
}
