//! Rectangle composition on a 16×16 grid, plus the synthetic dataset
//! generator.

mod dataset;
mod tiling;

pub use dataset::*;
pub use tiling::*;

use serde::{Deserialize, Serialize};

use crate::env::{Environment, Transition};
use crate::error::{Error, Result};
use crate::raster::Raster;

pub const CANVAS: i32 = 16;
pub const HALF: i32 = CANVAS / 2;
pub const NUM_KINDS: usize = 3;
pub const NUM_ACTIONS: usize = NUM_KINDS * 2 * (CANVAS * CANVAS) as usize;
pub const MIN_SIDE: u32 = 3;
pub const MAX_SIDE: u32 = 12;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub enum RectPieceKind {
    #[serde(rename = "1x2")]
    P1x2,
    #[serde(rename = "2x3")]
    P2x3,
    #[serde(rename = "1x5")]
    P1x5,
}

impl RectPieceKind {
    pub const ALL: [RectPieceKind; NUM_KINDS] = [RectPieceKind::P1x2, RectPieceKind::P2x3, RectPieceKind::P1x5];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> RectPieceKind {
        RectPieceKind::ALL[i]
    }

    /// `(w, h)` at rotation 0; rotation 1 (90°) swaps them.
    pub fn dims(self, rot: u8) -> (i32, i32) {
        let (w, h) = match self {
            RectPieceKind::P1x2 => (1, 2),
            RectPieceKind::P2x3 => (2, 3),
            RectPieceKind::P1x5 => (1, 5),
        };
        if rot == 0 {
            (w, h)
        } else {
            (h, w)
        }
    }

    pub fn area(self) -> u32 {
        let (w, h) = self.dims(0);
        (w * h) as u32
    }
}

/// Piece counts indexed by [`RectPieceKind::index`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default, Serialize, Deserialize)]
pub struct Inventory(pub [u32; NUM_KINDS]);

impl Inventory {
    /// five 1×2, eleven 2×3, two 1×5.
    pub const TRAIN: Inventory = Inventory([5, 11, 2]);
    /// eight 2×1 (the 1×2 type rotated), four 2×3, six 1×5.
    pub const EVAL: Inventory = Inventory([8, 4, 6]);

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn area(&self) -> u32 {
        RectPieceKind::ALL.iter().map(|k| self.0[k.index()] * k.area()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct RegionGoal {
    #[serde(rename = "W")]
    pub w: u32,
    #[serde(rename = "H")]
    pub h: u32,
}

impl RegionGoal {
    pub fn new(w: u32, h: u32) -> Result<RegionGoal> {
        if !(MIN_SIDE..=MAX_SIDE).contains(&w) || !(MIN_SIDE..=MAX_SIDE).contains(&h) {
            return Err(Error::InvalidArgument(format!("region {w}x{h} outside 3..=12")));
        }
        Ok(RegionGoal { w, h })
    }

    pub fn area(&self) -> u32 {
        self.w * self.h
    }

    /// Half-open cell bounds `(xmin, xmax, ymin, ymax)` of the centered region.
    pub fn bounds(&self) -> (i32, i32, i32, i32) {
        let xmin = -(self.w as i32 / 2);
        let ymin = -(self.h as i32 / 2);
        (xmin, xmin + self.w as i32, ymin, ymin + self.h as i32)
    }

    pub fn text(&self) -> String {
        format!("pack into a {} by {} box", self.w, self.h)
    }
}

/// A piece placed with its lower-left cell at `(x, y)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct Placement {
    #[serde(rename = "type")]
    pub kind: RectPieceKind,
    pub rot: u8,
    pub x: i32,
    pub y: i32,
}

impl Placement {
    pub fn dims(&self) -> (i32, i32) {
        self.kind.dims(self.rot)
    }

    pub fn cells(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        let (w, h) = self.dims();
        (0..h).flat_map(move |dy| (0..w).map(move |dx| (self.x + dx, self.y + dy)))
    }

    pub fn in_canvas(&self) -> bool {
        let (w, h) = self.dims();
        self.x >= -HALF && self.y >= -HALF && self.x + w <= HALF && self.y + h <= HALF
    }

    pub fn inside(&self, region: &RegionGoal) -> bool {
        let (w, h) = self.dims();
        let (x0, x1, y0, y1) = region.bounds();
        self.x >= x0 && self.y >= y0 && self.x + w <= x1 && self.y + h <= y1
    }

    pub fn action_index(&self) -> usize {
        encode_action(self.kind, self.rot, self.x, self.y)
    }

    /// Corner coordinates, counter-clockwise from the lower-left.
    pub fn vertices(&self) -> Vec<[i32; 2]> {
        let (w, h) = self.dims();
        vec![[self.x, self.y], [self.x + w, self.y], [self.x + w, self.y + h], [self.x, self.y + h]]
    }
}

pub fn encode_action(kind: RectPieceKind, rot: u8, x: i32, y: i32) -> usize {
    ((kind.index() * 2 + rot as usize) * CANVAS as usize + (x + HALF) as usize) * CANVAS as usize
        + (y + HALF) as usize
}

pub fn decode_action(a: usize) -> Result<Placement> {
    if a >= NUM_ACTIONS {
        return Err(Error::InvalidAction(format!("action id {a} out of range")));
    }
    let c = CANVAS as usize;
    let y = (a % c) as i32 - HALF;
    let x = ((a / c) % c) as i32 - HALF;
    let kr = a / (c * c);
    Ok(Placement { kind: RectPieceKind::from_index(kr / 2), rot: (kr % 2) as u8, x, y })
}

fn cell_index(x: i32, y: i32) -> usize {
    ((y + HALF) * CANVAS + (x + HALF)) as usize
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct RectState {
    pub placements: Vec<Placement>,
    pub remaining: Inventory,
    occupancy: [u64; 4],
}

impl RectState {
    pub fn new(inventory: Inventory) -> RectState {
        RectState { placements: Vec::new(), remaining: inventory, occupancy: [0; 4] }
    }

    pub fn occupied(&self, x: i32, y: i32) -> bool {
        let i = cell_index(x, y);
        self.occupancy[i / 64] >> (i % 64) & 1 == 1
    }

    fn fits(&self, p: &Placement) -> bool {
        p.in_canvas() && p.cells().all(|(x, y)| !self.occupied(x, y))
    }

    pub fn is_legal(&self, p: &Placement) -> bool {
        self.remaining.0[p.kind.index()] > 0 && self.fits(p)
    }

    /// Places without any checks; used to replay solutions that may collide.
    fn place_unchecked(&mut self, p: Placement) -> bool {
        let mut clean = true;
        for (x, y) in p.cells() {
            if !(-HALF..HALF).contains(&x) || !(-HALF..HALF).contains(&y) {
                clean = false;
                continue;
            }
            let i = cell_index(x, y);
            clean &= self.occupancy[i / 64] >> (i % 64) & 1 == 0;
            self.occupancy[i / 64] |= 1 << (i % 64);
        }
        self.placements.push(p);
        clean
    }

    pub fn place(&self, p: Placement) -> Result<RectState> {
        if !self.is_legal(&p) {
            return Err(Error::InvalidAction(format!("{p:?} is not legal")));
        }
        let mut next = self.clone();
        next.remaining.0[p.kind.index()] -= 1;
        next.place_unchecked(p);
        Ok(next)
    }

    /// Canvas occupancy as a 16×16 raster, row 0 at y = −8.
    pub fn raster(&self) -> Raster {
        let mut r = Raster::empty(CANVAS as usize);
        for y in -HALF..HALF {
            for x in -HALF..HALF {
                if self.occupied(x, y) {
                    r.set((x + HALF) as usize, (y + HALF) as usize, true);
                }
            }
        }
        r
    }

    pub fn occupied_count(&self) -> u32 {
        self.occupancy.iter().map(|w| w.count_ones()).sum()
    }
}

pub fn legal_mask_rect(s: &RectState) -> Vec<bool> {
    let mut m = vec![false; NUM_ACTIONS];
    for a in legal_actions_rect(s) {
        m[a] = true;
    }
    m
}

pub fn legal_actions_rect(s: &RectState) -> Vec<usize> {
    let mut out = Vec::new();
    for kind in RectPieceKind::ALL {
        if s.remaining.0[kind.index()] == 0 {
            continue;
        }
        for rot in 0..2u8 {
            let (w, h) = kind.dims(rot);
            for x in -HALF..=HALF - w {
                for y in -HALF..=HALF - h {
                    let p = Placement { kind, rot, x, y };
                    if s.fits(&p) {
                        out.push(p.action_index());
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// No cell collisions and every placement inside the centered region.
pub fn success(s: &RectState, goal: &RegionGoal) -> bool {
    s.remaining.is_empty() && no_collisions(&s.placements) && s.placements.iter().all(|p| p.inside(goal))
}

pub fn no_collisions(placements: &[Placement]) -> bool {
    let mut s = RectState::new(Inventory::default());
    placements.iter().all(|p| s.place_unchecked(*p))
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Mid,
    Hard,
}

pub fn difficulty_ratio(piece_area: u32, region: &RegionGoal) -> Difficulty {
    let r = piece_area as f64 / region.area() as f64;
    if r < 0.3 {
        Difficulty::Easy
    } else if r >= 0.7 {
        Difficulty::Hard
    } else {
        Difficulty::Mid
    }
}

/// Rectangle composition with the exact success predicate as oracle score.
#[derive(Clone, Copy, Debug, Default)]
pub struct RectEnv;

impl Environment for RectEnv {
    type State = RectState;
    type Goal = RegionGoal;

    fn name(&self) -> &'static str {
        "rect"
    }

    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn legal_actions(&self, s: &RectState) -> Vec<usize> {
        legal_actions_rect(s)
    }

    fn step(&self, s: &RectState, action: usize) -> Result<Transition<RectState>> {
        let next = s.place(decode_action(action)?)?;
        let done = next.remaining.is_empty();
        Ok(Transition { state: next, reward: 0.0, done })
    }

    fn is_complete(&self, s: &RectState) -> bool {
        s.remaining.is_empty()
    }

    fn is_valid(&self, s: &RectState) -> bool {
        s.remaining.is_empty() && no_collisions(&s.placements)
    }

    fn is_success(&self, s: &RectState, g: &RegionGoal) -> bool {
        success(s, g)
    }

    fn oracle_score(&self, s: &RectState, g: &RegionGoal) -> f64 {
        success(s, g) as u8 as f64
    }

    fn state_dim(&self) -> usize {
        (CANVAS * CANVAS + 2 * CANVAS) as usize + NUM_KINDS
    }

    fn goal_dim(&self) -> usize {
        2 * (MAX_SIDE - MIN_SIDE + 1) as usize + 2 * CANVAS as usize
    }

    /// Occupancy grid (rows from the bottom), then per-column and per-row
    /// occupied flags, then remaining counts.
    fn state_features(&self, s: &RectState) -> Vec<f64> {
        let mut f = Vec::with_capacity(self.state_dim());
        let mut cols = [0.0; CANVAS as usize];
        let mut rows = [0.0; CANVAS as usize];
        for y in -HALF..HALF {
            for x in -HALF..HALF {
                let o = s.occupied(x, y);
                if o {
                    cols[(x + HALF) as usize] = 1.0;
                    rows[(y + HALF) as usize] = 1.0;
                }
                f.push(o as u8 as f64);
            }
        }
        f.extend(cols);
        f.extend(rows);
        for c in s.remaining.0 {
            f.push((c as f64 / 12.0).min(1.0));
        }
        f
    }

    /// One-hot width and height, then the columns and rows the region covers.
    fn goal_features(&self, g: &RegionGoal) -> Vec<f64> {
        let n = (MAX_SIDE - MIN_SIDE + 1) as usize;
        let mut f = vec![0.0; 2 * n];
        f[(g.w - MIN_SIDE) as usize] = 1.0;
        f[n + (g.h - MIN_SIDE) as usize] = 1.0;
        let (xmin, xmax, ymin, ymax) = g.bounds();
        f.extend((-HALF..HALF).map(|x| (xmin..xmax).contains(&x) as u8 as f64));
        f.extend((-HALF..HALF).map(|y| (ymin..ymax).contains(&y) as u8 as f64));
        f
    }
}
