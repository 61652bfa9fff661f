use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pieces::{pieces, NUM_PIECES};
use super::table::{ActionTable, TangramAction};
use crate::env::{Environment, Example, Instance, Transition};
use crate::error::{Error, Result};
use crate::geometry::{polygons_overlap_fast, ConvexPolygon, RigidTransform};
use crate::raster::Raster;

/// Half-width of the square canvas used for rendering.
pub const CANVAS_HALF: f64 = 8.0;
pub const MAX_STEPS: u32 = 12;
pub const GOAL_RES: usize = 64;
pub const FEATURE_RES: usize = 32;
pub const OVERLAP_PENALTY: f64 = -1.0;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum MaskMode {
    /// Static checks only; overlaps are discovered on `step`.
    Partial,
    /// Static checks plus an exact overlap test against every placed piece.
    Full,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TangramState {
    pub poses: [Option<RigidTransform>; NUM_PIECES],
    pub step_count: u32,
    /// Set when a Partial-mode step attempted an overlapping placement.
    pub violated: bool,
}

impl TangramState {
    /// One piece at the origin with the identity pose.
    pub fn with_first(piece: usize) -> TangramState {
        let mut poses = [None; NUM_PIECES];
        poses[piece] = Some(RigidTransform::IDENTITY);
        TangramState { poses, step_count: 0, violated: false }
    }

    pub fn placed_count(&self) -> usize {
        self.poses.iter().filter(|p| p.is_some()).count()
    }

    pub fn all_placed(&self) -> bool {
        self.placed_count() == NUM_PIECES
    }

    pub fn polygons(&self) -> Result<Vec<(usize, ConvexPolygon)>> {
        let p = pieces();
        self.poses
            .iter()
            .enumerate()
            .filter_map(|(i, pose)| pose.map(|t| (i, t)))
            .map(|(i, t)| Ok((i, p[i].canonical.transformed(&t)?)))
            .collect()
    }

    /// Exact hard-constraint check: no overlaps and a single connected
    /// component under the touching relation.
    pub fn satisfies_constraints(&self) -> Result<bool> {
        let polys = self.polygons()?;
        for i in 0..polys.len() {
            for j in i + 1..polys.len() {
                if crate::geometry::polygons_overlap(&polys[i].1, &polys[j].1)? {
                    return Ok(false);
                }
            }
        }
        if polys.len() <= 1 {
            return Ok(true);
        }
        let mut seen = vec![false; polys.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..polys.len() {
                if !seen[j] && touching(&polys[i].1, &polys[j].1)? {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        Ok(seen.into_iter().all(|s| s))
    }
}

/// Two non-overlapping convex polygons touch when some vertex of one lies
/// on the boundary of the other.
fn touching(a: &ConvexPolygon, b: &ConvexPolygon) -> Result<bool> {
    fn on_boundary(p: &crate::geometry::Vec2, poly: &ConvexPolygon) -> Result<bool> {
        let v = poly.vertices();
        let n = v.len();
        for i in 0..n {
            let (s, e) = (v[i], v[(i + 1) % n]);
            let d = e.sub(&s)?;
            let w = p.sub(&s)?;
            if d.cross(&w)?.sign() == 0 {
                let t = w.dot(&d)?;
                if t.sign() >= 0 && t.cmp_exact(&d.dot(&d)?)?.is_le() {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }
    for p in a.vertices() {
        if on_boundary(p, b)? {
            return Ok(true);
        }
    }
    for p in b.vertices() {
        if on_boundary(p, a)? {
            return Ok(true);
        }
    }
    Ok(false)
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct TangramGoal {
    pub target_mask: Raster,
    pub source_id: String,
}

pub fn static_check(s: &TangramState, a: &TangramAction) -> bool {
    a.in_range() && s.poses[a.moved as usize].is_none() && s.poses[a.reference as usize].is_some()
}

pub fn legal_mask(s: &TangramState, table: &ActionTable, mode: MaskMode) -> Result<Vec<bool>> {
    let mut mask = vec![false; table.len()];
    for i in legal_indices(s, table, mode)? {
        mask[i] = true;
    }
    Ok(mask)
}

pub fn legal_indices(s: &TangramState, table: &ActionTable, mode: MaskMode) -> Result<Vec<usize>> {
    if s.violated || s.all_placed() || s.step_count >= MAX_STEPS {
        return Ok(Vec::new());
    }
    let placed = if mode == MaskMode::Full { s.polygons()? } else { Vec::new() };
    let mut out = Vec::new();
    for (i, a) in table.actions.iter().enumerate() {
        if !static_check(s, a) {
            continue;
        }
        if mode == MaskMode::Full && collides(s, a, &placed)? {
            continue;
        }
        out.push(i);
    }
    Ok(out)
}

fn collides(s: &TangramState, a: &TangramAction, placed: &[(usize, ConvexPolygon)]) -> Result<bool> {
    let poly = moved_polygon(s, a)?;
    for (_, q) in placed {
        if polygons_overlap_fast(&poly, q)? {
            return Ok(true);
        }
    }
    Ok(false)
}

fn moved_polygon(s: &TangramState, a: &TangramAction) -> Result<ConvexPolygon> {
    let ref_pose = s.poses[a.reference as usize]
        .ok_or_else(|| Error::InvalidAction("reference piece not placed".into()))?;
    let pose = a.placement(&ref_pose)?;
    pieces()[a.moved as usize].canonical.transformed(&pose)
}

pub fn step(
    s: &TangramState,
    action: usize,
    table: &ActionTable,
    mode: MaskMode,
) -> Result<Transition<TangramState>> {
    let a = table
        .actions
        .get(action)
        .ok_or_else(|| Error::InvalidAction(format!("action id {action} out of range")))?;
    if s.violated || s.all_placed() || s.step_count >= MAX_STEPS {
        return Err(Error::InvalidAction("episode already finished".into()));
    }
    if !static_check(s, a) {
        return Err(Error::InvalidAction(format!("{a:?} fails static checks")));
    }
    let mut next = s.clone();
    next.step_count += 1;
    if collides(s, a, &s.polygons()?)? {
        if mode == MaskMode::Full {
            return Err(Error::InvalidAction(format!("{a:?} overlaps a placed piece")));
        }
        next.violated = true;
        return Ok(Transition { state: next, reward: OVERLAP_PENALTY, done: true });
    }
    let ref_pose = s.poses[a.reference as usize].expect("static check");
    next.poses[a.moved as usize] = Some(a.placement(&ref_pose)?);
    let done = next.all_placed() || next.step_count >= MAX_STEPS;
    Ok(Transition { state: next, reward: 0.0, done })
}

/// Union of placed pieces on a `res × res` grid over `[-8, 8]²`; a cell is
/// filled iff its center is inside some piece.
pub fn render_silhouette(s: &TangramState, res: usize) -> Result<Raster> {
    let polys = s.polygons()?;
    if polys.is_empty() {
        return Err(Error::EmptyConfig);
    }
    let mut r = Raster::empty(res);
    let cell = 2.0 * CANVAS_HALF / res as f64;
    for (_, p) in &polys {
        let (x0, y0, x1, y1) = p.bbox_f64();
        let c0 = (((x0 + CANVAS_HALF) / cell).floor().max(0.0)) as usize;
        let c1 = (((x1 + CANVAS_HALF) / cell).ceil().min(res as f64)) as usize;
        let r0 = (((y0 + CANVAS_HALF) / cell).floor().max(0.0)) as usize;
        let r1 = (((y1 + CANVAS_HALF) / cell).ceil().min(res as f64)) as usize;
        for row in r0..r1 {
            for col in c0..c1 {
                let cx = -CANVAS_HALF + (col as f64 + 0.5) * cell;
                let cy = -CANVAS_HALF + (row as f64 + 0.5) * cell;
                if p.contains_f64(cx, cy) {
                    r.set(col, row, true);
                }
            }
        }
    }
    Ok(r)
}

/// IoU between the state's silhouette and the goal mask after aligning the
/// two centroids to the nearest whole cell.
pub fn iou_goal_score(s: &TangramState, g: &TangramGoal) -> Result<f64> {
    if !s.all_placed() || s.violated {
        return Err(Error::InvalidArgument("IoU needs a complete valid state".into()));
    }
    let r = render_silhouette(s, g.target_mask.res)?;
    let (sc, sr) = r.centroid().ok_or(Error::EmptyConfig)?;
    let (gc, gr) = g
        .target_mask
        .centroid()
        .ok_or_else(|| Error::InvalidArgument("empty goal mask".into()))?;
    let shifted = r.shifted((gc - sc).round() as i64, (gr - sr).round() as i64);
    Ok(shifted.iou(&g.target_mask))
}

/// Tangram assembly with a fixed action table.
#[derive(Clone)]
pub struct TangramEnv {
    pub table: Arc<ActionTable>,
    pub mode: MaskMode,
    /// IoU at or above which an assembly counts as matching its goal.
    pub success_iou: f64,
}

impl TangramEnv {
    pub fn new(table: Arc<ActionTable>, mode: MaskMode) -> TangramEnv {
        TangramEnv { table, mode, success_iou: 0.8 }
    }

    /// Uniformly random Full-mode assembly from a random first piece;
    /// retries until all seven pieces are placed.
    pub fn random_assembly<R: Rng>(&self, rng: &mut R) -> Result<TangramState> {
        loop {
            let mut s = TangramState::with_first(rng.random_range(0..NUM_PIECES));
            loop {
                let legal = legal_indices(&s, &self.table, MaskMode::Full)?;
                if legal.is_empty() {
                    break;
                }
                let a = legal[rng.random_range(0..legal.len())];
                s = step(&s, a, &self.table, MaskMode::Full)?.state;
            }
            if s.all_placed() {
                return Ok(s);
            }
        }
    }

    /// Positive examples: random complete assemblies, each paired with its
    /// own rendered silhouette as the goal.
    pub fn generate_dataset<R: Rng>(&self, n: usize, rng: &mut R, tag: &str) -> Result<Vec<Example<TangramState, TangramGoal>>> {
        (0..n)
            .map(|i| {
                let state = self.random_assembly(rng)?;
                let goal = TangramGoal {
                    target_mask: render_silhouette(&state, GOAL_RES)?,
                    source_id: format!("{tag}-{i}"),
                };
                Ok(Example { goal, state })
            })
            .collect()
    }

    /// Initial state for a goal: a uniformly chosen first piece at the
    /// origin, or with `prefix` the example's own first piece orientation.
    pub fn initial_instance<R: Rng>(
        &self,
        ex: &Example<TangramState, TangramGoal>,
        prefix: bool,
        rng: &mut R,
    ) -> Instance<TangramState, TangramGoal> {
        let initial = if prefix {
            let (i, pose) = ex
                .state
                .poses
                .iter()
                .enumerate()
                .find_map(|(i, p)| p.map(|p| (i, p)))
                .expect("examples are complete");
            let mut s = TangramState::with_first(i);
            s.poses[i] = Some(RigidTransform { t: crate::geometry::Vec2::ZERO, ..pose });
            s
        } else {
            TangramState::with_first(rng.random_range(0..NUM_PIECES))
        };
        Instance { goal: ex.goal.clone(), initial }
    }
}

impl Environment for TangramEnv {
    type State = TangramState;
    type Goal = TangramGoal;

    fn name(&self) -> &'static str {
        "tangram"
    }

    fn num_actions(&self) -> usize {
        self.table.len()
    }

    fn legal_actions(&self, s: &TangramState) -> Vec<usize> {
        legal_indices(s, &self.table, self.mode).expect("tangram coordinates stay small")
    }

    fn step(&self, s: &TangramState, action: usize) -> Result<Transition<TangramState>> {
        step(s, action, &self.table, self.mode)
    }

    fn is_complete(&self, s: &TangramState) -> bool {
        s.all_placed() && !s.violated
    }

    fn is_valid(&self, s: &TangramState) -> bool {
        self.is_complete(s) && s.satisfies_constraints().unwrap_or(false)
    }

    fn is_success(&self, s: &TangramState, g: &TangramGoal) -> bool {
        self.is_valid(s) && self.oracle_score(s, g) >= self.success_iou
    }

    fn oracle_score(&self, s: &TangramState, g: &TangramGoal) -> f64 {
        iou_goal_score(s, g).unwrap_or(0.0)
    }

    fn state_dim(&self) -> usize {
        FEATURE_RES * FEATURE_RES + NUM_PIECES + 4 * NUM_PIECES
    }

    fn goal_dim(&self) -> usize {
        FEATURE_RES * FEATURE_RES
    }

    fn state_features(&self, s: &TangramState) -> Vec<f64> {
        let mut f = match render_silhouette(s, FEATURE_RES) {
            Ok(r) => r.to_f64(),
            Err(_) => vec![0.0; FEATURE_RES * FEATURE_RES],
        };
        for p in &s.poses {
            f.push(p.is_some() as u8 as f64);
        }
        // Unplaced pieces keep an all-zero pose.
        for p in &s.poses {
            match p {
                Some(t) => {
                    let (x, y) = t.t.to_f64();
                    f.push(t.rot as f64 / 7.0);
                    f.push(t.flip as u8 as f64);
                    f.push((x / CANVAS_HALF).clamp(-1.0, 1.0));
                    f.push((y / CANVAS_HALF).clamp(-1.0, 1.0));
                }
                None => f.extend([0.0; 4]),
            }
        }
        f
    }

    fn goal_features(&self, g: &TangramGoal) -> Vec<f64> {
        if g.target_mask.res == FEATURE_RES {
            g.target_mask.to_f64()
        } else {
            g.target_mask.downsample(FEATURE_RES).to_f64()
        }
    }
}
