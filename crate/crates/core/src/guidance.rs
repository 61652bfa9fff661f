//! Differentiable guidance objective for continuous rectangle layouts and a
//! gradient-descent sampler that snaps its result onto the discrete grid.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Instance;
use crate::error::{Error, Result};
use crate::models::{sigmoid, softplus};
use crate::rect::{success, Placement, RectPieceKind, RectState, RegionGoal, HALF};

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct ContinuousPiece {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub w: f64,
    pub h: f64,
}

impl ContinuousPiece {
    /// Half the diagonal: radius of the enclosing circle.
    pub fn radius(&self) -> f64 {
        (self.w * self.w + self.h * self.h).sqrt() / 2.0
    }
}

#[derive(Clone, PartialEq, Debug, Default, Serialize, Deserialize)]
pub struct ContinuousState {
    pub pieces: Vec<ContinuousPiece>,
}

/// Per-piece gradient with respect to `(x, y, theta)`.
pub type Gradient = Vec<[f64; 3]>;

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct Bounds {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Bounds {
    pub fn of_region(g: &RegionGoal) -> Bounds {
        let (xmin, xmax, ymin, ymax) = g.bounds();
        Bounds { xmin: xmin as f64, xmax: xmax as f64, ymin: ymin as f64, ymax: ymax as f64 }
    }

    /// Bounds for the center of a `w` by `h` piece that keep it inside; an
    /// axis too short for the piece collapses to its midline.
    pub fn inset(&self, w: f64, h: f64) -> Bounds {
        let shrink = |lo: f64, hi: f64, d: f64| {
            if hi - lo >= d {
                (lo + d / 2.0, hi - d / 2.0)
            } else {
                let m = (lo + hi) / 2.0;
                (m, m)
            }
        };
        let (xmin, xmax) = shrink(self.xmin, self.xmax, w);
        let (ymin, ymax) = shrink(self.ymin, self.ymax, h);
        Bounds { xmin, xmax, ymin, ymax }
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct GuidanceWeights {
    pub angle: f64,
    pub overlap: f64,
    pub region: f64,
    /// Soft-min sharpness of the angle term.
    pub beta: f64,
    pub targets: Vec<f64>,
}

impl GuidanceWeights {
    /// Unit weights with right-angle targets over two full turns.
    pub fn rect() -> GuidanceWeights {
        Self::with_step(FRAC_PI_2)
    }

    /// Unit weights with 45 degree targets.
    pub fn tangram() -> GuidanceWeights {
        Self::with_step(FRAC_PI_4)
    }

    fn with_step(step: f64) -> GuidanceWeights {
        let n = (2.0 * std::f64::consts::PI / step).round() as i32;
        GuidanceWeights {
            angle: 1.0,
            overlap: 1.0,
            region: 1.0,
            beta: 10.0,
            targets: (-n..=n).map(|k| k as f64 * step).collect(),
        }
    }
}

impl Default for GuidanceWeights {
    fn default() -> Self {
        Self::rect()
    }
}

/// `sum_i -(1/beta) log sum_k exp(-beta (theta_i - t_k)^2)` and its gradient.
pub fn angle_loss(thetas: &[f64], targets: &[f64], beta: f64) -> Result<(f64, Vec<f64>)> {
    if !(beta > 0.0) || targets.is_empty() {
        return Err(Error::InvalidArgument("angle loss needs beta > 0 and a target".into()));
    }
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(thetas.len());
    for &t in thetas {
        let e: Vec<f64> = targets.iter().map(|&k| -beta * (t - k) * (t - k)).collect();
        let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = e.iter().map(|x| (x - m).exp()).sum();
        value += -(m + z.ln()) / beta;
        grad.push(targets.iter().zip(&e).map(|(&k, x)| (x - m).exp() / z * 2.0 * (t - k)).sum());
    }
    Ok((value, grad))
}

/// Half the sum over ordered pairs of `softplus(r_i + r_j - d_ij)`.
/// Coincident centers contribute no gradient.
pub fn overlap_loss(s: &ContinuousState) -> (f64, Gradient) {
    let n = s.pieces.len();
    let mut value = 0.0;
    let mut grad = vec![[0.0; 3]; n];
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&s.pieces[i], &s.pieces[j]);
            let (dx, dy) = (a.x - b.x, a.y - b.y);
            let d = (dx * dx + dy * dy).sqrt();
            let z = a.radius() + b.radius() - d;
            value += softplus(z);
            if d > 0.0 {
                let c = -sigmoid(z) / d;
                grad[i][0] += c * dx;
                grad[i][1] += c * dy;
                grad[j][0] -= c * dx;
                grad[j][1] -= c * dy;
            }
        }
    }
    (value, grad)
}

/// Softplus penalties keeping every center inside `region`.
pub fn region_loss(s: &ContinuousState, region: &Bounds) -> (f64, Gradient) {
    region_loss_per_piece(s, &vec![*region; s.pieces.len()])
}

/// Region loss with separate center bounds for each piece.
pub fn region_loss_per_piece(s: &ContinuousState, bounds: &[Bounds]) -> (f64, Gradient) {
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(s.pieces.len());
    for (p, b) in s.pieces.iter().zip(bounds) {
        value += softplus(b.xmin - p.x) + softplus(p.x - b.xmax) + softplus(b.ymin - p.y) + softplus(p.y - b.ymax);
        grad.push([
            -sigmoid(b.xmin - p.x) + sigmoid(p.x - b.xmax),
            -sigmoid(b.ymin - p.y) + sigmoid(p.y - b.ymax),
            0.0,
        ]);
    }
    (value, grad)
}

#[derive(Clone, Copy, PartialEq, Debug, Default, Serialize, Deserialize)]
pub struct GuidanceValue {
    pub total: f64,
    pub angle: f64,
    pub overlap: f64,
    pub region: f64,
}

fn combine(
    s: &ContinuousState,
    w: &GuidanceWeights,
    region: (f64, Gradient),
) -> Result<(GuidanceValue, Gradient)> {
    let thetas: Vec<f64> = s.pieces.iter().map(|p| p.theta).collect();
    let (va, ga) = angle_loss(&thetas, &w.targets, w.beta)?;
    let (vo, go) = overlap_loss(s);
    let (vr, gr) = region;
    let grad = (0..s.pieces.len())
        .map(|i| {
            [
                w.overlap * go[i][0] + w.region * gr[i][0],
                w.overlap * go[i][1] + w.region * gr[i][1],
                w.angle * ga[i],
            ]
        })
        .collect();
    let v = GuidanceValue {
        total: w.angle * va + w.overlap * vo + w.region * vr,
        angle: va,
        overlap: vo,
        region: vr,
    };
    Ok((v, grad))
}

/// Weighted sum of the three losses with the summed gradient.
pub fn guidance_total(s: &ContinuousState, w: &GuidanceWeights, region: &Bounds) -> Result<(GuidanceValue, Gradient)> {
    combine(s, w, region_loss(s, region))
}

fn guidance_per_piece(s: &ContinuousState, w: &GuidanceWeights, bounds: &[Bounds]) -> Result<(GuidanceValue, Gradient)> {
    combine(s, w, region_loss_per_piece(s, bounds))
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DescentParams {
    pub steps: usize,
    pub step_size: f64,
    pub scale: f64,
}

impl Default for DescentParams {
    fn default() -> Self {
        DescentParams { steps: 100, step_size: 0.05, scale: 1.0 }
    }
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub f_total: f64,
    pub angle: f64,
    pub overlap: f64,
    pub region: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DescentOutcome {
    pub continuous: ContinuousState,
    /// Snapped pieces; pieces without any free cell are left out.
    pub state: RectState,
    pub trace: Vec<TraceRecord>,
    pub final_total: f64,
    /// Every piece snapped without collision.
    pub valid: bool,
    pub success: bool,
}

impl DescentOutcome {
    /// True when `f_total` never increases along the trace.
    pub fn monotone(&self) -> bool {
        self.trace.windows(2).all(|w| w[1].f_total <= w[0].f_total)
    }

    pub fn write_trace<W: Write>(&self, out: &mut W) -> Result<()> {
        for r in &self.trace {
            serde_json::to_writer(&mut *out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Pieces of the remaining inventory in kind order.
fn piece_kinds(s: &RectState) -> Vec<RectPieceKind> {
    RectPieceKind::ALL
        .iter()
        .flat_map(|&k| std::iter::repeat_n(k, s.remaining.0[k.index()] as usize))
        .collect()
}

/// Gradient descent on the guidance objective from a random start, then
/// snapping to the grid. Each piece's region term uses center bounds inset
/// by half its size, so a converged center keeps the whole piece inside.
pub fn descent_sampler<R: Rng>(
    inst: &Instance<RectState, RegionGoal>,
    w: &GuidanceWeights,
    params: &DescentParams,
    rng: &mut R,
) -> Result<DescentOutcome> {
    let kinds = piece_kinds(&inst.initial);
    let region = Bounds::of_region(&inst.goal);
    let mut bounds = Vec::with_capacity(kinds.len());
    let mut s = ContinuousState::default();
    for k in &kinds {
        let (pw, ph) = k.dims(0);
        let b = region.inset(pw as f64, ph as f64);
        let u = |lo: f64, hi: f64, rng: &mut R| if hi > lo { rng.random_range(lo..hi) } else { lo };
        s.pieces.push(ContinuousPiece {
            x: u(b.xmin, b.xmax, rng),
            y: u(b.ymin, b.ymax, rng),
            theta: 0.0,
            w: pw as f64,
            h: ph as f64,
        });
        bounds.push(b);
    }
    let mut trace = Vec::with_capacity(params.steps + 1);
    let record = |it: usize, v: &GuidanceValue| TraceRecord {
        iteration: it,
        f_total: v.total,
        angle: v.angle,
        overlap: v.overlap,
        region: v.region,
    };
    let (mut v, mut g) = guidance_per_piece(&s, w, &bounds)?;
    trace.push(record(0, &v));
    for it in 1..=params.steps {
        let lr = params.step_size * params.scale;
        for (p, gi) in s.pieces.iter_mut().zip(&g) {
            p.x -= lr * gi[0];
            p.y -= lr * gi[1];
            p.theta -= lr * gi[2];
        }
        (v, g) = guidance_per_piece(&s, w, &bounds)?;
        trace.push(record(it, &v));
    }
    let (state, valid) = snap(&inst.initial, &kinds, &s);
    let success = valid && success(&state, &inst.goal);
    Ok(DescentOutcome { continuous: s, state, trace, final_total: v.total, valid, success })
}

/// Rounds each angle to the nearest right angle and places pieces in order
/// at the collision-free grid position whose center is nearest.
fn snap(initial: &RectState, kinds: &[RectPieceKind], s: &ContinuousState) -> (RectState, bool) {
    let mut state = initial.clone();
    let mut valid = true;
    for (k, p) in kinds.iter().zip(&s.pieces) {
        let rot = ((p.theta / FRAC_PI_2).round() as i64).rem_euclid(2) as u8;
        let (pw, ph) = k.dims(rot);
        let mut best: Option<(f64, Placement)> = None;
        for y in -HALF..=HALF - ph {
            for x in -HALF..=HALF - pw {
                let cand = Placement { kind: *k, rot, x, y };
                if !state.is_legal(&cand) {
                    continue;
                }
                let cx = x as f64 + pw as f64 / 2.0 - p.x;
                let cy = y as f64 + ph as f64 / 2.0 - p.y;
                let d = cx * cx + cy * cy;
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, cand));
                }
            }
        }
        match best {
            Some((_, cand)) => state = state.place(cand).expect("checked legal"),
            None => valid = false,
        }
    }
    (state, valid)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::rect::Inventory;

    fn random_state(n: usize, rng: &mut ChaCha8Rng) -> ContinuousState {
        ContinuousState {
            pieces: (0..n)
                .map(|_| ContinuousPiece {
                    x: rng.random_range(-3.0..3.0),
                    y: rng.random_range(-3.0..3.0),
                    theta: rng.random_range(-3.0..3.0),
                    w: [1.0, 2.0][rng.random_range(0..2)],
                    h: [2.0, 3.0, 5.0][rng.random_range(0..3)],
                })
                .collect(),
        }
    }

    /// Max relative error of `grad` against central differences over
    /// `coords` random coordinates.
    fn check<F: Fn(&ContinuousState) -> f64>(s: &ContinuousState, grad: &Gradient, f: F, coords: usize, rng: &mut ChaCha8Rng) -> f64 {
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for _ in 0..coords {
            let (i, c) = (rng.random_range(0..s.pieces.len()), rng.random_range(0..3));
            let bump = |delta: f64| {
                let mut t = s.clone();
                let p = &mut t.pieces[i];
                match c {
                    0 => p.x += delta,
                    1 => p.y += delta,
                    _ => p.theta += delta,
                }
                f(&t)
            };
            let num = (bump(h) - bump(-h)) / (2.0 * h);
            let ana = grad[i][c];
            worst = worst.max((num - ana).abs() / num.abs().max(ana.abs()).max(1e-6));
        }
        worst
    }

    #[test]
    fn angle_examples() {
        let w = GuidanceWeights::rect();
        let (v, g) = angle_loss(&[FRAC_PI_2], &w.targets, 10.0).unwrap();
        assert!(v.abs() < 1e-3);
        assert!(g[0].abs() < 1e-9);
        let targets = [0.0, FRAC_PI_2];
        let direct = -(1.0 / 10.0)
            * ((-10.0 * 0.3f64 * 0.3).exp() + (-10.0 * (0.3 - FRAC_PI_2) * (0.3 - FRAC_PI_2)).exp()).ln();
        assert!((angle_loss(&[0.3], &targets, 10.0).unwrap().0 - direct).abs() < 1e-12);
        assert!(angle_loss(&[0.3], &targets, 0.0).is_err());
    }

    #[test]
    fn overlap_examples() {
        let p = |x: f64| ContinuousPiece { x, y: 0.0, theta: 0.0, w: 1.0, h: 2.0 };
        let far = ContinuousState { pieces: vec![p(0.0), p(100.0)] };
        assert!(overlap_loss(&far).0 < 1e-40);
        let same = ContinuousState { pieces: vec![p(1.0), p(1.0)] };
        let (v, g) = overlap_loss(&same);
        assert!((v - softplus(2.0 * p(0.0).radius())).abs() < 1e-15);
        assert!(g.iter().all(|gi| gi.iter().all(|x| *x == 0.0)));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_state(3, &mut rng);
        let mut direct = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    let (a, b) = (s.pieces[i], s.pieces[j]);
                    let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
                    let r = |q: ContinuousPiece| (q.w * q.w + q.h * q.h).sqrt() / 2.0;
                    direct += 0.5 * (1.0 + (r(a) + r(b) - d).exp()).ln();
                }
            }
        }
        assert!((overlap_loss(&s).0 - direct).abs() < 1e-12);
    }

    #[test]
    fn region_examples() {
        let b = Bounds { xmin: -2.0, xmax: 2.0, ymin: -2.0, ymax: 2.0 };
        let one = |x: f64| ContinuousState { pieces: vec![ContinuousPiece { x, y: 0.0, theta: 0.0, w: 1.0, h: 1.0 }] };
        let v = region_loss(&one(0.0), &b).0;
        assert!((v - 4.0 * (1.0 + (-2f64).exp()).ln()).abs() < 1e-9);
        let (a, c) = (region_loss(&one(50.0), &b).0, region_loss(&one(60.0), &b).0);
        assert!((c - a - 10.0).abs() < 1e-6);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = GuidanceWeights::rect();
        let b = Bounds { xmin: -2.0, xmax: 1.5, ymin: -1.0, ymax: 2.5 };
        for _ in 0..5 {
            let s = random_state(6, &mut rng);
            let thetas: Vec<f64> = s.pieces.iter().map(|p| p.theta).collect();
            let ga: Gradient = angle_loss(&thetas, &w.targets, w.beta).unwrap().1.iter().map(|g| [0.0, 0.0, *g]).collect();
            let f = |t: &ContinuousState| {
                angle_loss(&t.pieces.iter().map(|p| p.theta).collect::<Vec<_>>(), &w.targets, w.beta).unwrap().0
            };
            assert!(check(&s, &ga, f, 40, &mut rng) < 1e-5);
            assert!(check(&s, &overlap_loss(&s).1, |t| overlap_loss(t).0, 40, &mut rng) < 1e-5);
            assert!(check(&s, &region_loss(&s, &b).1, |t| region_loss(t, &b).0, 40, &mut rng) < 1e-5);
            let (_, gt) = guidance_total(&s, &w, &b).unwrap();
            assert!(check(&s, &gt, |t| guidance_total(t, &w, &b).unwrap().0.total, 40, &mut rng) < 1e-5);
        }
    }

    #[test]
    fn total_is_linear_and_bounded_below() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_state(4, &mut rng);
        let b = Bounds { xmin: -1.0, xmax: 1.0, ymin: -1.0, ymax: 1.0 };
        let w = GuidanceWeights::rect();
        let (v, _) = guidance_total(&s, &w, &b).unwrap();
        assert!((v.total - (v.angle + v.overlap + v.region)).abs() < 1e-12);
        let w2 = GuidanceWeights { angle: 2.0, overlap: 0.5, region: 3.0, ..w.clone() };
        let (v2, _) = guidance_total(&s, &w2, &b).unwrap();
        assert!((v2.total - (2.0 * v.angle + 0.5 * v.overlap + 3.0 * v.region)).abs() < 1e-12);
        let z = GuidanceWeights { angle: 0.0, overlap: 0.0, region: 0.0, ..w.clone() };
        assert_eq!(guidance_total(&s, &z, &b).unwrap().0.total, 0.0);
        let floor = 4.0 * (-(1.0 / w.beta) * (w.targets.len() as f64).ln());
        assert!(v.total >= floor);
    }

    fn instance(w: u32, h: u32, inv: [u32; 3]) -> Instance<RectState, RegionGoal> {
        Instance { goal: RegionGoal::new(w, h).unwrap(), initial: RectState::new(Inventory(inv)) }
    }

    #[test]
    fn zero_scale_leaves_state_unchanged() {
        let inst = instance(8, 8, [2, 1, 0]);
        let p = DescentParams { scale: 0.0, ..DescentParams::default() };
        let out = descent_sampler(&inst, &GuidanceWeights::rect(), &p, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let again = descent_sampler(
            &inst,
            &GuidanceWeights::rect(),
            &DescentParams { steps: 0, ..p },
            &mut ChaCha8Rng::seed_from_u64(4),
        )
        .unwrap();
        assert_eq!(out.continuous, again.continuous);
    }

    #[test]
    fn roomy_instance_succeeds_and_trace_is_monotone() {
        let inst = instance(12, 12, [2, 0, 0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let runs: Vec<_> = (0..20)
            .map(|_| descent_sampler(&inst, &GuidanceWeights::rect(), &DescentParams::default(), &mut rng).unwrap())
            .collect();
        assert!(runs.iter().filter(|o| o.success).count() >= 18);
        assert!(runs.iter().all(|o| o.monotone()));
        let mut buf = Vec::new();
        runs[0].write_trace(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 101);
    }
}
