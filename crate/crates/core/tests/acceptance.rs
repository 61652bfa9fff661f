//! Acceptance suite: every criterion runs in turn and prints one PASS/FAIL
//! line. The rect training pipeline is built once and shared.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use compose_core::env::{Environment, Example, Instance, Transition};
use compose_core::geometry::{polygons_overlap, ConvexPolygon, RigidTransform, Scalar, Vec2};
use compose_core::guidance::*;
use compose_core::metrics::*;
use compose_core::models::*;
use compose_core::rect::*;
use compose_core::search::*;
use compose_core::tangram::{pieces, precompute_action_table, NUM_PIECES};
use compose_core::train::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

type Verdict = (bool, String);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- geometry

fn float_vertices(p: &ConvexPolygon) -> Vec<(f64, f64)> {
    p.vertices().iter().map(Vec2::to_f64).collect()
}

/// Strict interior test for a counter-clockwise polygon.
fn strictly_inside(v: &[(f64, f64)], x: f64, y: f64) -> bool {
    (0..v.len()).all(|i| {
        let (a, b) = (v[i], v[(i + 1) % v.len()]);
        (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0) > 1e-9
    })
}

/// Brute-force overlap: sample a fine grid over the common bounding box and
/// look for a point strictly inside both polygons.
fn raster_overlap(a: &[(f64, f64)], b: &[(f64, f64)], step: f64) -> bool {
    let bb = |v: &[(f64, f64)]| {
        v.iter().fold((f64::MAX, f64::MIN, f64::MAX, f64::MIN), |m, p| {
            (m.0.min(p.0), m.1.max(p.0), m.2.min(p.1), m.3.max(p.1))
        })
    };
    let (a, b) = (a.to_vec(), b.to_vec());
    let (ax0, ax1, ay0, ay1) = bb(&a);
    let (bx0, bx1, by0, by1) = bb(&b);
    let (x0, x1, y0, y1) = (ax0.max(bx0), ax1.min(bx1), ay0.max(by0), ay1.min(by1));
    if x0 >= x1 || y0 >= y1 {
        return false;
    }
    // Irrational offset keeps samples off lattice-aligned edges.
    let off = step * (std::f64::consts::SQRT_2 - 1.0) * 0.5;
    let mut y = y0 + off;
    while y < y1 {
        let mut x = x0 + off;
        while x < x1 {
            if strictly_inside(&a, x, y) && strictly_inside(&b, x, y) {
                return true;
            }
            x += step;
        }
        y += step;
    }
    false
}

fn random_pose(r: &mut ChaCha8Rng) -> RigidTransform {
    let c = |r: &mut ChaCha8Rng| Scalar::new(r.random_range(-6..=6), r.random_range(-3..=3), 1);
    RigidTransform::new(r.random_range(0..8), r.random_bool(0.5), Vec2::new(c(r), c(r))).unwrap()
}

fn c1_geometry_oracle() -> Verdict {
    let start = Instant::now();
    let mut r = rng(1);
    let p = pieces();
    let (mut disagree, mut overlaps) = (0, 0);
    for _ in 0..1000 {
        let (i, j) = (r.random_range(0..NUM_PIECES), r.random_range(0..NUM_PIECES));
        let a = p[i].canonical.transformed(&random_pose(&mut r)).unwrap();
        let b = p[j].canonical.transformed(&random_pose(&mut r)).unwrap();
        let exact = polygons_overlap(&a, &b).unwrap();
        let oracle = raster_overlap(&float_vertices(&a), &float_vertices(&b), 1.0 / 128.0);
        overlaps += exact as usize;
        disagree += (exact != oracle) as usize;
    }
    let secs = start.elapsed().as_secs_f64();
    (
        disagree == 0 && secs < 60.0,
        format!("1000 pairs ({overlaps} overlapping), {disagree} disagreements, {secs:.1}s"),
    )
}

fn c2_action_table() -> Verdict {
    let t1 = precompute_action_table().unwrap();
    let t2 = precompute_action_table().unwrap();
    let identical = t1.to_json().unwrap() == t2.to_json().unwrap();
    let p = pieces();
    let origin = RigidTransform::new(0, false, Vec2::int(0, 0)).unwrap();
    let overlapping = t1
        .actions
        .iter()
        .filter(|a| {
            let moved = p[a.moved as usize].canonical.transformed(&a.placement(&origin).unwrap()).unwrap();
            polygons_overlap(&moved, &p[a.reference as usize].canonical).unwrap()
        })
        .count();
    let n = t1.len();
    (
        (1500..=6000).contains(&n) && overlapping == 0 && identical,
        format!("{n} actions, {overlapping} overlapping entries, reruns identical: {identical}"),
    )
}

// ----------------------------------------------------------------- dataset

fn c3_dataset() -> Verdict {
    let start = Instant::now();
    let ds = RectDataset::generate(DatasetSizes { train: 200, val: 20, test: 50 }, 3).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let all: Vec<&RectConfig> = ds.train.iter().chain(&ds.val).chain(&ds.test).collect();
    let verified = all.iter().filter(|c| verify_config(c)).count();
    let unique = all.iter().map(|c| &c.signature).collect::<HashSet<_>>().len();
    let labels = all
        .iter()
        .filter(|c| c.difficulty == difficulty_ratio(c.inventory().area(), &c.region))
        .count();
    let n = all.len();
    (
        n == 270 && verified == n && unique == n && labels == n && secs < 300.0,
        format!("{n} configs: {verified} verified, {unique} unique signatures, {labels} labels match, {secs:.1}s"),
    )
}

// ------------------------------------------------------------------ search

#[derive(Clone)]
struct Bandit {
    rewards: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Pulled(Option<usize>);

impl Environment for Bandit {
    type State = Pulled;
    type Goal = ();
    fn name(&self) -> &'static str {
        "bandit"
    }
    fn num_actions(&self) -> usize {
        self.rewards.len()
    }
    fn legal_actions(&self, s: &Pulled) -> Vec<usize> {
        if s.0.is_none() {
            (0..self.rewards.len()).collect()
        } else {
            Vec::new()
        }
    }
    fn step(&self, _: &Pulled, a: usize) -> compose_core::Result<Transition<Pulled>> {
        Ok(Transition { state: Pulled(Some(a)), reward: 0.0, done: true })
    }
    fn is_complete(&self, s: &Pulled) -> bool {
        s.0.is_some()
    }
    fn is_valid(&self, _: &Pulled) -> bool {
        true
    }
    fn is_success(&self, _: &Pulled, _: &()) -> bool {
        true
    }
    fn oracle_score(&self, s: &Pulled, _: &()) -> f64 {
        s.0.map_or(0.0, |a| self.rewards[a])
    }
    fn state_dim(&self) -> usize {
        0
    }
    fn goal_dim(&self) -> usize {
        0
    }
    fn state_features(&self, _: &Pulled) -> Vec<f64> {
        Vec::new()
    }
    fn goal_features(&self, _: &()) -> Vec<f64> {
        Vec::new()
    }
}

struct FixedLogits(Vec<f64>);

impl Evaluator<Bandit> for FixedLogits {
    fn evaluate(&self, _: &Bandit, _: &Pulled, _: &(), legal: &[usize]) -> compose_core::Result<(Vec<f64>, f64)> {
        Ok((legal.iter().map(|&a| self.0[a]).collect(), 0.0))
    }
}

fn c4_gumbel() -> Verdict {
    let mut r = rng(4);
    let params = SearchParams { g_scale: 0.0, ..SearchParams::default() };
    let mut mismatches = 0;
    for _ in 0..1000 {
        let k = r.random_range(2..=32);
        let env = Bandit { rewards: (0..k).map(|_| r.random_range(0.0..1.0)).collect() };
        let logits: Vec<f64> = (0..k).map(|_| r.random_range(-2.0..2.0)).collect();
        let eval = FixedLogits(logits.clone());
        let mut search = Search::new(&env, &eval, &OracleScore, params, &()).unwrap();
        let res = search.run(&Pulled(None), &mut r).unwrap();
        let max_n = *res.visit_counts.iter().max().unwrap();
        // With g = 0 the considered set is the top-k logits.
        let considered = argtop(&logits, (params.k as usize).min(k));
        let best = considered
            .iter()
            .copied()
            .max_by(|&a, &b| {
                let s = |i: usize| logits[i] + sigma_transform(env.rewards[i], max_n, &params);
                s(a).total_cmp(&s(b)).then(b.cmp(&a))
            })
            .unwrap();
        mismatches += (res.chosen_action != best) as usize;
    }
    let logits = [2f64.ln(), 0.0, 0.0];
    let target = softmax(&logits);
    let mut counts = [0usize; 3];
    let draws = 100_000;
    for _ in 0..draws {
        counts[gumbel_topk(&logits, 1, 1.0, &mut r).unwrap().0[0]] += 1;
    }
    let tv: f64 = 0.5 * (0..3).map(|i| (counts[i] as f64 / draws as f64 - target[i]).abs()).sum::<f64>();
    (
        mismatches == 0 && tv <= 0.02,
        format!("(a) {mismatches}/1000 halving mismatches; (b) TV {tv:.4} over 1e5 draws"),
    )
}

// ---------------------------------------------------------- rect pipeline

const SEED: u64 = 2024;

#[derive(Clone)]
struct Snapshot {
    policy: PolicyValueNet,
    reward: RewardModel,
}

struct Pipeline {
    data: TrainData<RectState, RegionGoal>,
    test_positives: Vec<Example<RectState, RegionGoal>>,
    easy: Vec<Instance<RectState, RegionGoal>>,
    hard: Vec<Instance<RectState, RegionGoal>>,
    hard500: Vec<Instance<RectState, RegionGoal>>,
    prepared: TrainState<RectState, RegionGoal>,
    mid: Snapshot,
    gag: Snapshot,
    train_time: Duration,
    ppo: Snapshot,
    ppo_adv: Snapshot,
    eval_search: SearchParams,
}

fn gag_config() -> TrainingConfig {
    TrainingConfig { iterations: 6, plateau_window: 0, seed: SEED, ..TrainingConfig::default() }
}

fn ppo_config(adversarial: bool) -> TrainingConfig {
    TrainingConfig {
        operator: Operator::Ppo,
        adversarial,
        iterations: 15,
        episodes_per_iteration: 256,
        policy_lr: 3e-4,
        ..gag_config()
    }
}

fn instances(cs: &[RectConfig]) -> Vec<Instance<RectState, RegionGoal>> {
    cs.iter().map(RectConfig::instance).collect()
}

fn pipeline() -> &'static Pipeline {
    static P: OnceLock<Pipeline> = OnceLock::new();
    P.get_or_init(|| {
        let start = Instant::now();
        let ds = RectDataset::generate(DatasetSizes { train: 2000, val: 200, test: 200 }, SEED).unwrap();
        let data = rect_train_data(&RectEnv, &ds).unwrap();
        let test_positives = ds.test.iter().map(|c| c.example().unwrap()).collect();
        let mut seen = ds.signatures();
        let (easy, hard) = generate_eval_set(200, 200, SEED + 1, &seen).unwrap();
        seen.extend(easy.iter().chain(&hard).map(|c| c.signature.clone()));
        let (_, hard500) = generate_eval_set(0, 500, SEED + 2, &seen).unwrap();

        let mut t = Trainer::new(&RectEnv, gag_config(), &data).unwrap();
        t.prepare().unwrap();
        let prepared = t.state.clone();
        for _ in 0..3 {
            t.iterate().unwrap();
        }
        let mid = Snapshot { policy: t.state.policy.clone(), reward: t.state.reward.clone() };
        t.train().unwrap();
        let train_time = start.elapsed();
        let gag = Snapshot { policy: t.state.policy.clone(), reward: t.state.reward.clone() };

        let run_ppo = |adv: bool| {
            let cfg = ppo_config(adv);
            let mut t = Trainer::new(&RectEnv, cfg.clone(), &data).unwrap();
            t.state = prepared.clone();
            t.state.policy_opt = Adam::new(&t.state.policy.params, cfg.policy_lr);
            t.train().unwrap();
            Snapshot { policy: t.state.policy.clone(), reward: t.state.reward.clone() }
        };
        let ppo = run_ppo(false);
        let ppo_adv = run_ppo(true);
        eprintln!("pipeline trained in {:.0}s", start.elapsed().as_secs_f64());
        Pipeline {
            data,
            test_positives,
            easy: instances(&easy),
            hard: instances(&hard),
            hard500: instances(&hard500),
            prepared,
            mid,
            gag,
            train_time,
            ppo,
            ppo_adv,
            eval_search: SearchParams { g_scale: 0.0, ..SearchParams::default() },
        }
    })
}

struct SearchRuns {
    hard: Vec<PlanTrajectory<RectState, RegionGoal>>,
    easy: Vec<PlanTrajectory<RectState, RegionGoal>>,
    mid_search: Vec<PlanTrajectory<RectState, RegionGoal>>,
    mid_policy: Vec<PlanTrajectory<RectState, RegionGoal>>,
}

fn search_runs() -> &'static SearchRuns {
    static R: OnceLock<SearchRuns> = OnceLock::new();
    R.get_or_init(|| {
        let p = pipeline();
        let gag = Terminal::Learned(&p.gag.reward);
        let mid = Terminal::Learned(&p.mid.reward);
        let planner = Planner::Search(p.eval_search);
        SearchRuns {
            hard: rollout_all(&RectEnv, &p.gag.policy, &gag, planner, &p.hard, 10).unwrap(),
            easy: rollout_all(&RectEnv, &p.gag.policy, &gag, planner, &p.easy, 11).unwrap(),
            mid_search: rollout_all(&RectEnv, &p.mid.policy, &mid, planner, &p.hard500, 12).unwrap(),
            mid_policy: rollout_all(
                &RectEnv,
                &p.mid.policy,
                &mid,
                Planner::Policy(Sampling::Temperature(1.0)),
                &p.hard500,
                12,
            )
            .unwrap(),
        }
    })
}

fn c5_policy_improvement() -> Verdict {
    let r = search_runs();
    let d: Vec<f64> =
        r.mid_search.iter().zip(&r.mid_policy).map(|(s, p)| s.terminal_reward - p.terminal_reward).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let lower = mean - 1.645 * sd / n.sqrt();
    let ms = summarize(&RectEnv, &r.mid_search).unwrap();
    let mp = summarize(&RectEnv, &r.mid_policy).unwrap();
    (
        lower >= 0.0,
        format!(
            "{} paired Hard episodes: mean terminal reward search {:.3} vs policy {:.3}, one-sided 95% lower bound on the gain {lower:.4} (success {:.3} vs {:.3})",
            d.len(),
            ms.mean_terminal_reward,
            mp.mean_terminal_reward,
            ms.success_rate,
            mp.success_rate
        ),
    )
}

fn c6_directional_success() -> Verdict {
    let p = pipeline();
    let r = search_runs();
    let hard = summarize(&RectEnv, &r.hard).unwrap();
    let easy = summarize(&RectEnv, &r.easy).unwrap();
    let sample = Planner::Policy(Sampling::Temperature(1.0));
    let mut bc = p.prepared.policy.clone();
    bc.params.clone_from(&p.prepared.policy.params);
    let baseline = evaluate(&RectEnv, &bc, &Terminal::Oracle, sample, &p.hard, 13).unwrap();
    let gag_sample = evaluate(&RectEnv, &p.gag.policy, &Terminal::Oracle, sample, &p.hard, 13).unwrap();
    let all: Vec<_> = r.hard.iter().chain(&r.easy).cloned().collect();
    let valid = summarize(&RectEnv, &all).unwrap().validity_rate;
    let gap = hard.success_rate - baseline.success_rate;
    let hours = p.train_time.as_secs_f64() / 3600.0;
    (
        gap >= 0.15 && valid >= 0.95 && easy.success_rate >= 0.8 && hours <= 2.0,
        format!(
            "(a) Hard search {:.3} vs masked policy sampling {:.3} (gap {:.1} pts; GAG policy sampled {:.3}); (b) validity {valid:.3}; (c) Easy {:.3}; trained in {:.1} min",
            hard.success_rate,
            baseline.success_rate,
            100.0 * gap,
            gag_sample.success_rate,
            easy.success_rate,
            60.0 * hours
        ),
    )
}

fn c7_ppo_ordering() -> Verdict {
    let p = pipeline();
    let gag = summarize(&RectEnv, &search_runs().hard).unwrap().success_rate;
    let eval = |net: &PolicyValueNet, s: Sampling| {
        evaluate(&RectEnv, net, &Terminal::Oracle, Planner::Policy(s), &p.hard, 14).unwrap().success_rate
    };
    let (ppo, adv) = (eval(&p.ppo.policy, Sampling::Greedy), eval(&p.ppo_adv.policy, Sampling::Greedy));
    let (ppo_t, adv_t) =
        (eval(&p.ppo.policy, Sampling::Temperature(1.0)), eval(&p.ppo_adv.policy, Sampling::Temperature(1.0)));
    (
        ppo <= adv && adv <= gag,
        format!(
            "Hard success (greedy decoding): PPO {ppo:.3} <= PPO+Adv {adv:.3} <= GAG search {gag:.3}; sampled at T=1: PPO {ppo_t:.3}, PPO+Adv {adv_t:.3}"
        ),
    )
}

fn c11_adversarial_auc() -> Verdict {
    let p = pipeline();
    let r = search_runs();
    let negatives: Vec<Example<RectState, RegionGoal>> = r
        .hard
        .iter()
        .chain(&r.mid_search)
        .filter(|t| RectEnv.is_complete(&t.final_state) && !RectEnv.is_success(&t.final_state, &t.goal))
        .map(|t| Example { goal: t.goal, state: t.final_state.clone() })
        .collect();
    let auc_of = |m: &RewardModel| reward_auc(&RectEnv, m, &p.test_positives, &negatives).unwrap().unwrap();
    let ga = auc_of(&p.gag.reward);
    let no_ga = auc_of(&p.prepared.reward);
    let _ = &p.data;
    (
        ga >= 0.8 && no_ga < ga,
        format!(
            "AUC on {} held-out positives vs {} fresh failed search outputs: refined {ga:.3}, no-GA {no_ga:.3}",
            p.test_positives.len(),
            negatives.len()
        ),
    )
}

// --------------------------------------------------------------- gradients

fn max_rel_error<F: Fn(&Params) -> f64>(params: &Params, grads: &Params, seed: u64, loss: F) -> f64 {
    let mut r = rng(seed);
    let mut p = params.clone();
    let n = num_params(params);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let i = r.random_range(0..n);
        let x = flat_get(&p, i);
        flat_set(&mut p, i, x + h);
        let up = loss(&p);
        flat_set(&mut p, i, x - h);
        let down = loss(&p);
        flat_set(&mut p, i, x);
        let num = (up - down) / (2.0 * h);
        let ana = flat_get(grads, i);
        worst = worst.max((num - ana).abs() / num.abs().max(ana.abs()).max(1e-6));
    }
    worst
}

fn random_vec(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

fn guidance_rel_error<F: Fn(&ContinuousState) -> f64>(s: &ContinuousState, g: &Gradient, seed: u64, f: F) -> f64 {
    let mut r = rng(seed);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (i, c) = (r.random_range(0..s.pieces.len()), r.random_range(0..3));
        let bump = |d: f64| {
            let mut t = s.clone();
            let q = &mut t.pieces[i];
            *[&mut q.x, &mut q.y, &mut q.theta][c] += d;
            f(&t)
        };
        let num = (bump(h) - bump(-h)) / (2.0 * h);
        worst = worst.max((num - g[i][c]).abs() / num.abs().max(g[i][c].abs()).max(1e-6));
    }
    worst
}

fn c8_gradients() -> Verdict {
    let mut r = rng(8);
    let mut errs = Vec::new();

    let net = PolicyValueNet::new(10, 16, 7, &mut r);
    let batch: Vec<PolicySample> = (0..6)
        .map(|_| {
            let legal = vec![0, 2, 3, 5, 6];
            let t = random_vec(&mut r, 5).iter().map(|x| x.abs()).collect::<Vec<_>>();
            let sum: f64 = t.iter().sum();
            PolicySample {
                features: random_vec(&mut r, 10),
                legal,
                target: t.iter().map(|x| x / sum).collect(),
                ret: r.random_range(-1.0..1.0),
                value_weight: 1.0,
            }
        })
        .collect();
    let (_, g) = net.imitation_loss(&batch).unwrap();
    errs.push((
        "policy CE+MSE",
        max_rel_error(&net.params, &g, 1, |p| {
            PolicyValueNet { params: p.clone(), ..net.clone() }.imitation_loss(&batch).unwrap().0.total
        }),
    ));

    let m = RewardModel::new(9, 5, 12, 6, &mut r);
    let pairs = |r: &mut ChaCha8Rng, n: usize| -> Vec<RewardPair> {
        (0..n).map(|_| RewardPair { state: random_vec(r, 9), goal: random_vec(r, 5) }).collect()
    };
    let (pos, neg, batch) = (pairs(&mut r, 4), pairs(&mut r, 5), pairs(&mut r, 6));
    let (_, g) = m.loss_pref(&pos, &neg).unwrap();
    errs.push((
        "L_pref",
        max_rel_error(&m.params, &g, 2, |p| RewardModel { params: p.clone(), ..m.clone() }.loss_pref(&pos, &neg).unwrap().0),
    ));
    let (_, g) = m.loss_cont(&batch, 0.07).unwrap();
    errs.push((
        "L_cont",
        max_rel_error(&m.params, &g, 3, |p| RewardModel { params: p.clone(), ..m.clone() }.loss_cont(&batch, 0.07).unwrap().0),
    ));

    let ppo_batch: Vec<PpoSample> = (0..6)
        .map(|_| {
            let features = random_vec(&mut r, 10);
            let legal = vec![1, 2, 4, 6];
            let f = net.forward(&features, &legal).unwrap();
            let taken = r.random_range(0..4);
            PpoSample {
                old_logp: log_softmax(&f.logits)[taken] + r.random_range(-0.1..0.1),
                features,
                legal,
                taken,
                advantage: r.random_range(-1.0..1.0),
                ret: r.random_range(-1.0..1.0),
            }
        })
        .collect();
    let cfg = PpoConfig::default();
    let (_, g) = ppo_loss(&net, &ppo_batch, &cfg).unwrap();
    errs.push((
        "PPO",
        max_rel_error(&net.params, &g, 4, |p| {
            ppo_loss(&PolicyValueNet { params: p.clone(), ..net.clone() }, &ppo_batch, &cfg).unwrap().0.total
        }),
    ));

    let s = ContinuousState {
        pieces: (0..6)
            .map(|_| ContinuousPiece {
                x: r.random_range(-3.0..3.0),
                y: r.random_range(-3.0..3.0),
                theta: r.random_range(-3.0..3.0),
                w: 1.0 + r.random_range(0..2) as f64,
                h: 2.0 + r.random_range(0..3) as f64,
            })
            .collect(),
    };
    let w = GuidanceWeights::rect();
    let b = Bounds { xmin: -2.0, xmax: 1.5, ymin: -1.0, ymax: 2.5 };
    let thetas = |t: &ContinuousState| t.pieces.iter().map(|p| p.theta).collect::<Vec<_>>();
    let ga: Gradient = angle_loss(&thetas(&s), &w.targets, w.beta).unwrap().1.into_iter().map(|g| [0.0, 0.0, g]).collect();
    errs.push(("angle", guidance_rel_error(&s, &ga, 5, |t| angle_loss(&thetas(t), &w.targets, w.beta).unwrap().0)));
    errs.push(("overlap", guidance_rel_error(&s, &overlap_loss(&s).1, 6, |t| overlap_loss(t).0)));
    errs.push(("region", guidance_rel_error(&s, &region_loss(&s, &b).1, 7, |t| region_loss(t, &b).0)));

    let ok = errs.iter().all(|(_, e)| *e < 1e-4);
    let detail = errs.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    (ok, format!("max relative error over 100 coordinates: {detail}"))
}

fn c9_spot_values() -> Verdict {
    let mut r = rng(9);
    let zero = RewardModel::zeros(9, 5, 12, 6);
    let pair = || RewardPair { state: vec![0.3; 9], goal: vec![-0.2; 5] };
    let pref = zero.loss_pref(&[pair(), pair()], &[pair()]).unwrap().0;
    let m = RewardModel::new(9, 5, 12, 6, &mut r);
    let n = 8;
    let cont = m.loss_cont(&vec![pair(); n], 0.07).unwrap().0;
    let one = ContinuousState { pieces: vec![ContinuousPiece { x: 0.0, y: 0.0, theta: 0.0, w: 1.0, h: 2.0 }] };
    let region = region_loss(&one, &Bounds { xmin: -2.0, xmax: 2.0, ymin: -2.0, ymax: 2.0 }).0;
    let (e1, e2, e3) = (
        (pref - 2.0 * 2f64.ln()).abs(),
        (cont - 2.0 * (n as f64).ln()).abs(),
        (region - 4.0 * (1.0 + (-2f64).exp()).ln()).abs(),
    );
    (
        e1 <= 1e-9 && e2 <= 1e-9 && e3 <= 1e-9,
        format!("L_pref {pref:.12} (err {e1:.1e}), L_cont {cont:.12} (err {e2:.1e}), region {region:.12} (err {e3:.1e})"),
    )
}

fn c10_metrics() -> Verdict {
    let mut r = rng(10);
    let fs = |rows: Vec<Vec<f64>>| FeatureSet::new("raw", rows).unwrap();
    let a = fs((0..40).map(|_| random_vec(&mut r, 5)).collect());
    let self_d = frechet_distance(&a, &a).unwrap();
    let constant = frechet_distance(&fs(vec![vec![0.0]; 6]), &fs(vec![vec![1.0]; 6])).unwrap();
    let same = precision_recall(&a, &a, 3).unwrap();
    let far = fs(a.rows.iter().map(|x| x.iter().map(|v| v + 1e3).collect()).collect());
    let disjoint = precision_recall(&a, &far, 3).unwrap();
    let worked = precision_recall(&fs(vec![vec![0.0, 0.0], vec![1.0, 0.0]]), &fs(vec![vec![0.0, 0.0]]), 1).unwrap();
    (
        self_d <= 1e-8 && constant == 1.0 && same == (1.0, 1.0) && disjoint == (0.0, 0.0) && worked == (1.0, 1.0),
        format!("d2(A,A) {self_d:.1e}, constant d2 {constant}, P/R same {same:?}, disjoint {disjoint:?}, worked {worked:?}"),
    )
}

fn c12_guidance() -> Verdict {
    let (easy, hard) = generate_eval_set(200, 200, SEED + 1, &HashSet::new()).unwrap();
    let rate = |cs: &[RectConfig], seed: u64| {
        let mut r = rng(seed);
        let w = GuidanceWeights::rect();
        let ok = cs
            .iter()
            .filter(|c| descent_sampler(&c.instance(), &w, &DescentParams::default(), &mut r).unwrap().success)
            .count();
        ok as f64 / cs.len() as f64
    };
    let (e, h) = (rate(&easy, 12), rate(&hard, 12));
    (
        e >= 0.5 && e - h >= 0.3,
        format!("descent sampler (100 steps, step 0.05, scale 1): Easy {e:.3}, Hard {h:.3}, gap {:.1} pts", 100.0 * (e - h)),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict); 12] = [
        (1, "geometry oracle equivalence", c1_geometry_oracle),
        (2, "tangram action table", c2_action_table),
        (3, "dataset generator", c3_dataset),
        (4, "Gumbel correctness", c4_gumbel),
        (5, "policy improvement", c5_policy_improvement),
        (6, "directional success table", c6_directional_success),
        (7, "PPO ordering", c7_ppo_ordering),
        (8, "analytic gradients", c8_gradients),
        (9, "loss spot values", c9_spot_values),
        (10, "metrics", c10_metrics),
        (11, "adversarial refinement AUC", c11_adversarial_auc),
        (12, "guidance calibration", c12_guidance),
    ];
    let only: Option<HashSet<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let (mut ran, mut failed) = (0, 0);
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        ran += 1;
        failed += !ok as usize;
        println!(
            "criterion {id:>2} {}: {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    // Failures are reported above; only strict mode turns them into a
    // failing exit status.
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
