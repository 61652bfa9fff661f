use super::*;
use crate::rect::{DatasetSizes, RectDataset, RectEnv};

fn tiny_cfg() -> TrainingConfig {
    TrainingConfig {
        iterations: 2,
        episodes_per_iteration: 6,
        policy_hidden: 16,
        policy_lr: 1e-3,
        reward_lr: 1e-3,
        pretrain_max_steps: 40,
        pretrain_eval_every: 10,
        pretrain_batch: 16,
        batch_size: 16,
        reward_batch: 8,
        bc_steps: 5,
        plateau_window: 0,
        search: SearchParams { n: 8, k: 4, ..SearchParams::default() },
        seed: 7,
        ..TrainingConfig::default()
    }
}

fn tiny_data() -> TrainData<crate::rect::RectState, crate::rect::RegionGoal> {
    let ds = RectDataset::generate(DatasetSizes { train: 24, val: 30, test: 0 }, 3).unwrap();
    rect_train_data(&RectEnv, &ds).unwrap()
}

fn state_json(t: &Trainer<RectEnv>) -> String {
    serde_json::to_string(&t.state).unwrap()
}

#[test]
fn config_rejects_unknown_keys_and_fills_defaults() {
    let c: TrainingConfig = serde_json::from_str(r#"{"iterations": 3}"#).unwrap();
    assert_eq!(c.iterations, 3);
    assert_eq!(c.negative_capacity, 10_000);
    assert!(serde_json::from_str::<TrainingConfig>(r#"{"iters": 3}"#).is_err());
    assert!(TrainingConfig { batch_size: 0, ..TrainingConfig::default() }.validate().is_err());
}

#[test]
fn demos_replay_the_witness() {
    let data = tiny_data();
    for (d, p) in data.demos.iter().zip(&data.positives) {
        let mut s = d.steps[0].0.clone();
        for (_, a) in &d.steps {
            s = RectEnv.step(&s, *a).unwrap().state;
        }
        assert_eq!(s, p.state);
    }
}

#[test]
fn iteration_collects_negatives_and_reports() {
    let data = tiny_data();
    let mut t = Trainer::new(&RectEnv, tiny_cfg(), &data).unwrap();
    t.prepare().unwrap();
    let reports = t.train().unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0].episodes_total, 6);
    assert_eq!(reports[1].episodes_total, 12);
    assert!(t.state.negatives.len() <= 12);
    assert!(reports.iter().all(|r| r.policy.is_some() && r.reward.is_some()));
    for e in &t.state.negatives {
        assert!(RectEnv.is_complete(&e.state));
    }
}

#[test]
fn negative_buffer_is_bounded_fifo() {
    let data = tiny_data();
    let cfg = TrainingConfig { negative_capacity: 4, iterations: 1, ..tiny_cfg() };
    let mut t = Trainer::new(&RectEnv, cfg, &data).unwrap();
    t.train().unwrap();
    assert!(t.state.negatives.len() <= 4);
}

#[test]
fn fixed_seed_runs_are_identical() {
    let data = tiny_data();
    let run = || {
        let mut t = Trainer::new(&RectEnv, tiny_cfg(), &data).unwrap();
        t.prepare().unwrap();
        t.train().unwrap();
        state_json(&t)
    };
    assert_eq!(run(), run());
}

#[test]
fn checkpoint_resume_matches_uninterrupted_run() {
    let data = tiny_data();
    let full = {
        let mut t = Trainer::new(&RectEnv, tiny_cfg(), &data).unwrap();
        t.prepare().unwrap();
        t.train().unwrap();
        state_json(&t)
    };
    let dir = tempfile::tempdir().unwrap();
    {
        let mut t = Trainer::new(&RectEnv, tiny_cfg(), &data).unwrap().with_run_dir(dir.path()).unwrap();
        t.prepare().unwrap();
        t.iterate().unwrap();
    }
    let mut t = Trainer::resume(&RectEnv, &data, dir.path()).unwrap();
    assert_eq!(t.state.iteration, 1);
    t.train().unwrap();
    assert_eq!(state_json(&t), full);
    for f in ["config.json", "reports.jsonl", "checkpoints/000.json", "checkpoints/001.json", "trajectories/001.jsonl"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let lines = std::fs::read_to_string(dir.path().join("reports.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 2);
}

#[test]
fn corrupted_checkpoint_is_rejected() {
    let data = tiny_data();
    let dir = tempfile::tempdir().unwrap();
    let mut t = Trainer::new(&RectEnv, TrainingConfig { iterations: 1, ..tiny_cfg() }, &data)
        .unwrap()
        .with_run_dir(dir.path())
        .unwrap();
    t.train().unwrap();
    let path = dir.path().join("checkpoints/000.json");
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replacen("\"iteration\":1", "\"iteration\":2", 1)).unwrap();
    assert!(matches!(
        load_checkpoint::<crate::rect::RectState, crate::rect::RegionGoal>(&path),
        Err(Error::Checksum(_))
    ));
}

#[test]
fn pretraining_beats_chance_retrieval() {
    let ds = RectDataset::generate(DatasetSizes { train: 200, val: 60, test: 0 }, 11).unwrap();
    let data = rect_train_data(&RectEnv, &ds).unwrap();
    let cfg = TrainingConfig { pretrain_max_steps: 400, pretrain_eval_every: 20, ..TrainingConfig::default() };
    let mut rng = rng_for(&[0]);
    let mut model = RewardModel::for_env(&RectEnv, &mut rng);
    let report = pretrain_reward(&RectEnv, &mut model, &data.positives, &data.heldout, &cfg).unwrap();
    // 20 candidates, so chance is 0.05.
    assert!(report.best_accuracy >= 0.5, "{report:?}");
}

#[test]
fn ppo_operator_runs() {
    let data = tiny_data();
    let cfg = TrainingConfig { operator: Operator::Ppo, iterations: 1, ..tiny_cfg() };
    let mut t = Trainer::new(&RectEnv, cfg, &data).unwrap();
    let r = t.train().unwrap();
    assert!(r[0].ppo.is_some() && r[0].policy.is_none());
}

#[test]
fn evaluation_summary_on_demonstrated_policy() {
    let data = tiny_data();
    let t = Trainer::new(&RectEnv, tiny_cfg(), &data).unwrap();
    let s = evaluate(&RectEnv, &t.state.policy, &Terminal::Oracle, Planner::Policy(Sampling::Greedy), &data.instances, 0).unwrap();
    assert_eq!(s.episodes, data.instances.len());
    assert!((0.0..=1.0).contains(&s.success_rate));
}

#[test]
fn tangram_training_runs_from_generated_positives() {
    use crate::tangram::{precompute_action_table, MaskMode, TangramEnv};
    let env = TangramEnv::new(std::sync::Arc::new(precompute_action_table().unwrap()), MaskMode::Full);
    let data = tangram_train_data(&env, 6, 3, 1).unwrap();
    assert_eq!((data.positives.len(), data.heldout.len(), data.instances.len()), (6, 3, 6));
    assert!(data.demos.is_empty());
    assert!(data.positives.iter().all(|e| env.is_valid(&e.state) && env.is_success(&e.state, &e.goal)));
    let cfg = TrainingConfig { iterations: 1, episodes_per_iteration: 3, pretrain_max_steps: 5, ..tiny_cfg() };
    let mut t = Trainer::new(&env, cfg, &data).unwrap();
    t.prepare().unwrap();
    let r = t.iterate().unwrap();
    assert_eq!(r.episodes_total, 3);
}
