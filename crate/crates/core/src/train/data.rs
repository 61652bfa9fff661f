use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{Environment, Example, Instance};
use crate::error::{Error, Result};
use crate::rect::{RectConfig, RectDataset, RectEnv, RectState, RegionGoal};
use crate::search::derive_seed;
use crate::tangram::{TangramEnv, TangramGoal, TangramState};

/// A demonstration: the states visited and the action taken at each.
#[derive(Clone, Debug)]
pub struct Demo<S, G> {
    pub goal: G,
    pub steps: Vec<(S, usize)>,
}

impl<S: Clone, G: Clone> Demo<S, G> {
    /// Replays `actions` from `initial`.
    pub fn replay<E>(env: &E, goal: G, initial: S, actions: &[usize]) -> Result<Self>
    where
        E: Environment<State = S, Goal = G>,
    {
        let mut steps = Vec::with_capacity(actions.len());
        let mut s = initial;
        for &a in actions {
            let next = env.step(&s, a)?.state;
            steps.push((s, a));
            s = next;
        }
        Ok(Demo { goal, steps })
    }
}

/// Everything the training loop reads from a dataset.
#[derive(Clone, Debug)]
pub struct TrainData<S, G> {
    /// Goal-matched complete states.
    pub positives: Vec<Example<S, G>>,
    /// Start states for self-play.
    pub instances: Vec<Instance<S, G>>,
    pub demos: Vec<Demo<S, G>>,
    /// Positives kept out of training, for validation and AUC.
    pub heldout: Vec<Example<S, G>>,
}

/// Train split for positives, instances and demos; validation split held out.
pub fn rect_train_data(env: &RectEnv, ds: &RectDataset) -> Result<TrainData<RectState, RegionGoal>> {
    let demos = ds
        .train
        .iter()
        .map(|c| Demo::replay(env, c.region, c.instance().initial, &c.solution_actions()))
        .collect::<Result<_>>()?;
    Ok(TrainData {
        positives: examples(&ds.train)?,
        instances: ds.train.iter().map(RectConfig::instance).collect(),
        demos,
        heldout: examples(&ds.val)?,
    })
}

fn examples(cs: &[RectConfig]) -> Result<Vec<Example<RectState, RegionGoal>>> {
    cs.iter().map(RectConfig::example).collect()
}

/// Random complete assemblies as positives, each a silhouette goal. Self-play
/// starts from a one-piece prefix of a training goal. There are no solution
/// action sequences, so no demonstrations.
pub fn tangram_train_data(
    env: &TangramEnv,
    n_train: usize,
    n_val: usize,
    seed: u64,
) -> Result<TrainData<TangramState, TangramGoal>> {
    if n_train == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0x7a]));
    let positives = env.generate_dataset(n_train, &mut rng, "train")?;
    let heldout = env.generate_dataset(n_val, &mut rng, "val")?;
    let instances = positives.iter().map(|e| env.initial_instance(e, true, &mut rng)).collect();
    Ok(TrainData { positives, instances, demos: Vec::new(), heldout })
}
