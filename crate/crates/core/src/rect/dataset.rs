use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::tiling::{tile_region, DEFAULT_NODE_BUDGET};
use super::{
    difficulty_ratio, no_collisions, Difficulty, Inventory, Placement, RectPieceKind, RectState, RegionGoal,
    MAX_SIDE, MIN_SIDE,
};
use crate::env::{Example, Instance};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn inventory(self) -> Inventory {
        match self {
            Split::Train => Inventory::TRAIN,
            Split::Val | Split::Test => Inventory::EVAL,
        }
    }

    fn file_name(self) -> &'static str {
        match self {
            Split::Train => "train.json",
            Split::Val => "val.json",
            Split::Test => "test.json",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct PieceCount {
    #[serde(rename = "type")]
    pub kind: RectPieceKind,
    pub count: u32,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SolutionPiece {
    #[serde(flatten)]
    pub placement: Placement,
    pub vertices: Vec<[i32; 2]>,
}

/// One generated problem with a witness solution.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct RectConfig {
    pub region: RegionGoal,
    pub pieces: Vec<PieceCount>,
    pub solution: Vec<SolutionPiece>,
    pub signature: String,
    pub split: Split,
    pub difficulty: Difficulty,
    pub text: String,
}

impl RectConfig {
    pub fn inventory(&self) -> Inventory {
        let mut inv = Inventory::default();
        for pc in &self.pieces {
            inv.0[pc.kind.index()] += pc.count;
        }
        inv
    }

    pub fn placements(&self) -> Vec<Placement> {
        self.solution.iter().map(|s| s.placement).collect()
    }

    pub fn instance(&self) -> Instance<RectState, RegionGoal> {
        Instance { goal: self.region, initial: RectState::new(self.inventory()) }
    }

    /// Solution actions in placement order (bottom row first).
    pub fn solution_actions(&self) -> Vec<usize> {
        self.solution.iter().map(|s| s.placement.action_index()).collect()
    }

    /// The solved state, built by replaying the witness.
    pub fn example(&self) -> Result<Example<RectState, RegionGoal>> {
        let mut s = RectState::new(self.inventory());
        for p in self.placements() {
            s = s.place(p)?;
        }
        Ok(Example { goal: self.region, state: s })
    }
}

fn signature(region: &RegionGoal, inv: &Inventory, placements: &[Placement]) -> String {
    let mut sorted = placements.to_vec();
    sorted.sort();
    let mut h = Sha256::new();
    h.update(region.w.to_le_bytes());
    h.update(region.h.to_le_bytes());
    for c in inv.0 {
        h.update(c.to_le_bytes());
    }
    for p in sorted {
        h.update([p.kind.index() as u8, p.rot]);
        h.update(p.x.to_le_bytes());
        h.update(p.y.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Keeps a uniformly sized random subset of a tiling and packages it as a
/// problem. The kept fraction is drawn from [0.3, 1.0].
pub fn make_problem<R: Rng>(region: RegionGoal, tiling: &[Placement], split: Split, rng: &mut R) -> Result<RectConfig> {
    if tiling.is_empty() {
        return Err(Error::InvalidArgument("empty tiling".into()));
    }
    let f: f64 = rng.random_range(0.3..=1.0);
    let keep = ((f * tiling.len() as f64).floor() as usize).max(1);
    let mut kept = tiling.to_vec();
    kept.shuffle(rng);
    kept.truncate(keep);
    kept.sort_by_key(|p| (p.y, p.x));
    let mut inv = Inventory::default();
    for p in &kept {
        inv.0[p.kind.index()] += 1;
    }
    let area = inv.area();
    Ok(RectConfig {
        region,
        pieces: RectPieceKind::ALL
            .iter()
            .filter(|k| inv.0[k.index()] > 0)
            .map(|&kind| PieceCount { kind, count: inv.0[kind.index()] })
            .collect(),
        solution: kept.iter().map(|&p| SolutionPiece { placement: p, vertices: p.vertices() }).collect(),
        signature: signature(&region, &inv, &kept),
        split,
        difficulty: difficulty_ratio(area, &region),
        text: region.text(),
    })
}

/// Draws regions until one admits a tiling from `inventory`.
pub fn sample_problem<R: Rng>(inventory: &Inventory, split: Split, rng: &mut R) -> Result<RectConfig> {
    for _ in 0..10_000 {
        let region = RegionGoal {
            w: rng.random_range(MIN_SIDE..=MAX_SIDE),
            h: rng.random_range(MIN_SIDE..=MAX_SIDE),
        };
        if region.area() % 2 != 0 || region.area() > inventory.area() {
            continue;
        }
        if let Some(tiling) = tile_region(&region, inventory, rng, DEFAULT_NODE_BUDGET) {
            return make_problem(region, &tiling, split, rng);
        }
    }
    Err(Error::Data(format!("no tileable region found for {inventory:?}")))
}

/// Checks a configuration end to end: region bounds, piece multiset, vertex
/// lists, containment and collisions.
pub fn verify_config(c: &RectConfig) -> bool {
    if RegionGoal::new(c.region.w, c.region.h).is_err() {
        return false;
    }
    let placed = c.placements();
    let mut inv = Inventory::default();
    for p in &placed {
        if p.rot > 1 {
            return false;
        }
        inv.0[p.kind.index()] += 1;
    }
    inv == c.inventory()
        && c.solution.iter().all(|s| s.vertices == s.placement.vertices())
        && placed.iter().all(|p| p.inside(&c.region))
        && no_collisions(&placed)
        && c.signature == signature(&c.region, &inv, &placed)
        && c.difficulty == difficulty_ratio(inv.area(), &c.region)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct DatasetSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for DatasetSizes {
    fn default() -> Self {
        DatasetSizes { train: 10_000, val: 1_000, test: 1_000 }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct RectDataset {
    pub train: Vec<RectConfig>,
    pub val: Vec<RectConfig>,
    pub test: Vec<RectConfig>,
}

fn fill_split<R: Rng, F: Fn(&RectConfig) -> bool>(
    n: usize,
    split: Split,
    seen: &mut HashSet<String>,
    rng: &mut R,
    accept: F,
) -> Result<Vec<RectConfig>> {
    let mut out = Vec::with_capacity(n);
    let max_attempts = 200 * n.max(1) + 1000;
    let mut attempts = 0;
    while out.len() < n && attempts < max_attempts {
        attempts += 1;
        let c = sample_problem(&split.inventory(), split, rng)?;
        if accept(&c) && seen.insert(c.signature.clone()) {
            out.push(c);
        }
    }
    if out.len() < n {
        log::warn!("{split:?}: produced {} of {n} unique configurations", out.len());
    }
    Ok(out)
}

impl RectDataset {
    /// Generates all three splits with signatures unique across splits.
    pub fn generate(sizes: DatasetSizes, seed: u64) -> Result<RectDataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = HashSet::new();
        Ok(RectDataset {
            train: fill_split(sizes.train, Split::Train, &mut seen, &mut rng, |_| true)?,
            val: fill_split(sizes.val, Split::Val, &mut seen, &mut rng, |_| true)?,
            test: fill_split(sizes.test, Split::Test, &mut seen, &mut rng, |_| true)?,
        })
    }

    pub fn signatures(&self) -> HashSet<String> {
        self.train.iter().chain(&self.val).chain(&self.test).map(|c| c.signature.clone()).collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (split, data) in [(Split::Train, &self.train), (Split::Val, &self.val), (Split::Test, &self.test)] {
            std::fs::write(dir.join(split.file_name()), serde_json::to_string(data)?)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<RectDataset> {
        let read = |split: Split| -> Result<Vec<RectConfig>> {
            let data: Vec<RectConfig> = serde_json::from_str(&std::fs::read_to_string(dir.join(split.file_name()))?)?;
            if let Some(bad) = data.iter().find(|c| !verify_config(c)) {
                return Err(Error::Data(format!("configuration {} fails verification", bad.signature)));
            }
            Ok(data)
        };
        Ok(RectDataset { train: read(Split::Train)?, val: read(Split::Val)?, test: read(Split::Test)? })
    }
}

/// Held-out evaluation problems by difficulty bucket, drawn with the
/// evaluation inventory and disjoint from `exclude`.
pub fn generate_eval_set(
    n_easy: usize,
    n_hard: usize,
    seed: u64,
    exclude: &HashSet<String>,
) -> Result<(Vec<RectConfig>, Vec<RectConfig>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = exclude.clone();
    let mut easy = Vec::new();
    let mut hard = Vec::new();
    let max_attempts = 2000 * (n_easy + n_hard).max(1);
    for _ in 0..max_attempts {
        if easy.len() >= n_easy && hard.len() >= n_hard {
            break;
        }
        let c = sample_problem(&Inventory::EVAL, Split::Test, &mut rng)?;
        let bucket = match c.difficulty {
            Difficulty::Easy if easy.len() < n_easy => &mut easy,
            Difficulty::Hard if hard.len() < n_hard => &mut hard,
            _ => continue,
        };
        if seen.insert(c.signature.clone()) {
            bucket.push(c);
        }
    }
    if easy.len() < n_easy || hard.len() < n_hard {
        return Err(Error::InsufficientSamples(format!(
            "eval set: {} easy, {} hard",
            easy.len(),
            hard.len()
        )));
    }
    Ok((easy, hard))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_configs_verify() {
        let d = RectDataset::generate(DatasetSizes { train: 40, val: 10, test: 10 }, 7).unwrap();
        assert_eq!(d.train.len(), 40);
        for c in d.train.iter().chain(&d.val).chain(&d.test) {
            assert!(verify_config(c), "{c:?}");
            assert!(c.inventory().area() <= c.region.area());
            let inv = c.split.inventory();
            assert!((0..3).all(|i| c.inventory().0[i] <= inv.0[i]));
        }
        assert_eq!(d.signatures().len(), 60);
    }

    #[test]
    fn generation_is_deterministic() {
        let s = DatasetSizes { train: 5, val: 2, test: 2 };
        assert_eq!(RectDataset::generate(s, 3).unwrap(), RectDataset::generate(s, 3).unwrap());
    }

    #[test]
    fn verify_rejects_tampering() {
        let d = RectDataset::generate(DatasetSizes { train: 3, val: 0, test: 0 }, 1).unwrap();
        let mut c = d.train[0].clone();
        c.solution[0].placement.x += 20;
        assert!(!verify_config(&c));
        let mut c = d.train[0].clone();
        c.pieces[0].count += 1;
        assert!(!verify_config(&c));
    }

    #[test]
    fn json_schema_fields() {
        let d = RectDataset::generate(DatasetSizes { train: 1, val: 0, test: 0 }, 2).unwrap();
        let v: serde_json::Value = serde_json::to_value(&d.train[0]).unwrap();
        assert!(v["region"]["W"].is_u64());
        assert!(v["region"]["H"].is_u64());
        assert!(v["pieces"][0]["type"].is_string());
        assert!(v["solution"][0]["vertices"].is_array());
        assert!(v["solution"][0]["x"].is_i64());
        assert_eq!(v["split"], "train");
        assert!(v["signature"].is_string());
    }

    #[test]
    fn save_load_roundtrip() {
        let d = RectDataset::generate(DatasetSizes { train: 4, val: 2, test: 2 }, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        d.save(dir.path()).unwrap();
        assert_eq!(RectDataset::load(dir.path()).unwrap(), d);
    }

    #[test]
    fn solution_replays_to_success() {
        let d = RectDataset::generate(DatasetSizes { train: 10, val: 0, test: 0 }, 9).unwrap();
        for c in &d.train {
            let ex = c.example().unwrap();
            assert!(super::super::success(&ex.state, &ex.goal));
        }
    }

    #[test]
    fn eval_set_buckets() {
        let (easy, hard) = generate_eval_set(5, 5, 11, &HashSet::new()).unwrap();
        assert!(easy.iter().all(|c| c.difficulty == Difficulty::Easy));
        assert!(hard.iter().all(|c| c.difficulty == Difficulty::Hard));
    }
}
