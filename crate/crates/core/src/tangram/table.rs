use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::pieces::{piece_defs_hash, pieces, NUM_PIECES};
use crate::error::{Error, Result};
use crate::geometry::{canonical_config_hash, digest64, polygons_overlap, RigidTransform};

/// Places `moved` so that its anchor coincides with the reference anchor.
///
/// `rot`/`flip` are relative to the reference piece's orientation, so a
/// precomputed two-piece configuration stays overlap-free under any pose
/// of the reference.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct TangramAction {
    pub moved: u8,
    pub reference: u8,
    pub moved_anchor: u8,
    pub ref_anchor: u8,
    pub rot: u8,
    pub flip: u8,
}

impl TangramAction {
    /// Static range checks on ids, anchors, rotation and flip.
    pub fn in_range(&self) -> bool {
        let p = pieces();
        (self.moved as usize) < NUM_PIECES
            && (self.reference as usize) < NUM_PIECES
            && self.moved != self.reference
            && (self.moved_anchor as usize) < p[self.moved as usize].anchors.len()
            && (self.ref_anchor as usize) < p[self.reference as usize].anchors.len()
            && self.rot < 8
            && self.flip < p[self.moved as usize].flip_states
    }

    /// World pose of the moved piece given the reference piece's pose.
    pub fn placement(&self, ref_pose: &RigidTransform) -> Result<RigidTransform> {
        if !self.in_range() {
            return Err(Error::InvalidAction(format!("{self:?} out of range")));
        }
        let p = pieces();
        let rel = RigidTransform::new(self.rot, self.flip == 1, crate::geometry::Vec2::ZERO)?;
        let oriented = ref_pose.compose(&rel)?;
        let target = ref_pose.apply(&p[self.reference as usize].anchors[self.ref_anchor as usize])?;
        let current = oriented.apply(&p[self.moved as usize].anchors[self.moved_anchor as usize])?;
        oriented.translated(&target.sub(&current)?)
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TableMetadata {
    pub piece_defs_hash: String,
    pub count: usize,
    pub checksum: String,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ActionTable {
    pub actions: Vec<TangramAction>,
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    metadata: TableMetadata,
    actions: Vec<TangramAction>,
}

fn actions_checksum(actions: &[TangramAction]) -> String {
    let bytes: Vec<u8> = actions
        .iter()
        .flat_map(|a| [a.moved, a.reference, a.moved_anchor, a.ref_anchor, a.rot, a.flip])
        .collect();
    format!("{:016x}", digest64(&bytes))
}

impl ActionTable {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn metadata(&self) -> TableMetadata {
        TableMetadata {
            piece_defs_hash: format!("{:016x}", piece_defs_hash()),
            count: self.actions.len(),
            checksum: actions_checksum(&self.actions),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = TableFile {
            metadata: self.metadata(),
            actions: self.actions.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    /// Parses and validates a persisted table: piece definitions, count and
    /// checksum must all match.
    pub fn from_json(s: &str) -> Result<ActionTable> {
        let file: TableFile = serde_json::from_str(s)?;
        let table = ActionTable { actions: file.actions };
        let expect = table.metadata();
        if file.metadata.piece_defs_hash != expect.piece_defs_hash {
            return Err(Error::Checksum("action table piece definitions".into()));
        }
        if file.metadata.count != expect.count || file.metadata.checksum != expect.checksum {
            return Err(Error::Checksum("action table".into()));
        }
        if let Some(bad) = table.actions.iter().find(|a| !a.in_range()) {
            return Err(Error::Data(format!("action {bad:?} out of range")));
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ActionTable> {
        ActionTable::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Enumerates every anchor alignment of every ordered piece pair under all
/// relative rotations and flips, drops self-overlapping pairs and keeps the
/// first action of each distinct relative configuration.
pub fn precompute_action_table() -> Result<ActionTable> {
    let p = pieces();
    let mut seen = HashSet::new();
    let mut actions = Vec::new();
    for moved in 0..NUM_PIECES {
        for reference in 0..NUM_PIECES {
            if moved == reference {
                continue;
            }
            let ref_poly = &p[reference].canonical;
            for moved_anchor in 0..p[moved].anchors.len() {
                for ref_anchor in 0..p[reference].anchors.len() {
                    for rot in 0..8u8 {
                        for flip in 0..p[moved].flip_states {
                            let a = TangramAction {
                                moved: moved as u8,
                                reference: reference as u8,
                                moved_anchor: moved_anchor as u8,
                                ref_anchor: ref_anchor as u8,
                                rot,
                                flip,
                            };
                            let pose = a.placement(&RigidTransform::IDENTITY)?;
                            let poly = p[moved].canonical.transformed(&pose)?;
                            if polygons_overlap(ref_poly, &poly)? {
                                continue;
                            }
                            let h = canonical_config_hash(&[
                                (reference as u8, ref_poly, RigidTransform::IDENTITY),
                                (moved as u8, &p[moved].canonical, pose),
                            ])?;
                            if seen.insert(h) {
                                actions.push(a);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(ActionTable { actions })
}
