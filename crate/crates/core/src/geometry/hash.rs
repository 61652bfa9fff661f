use sha2::{Digest, Sha256};

use super::polygon::ConvexPolygon;
use super::transform::{RigidTransform, Vec2};
use crate::error::{Error, Result};

/// First eight bytes of a SHA-256 digest, little-endian.
pub fn digest64(bytes: &[u8]) -> u64 {
    let d = Sha256::digest(bytes);
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Translation-invariant hash of a set of placed pieces.
///
/// Everything is shifted so that the lexicographically smallest anchor over
/// all placed pieces sits at the origin. Each piece contributes its id and
/// its sorted, shifted vertex set, so poses that cover the same region
/// (a square turned by 90°, the parallelogram by 180°) hash equal.
pub fn canonical_config_hash(pieces: &[(u8, &ConvexPolygon, RigidTransform)]) -> Result<u64> {
    if pieces.is_empty() {
        return Err(Error::EmptyConfig);
    }
    let mut min: Option<Vec2> = None;
    for (_, poly, t) in pieces {
        for a in poly.anchor_points()? {
            let w = t.apply(&a)?;
            min = match min {
                Some(m) if m.cmp_lex(&w)?.is_le() => Some(m),
                _ => Some(w),
            };
        }
    }
    let origin = min.expect("nonempty");
    let mut rows = pieces
        .iter()
        .map(|(id, poly, t)| {
            let mut verts = poly
                .vertices()
                .iter()
                .map(|v| {
                    let w = t.apply(v)?.sub(&origin)?;
                    let x: [i64; 3] = w.x.into();
                    let y: [i64; 3] = w.y.into();
                    Ok((x, y))
                })
                .collect::<Result<Vec<_>>>()?;
            verts.sort();
            Ok((*id, verts))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort();
    let mut bytes = Vec::new();
    for (id, verts) in rows {
        bytes.push(id);
        bytes.push(verts.len() as u8);
        for (x, y) in verts {
            for v in x.iter().chain(y.iter()) {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(digest64(&bytes))
}
