use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::geometry::{digest64, ConvexPolygon, Vec2};

pub const NUM_PIECES: usize = 7;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Shape {
    SmallTriangle,
    MediumTriangle,
    LargeTriangle,
    Square,
    Parallelogram,
}

#[derive(Clone, Debug)]
pub struct PieceKind {
    pub id: u8,
    pub shape: Shape,
    pub canonical: ConvexPolygon,
    pub anchors: Vec<Vec2>,
    /// 2 only for the chiral parallelogram.
    pub flip_states: u8,
}

fn canonical(shape: Shape) -> ConvexPolygon {
    let pts: &[(i64, i64)] = match shape {
        Shape::SmallTriangle => &[(0, 0), (2, 0), (0, 2)],
        Shape::MediumTriangle => &[(0, 0), (2, 2), (-2, 2)],
        Shape::LargeTriangle => &[(0, 0), (4, 0), (0, 4)],
        Shape::Square => &[(0, 0), (2, 0), (2, 2), (0, 2)],
        Shape::Parallelogram => &[(0, 0), (2, 0), (4, 2), (2, 2)],
    };
    ConvexPolygon::from_ints(pts).expect("canonical pieces are valid")
}

const SHAPES: [Shape; NUM_PIECES] = [
    Shape::SmallTriangle,
    Shape::SmallTriangle,
    Shape::MediumTriangle,
    Shape::LargeTriangle,
    Shape::LargeTriangle,
    Shape::Square,
    Shape::Parallelogram,
];

/// The seven tangram pieces, ids 0..7: two small triangles, the medium
/// triangle, two large triangles, the square and the parallelogram.
pub fn pieces() -> &'static [PieceKind; NUM_PIECES] {
    static PIECES: OnceLock<[PieceKind; NUM_PIECES]> = OnceLock::new();
    PIECES.get_or_init(|| {
        std::array::from_fn(|i| {
            let shape = SHAPES[i];
            let canonical = canonical(shape);
            let anchors = canonical.anchor_points().expect("small coordinates");
            PieceKind {
                id: i as u8,
                shape,
                canonical,
                anchors,
                flip_states: if shape == Shape::Parallelogram { 2 } else { 1 },
            }
        })
    })
}

/// Digest of the piece definitions; stored with persisted action tables.
pub fn piece_defs_hash() -> u64 {
    let defs: Vec<_> = pieces()
        .iter()
        .map(|p| (p.id, p.shape, p.canonical.clone(), p.flip_states))
        .collect();
    digest64(&serde_json::to_vec(&defs).expect("serializable"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Scalar;

    #[test]
    fn area_ratios() {
        let areas: Vec<Scalar> = pieces().iter().map(|p| p.canonical.double_area().unwrap()).collect();
        let half: Vec<i64> = areas.iter().map(|a| a.p() / 2).collect();
        assert_eq!(half, vec![2, 2, 4, 8, 8, 4, 4]);
        assert_eq!(half.iter().sum::<i64>(), 32);
        assert!(areas.iter().all(|a| a.q() == 0 && a.e() == 0));
    }

    #[test]
    fn anchor_counts_and_flips() {
        for p in pieces() {
            assert_eq!(p.anchors.len(), 2 * p.canonical.len());
            assert_eq!(p.flip_states == 2, p.shape == Shape::Parallelogram);
        }
        assert_eq!(pieces().iter().filter(|p| p.anchors.len() == 6).count(), 5);
    }
}
