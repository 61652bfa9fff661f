//! Exact plane geometry for convex pieces under the eight 45° rotations.

mod hash;
mod polygon;
mod scalar;
mod transform;

pub use hash::{canonical_config_hash, digest64};
pub use polygon::{polygon_in_rect, polygons_overlap, polygons_overlap_fast, ConvexPolygon};
pub use scalar::Scalar;
pub use transform::{RigidTransform, Vec2};

/// Exact sign of a scalar: -1, 0 or +1.
pub fn scalar_sign(s: &Scalar) -> i32 {
    s.sign()
}

pub fn apply_transform(t: &RigidTransform, v: &Vec2) -> crate::Result<Vec2> {
    t.apply(v)
}
