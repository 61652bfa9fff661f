use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: Scalar,
    pub y: Scalar,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 {
        x: Scalar::ZERO,
        y: Scalar::ZERO,
    };

    pub fn new(x: Scalar, y: Scalar) -> Vec2 {
        Vec2 { x, y }
    }

    pub fn int(x: i64, y: i64) -> Vec2 {
        Vec2::new(Scalar::from_int(x), Scalar::from_int(y))
    }

    pub fn add(&self, o: &Vec2) -> Result<Vec2> {
        Ok(Vec2::new(self.x.checked_add(&o.x)?, self.y.checked_add(&o.y)?))
    }

    pub fn sub(&self, o: &Vec2) -> Result<Vec2> {
        Ok(Vec2::new(self.x.checked_sub(&o.x)?, self.y.checked_sub(&o.y)?))
    }

    pub fn dot(&self, o: &Vec2) -> Result<Scalar> {
        self.x.checked_mul(&o.x)?.checked_add(&self.y.checked_mul(&o.y)?)
    }

    /// z-component of the 2D cross product.
    pub fn cross(&self, o: &Vec2) -> Result<Scalar> {
        self.x.checked_mul(&o.y)?.checked_sub(&self.y.checked_mul(&o.x)?)
    }

    pub fn midpoint(&self, o: &Vec2) -> Result<Vec2> {
        Ok(Vec2::new(
            self.x.checked_add(&o.x)?.half()?,
            self.y.checked_add(&o.y)?.half()?,
        ))
    }

    /// Lexicographic (x, then y) exact comparison.
    pub fn cmp_lex(&self, o: &Vec2) -> Result<std::cmp::Ordering> {
        Ok(self.x.cmp_exact(&o.x)?.then(self.y.cmp_exact(&o.y)?))
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (self.x.to_f64(), self.y.to_f64())
    }
}

/// `(cos, sin)` of `k · 45°`.
fn unit_rotation(k: u8) -> (Scalar, Scalar) {
    let h = Scalar::HALF_SQRT2;
    let nh = Scalar::new(0, -1, 1);
    let one = Scalar::ONE;
    let neg = Scalar::from_int(-1);
    let z = Scalar::ZERO;
    match k % 8 {
        0 => (one, z),
        1 => (h, h),
        2 => (z, one),
        3 => (nh, h),
        4 => (neg, z),
        5 => (nh, nh),
        6 => (z, neg),
        _ => (h, nh),
    }
}

/// Rotation by `rot · 45°` applied after an optional reflection about the
/// y-axis, followed by a translation.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rot: u8,
    pub flip: bool,
    pub t: Vec2,
}

impl Default for RigidTransform {
    fn default() -> Self {
        RigidTransform::IDENTITY
    }
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rot: 0,
        flip: false,
        t: Vec2::ZERO,
    };

    pub fn new(rot: u8, flip: bool, t: Vec2) -> Result<RigidTransform> {
        if rot >= 8 {
            return Err(Error::InvalidArgument(format!("rotation index {rot} not in 0..8")));
        }
        Ok(RigidTransform { rot, flip, t })
    }

    /// Applies only the linear part (reflection and rotation).
    pub fn apply_linear(&self, v: &Vec2) -> Result<Vec2> {
        let x = if self.flip { v.x.checked_neg()? } else { v.x };
        let y = v.y;
        let (c, s) = unit_rotation(self.rot);
        Ok(Vec2::new(
            c.checked_mul(&x)?.checked_sub(&s.checked_mul(&y)?)?,
            s.checked_mul(&x)?.checked_add(&c.checked_mul(&y)?)?,
        ))
    }

    pub fn apply(&self, v: &Vec2) -> Result<Vec2> {
        self.apply_linear(v)?.add(&self.t)
    }

    /// Returns the transform equivalent to applying `inner` first, then `self`.
    pub fn compose(&self, inner: &RigidTransform) -> Result<RigidTransform> {
        // F R(θ) = R(−θ) F, so a reflection in `self` reverses the inner rotation.
        let rot = if self.flip {
            (self.rot + 8 - inner.rot) % 8
        } else {
            (self.rot + inner.rot) % 8
        };
        Ok(RigidTransform {
            rot,
            flip: self.flip ^ inner.flip,
            t: self.apply(&inner.t)?,
        })
    }

    pub fn translated(&self, d: &Vec2) -> Result<RigidTransform> {
        Ok(RigidTransform {
            t: self.t.add(d)?,
            ..*self
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quarter_turn() {
        let t = RigidTransform::new(2, false, Vec2::ZERO).unwrap();
        assert_eq!(t.apply(&Vec2::int(1, 0)).unwrap(), Vec2::int(0, 1));
    }

    #[test]
    fn eighth_turn_is_exact() {
        let t = RigidTransform::new(1, false, Vec2::ZERO).unwrap();
        let v = t.apply(&Vec2::int(2, 0)).unwrap();
        let sqrt2 = Scalar::new(0, 1, 0);
        assert_eq!(v, Vec2::new(sqrt2, sqrt2));
    }

    #[test]
    fn reflect_then_translate() {
        let t = RigidTransform::new(0, true, Vec2::int(1, 0)).unwrap();
        assert_eq!(t.apply(&Vec2::int(1, 1)).unwrap(), Vec2::int(0, 1));
    }

    #[test]
    fn rejects_bad_rotation() {
        assert!(RigidTransform::new(8, false, Vec2::ZERO).is_err());
    }

    fn transform() -> impl Strategy<Value = RigidTransform> {
        (0u8..8, any::<bool>(), -20i64..20, -20i64..20, 0u32..3).prop_map(|(r, f, x, y, e)| {
            RigidTransform::new(r, f, Vec2::new(Scalar::dyadic(x, e), Scalar::new(0, y, e))).unwrap()
        })
    }

    proptest! {
        #[test]
        fn compose_matches_sequential(t1 in transform(), t2 in transform(), x in -10i64..10, y in -10i64..10) {
            let v = Vec2::int(x, y);
            let seq = t2.apply(&t1.apply(&v).unwrap()).unwrap();
            let comp = t2.compose(&t1).unwrap().apply(&v).unwrap();
            prop_assert_eq!(seq, comp);
        }
    }
}
