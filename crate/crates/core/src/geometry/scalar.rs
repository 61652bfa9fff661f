//! Exact numbers of the form `(p + q·√2) / 2^e`.
//!
//! This ring is closed under addition, multiplication and rotation by 45°,
//! which is everything the tangram placements need. All arithmetic is
//! checked: an overflowing operation returns [`Error::Overflow`] instead of
//! wrapping.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i64; 3]", into = "[i64; 3]")]
pub struct Scalar {
    p: i64,
    q: i64,
    e: u32,
}

impl Scalar {
    pub const ZERO: Scalar = Scalar { p: 0, q: 0, e: 0 };
    pub const ONE: Scalar = Scalar { p: 1, q: 0, e: 0 };
    /// √2 / 2 = cos 45°.
    pub const HALF_SQRT2: Scalar = Scalar { p: 0, q: 1, e: 1 };

    /// Builds a normalized scalar. `e` is the power-of-two denominator exponent.
    pub fn new(p: i64, q: i64, e: u32) -> Scalar {
        let mut s = Scalar { p, q, e };
        s.normalize();
        s
    }

    pub fn from_int(n: i64) -> Scalar {
        Scalar { p: n, q: 0, e: 0 }
    }

    /// `n / 2^e`.
    pub fn dyadic(n: i64, e: u32) -> Scalar {
        Scalar::new(n, 0, e)
    }

    pub fn p(&self) -> i64 {
        self.p
    }

    pub fn q(&self) -> i64 {
        self.q
    }

    pub fn e(&self) -> u32 {
        self.e
    }

    fn normalize(&mut self) {
        if self.p == 0 && self.q == 0 {
            self.e = 0;
            return;
        }
        while self.e > 0 && self.p % 2 == 0 && self.q % 2 == 0 {
            self.p /= 2;
            self.q /= 2;
            self.e -= 1;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.p == 0 && self.q == 0
    }

    /// Exact sign of `p + q√2` using only integer arithmetic.
    pub fn sign(&self) -> i32 {
        let (p, q) = (self.p, self.q);
        let sp = p.signum() as i32;
        let sq = q.signum() as i32;
        if sq == 0 {
            return sp;
        }
        if sp == 0 {
            return sq;
        }
        if sp == sq {
            return sp;
        }
        // Opposite signs: compare p² with 2q². Magnitudes fit in u128 even
        // for i64::MIN, so this comparison cannot overflow.
        let p2 = (p.unsigned_abs() as u128) * (p.unsigned_abs() as u128);
        let q2 = 2 * (q.unsigned_abs() as u128) * (q.unsigned_abs() as u128);
        match p2.cmp(&q2) {
            Ordering::Greater => sp,
            Ordering::Less => sq,
            // p² = 2q² has no nonzero integer solutions.
            Ordering::Equal => unreachable!("sqrt(2) is irrational"),
        }
    }

    fn scaled_to(&self, e: u32) -> Result<(i64, i64)> {
        let shift = e - self.e;
        if shift >= 63 {
            if self.is_zero() {
                return Ok((0, 0));
            }
            return Err(Error::Overflow);
        }
        let f = 1i64 << shift;
        Ok((
            self.p.checked_mul(f).ok_or(Error::Overflow)?,
            self.q.checked_mul(f).ok_or(Error::Overflow)?,
        ))
    }

    pub fn checked_add(&self, o: &Scalar) -> Result<Scalar> {
        let e = self.e.max(o.e);
        let (p1, q1) = self.scaled_to(e)?;
        let (p2, q2) = o.scaled_to(e)?;
        Ok(Scalar::new(
            p1.checked_add(p2).ok_or(Error::Overflow)?,
            q1.checked_add(q2).ok_or(Error::Overflow)?,
            e,
        ))
    }

    pub fn checked_sub(&self, o: &Scalar) -> Result<Scalar> {
        self.checked_add(&o.checked_neg()?)
    }

    pub fn checked_neg(&self) -> Result<Scalar> {
        Ok(Scalar {
            p: self.p.checked_neg().ok_or(Error::Overflow)?,
            q: self.q.checked_neg().ok_or(Error::Overflow)?,
            e: self.e,
        })
    }

    pub fn checked_mul(&self, o: &Scalar) -> Result<Scalar> {
        let pp = self.p.checked_mul(o.p).ok_or(Error::Overflow)?;
        let qq = self
            .q
            .checked_mul(o.q)
            .and_then(|v| v.checked_mul(2))
            .ok_or(Error::Overflow)?;
        let pq = self.p.checked_mul(o.q).ok_or(Error::Overflow)?;
        let qp = self.q.checked_mul(o.p).ok_or(Error::Overflow)?;
        let e = self.e.checked_add(o.e).ok_or(Error::Overflow)?;
        Ok(Scalar::new(
            pp.checked_add(qq).ok_or(Error::Overflow)?,
            pq.checked_add(qp).ok_or(Error::Overflow)?,
            e,
        ))
    }

    /// Divides by two exactly.
    pub fn half(&self) -> Result<Scalar> {
        let e = self.e.checked_add(1).ok_or(Error::Overflow)?;
        Ok(Scalar::new(self.p, self.q, e))
    }

    /// Exact comparison via the sign of the difference.
    pub fn cmp_exact(&self, o: &Scalar) -> Result<Ordering> {
        Ok(match self.checked_sub(o)?.sign() {
            s if s < 0 => Ordering::Less,
            0 => Ordering::Equal,
            _ => Ordering::Greater,
        })
    }

    pub fn to_f64(&self) -> f64 {
        (self.p as f64 + self.q as f64 * std::f64::consts::SQRT_2) / (2f64).powi(self.e as i32)
    }
}

impl From<Scalar> for [i64; 3] {
    fn from(s: Scalar) -> Self {
        [s.p, s.q, s.e as i64]
    }
}

impl TryFrom<[i64; 3]> for Scalar {
    type Error = String;

    fn try_from(v: [i64; 3]) -> std::result::Result<Self, Self::Error> {
        let e = u32::try_from(v[2]).map_err(|_| format!("bad exponent {}", v[2]))?;
        let s = Scalar::new(v[0], v[1], e);
        if s.p != v[0] || s.q != v[1] || s.e != e {
            return Err(format!("scalar {:?} is not normalized", v));
        }
        Ok(s)
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}+{}√2)/2^{}", self.p, self.q, self.e)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}
