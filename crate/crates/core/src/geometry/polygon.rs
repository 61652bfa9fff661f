use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use super::transform::{RigidTransform, Vec2};
use crate::error::{Error, Result};

/// A strictly convex polygon with counter-clockwise vertices.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec2>", into = "Vec<Vec2>")]
pub struct ConvexPolygon {
    vertices: Vec<Vec2>,
}

impl ConvexPolygon {
    pub fn new(vertices: Vec<Vec2>) -> Result<ConvexPolygon> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidPolygon(format!("{n} vertices")));
        }
        for i in 0..n {
            for j in i + 1..n {
                if vertices[i] == vertices[j] {
                    return Err(Error::InvalidPolygon("repeated vertex".into()));
                }
            }
        }
        // Every other vertex must lie strictly left of every edge.
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let edge = b.sub(&a)?;
            for (k, v) in vertices.iter().enumerate() {
                if k == i || k == (i + 1) % n {
                    continue;
                }
                if edge.cross(&v.sub(&a)?)?.sign() <= 0 {
                    return Err(Error::InvalidPolygon(
                        "not strictly convex counter-clockwise".into(),
                    ));
                }
            }
        }
        Ok(ConvexPolygon { vertices })
    }

    pub fn from_ints(pts: &[(i64, i64)]) -> Result<ConvexPolygon> {
        ConvexPolygon::new(pts.iter().map(|&(x, y)| Vec2::int(x, y)).collect())
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Rigid images keep convexity; a reflection reverses the winding, which
    /// is restored here.
    pub fn transformed(&self, t: &RigidTransform) -> Result<ConvexPolygon> {
        let mut vertices = self
            .vertices
            .iter()
            .map(|v| t.apply(v))
            .collect::<Result<Vec<_>>>()?;
        if t.flip {
            vertices.reverse();
        }
        Ok(ConvexPolygon { vertices })
    }

    /// Twice the signed area, exact.
    pub fn double_area(&self) -> Result<Scalar> {
        let n = self.vertices.len();
        let mut acc = Scalar::ZERO;
        for i in 0..n {
            acc = acc.checked_add(&self.vertices[i].cross(&self.vertices[(i + 1) % n])?)?;
        }
        Ok(acc)
    }

    pub fn area_f64(&self) -> f64 {
        self.double_area().map(|a| a.to_f64() / 2.0).unwrap_or(f64::NAN)
    }

    /// Float bounding box `(xmin, ymin, xmax, ymax)`.
    pub fn bbox_f64(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            let (x, y) = v.to_f64();
            b.0 = b.0.min(x);
            b.1 = b.1.min(y);
            b.2 = b.2.max(x);
            b.3 = b.3.max(y);
        }
        b
    }

    /// Vertices followed by edge midpoints, in vertex and edge order.
    pub fn anchor_points(&self) -> Result<Vec<Vec2>> {
        let n = self.vertices.len();
        let mut out = self.vertices.clone();
        for i in 0..n {
            out.push(self.vertices[i].midpoint(&self.vertices[(i + 1) % n])?);
        }
        Ok(out)
    }

    /// Float point-in-polygon (closed), for rasterization only.
    pub fn contains_f64(&self, px: f64, py: f64) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let (ax, ay) = self.vertices[i].to_f64();
            let (bx, by) = self.vertices[(i + 1) % n].to_f64();
            (bx - ax) * (py - ay) - (by - ay) * (px - ax) >= 0.0
        })
    }
}

impl From<ConvexPolygon> for Vec<Vec2> {
    fn from(p: ConvexPolygon) -> Self {
        p.vertices
    }
}

impl TryFrom<Vec<Vec2>> for ConvexPolygon {
    type Error = String;

    fn try_from(v: Vec<Vec2>) -> std::result::Result<Self, Self::Error> {
        ConvexPolygon::new(v).map_err(|e| e.to_string())
    }
}

/// `(min, max)` of the projections of `poly` onto `axis`.
fn project(poly: &ConvexPolygon, axis: &Vec2) -> Result<(Scalar, Scalar)> {
    let mut lo = poly.vertices[0].dot(axis)?;
    let mut hi = lo;
    for v in &poly.vertices[1..] {
        let d = v.dot(axis)?;
        if d.cmp_exact(&lo)?.is_lt() {
            lo = d;
        }
        if d.cmp_exact(&hi)?.is_gt() {
            hi = d;
        }
    }
    Ok((lo, hi))
}

fn separated_on_edges(a: &ConvexPolygon, b: &ConvexPolygon) -> Result<bool> {
    let n = a.vertices.len();
    for i in 0..n {
        let e = a.vertices[(i + 1) % n].sub(&a.vertices[i])?;
        let axis = Vec2::new(e.y.checked_neg()?, e.x);
        let (alo, ahi) = project(a, &axis)?;
        let (blo, bhi) = project(b, &axis)?;
        // Touching projections (equal endpoints) count as separated.
        if ahi.cmp_exact(&blo)?.is_le() || bhi.cmp_exact(&alo)?.is_le() {
            return Ok(true);
        }
    }
    Ok(false)
}

/// True iff the interiors of `a` and `b` intersect with positive area.
/// Shared edges and shared vertices do not count as overlap.
pub fn polygons_overlap(a: &ConvexPolygon, b: &ConvexPolygon) -> Result<bool> {
    Ok(!(separated_on_edges(a, b)? || separated_on_edges(b, a)?))
}

/// Same predicate as [`polygons_overlap`], with a float bounding-box
/// rejection in front of the exact test.
pub fn polygons_overlap_fast(a: &ConvexPolygon, b: &ConvexPolygon) -> Result<bool> {
    let (ax0, ay0, ax1, ay1) = a.bbox_f64();
    let (bx0, by0, bx1, by1) = b.bbox_f64();
    const MARGIN: f64 = 1e-7;
    if ax1 < bx0 + MARGIN || bx1 < ax0 + MARGIN || ay1 < by0 + MARGIN || by1 < ay0 + MARGIN {
        return Ok(false);
    }
    polygons_overlap(a, b)
}

/// Closed containment of every vertex in `[xmin, xmax] × [ymin, ymax]`.
pub fn polygon_in_rect(
    poly: &ConvexPolygon,
    xmin: &Scalar,
    xmax: &Scalar,
    ymin: &Scalar,
    ymax: &Scalar,
) -> Result<bool> {
    for v in &poly.vertices {
        if v.x.cmp_exact(xmin)?.is_lt()
            || v.x.cmp_exact(xmax)?.is_gt()
            || v.y.cmp_exact(ymin)?.is_lt()
            || v.y.cmp_exact(ymax)?.is_gt()
        {
            return Ok(false);
        }
    }
    Ok(true)
}
