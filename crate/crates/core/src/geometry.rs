//! Planar half-plane intersection by successive clipping of a convex polygon.
//!
//! Regions in this crate are generally unbounded, so clipping starts from a
//! large bounding box and reports whether the result still touches it.

use serde::Serialize;

/// `a * u + b * v <= rhs` over the plane coordinates `(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalfPlane {
    pub a: f64,
    pub b: f64,
    pub rhs: f64,
}

impl HalfPlane {
    pub fn new(a: f64, b: f64, rhs: f64) -> Self {
        HalfPlane { a, b, rhs }
    }

    pub fn norm(&self) -> f64 {
        self.a.hypot(self.b)
    }

    /// `a·p - rhs`; nonpositive inside.
    pub fn excess(&self, p: [f64; 2]) -> f64 {
        self.a * p[0] + self.b * p[1] - self.rhs
    }

    /// Signed distance outside the boundary line (negative inside). Zero-normal
    /// half-planes return `-rhs`.
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        let n = self.norm();
        if n == 0.0 {
            -self.rhs
        } else {
            self.excess(p) / n
        }
    }

    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        self.distance(p) <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<[f64; 2]>,
}

impl ConvexPolygon {
    pub fn rect(u: [f64; 2], v: [f64; 2]) -> Self {
        ConvexPolygon { vertices: vec![[u[0], v[0]], [u[1], v[0]], [u[1], v[1]], [u[0], v[1]]] }
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Keeps the part of the polygon within `tol` (Euclidean) of `h`.
    pub fn clip(&self, h: &HalfPlane, tol: f64) -> ConvexPolygon {
        let n = h.norm();
        if self.vertices.is_empty() {
            return self.clone();
        }
        if n == 0.0 {
            return if h.rhs >= -tol { self.clone() } else { ConvexPolygon { vertices: Vec::new() } };
        }
        let slack = |p: [f64; 2]| h.excess(p) / n - tol;
        let mut out = Vec::with_capacity(self.vertices.len() + 1);
        let k = self.vertices.len();
        for idx in 0..k {
            let p = self.vertices[idx];
            let q = self.vertices[(idx + 1) % k];
            let sp = slack(p);
            let sq = slack(q);
            if sp <= 0.0 {
                out.push(p);
            }
            if (sp <= 0.0) != (sq <= 0.0) {
                let w = sp / (sp - sq);
                out.push([p[0] + w * (q[0] - p[0]), p[1] + w * (q[1] - p[1])]);
            }
        }
        out.dedup();
        if out.len() > 1 && out.first() == out.last() {
            out.pop();
        }
        ConvexPolygon { vertices: out }
    }

    pub fn clip_all<'a>(&self, hs: impl IntoIterator<Item = &'a HalfPlane>, tol: f64) -> ConvexPolygon {
        let mut poly = self.clone();
        for h in hs {
            poly = poly.clip(h, tol);
            if poly.is_empty() {
                break;
            }
        }
        poly
    }

    pub fn area(&self) -> f64 {
        let k = self.vertices.len();
        if k < 3 {
            return 0.0;
        }
        let mut twice = 0.0;
        for i in 0..k {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % k];
            twice += p[0] * q[1] - q[0] * p[1];
        }
        0.5 * twice.abs()
    }

    /// Largest distance between two vertices.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, p) in self.vertices.iter().enumerate() {
            for q in &self.vertices[i + 1..] {
                best = best.max((p[0] - q[0]).hypot(p[1] - q[1]));
            }
        }
        best
    }

    /// Minimum width over edge directions (exact for convex polygons).
    pub fn width(&self) -> f64 {
        let k = self.vertices.len();
        if k < 3 {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for i in 0..k {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % k];
            let len = (q[0] - p[0]).hypot(q[1] - p[1]);
            if len == 0.0 {
                continue;
            }
            let far = self
                .vertices
                .iter()
                .map(|r| ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])).abs() / len)
                .fold(0.0, f64::max);
            best = best.min(far);
        }
        if best.is_finite() {
            best
        } else {
            0.0
        }
    }

    /// Area centroid, or the vertex mean for degenerate polygons.
    pub fn centroid(&self) -> Option<[f64; 2]> {
        let k = self.vertices.len();
        if k == 0 {
            return None;
        }
        let mean = {
            let (su, sv) = self.vertices.iter().fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
            [su / k as f64, sv / k as f64]
        };
        if k < 3 {
            return Some(mean);
        }
        // shift to the vertex mean to limit cancellation
        let mut twice = 0.0;
        let mut cu = 0.0;
        let mut cv = 0.0;
        for i in 0..k {
            let p = [self.vertices[i][0] - mean[0], self.vertices[i][1] - mean[1]];
            let j = (i + 1) % k;
            let q = [self.vertices[j][0] - mean[0], self.vertices[j][1] - mean[1]];
            let cross = p[0] * q[1] - q[0] * p[1];
            twice += cross;
            cu += (p[0] + q[0]) * cross;
            cv += (p[1] + q[1]) * cross;
        }
        if twice.abs() <= f64::EPSILON * self.diameter().powi(2) {
            return Some(mean);
        }
        Some([mean[0] + cu / (3.0 * twice), mean[1] + cv / (3.0 * twice)])
    }

    /// Maximum of `d·p` over the polygon.
    pub fn support(&self, d: [f64; 2]) -> Option<f64> {
        self.vertices.iter().map(|p| d[0] * p[0] + d[1] * p[1]).reduce(f64::max)
    }

    /// Extent along the unit vector `d`.
    pub fn extent(&self, d: [f64; 2]) -> f64 {
        match (self.support(d), self.support([-d[0], -d[1]])) {
            (Some(hi), Some(lo)) => hi + lo,
            _ => 0.0,
        }
    }
}

/// Intersection of the boundary lines of two half-planes, if not parallel.
pub fn line_intersection(h: &HalfPlane, k: &HalfPlane) -> Option<[f64; 2]> {
    let det = h.a * k.b - h.b * k.a;
    let scale = h.norm() * k.norm();
    if scale == 0.0 || det.abs() <= 1e-12 * scale {
        return None;
    }
    Some([(h.rhs * k.b - h.b * k.rhs) / det, (h.a * k.rhs - h.rhs * k.a) / det])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipping_unit_square() {
        let sq = ConvexPolygon::rect([0.0, 1.0], [0.0, 1.0]);
        assert!((sq.area() - 1.0).abs() < 1e-15);
        // u + v <= 1 keeps the lower-left triangle
        let tri = sq.clip(&HalfPlane::new(1.0, 1.0, 1.0), 0.0);
        assert!((tri.area() - 0.5).abs() < 1e-15);
        let c = tri.centroid().unwrap();
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-12 && (c[1] - 1.0 / 3.0).abs() < 1e-12);
        // u >= 2 removes everything
        assert!(sq.clip(&HalfPlane::new(-1.0, 0.0, -2.0), 0.0).is_empty());
    }

    #[test]
    fn opposite_half_planes_leave_a_thin_strip() {
        let sq = ConvexPolygon::rect([-1.0, 1.0], [-1.0, 1.0]);
        let strip = sq.clip_all(&[HalfPlane::new(1.0, -1.0, 0.0), HalfPlane::new(-1.0, 1.0, 0.0)], 1e-9);
        assert!(!strip.is_empty());
        assert!(strip.width() < 3e-9);
        assert!(strip.diameter() > 2.0);
    }

    #[test]
    fn zero_normal_half_plane() {
        let sq = ConvexPolygon::rect([0.0, 1.0], [0.0, 1.0]);
        assert_eq!(sq.clip(&HalfPlane::new(0.0, 0.0, 0.5), 0.0), sq);
        assert!(sq.clip(&HalfPlane::new(0.0, 0.0, -0.5), 0.0).is_empty());
    }

    #[test]
    fn lines_meet() {
        let p = line_intersection(&HalfPlane::new(1.0, 1.0, 2.0), &HalfPlane::new(1.0, -1.0, 0.0)).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
        assert!(line_intersection(&HalfPlane::new(1.0, 1.0, 2.0), &HalfPlane::new(2.0, 2.0, 0.0)).is_none());
    }

    #[test]
    fn extents_and_width_of_rectangle() {
        let r = ConvexPolygon::rect([0.0, 4.0], [0.0, 1.0]);
        assert!((r.extent([1.0, 0.0]) - 4.0).abs() < 1e-15);
        assert!((r.width() - 1.0).abs() < 1e-15);
        assert!((r.diameter() - 17f64.sqrt()).abs() < 1e-12);
    }
}
