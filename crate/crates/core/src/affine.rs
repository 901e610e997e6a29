//! Least-squares planes over grid coordinates.
//!
//! Coordinates are pixel indices: `z1` is the row `i`, `z2` the column `j`.

use serde::{Deserialize, Serialize};

/// `y = a1 * z1 + a2 * z2 + b`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub a1: f64,
    pub a2: f64,
    pub b: f64,
}

impl Plane {
    pub const fn new(a1: f64, a2: f64, b: f64) -> Self {
        Self { a1, a2, b }
    }

    pub const fn constant(b: f64) -> Self {
        Self { a1: 0.0, a2: 0.0, b }
    }

    #[inline]
    pub fn eval(&self, z1: f64, z2: f64) -> f64 {
        self.a1 * z1 + self.a2 * z2 + self.b
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.a1, self.a2, self.b]
    }

    /// Euclidean distance between parameter triples.
    pub fn distance(&self, other: &Plane) -> f64 {
        let d = [self.a1 - other.a1, self.a2 - other.a2, self.b - other.b];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }
}

/// Which coordinates a point set actually spans.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    Plane,
    /// All points share one row; only the slope along `z2` is determined.
    LineAlongCols,
    /// All points share one column; only the slope along `z1` is determined.
    LineAlongRows,
    Constant,
}

const DEGENERACY_TOL: f64 = 1e-9;

/// Running sums sufficient for an ordinary least-squares plane fit.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LsqStats {
    pub n: f64,
    s1: f64,
    s2: f64,
    sy: f64,
    s11: f64,
    s12: f64,
    s22: f64,
    s1y: f64,
    s2y: f64,
    syy: f64,
}

impl LsqStats {
    pub fn from_points(points: impl IntoIterator<Item = (f64, f64, f64)>) -> Self {
        let mut s = Self::default();
        for (z1, z2, y) in points {
            s.add(z1, z2, y);
        }
        s
    }

    pub fn add(&mut self, z1: f64, z2: f64, y: f64) {
        self.n += 1.0;
        self.s1 += z1;
        self.s2 += z2;
        self.sy += y;
        self.s11 += z1 * z1;
        self.s12 += z1 * z2;
        self.s22 += z2 * z2;
        self.s1y += z1 * y;
        self.s2y += z2 * y;
        self.syy += y * y;
    }

    pub fn merge(&mut self, o: &LsqStats) {
        self.n += o.n;
        self.s1 += o.s1;
        self.s2 += o.s2;
        self.sy += o.sy;
        self.s11 += o.s11;
        self.s12 += o.s12;
        self.s22 += o.s22;
        self.s1y += o.s1y;
        self.s2y += o.s2y;
        self.syy += o.syy;
    }

    pub fn kind(&self) -> FitKind {
        if self.n < 1.0 {
            return FitKind::Constant;
        }
        let (c11, c22, c12) = self.centered();
        let spans1 = c11 > DEGENERACY_TOL;
        let spans2 = c22 > DEGENERACY_TOL;
        match (spans1, spans2) {
            (true, true) if c11 * c22 - c12 * c12 > DEGENERACY_TOL * c11 * c22 => FitKind::Plane,
            (true, true) => FitKind::Constant,
            (true, false) => FitKind::LineAlongRows,
            (false, true) => FitKind::LineAlongCols,
            (false, false) => FitKind::Constant,
        }
    }

    fn centered(&self) -> (f64, f64, f64) {
        let n = self.n;
        (self.s11 - self.s1 * self.s1 / n, self.s22 - self.s2 * self.s2 / n, self.s12 - self.s1 * self.s2 / n)
    }

    /// Least-squares fit over whatever directions the points span; unspanned
    /// slopes are 0.
    pub fn fit(&self) -> (Plane, FitKind) {
        let kind = self.kind();
        if self.n < 1.0 {
            return (Plane::default(), kind);
        }
        let n = self.n;
        let (m1, m2, my) = (self.s1 / n, self.s2 / n, self.sy / n);
        let (c11, c22, c12) = self.centered();
        let c1y = self.s1y - self.s1 * self.sy / n;
        let c2y = self.s2y - self.s2 * self.sy / n;
        let (a1, a2) = match kind {
            FitKind::Plane => {
                let det = c11 * c22 - c12 * c12;
                ((c1y * c22 - c2y * c12) / det, (c2y * c11 - c1y * c12) / det)
            }
            FitKind::LineAlongRows => (c1y / c11, 0.0),
            FitKind::LineAlongCols => (0.0, c2y / c22),
            FitKind::Constant => (0.0, 0.0),
        };
        (Plane::new(a1, a2, my - a1 * m1 - a2 * m2), kind)
    }

    /// Sum of squared residuals of `p` over the accumulated points.
    pub fn sse(&self, p: &Plane) -> f64 {
        let (a1, a2, b) = (p.a1, p.a2, p.b);
        let v = self.syy - 2.0 * (a1 * self.s1y + a2 * self.s2y + b * self.sy)
            + a1 * a1 * self.s11
            + a2 * a2 * self.s22
            + b * b * self.n
            + 2.0 * (a1 * a2 * self.s12 + a1 * b * self.s1 + a2 * b * self.s2);
        v.max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_plane() {
        let p = Plane::new(0.1, 0.2, 0.05);
        let s = LsqStats::from_points((0..3).flat_map(|i| (0..4).map(move |j| (i as f64, j as f64, p.eval(i as f64, j as f64)))));
        let (q, k) = s.fit();
        assert_eq!(k, FitKind::Plane);
        assert!(q.distance(&p) < 1e-12);
        assert!(s.sse(&q) < 1e-12);
    }

    #[test]
    fn degenerate_kinds() {
        let row = LsqStats::from_points([(2.0, 0.0, 0.0), (2.0, 1.0, 0.5), (2.0, 2.0, 1.0)]);
        let (p, k) = row.fit();
        assert_eq!(k, FitKind::LineAlongCols);
        assert!((p.a2 - 0.5).abs() < 1e-12 && p.a1 == 0.0 && p.b.abs() < 1e-12);

        let col = LsqStats::from_points([(0.0, 3.0, 1.0), (1.0, 3.0, 0.0)]);
        assert_eq!(col.fit().1, FitKind::LineAlongRows);

        let one = LsqStats::from_points([(4.0, 4.0, 0.25)]);
        let (p, k) = one.fit();
        assert_eq!(k, FitKind::Constant);
        assert_eq!(p, Plane::constant(0.25));
    }

    #[test]
    fn merge_equals_batch() {
        let pts = [(0.0, 0.0, 0.3), (0.0, 1.0, 0.1), (1.0, 0.0, 0.9), (1.0, 1.0, 0.4), (2.0, 1.0, 0.2)];
        let mut a = LsqStats::from_points(pts[..2].iter().copied());
        a.merge(&LsqStats::from_points(pts[2..].iter().copied()));
        let b = LsqStats::from_points(pts.iter().copied());
        let (pa, _) = a.fit();
        let (pb, _) = b.fit();
        assert!(pa.distance(&pb) < 1e-12);
    }

    #[test]
    fn distance_is_euclidean() {
        assert_eq!(Plane::new(0.0, 3.0, 0.0).distance(&Plane::new(0.0, 0.0, 4.0)), 5.0);
    }
}
