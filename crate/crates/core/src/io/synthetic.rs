//! Piecewise-planar test images with optional Gaussian noise.
//!
//! Regions and planes are expressed in normalized coordinates
//! `u = i / (rows - 1)`, `v = j / (cols - 1)` so a generator describes the same
//! picture at every size.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::affine::Plane;
use crate::formulation::GridInstance;
use crate::postprocess::GroundTruth;
use crate::{Error, Result};

/// `a * u + b * v <= c`, or `< c` when `strict`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub strict: bool,
}

impl HalfPlane {
    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c, strict: false }
    }

    /// Exactly the points not in `self`.
    pub fn complement(&self) -> Self {
        Self { a: -self.a, b: -self.b, c: -self.c, strict: !self.strict }
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        let s = self.a * u + self.b * v;
        if self.strict {
            s < self.c
        } else {
            s <= self.c
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionMask {
    /// Every node not claimed by another piece.
    Background,
    /// Intersection of half-planes.
    Convex(Vec<HalfPlane>),
    Disk {
        u: f64,
        v: f64,
        r: f64,
    },
}

impl RegionMask {
    fn contains(&self, u: f64, v: f64) -> bool {
        match self {
            RegionMask::Background => false,
            RegionMask::Convex(hs) => hs.iter().all(|h| h.contains(u, v)),
            RegionMask::Disk { u: cu, v: cv, r } => (u - cu).powi(2) + (v - cv).powi(2) <= r * r,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceSpec {
    pub region: RegionMask,
    /// Plane over `(u, v)`.
    pub plane: Plane,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub cols: usize,
    pub pieces: Vec<PieceSpec>,
    /// Noise variance.
    pub noise_sigma2: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticInstance {
    pub instance: GridInstance,
    pub truth: GroundTruth,
    /// Noisy values clipped back into `[0, 1]`.
    pub clipped: usize,
}

fn norm_coord(k: usize, len: usize) -> f64 {
    if len <= 1 {
        0.0
    } else {
        k as f64 / (len - 1) as f64
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticInstance> {
    if spec.noise_sigma2 < 0.0 || !spec.noise_sigma2.is_finite() {
        return Err(Error::InvalidParameter(format!("noise variance must be >= 0, got {}", spec.noise_sigma2)));
    }
    if spec.pieces.is_empty() {
        return Err(Error::InvalidParameter("synthetic spec has no pieces".into()));
    }
    let backgrounds: Vec<usize> =
        spec.pieces.iter().enumerate().filter(|(_, p)| p.region == RegionMask::Background).map(|(k, _)| k).collect();
    if backgrounds.len() > 1 {
        return Err(Error::InvalidParameter("at most one background piece".into()));
    }
    let (m, n) = (spec.rows, spec.cols);
    crate::grid::GridGraph::new(m, n)?;
    let mut labels = Vec::with_capacity(m * n);
    let mut clean = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            let (u, v) = (norm_coord(i, m), norm_coord(j, n));
            let mut owner = None;
            for (k, p) in spec.pieces.iter().enumerate() {
                if p.region.contains(u, v) {
                    if owner.is_some() {
                        return Err(Error::OverlappingMasks { row: i, col: j });
                    }
                    owner = Some(k);
                }
            }
            let k = owner
                .or(backgrounds.first().copied())
                .ok_or_else(|| Error::InvalidParameter(format!("node ({i}, {j}) is not covered by any piece")))?;
            let y = spec.pieces[k].plane.eval(u, v);
            if !(-1e-12..=1.0 + 1e-12).contains(&y) {
                return Err(Error::InvalidParameter(format!("clean value {y} at ({i}, {j}) is outside [0, 1]")));
            }
            labels.push(k);
            clean.push(y.clamp(0.0, 1.0));
        }
    }
    let mut clipped = 0;
    let noisy = if spec.noise_sigma2 > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_sigma2.sqrt()).expect("finite sigma");
        clean
            .iter()
            .map(|&c| {
                let y = c + normal.sample(&mut rng);
                if !(0.0..=1.0).contains(&y) {
                    clipped += 1;
                }
                y.clamp(0.0, 1.0)
            })
            .collect()
    } else {
        clean.clone()
    };
    Ok(SyntheticInstance { instance: GridInstance::new(m, n, noisy)?, truth: GroundTruth { labels, clean }, clipped })
}

/// Built-in generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    /// Four facets around a slightly tilted cross.
    Quadrants,
    /// Four facets cut by two oblique lines.
    Diagonals,
    /// Three vertical bands split by one horizontal line.
    Stripes,
}

impl Generator {
    pub const ALL: [Generator; 3] = [Generator::Quadrants, Generator::Diagonals, Generator::Stripes];

    pub fn name(&self) -> &'static str {
        match self {
            Generator::Quadrants => "quadrants",
            Generator::Diagonals => "diagonals",
            Generator::Stripes => "stripes",
        }
    }

    pub fn pieces(&self) -> Vec<PieceSpec> {
        let piece = |hs: Vec<HalfPlane>, a1, a2, b| PieceSpec { region: RegionMask::Convex(hs), plane: Plane::new(a1, a2, b) };
        match self {
            Generator::Quadrants => {
                let top = HalfPlane::new(1.0, -0.1, 0.45);
                let left = HalfPlane::new(0.1, 1.0, 0.55);
                vec![
                    piece(vec![top, left], 0.2, 0.1, 0.15),
                    piece(vec![top, left.complement()], 0.1, -0.1, 0.55),
                    piece(vec![top.complement(), left], -0.2, 0.05, 0.85),
                    piece(vec![top.complement(), left.complement()], -0.1, 0.1, 0.2),
                ]
            }
            Generator::Diagonals => {
                let a = HalfPlane::new(-0.5, 1.0, 0.25);
                let b = HalfPlane::new(1.0, 0.4, 0.7);
                vec![
                    piece(vec![a, b], 0.3, 0.1, 0.1),
                    piece(vec![a.complement(), b], -0.2, -0.2, 0.9),
                    piece(vec![a, b.complement()], 0.2, -0.3, 0.6),
                    piece(vec![a.complement(), b.complement()], -0.1, 0.1, 0.3),
                ]
            }
            Generator::Stripes => {
                let s1 = HalfPlane::new(-0.1, 1.0, 0.3);
                let s2 = HalfPlane::new(0.1, 1.0, 0.68);
                let h = HalfPlane::new(1.0, -0.1, 0.5);
                vec![
                    piece(vec![s1, h], 0.2, 0.2, 0.1),
                    piece(vec![s1.complement(), s2, h], -0.1, 0.1, 0.7),
                    piece(vec![s2.complement(), h], 0.1, 0.1, 0.25),
                    piece(vec![s1, h.complement()], -0.2, 0.0, 0.9),
                    piece(vec![s1.complement(), s2, h.complement()], 0.1, 0.1, 0.2),
                    piece(vec![s2.complement(), h.complement()], -0.1, 0.15, 0.75),
                ]
            }
        }
    }

    pub fn spec(&self, rows: usize, cols: usize, noise_sigma2: f64, seed: u64) -> SyntheticSpec {
        SyntheticSpec { rows, cols, pieces: self.pieces(), noise_sigma2, seed }
    }
}

impl std::str::FromStr for Generator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Generator::ALL.into_iter().find(|g| g.name() == s.trim()).ok_or_else(|| Error::InvalidParameter(format!("unknown generator `{s}`")))
    }
}
