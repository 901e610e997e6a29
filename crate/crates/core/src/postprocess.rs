//! Segmentations, per-segment affine reconstruction and quality metrics.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::affine::{FitKind, LsqStats, Plane};
use crate::formulation::{Constraint, ConstraintTag, GridInstance, LinearModel, VarType};
use crate::grid::{EdgeId, EdgeLabeling, GridGraph, NodeId};
use crate::separation::FitSolution;
use crate::solver::{backend_from_env, LinearBackend, SolveLimits, SolveStatus};
use crate::{Error, Result};

/// A partition of the grid nodes.
///
/// Labels are canonical: dense, in order of first appearance in row-major order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub labels: Vec<usize>,
    pub segments: Vec<Vec<NodeId>>,
    pub boundary: Vec<EdgeId>,
}

impl Segmentation {
    pub fn from_labels(g: &GridGraph, labels: &[usize]) -> Result<Self> {
        if labels.len() != g.num_nodes() {
            return Err(Error::DimensionMismatch { what: "label map", expected: g.num_nodes(), found: labels.len() });
        }
        let mut remap = HashMap::new();
        let mut canon = Vec::with_capacity(labels.len());
        let mut segments: Vec<Vec<NodeId>> = Vec::new();
        for (v, l) in labels.iter().enumerate() {
            let next = remap.len();
            let c = *remap.entry(*l).or_insert(next);
            if c == segments.len() {
                segments.push(Vec::new());
            }
            segments[c].push(v);
            canon.push(c);
        }
        let boundary = (0..g.num_edges())
            .filter(|&e| {
                let (u, v) = g.endpoints(e);
                canon[u] != canon[v]
            })
            .collect();
        Ok(Self { labels: canon, segments, boundary })
    }

    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn boundary_length(&self) -> usize {
        self.boundary.len()
    }
}

/// Segments are the components of the dormant-edge subgraph. Fails when an
/// active edge lies inside a component.
pub fn labels_from_edges(g: &GridGraph, x: &EdgeLabeling) -> Result<Segmentation> {
    if x.len() != g.num_edges() {
        return Err(Error::DimensionMismatch { what: "edge labeling", expected: g.num_edges(), found: x.len() });
    }
    let comp = g.connected_components(x);
    let seg = Segmentation::from_labels(g, &comp)?;
    let active: Vec<EdgeId> = x.active_edges().collect();
    if seg.boundary != active {
        let violated = active.len() - seg.boundary.len();
        return Err(Error::InfeasibleLabeling { violated });
    }
    Ok(seg)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Norm {
    #[default]
    L1,
    L2,
}

impl std::str::FromStr for Norm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            other => Err(Error::InvalidParameter(format!("unknown norm `{other}` (expected l1 or l2)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub segment_id: usize,
    pub a1: f64,
    pub a2: f64,
    pub b: f64,
    /// Sum of absolute residuals over the segment.
    pub fit_residual: f64,
}

impl AffinePiece {
    pub fn plane(&self) -> Plane {
        Plane::new(self.a1, self.a2, self.b)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub pieces: Vec<AffinePiece>,
    /// Piecewise affine image assembled from `pieces`.
    pub f: Vec<f64>,
}

fn segment_stats(inst: &GridInstance, members: &[NodeId]) -> LsqStats {
    let g = inst.graph();
    LsqStats::from_points(members.iter().map(|&v| {
        let (i, j) = g.coords(v);
        (i as f64, j as f64, inst.values()[v])
    }))
}

pub fn fit_pieces(instance: &GridInstance, seg: &Segmentation, norm: Norm) -> Result<Reconstruction> {
    match norm {
        Norm::L2 => fit_pieces_l2(instance, seg),
        Norm::L1 => fit_pieces_with(backend_from_env()?.as_ref(), instance, seg, norm),
    }
}

/// As [`fit_pieces`], with an explicit backend for the L1 program.
pub fn fit_pieces_with(backend: &dyn LinearBackend, instance: &GridInstance, seg: &Segmentation, norm: Norm) -> Result<Reconstruction> {
    check_shapes(instance, seg)?;
    let planes = match norm {
        Norm::L2 => seg.segments.iter().map(|m| segment_stats(instance, m).fit().0).collect(),
        Norm::L1 => l1_planes(backend, instance, seg)?,
    };
    Ok(assemble(instance, seg, planes))
}

fn fit_pieces_l2(instance: &GridInstance, seg: &Segmentation) -> Result<Reconstruction> {
    check_shapes(instance, seg)?;
    let planes = seg.segments.iter().map(|m| segment_stats(instance, m).fit().0).collect();
    Ok(assemble(instance, seg, planes))
}

fn check_shapes(instance: &GridInstance, seg: &Segmentation) -> Result<()> {
    let n = instance.graph().num_nodes();
    if seg.labels.len() != n {
        return Err(Error::DimensionMismatch { what: "segmentation", expected: n, found: seg.labels.len() });
    }
    Ok(())
}

fn assemble(instance: &GridInstance, seg: &Segmentation, planes: Vec<Plane>) -> Reconstruction {
    let g = instance.graph();
    let mut f = vec![0.0; g.num_nodes()];
    let pieces = seg
        .segments
        .iter()
        .zip(planes)
        .enumerate()
        .map(|(k, (members, p))| {
            let mut res = 0.0;
            for &v in members {
                let (i, j) = g.coords(v);
                f[v] = p.eval(i as f64, j as f64);
                res += (f[v] - instance.values()[v]).abs();
            }
            AffinePiece { segment_id: k, a1: p.a1, a2: p.a2, b: p.b, fit_residual: res }
        })
        .collect();
    Reconstruction { pieces, f }
}

/// Least-absolute-deviation planes for all segments in one block-diagonal LP.
fn l1_planes(backend: &dyn LinearBackend, instance: &GridInstance, seg: &Segmentation) -> Result<Vec<Plane>> {
    let g = instance.graph();
    let mut lp = LinearModel::default();
    let mut cols: Vec<Option<[usize; 3]>> = Vec::with_capacity(seg.num_segments());
    let mut planes = vec![Plane::default(); seg.num_segments()];
    for (k, members) in seg.segments.iter().enumerate() {
        let stats = segment_stats(instance, members);
        let kind = stats.kind();
        if members.len() == 1 {
            planes[k] = Plane::constant(instance.values()[members[0]]);
            cols.push(None);
            continue;
        }
        let free = |on: bool| if on { (f64::NEG_INFINITY, f64::INFINITY) } else { (0.0, 0.0) };
        let (l1, u1) = free(matches!(kind, FitKind::Plane | FitKind::LineAlongRows));
        let (l2, u2) = free(matches!(kind, FitKind::Plane | FitKind::LineAlongCols));
        let a1 = lp.add_var(format!("a1_{k}"), VarType::Continuous, l1, u1, 0.0);
        let a2 = lp.add_var(format!("a2_{k}"), VarType::Continuous, l2, u2, 0.0);
        let b = lp.add_var(format!("b_{k}"), VarType::Continuous, f64::NEG_INFINITY, f64::INFINITY, 0.0);
        for &v in members {
            let (i, j) = g.coords(v);
            let ep = lp.add_var(format!("ep_{v}"), VarType::Continuous, 0.0, f64::INFINITY, 1.0);
            let em = lp.add_var(format!("em_{v}"), VarType::Continuous, 0.0, f64::INFINITY, 1.0);
            let y = instance.values()[v];
            lp.add_constraint(Constraint {
                name: format!("fit_{v}"),
                terms: vec![(a1, i as f64), (a2, j as f64), (b, 1.0), (ep, -1.0), (em, 1.0)],
                lower: y,
                upper: y,
                tag: ConstraintTag::ResidualLink,
            });
        }
        cols.push(Some([a1, a2, b]));
    }
    if lp.vars.is_empty() {
        return Ok(planes);
    }
    let mut handle = backend.load(&lp)?;
    let sol = handle.solve(&SolveLimits::new(3600.0, 0.0)?)?;
    let values = match (sol.status, sol.values) {
        (SolveStatus::Optimal, Some(v)) => v,
        (status, _) => return Err(Error::Backend(format!("piece fitting LP ended with status {status}"))),
    };
    for (k, c) in cols.iter().enumerate() {
        if let Some([a1, a2, b]) = *c {
            planes[k] = Plane::new(values[a1], values[a2], values[b]);
        }
    }
    Ok(planes)
}

/// Clean reference data for a synthetic instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub labels: Vec<usize>,
    pub clean: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub objective: f64,
    /// `sum |w - y|`.
    pub fit_term: f64,
    /// `sum lambda_e x_e`.
    pub regularization_term: f64,
    pub segments: usize,
    pub boundary_length: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub best_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub node_count: Option<u64>,
    pub cuts_added: usize,
    pub rounds: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rand_index: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exact_match: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mae_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mae_f: Option<f64>,
}

fn pairs(k: u64) -> f64 {
    (k as f64) * (k.saturating_sub(1) as f64) / 2.0
}

/// Fraction of node pairs on which two labelings agree (same/different).
pub fn rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { what: "label map", expected: a.len(), found: b.len() });
    }
    let n = a.len() as u64;
    if n < 2 {
        return Ok(1.0);
    }
    let mut joint: HashMap<(usize, usize), u64> = HashMap::new();
    let mut ra: HashMap<usize, u64> = HashMap::new();
    let mut rb: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *ra.entry(x).or_default() += 1;
        *rb.entry(y).or_default() += 1;
    }
    let sj: f64 = joint.values().map(|&c| pairs(c)).sum();
    let sa: f64 = ra.values().map(|&c| pairs(c)).sum();
    let sb: f64 = rb.values().map(|&c| pairs(c)).sum();
    let total = pairs(n);
    Ok((total + 2.0 * sj - sa - sb) / total)
}

fn mae(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len().max(1) as f64
}

pub fn evaluate(
    instance: &GridInstance,
    solution: &FitSolution,
    seg: &Segmentation,
    recon: &Reconstruction,
    ground_truth: Option<&GroundTruth>,
) -> Result<Metrics> {
    let g = instance.graph();
    let n = g.num_nodes();
    for (what, len) in [("fitted values", solution.w.len()), ("segmentation", seg.labels.len()), ("reconstruction", recon.f.len())] {
        if len != n {
            return Err(Error::DimensionMismatch { what, expected: n, found: len });
        }
    }
    if solution.x.len() != g.num_edges() {
        return Err(Error::DimensionMismatch { what: "edge labeling", expected: g.num_edges(), found: solution.x.len() });
    }
    let fit_term: f64 = solution.w.iter().zip(instance.values()).map(|(w, y)| (w - y).abs()).sum();
    let regularization_term: f64 = solution.x.active_edges().map(|e| solution.params.edge_weight(g, e)).sum();
    let mut m = Metrics {
        objective: solution.objective,
        fit_term,
        regularization_term,
        segments: seg.num_segments(),
        boundary_length: seg.boundary_length(),
        best_bound: solution.best_bound,
        gap: solution.gap,
        node_count: solution.node_count,
        cuts_added: solution.cuts_added(),
        rounds: solution.rounds.len(),
        rand_index: None,
        exact_match: None,
        mae_w: None,
        mae_f: None,
    };
    if let Some(gt) = ground_truth {
        if gt.labels.len() != n || gt.clean.len() != n {
            return Err(Error::DimensionMismatch { what: "ground truth", expected: n, found: gt.labels.len().min(gt.clean.len()) });
        }
        let truth = Segmentation::from_labels(g, &gt.labels)?;
        m.rand_index = Some(rand_index(&seg.labels, &truth.labels)?);
        m.exact_match = Some(truth.labels == seg.labels);
        m.mae_w = Some(mae(&solution.w, &gt.clean));
        m.mae_f = Some(mae(&recon.f, &gt.clean));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_from_edges_examples() {
        let g = GridGraph::new(3, 3).unwrap();
        assert_eq!(labels_from_edges(&g, &EdgeLabeling::all_dormant(12)).unwrap().num_segments(), 1);
        let all = labels_from_edges(&g, &EdgeLabeling::all_active(12)).unwrap();
        assert_eq!(all.num_segments(), 9);
        assert_eq!(all.boundary_length(), 12);
        let mut one = EdgeLabeling::all_dormant(12);
        one.set(0, true);
        assert!(matches!(labels_from_edges(&g, &one), Err(Error::InfeasibleLabeling { violated: 1 })));
    }

    #[test]
    fn canonical_labels() {
        let g = GridGraph::new(2, 2).unwrap();
        let s = Segmentation::from_labels(&g, &[7, 7, 3, 7]).unwrap();
        assert_eq!(s.labels, vec![0, 0, 1, 0]);
        assert_eq!(s.segments, vec![vec![0, 1, 3], vec![2]]);
        assert_eq!(s.boundary, vec![g.row_edge(1, 0), g.col_edge(0, 0)]);
    }

    #[test]
    fn rand_index_values() {
        assert_eq!(rand_index(&[0, 0, 1, 1], &[5, 5, 2, 2]).unwrap(), 1.0);
        // pairs: (01 same/same) (23 same/diff) others diff/diff except (02..)
        let ri = rand_index(&[0, 0, 1, 1], &[0, 0, 1, 2]).unwrap();
        assert!((ri - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(rand_index(&[3], &[4]).unwrap(), 1.0);
    }

    #[test]
    fn l2_single_node_constant() {
        let inst = GridInstance::new(2, 2, vec![0.1, 0.2, 0.3, 0.9]).unwrap();
        let seg = Segmentation::from_labels(inst.graph(), &[0, 0, 0, 1]).unwrap();
        let r = fit_pieces(&inst, &seg, Norm::L2).unwrap();
        assert_eq!(r.pieces[1].plane(), Plane::constant(0.9));
        assert!(r.pieces[0].fit_residual < 1e-12);
        assert!((r.f[3] - 0.9).abs() < 1e-15);
    }
}
