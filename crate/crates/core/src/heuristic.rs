//! Region-fusion heuristic.
//!
//! Every node starts as its own segment carrying a local plane fit. Adjacent
//! segments are fused when their planes are close relative to their sizes and
//! shared boundary, under a threshold `kappa` that doubles each round until it
//! reaches the mean edge weight.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::affine::{FitKind, LsqStats, Plane};
use crate::formulation::{GridInstance, Params};
use crate::grid::{EdgeLabeling, GridGraph, NodeId};
use crate::postprocess::Segmentation;
use crate::{Error, Result};

/// Distances below this are treated as equal parameters.
const PARAM_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeAffineInit {
    pub params: Plane,
    /// Top-left node of the winning group (first node of the window on chains).
    pub source_group: (usize, usize),
    pub mse: f64,
}

/// Candidate groups containing node `(i, j)`, as `(top-left, size)` pairs.
fn candidate_groups(g: &GridGraph, i: usize, j: usize) -> Vec<((usize, usize), (usize, usize))> {
    let (m, n) = (g.rows(), g.cols());
    let starts = |k: usize, len: usize, win: usize| -> Vec<usize> {
        if len <= win {
            return vec![0];
        }
        (k.saturating_sub(win - 1)..=k.min(len - win)).collect()
    };
    if m >= 2 && n >= 2 {
        let mut out = Vec::with_capacity(4);
        for a in starts(i, m, 2) {
            for b in starts(j, n, 2) {
                out.push(((a, b), (2, 2)));
            }
        }
        out
    } else if m == 1 {
        starts(j, n, 3).into_iter().map(|b| ((0, b), (1, 3.min(n)))).collect()
    } else {
        starts(i, m, 3).into_iter().map(|a| ((a, 0), (3.min(m), 1))).collect()
    }
}

fn group_points(inst: &GridInstance, (a, b): (usize, usize), (h, w): (usize, usize)) -> Vec<(f64, f64, f64)> {
    (a..a + h).flat_map(|i| (b..b + w).map(move |j| (i, j))).map(|(i, j)| (i as f64, j as f64, inst.value(i, j))).collect()
}

/// Per-node plane from the best-fitting 2x2 group containing the node.
///
/// Chains use windows of three consecutive nodes instead.
pub fn init_node_params(instance: &GridInstance) -> Result<Vec<NodeAffineInit>> {
    let g = instance.graph();
    let mut out = Vec::with_capacity(g.num_nodes());
    for v in 0..g.num_nodes() {
        let (i, j) = g.coords(v);
        let mut best: Option<NodeAffineInit> = None;
        for (origin, size) in candidate_groups(g, i, j) {
            let pts = group_points(instance, origin, size);
            let (plane, _) = LsqStats::from_points(pts.iter().copied()).fit();
            let mse = pts.iter().map(|&(z1, z2, y)| (plane.eval(z1, z2) - y).powi(2)).sum::<f64>() / pts.len() as f64;
            if best.map_or(true, |b| mse < b.mse) {
                best = Some(NodeAffineInit { params: plane, source_group: origin, mse });
            }
        }
        out.push(best.ok_or_else(|| Error::InvalidInstance("grid too small for group fitting".into()))?);
    }
    Ok(out)
}

/// `tau_i * tau_j * |Y_i - Y_j| <= kappa * gamma_ij * (tau_i + tau_j)`.
pub fn merge_test(tau_i: usize, tau_j: usize, y_i: &Plane, y_j: &Plane, gamma_ij: usize, kappa: f64) -> bool {
    let mut d = y_i.distance(y_j);
    if d <= PARAM_EPS {
        d = 0.0;
    }
    let lhs = (tau_i as f64) * (tau_j as f64) * d;
    let rhs = kappa * (gamma_ij as f64) * ((tau_i + tau_j) as f64);
    lhs <= rhs
}

/// Geometric threshold schedule ending at `target`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub rounds: u32,
    pub growth: f64,
    /// Final threshold; `None` uses the mean edge weight.
    pub target: Option<f64>,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { rounds: 16, growth: 2.0, target: None }
    }
}

impl Schedule {
    /// `kappa_t = target / growth^rounds * growth^t` for `t = 0..=rounds`.
    pub fn kappas(&self, params: &Params) -> Vec<f64> {
        let target = self.target.unwrap_or_else(|| params.mean_lambda());
        let k0 = target / self.growth.powi(self.rounds as i32);
        (0..=self.rounds).map(|t| if t == self.rounds { target } else { k0 * self.growth.powi(t as i32) }).collect()
    }
}

#[derive(Clone, Debug)]
struct Segment {
    tau: usize,
    stats: LsqStats,
    y: Plane,
    members: Vec<NodeId>,
    gamma: BTreeMap<usize, usize>,
}

/// Mutable fusion state, exposed for inspection in tests.
#[derive(Clone, Debug)]
pub struct HeuristicState {
    segment_of: Vec<usize>,
    segments: Vec<Option<Segment>>,
    pub kappa: f64,
    pub merges: usize,
}

impl HeuristicState {
    pub fn new(instance: &GridInstance) -> Result<Self> {
        let g = instance.graph();
        let init = init_node_params(instance)?;
        let mut segments: Vec<Option<Segment>> = (0..g.num_nodes())
            .map(|v| {
                let (i, j) = g.coords(v);
                Some(Segment {
                    tau: 1,
                    stats: LsqStats::from_points([(i as f64, j as f64, instance.values()[v])]),
                    y: init[v].params,
                    members: vec![v],
                    gamma: BTreeMap::new(),
                })
            })
            .collect();
        for e in 0..g.num_edges() {
            let (u, v) = g.endpoints(e);
            *segments[u].as_mut().unwrap().gamma.entry(v).or_default() += 1;
            *segments[v].as_mut().unwrap().gamma.entry(u).or_default() += 1;
        }
        Ok(Self { segment_of: (0..g.num_nodes()).collect(), segments, kappa: 0.0, merges: 0 })
    }

    pub fn segment_of(&self, v: NodeId) -> usize {
        self.segment_of[v]
    }

    pub fn tau(&self, s: usize) -> usize {
        self.seg(s).tau
    }

    pub fn params_of(&self, s: usize) -> Plane {
        self.seg(s).y
    }

    pub fn gamma(&self, a: usize, b: usize) -> usize {
        self.seg(a).gamma.get(&b).copied().unwrap_or(0)
    }

    pub fn neighbors(&self, s: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.seg(s).gamma.iter().map(|(&k, &v)| (k, v))
    }

    pub fn live_segments(&self) -> impl Iterator<Item = usize> + '_ {
        self.segments.iter().enumerate().filter_map(|(k, s)| s.as_ref().map(|_| k))
    }

    pub fn members(&self, s: usize) -> &[NodeId] {
        &self.seg(s).members
    }

    fn seg(&self, s: usize) -> &Segment {
        self.segments[s].as_ref().expect("live segment")
    }

    /// One scan over the edges at threshold `kappa`.
    pub fn sweep(&mut self, g: &GridGraph, kappa: f64) -> usize {
        self.kappa = kappa;
        let mut merged = 0;
        for e in 0..g.num_edges() {
            let (u, v) = g.endpoints(e);
            let (a, b) = (self.segment_of[u], self.segment_of[v]);
            if a == b {
                continue;
            }
            let (sa, sb) = (self.seg(a), self.seg(b));
            let gamma = sa.gamma.get(&b).copied().unwrap_or(0);
            if merge_test(sa.tau, sb.tau, &sa.y, &sb.y, gamma, kappa) {
                self.merge(a, b);
                merged += 1;
            }
        }
        self.merges += merged;
        merged
    }

    fn merge(&mut self, a: usize, b: usize) {
        let (keep, gone) = {
            let (ta, tb) = (self.seg(a).tau, self.seg(b).tau);
            if ta > tb || (ta == tb && a < b) {
                (a, b)
            } else {
                (b, a)
            }
        };
        let g_seg = self.segments[gone].take().expect("live segment");
        for &v in &g_seg.members {
            self.segment_of[v] = keep;
        }
        for (&l, &cnt) in &g_seg.gamma {
            if l == keep {
                continue;
            }
            let other = self.segments[l].as_mut().expect("live neighbour");
            other.gamma.remove(&gone);
            *other.gamma.entry(keep).or_default() += cnt;
        }
        let k = self.segments[keep].as_mut().expect("live segment");
        k.gamma.remove(&gone);
        for (&l, &cnt) in &g_seg.gamma {
            if l != keep {
                *k.gamma.entry(l).or_default() += cnt;
            }
        }
        let (tk, tg) = (k.tau as f64, g_seg.tau as f64);
        let blended = Plane::new(
            (tk * k.y.a1 + tg * g_seg.y.a1) / (tk + tg),
            (tk * k.y.a2 + tg * g_seg.y.a2) / (tk + tg),
            (tk * k.y.b + tg * g_seg.y.b) / (tk + tg),
        );
        k.tau += g_seg.tau;
        k.stats.merge(&g_seg.stats);
        k.members.extend_from_slice(&g_seg.members);
        let (fit, kind) = k.stats.fit();
        k.y = if k.tau >= 3 && kind == FitKind::Plane { fit } else { blended };
    }

    pub fn labels(&self) -> Vec<usize> {
        self.segment_of.clone()
    }
}

/// Run the full schedule and return the segmentation and its edge labeling.
pub fn region_fusion(instance: &GridInstance, params: &Params, schedule: &Schedule) -> Result<(Segmentation, EdgeLabeling)> {
    let g = instance.graph();
    let mut state = HeuristicState::new(instance)?;
    for kappa in schedule.kappas(params) {
        state.sweep(g, kappa);
    }
    log::debug!("region fusion: {} merges, {} segments", state.merges, state.live_segments().count());
    let seg = Segmentation::from_labels(g, &state.labels())?;
    let x = segmentation_to_edges(&seg, g);
    Ok((seg, x))
}

/// Active exactly on edges whose endpoints carry different labels.
pub fn segmentation_to_edges(seg: &Segmentation, g: &GridGraph) -> EdgeLabeling {
    let bits = (0..g.num_edges())
        .map(|e| {
            let (u, v) = g.endpoints(e);
            seg.labels[u] != seg.labels[v]
        })
        .collect();
    EdgeLabeling::from_bools(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::compute_lambda;

    fn plane_image(m: usize, n: usize, f: impl Fn(usize, usize) -> f64) -> GridInstance {
        let y = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| f(i, j)).collect();
        GridInstance::new(m, n, y).unwrap()
    }

    #[test]
    fn exact_plane_init() {
        let inst = plane_image(4, 5, |i, j| 0.1 * i as f64 + 0.1 * j as f64 + 0.05);
        for init in init_node_params(&inst).unwrap() {
            assert!(init.mse < 1e-24);
            assert!(init.params.distance(&Plane::new(0.1, 0.1, 0.05)) < 1e-9);
        }
    }

    #[test]
    fn group_counts() {
        let g = GridGraph::new(3, 3).unwrap();
        assert_eq!(candidate_groups(&g, 0, 0).len(), 1);
        assert_eq!(candidate_groups(&g, 0, 1).len(), 2);
        assert_eq!(candidate_groups(&g, 1, 1).len(), 4);
        assert_eq!(candidate_groups(&g, 2, 2), vec![((1, 1), (2, 2))]);
        let c = GridGraph::chain(5).unwrap();
        assert_eq!(candidate_groups(&c, 0, 0).len(), 1);
        assert_eq!(candidate_groups(&c, 0, 2).len(), 3);
    }

    #[test]
    fn merge_test_examples() {
        let y = Plane::new(0.1, 0.2, 0.3);
        assert!(merge_test(50, 70, &y, &y, 1, 0.0));
        let yj = Plane::new(0.1, 0.2, 0.8);
        assert!(!merge_test(2, 3, &y, &yj, 2, 0.1));
        assert!(merge_test(2, 3, &y, &yj, 2, 0.3));
        assert!(!merge_test(1, 1, &y, &yj, 1, 0.0));
    }

    #[test]
    fn schedule_ends_at_target() {
        let inst = plane_image(3, 3, |i, j| if j > 0 { 0.8 } else { 0.1 * i as f64 });
        let p = compute_lambda(&inst, 0.5).unwrap();
        let ks = Schedule::default().kappas(&p);
        assert_eq!(ks.len(), 17);
        assert_eq!(*ks.last().unwrap(), p.mean_lambda());
        assert!(ks.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn constant_image_single_segment() {
        let inst = plane_image(5, 6, |_, _| 0.4);
        let p = Params::uniform(inst.graph(), 0.1).unwrap();
        let (seg, x) = region_fusion(&inst, &p, &Schedule::default()).unwrap();
        assert_eq!(seg.num_segments(), 1);
        assert_eq!(x.count_active(), 0);
    }

    #[test]
    fn gamma_bookkeeping() {
        let inst = plane_image(3, 3, |i, j| (i * 3 + j) as f64 / 8.0);
        let g = *inst.graph();
        let mut st = HeuristicState::new(&inst).unwrap();
        assert_eq!(st.gamma(0, 1), 1);
        st.merge(0, 1);
        let k = st.segment_of(0);
        assert_eq!(st.segment_of(1), k);
        // {0,1} touches 2, 3 and 4 once each.
        assert_eq!(st.gamma(k, 3), 1);
        assert_eq!(st.gamma(k, 4), 1);
        assert_eq!(st.gamma(k, 2), 1);
        st.merge(k, 4);
        let k = st.segment_of(4);
        assert_eq!(st.gamma(k, 3), 2);
        assert_eq!(st.gamma(3, k), 2);
        let total: usize = st.live_segments().map(|s| st.tau(s)).sum();
        assert_eq!(total, g.num_nodes());
    }

    #[test]
    fn singleton_and_single_edges() {
        let g = GridGraph::new(3, 4).unwrap();
        let one = Segmentation::from_labels(&g, &[0; 12]).unwrap();
        assert_eq!(segmentation_to_edges(&one, &g).count_active(), 0);
        let all = Segmentation::from_labels(&g, &(0..12).collect::<Vec<_>>()).unwrap();
        assert_eq!(segmentation_to_edges(&all, &g).count_active(), g.num_edges());
    }
}
