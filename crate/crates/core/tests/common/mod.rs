//! Independent reference computations shared by the integration tests.
//!
//! Nothing here goes through the library's model builder, separation or
//! solver code; grid adjacency and edge ids are re-derived from scratch.
#![allow(dead_code)]

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BIG_M: f64 = 2.0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Minimum of `sum |a z + b - y|` over all lines. An optimal L1 line passes
/// through two of the points, so trying every pair is exhaustive.
pub fn l1_line_fit(z: &[f64], y: &[f64]) -> f64 {
    let n = z.len();
    if n <= 2 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for p in 0..n {
        for q in p + 1..n {
            let a = (y[q] - y[p]) / (z[q] - z[p]);
            let b = y[p] - a * z[p];
            let cost: f64 = z.iter().zip(y).map(|(&zi, &yi)| (a * zi + b - yi).abs()).sum();
            best = best.min(cost);
        }
    }
    best
}

/// Objective of every labeling of a chain, indexed by the bit pattern of the
/// `n - 1` edges (bit `k` = edge between node `k` and `k + 1`).
pub fn chain_labeling_values(y: &[f64], lambda: f64) -> Vec<f64> {
    let n = y.len();
    let edges = n - 1;
    (0u32..1 << edges)
        .map(|mask| {
            let mut total = lambda * mask.count_ones() as f64;
            let mut start = 0;
            for k in 0..=edges {
                if k == edges || mask >> k & 1 == 1 {
                    let z: Vec<f64> = (start..=k).map(|i| i as f64).collect();
                    total += l1_line_fit(&z, &y[start..=k]);
                    start = k + 1;
                }
            }
            total
        })
        .collect()
}

pub fn chain_optimum(y: &[f64], lambda: f64) -> f64 {
    chain_labeling_values(y, lambda).into_iter().fold(f64::INFINITY, f64::min)
}

/// Edge list of an `m x n` grid: row edges row-major, then column edges.
pub fn grid_edges(m: usize, n: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for i in 0..m {
        for j in 0..n - 1 {
            e.push((i * n + j, i * n + j + 1));
        }
    }
    for i in 0..m - 1 {
        for j in 0..n {
            e.push((i * n + j, (i + 1) * n + j));
        }
    }
    e
}

fn find(parent: &mut [usize], mut v: usize) -> usize {
    while parent[v] != v {
        parent[v] = parent[parent[v]];
        v = parent[v];
    }
    v
}

/// Component label per node using dormant edges only.
pub fn dormant_components(num_nodes: usize, edges: &[(usize, usize)], active: &[bool]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..num_nodes).collect();
    for (k, &(a, b)) in edges.iter().enumerate() {
        if !active[k] {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
    }
    (0..num_nodes).map(|v| find(&mut parent, v)).collect()
}

/// A labeling is a multicut exactly when no active edge joins two nodes of
/// the same dormant component.
pub fn is_multicut(num_nodes: usize, edges: &[(usize, usize)], active: &[bool]) -> bool {
    let comp = dormant_components(num_nodes, edges, active);
    edges.iter().zip(active).all(|(&(a, b), &on)| !on || comp[a] != comp[b])
}

pub fn mask_to_bools(mask: u64, len: usize) -> Vec<bool> {
    (0..len).map(|k| mask >> k & 1 == 1).collect()
}

/// Second-difference triples `(prev, mid, next, edge_a, edge_b)` of a grid.
fn triples(m: usize, n: usize) -> Vec<[usize; 5]> {
    let row_edge = |i: usize, j: usize| i * (n - 1) + j;
    let col_edge = |i: usize, j: usize| m * (n - 1) + i * n + j;
    let mut t = Vec::new();
    for i in 0..m {
        for j in 1..n.saturating_sub(1) {
            t.push([i * n + j - 1, i * n + j, i * n + j + 1, row_edge(i, j - 1), row_edge(i, j)]);
        }
    }
    for i in 1..m.saturating_sub(1) {
        for j in 0..n {
            t.push([(i - 1) * n + j, i * n + j, (i + 1) * n + j, col_edge(i - 1, j), col_edge(i, j)]);
        }
    }
    t
}

/// Optimal `sum |w - y|` for a fixed edge labeling, by a separate LP solver.
pub fn labeling_fit_lp(m: usize, n: usize, y: &[f64], active: &[bool]) -> f64 {
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let w: Vec<_> = (0..m * n).map(|_| p.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    let t: Vec<_> = (0..m * n).map(|_| p.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for v in 0..m * n {
        p.add_constraint([(t[v], 1.0), (w[v], -1.0)], ComparisonOp::Ge, -y[v]);
        p.add_constraint([(t[v], 1.0), (w[v], 1.0)], ComparisonOp::Ge, y[v]);
    }
    for [a, b, c, ea, eb] in triples(m, n) {
        let bound = BIG_M * (active[ea] as u8 + active[eb] as u8) as f64;
        let expr = [(w[a], 1.0), (w[b], -2.0), (w[c], 1.0)];
        p.add_constraint(expr, ComparisonOp::Le, bound);
        p.add_constraint(expr, ComparisonOp::Ge, -bound);
    }
    p.solve().expect("fit LP is always feasible").into_solution().expect("no limits set").objective()
}

pub struct GridOracle {
    pub optimum: f64,
    /// Every multicut-feasible labeling.
    pub feasible: Vec<Vec<bool>>,
}

/// Exhaustive optimum over all multicut-feasible labelings.
pub fn grid_oracle(m: usize, n: usize, y: &[f64], weights: &[f64]) -> GridOracle {
    let edges = grid_edges(m, n);
    assert!(edges.len() <= 20, "enumeration too large");
    let mut optimum = f64::INFINITY;
    let mut feasible = Vec::new();
    for mask in 0u64..1 << edges.len() {
        let active = mask_to_bools(mask, edges.len());
        if !is_multicut(m * n, &edges, &active) {
            continue;
        }
        let reg: f64 = weights.iter().zip(&active).filter(|(_, &on)| on).map(|(w, _)| w).sum();
        if reg < optimum {
            optimum = optimum.min(reg + labeling_fit_lp(m, n, y, &active));
        }
        feasible.push(active);
    }
    GridOracle { optimum, feasible }
}

/// Is the edge set a simple cycle without chords in the `m x n` grid?
pub fn is_chordless_cycle(m: usize, n: usize, cycle_edges: &[usize]) -> bool {
    let edges = grid_edges(m, n);
    let mut degree = std::collections::HashMap::new();
    for &e in cycle_edges {
        let (a, b) = edges[e];
        *degree.entry(a).or_insert(0) += 1;
        *degree.entry(b).or_insert(0) += 1;
    }
    if cycle_edges.len() < 4 || degree.values().any(|&d| d != 2) || degree.len() != cycle_edges.len() {
        return false;
    }
    // one connected loop
    let nodes: Vec<usize> = degree.keys().copied().collect();
    let index = |v: usize| nodes.iter().position(|&u| u == v).unwrap();
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    for &e in cycle_edges {
        let (a, b) = edges[e];
        let (ra, rb) = (find(&mut parent, index(a)), find(&mut parent, index(b)));
        parent[ra] = rb;
    }
    let root = find(&mut parent, 0);
    if (0..nodes.len()).any(|k| find(&mut parent, k) != root) {
        return false;
    }
    // every grid edge between two cycle nodes belongs to the cycle
    edges.iter().enumerate().all(|(k, &(a, b))| !(degree.contains_key(&a) && degree.contains_key(&b)) || cycle_edges.contains(&k))
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen::<f64>()).collect()
}
