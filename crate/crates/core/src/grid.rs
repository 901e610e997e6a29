//! Grid-graph topology for chains and 4-connected image grids.
//!
//! Nodes are numbered row-major, `(i, j) -> i * cols + j`. Edges are numbered
//! with all row (horizontal) edges first, in row-major order, followed by all
//! column (vertical) edges, also in row-major order. This numbering is the
//! layout of every [`EdgeLabeling`] and of the binary variables of the MILP.

use std::fmt;

use crate::{Error, Result};

pub type NodeId = usize;
pub type EdgeId = usize;

/// Orientation of a grid edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    /// `((i, j), (i, j + 1))`
    Row,
    /// `((i, j), (i + 1, j))`
    Col,
}

/// A 4-connected `rows x cols` grid graph. A chain is the case `rows == 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridGraph {
    rows: usize,
    cols: usize,
}

impl GridGraph {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || rows.saturating_mul(cols) < 2 {
            return Err(Error::DegenerateGrid { rows, cols });
        }
        Ok(Self { rows, cols })
    }

    /// A chain of `n` nodes (`1 x n` grid).
    pub fn chain(n: usize) -> Result<Self> {
        Self::new(1, n)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.rows * self.cols
    }

    #[inline]
    pub fn num_row_edges(&self) -> usize {
        self.rows * (self.cols - 1)
    }

    #[inline]
    pub fn num_col_edges(&self) -> usize {
        (self.rows - 1) * self.cols
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.num_row_edges() + self.num_col_edges()
    }

    pub fn is_chain(&self) -> bool {
        self.rows == 1
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> NodeId {
        debug_assert!(i < self.rows && j < self.cols);
        i * self.cols + j
    }

    #[inline]
    pub fn coords(&self, v: NodeId) -> (usize, usize) {
        (v / self.cols, v % self.cols)
    }

    /// Id of `e^r_{i,j} = ((i, j), (i, j + 1))`.
    #[inline]
    pub fn row_edge(&self, i: usize, j: usize) -> EdgeId {
        debug_assert!(i < self.rows && j + 1 < self.cols);
        i * (self.cols - 1) + j
    }

    /// Id of `e^c_{i,j} = ((i, j), (i + 1, j))`.
    #[inline]
    pub fn col_edge(&self, i: usize, j: usize) -> EdgeId {
        debug_assert!(i + 1 < self.rows && j < self.cols);
        self.num_row_edges() + i * self.cols + j
    }

    pub fn edge_kind(&self, e: EdgeId) -> EdgeKind {
        if e < self.num_row_edges() {
            EdgeKind::Row
        } else {
            EdgeKind::Col
        }
    }

    /// `(kind, i, j)` such that `e` is `e^kind_{i,j}`.
    pub fn edge_position(&self, e: EdgeId) -> (EdgeKind, usize, usize) {
        let nr = self.num_row_edges();
        if e < nr {
            (EdgeKind::Row, e / (self.cols - 1), e % (self.cols - 1))
        } else {
            let k = e - nr;
            (EdgeKind::Col, k / self.cols, k % self.cols)
        }
    }

    /// Endpoints of `e`, lower node id first.
    pub fn endpoints(&self, e: EdgeId) -> (NodeId, NodeId) {
        match self.edge_position(e) {
            (EdgeKind::Row, i, j) => (self.node(i, j), self.node(i, j + 1)),
            (EdgeKind::Col, i, j) => (self.node(i, j), self.node(i + 1, j)),
        }
    }

    /// The edge joining `u` and `v`, if they are grid neighbours.
    pub fn edge_between(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        let (ai, aj) = self.coords(a);
        let (bi, bj) = self.coords(b);
        if ai == bi && aj + 1 == bj {
            Some(self.row_edge(ai, aj))
        } else if aj == bj && ai + 1 == bi {
            Some(self.col_edge(ai, aj))
        } else {
            None
        }
    }

    pub fn adjacent(&self, u: NodeId, v: NodeId) -> bool {
        self.edge_between(u, v).is_some()
    }

    /// Neighbours of `v` with the connecting edge, in the fixed order
    /// up, left, right, down.
    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = (NodeId, EdgeId)> + '_ {
        let (i, j) = self.coords(v);
        let up = (i > 0).then(|| (self.node(i - 1, j), self.col_edge(i - 1, j)));
        let left = (j > 0).then(|| (self.node(i, j - 1), self.row_edge(i, j - 1)));
        let right = (j + 1 < self.cols).then(|| (self.node(i, j + 1), self.row_edge(i, j)));
        let down = (i + 1 < self.rows).then(|| (self.node(i + 1, j), self.col_edge(i, j)));
        [up, left, right, down].into_iter().flatten()
    }

    pub fn check_edge(&self, e: EdgeId) -> Result<()> {
        if e < self.num_edges() {
            Ok(())
        } else {
            Err(Error::EdgeOutOfRange { edge: e, num_edges: self.num_edges() })
        }
    }

    /// Every unit-square face cycle, in row-major order of the face's top-left node.
    ///
    /// Each cycle lists its edges as top, right, bottom, left.
    pub fn enumerate_4cycles(&self) -> Vec<Cycle> {
        let mut out = Vec::with_capacity((self.rows - 1) * self.cols.saturating_sub(1));
        for i in 0..self.rows.saturating_sub(1) {
            for j in 0..self.cols.saturating_sub(1) {
                let nodes = vec![self.node(i, j), self.node(i, j + 1), self.node(i + 1, j + 1), self.node(i + 1, j)];
                let edges = vec![self.row_edge(i, j), self.col_edge(i, j + 1), self.row_edge(i + 1, j), self.col_edge(i, j)];
                out.push(Cycle { nodes, edges, chordless: true });
            }
        }
        out
    }

    /// Every chordless cycle with 8 edges.
    ///
    /// On a 4-connected grid the only simple 8-cycles are boundaries of the
    /// straight and L-shaped triominoes and of the 2x2 block of faces. The
    /// triominoes have a chord at the internal face boundary; the block does
    /// not, because its centre node is off the cycle. So the family is the
    /// ring around each interior node, listed clockwise from the top-left
    /// corner. The test suite checks this against exhaustive enumeration.
    pub fn enumerate_8cycles(&self) -> Vec<Cycle> {
        let mut out = Vec::new();
        for i in 0..self.rows.saturating_sub(2) {
            for j in 0..self.cols.saturating_sub(2) {
                let nodes = vec![
                    self.node(i, j),
                    self.node(i, j + 1),
                    self.node(i, j + 2),
                    self.node(i + 1, j + 2),
                    self.node(i + 2, j + 2),
                    self.node(i + 2, j + 1),
                    self.node(i + 2, j),
                    self.node(i + 1, j),
                ];
                let edges = cycle_edges(self, &nodes).expect("ring nodes are adjacent");
                out.push(Cycle { nodes, edges, chordless: true });
            }
        }
        out
    }

    /// Connected components of the subgraph that keeps only dormant edges.
    ///
    /// Labels are dense, starting at 0, and numbered in order of the smallest
    /// row-major node of each component.
    pub fn connected_components(&self, x: &EdgeLabeling) -> Vec<usize> {
        debug_assert_eq!(x.len(), self.num_edges());
        let mut uf = UnionFind::new(self.num_nodes());
        for e in 0..self.num_edges() {
            if !x.is_active(e) {
                let (u, v) = self.endpoints(e);
                uf.union(u, v);
            }
        }
        uf.canonical_labels()
    }
}

impl fmt::Display for GridGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

/// Build the grid graph for an `m x n` instance.
pub fn build_grid(m: usize, n: usize) -> Result<GridGraph> {
    GridGraph::new(m, n)
}

/// Binary edge labels indexed by [`EdgeId`]. `true` means active (a segment
/// boundary), `false` dormant.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
pub struct EdgeLabeling(Vec<bool>);

impl EdgeLabeling {
    pub fn all_dormant(num_edges: usize) -> Self {
        Self(vec![false; num_edges])
    }

    pub fn all_active(num_edges: usize) -> Self {
        Self(vec![true; num_edges])
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    /// Round solver values to labels (`>= 0.5` is active).
    pub fn from_values(values: &[f64]) -> Self {
        Self(values.iter().map(|&v| v >= 0.5).collect())
    }

    /// Labeling whose bit `k` is bit `k` of `mask` (used for enumeration).
    pub fn from_mask(num_edges: usize, mask: u64) -> Self {
        Self((0..num_edges).map(|k| (mask >> k) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn is_active(&self, e: EdgeId) -> bool {
        self.0[e]
    }

    pub fn set(&mut self, e: EdgeId, active: bool) {
        self.0[e] = active;
    }

    pub fn count_active(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn active_edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(e, _)| e)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn to_values(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// A simple cycle of the grid, stored both as its node sequence and as the
/// edges joining consecutive nodes (`edges[k]` joins `nodes[k]` and
/// `nodes[k + 1]`, the last edge closes the cycle).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cycle {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
    pub chordless: bool,
}

impl Cycle {
    /// Build a cycle from its node sequence, computing edges and the chord flag.
    pub fn from_nodes(g: &GridGraph, nodes: Vec<NodeId>) -> Result<Self> {
        if nodes.len() < 4 {
            return Err(Error::InvalidCycle("a grid cycle needs at least 4 nodes".into()));
        }
        let mut seen = std::collections::HashSet::with_capacity(nodes.len());
        for &v in &nodes {
            if v >= g.num_nodes() {
                return Err(Error::InvalidCycle(format!("node {v} is outside the grid")));
            }
            if !seen.insert(v) {
                return Err(Error::InvalidCycle(format!("node {v} repeats")));
            }
        }
        let edges = cycle_edges(g, &nodes).ok_or_else(|| Error::InvalidCycle("consecutive nodes are not adjacent".into()))?;
        let chordless = is_chordless(g, &nodes);
        Ok(Self { nodes, edges, chordless })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

fn cycle_edges(g: &GridGraph, nodes: &[NodeId]) -> Option<Vec<EdgeId>> {
    let k = nodes.len();
    (0..k).map(|t| g.edge_between(nodes[t], nodes[(t + 1) % k])).collect()
}

/// `true` when no grid edge joins two cycle nodes that are not consecutive on the cycle.
pub fn is_chordless(g: &GridGraph, nodes: &[NodeId]) -> bool {
    let k = nodes.len();
    for a in 0..k {
        for b in (a + 2)..k {
            if a == 0 && b == k - 1 {
                continue;
            }
            if g.adjacent(nodes[a], nodes[b]) {
                return false;
            }
        }
    }
    true
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    /// Returns `false` when `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    /// Dense labels in order of first appearance.
    pub fn canonical_labels(&mut self) -> Vec<usize> {
        let n = self.parent.len();
        let mut root_label = vec![usize::MAX; n];
        let mut labels = Vec::with_capacity(n);
        let mut next = 0;
        for v in 0..n {
            let r = self.find(v);
            if root_label[r] == usize::MAX {
                root_label[r] = next;
                next += 1;
            }
            labels.push(root_label[r]);
        }
        labels
    }
}
