//! MILP construction for piecewise affine fitting on chains and grids.
//!
//! The model has, per node `v`, a fitted value `w_v` and a residual pair
//! `eps+_v, eps-_v >= 0` linked by `w_v - eps+_v + eps-_v = y_v`, and one
//! binary `x_e` per grid edge. Along every row and column the discrete second
//! derivative of `w` is forced to zero unless one of the two edges around the
//! centre node is active:
//!
//! ```text
//!  +/-(w[k-1] - 2 w[k] + w[k+1]) - M x[k-1,k] - M x[k,k+1] <= 0
//! ```
//!
//! The objective is `sum(eps+ + eps-) + sum_e lambda_e x_e`, with `lambda_e`
//! taken from the edge's row (row edges) or column (column edges). Cycle
//! (multicut) inequalities are added on top, either up front or lazily.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::grid::{Cycle, EdgeId, EdgeKind, EdgeLabeling, GridGraph, NodeId};
use crate::{Error, Result};

/// Absolute tolerance for post-hoc constraint checks.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Global big-M. Valid whenever all `w` lie in `[0, 1]`.
pub const DEFAULT_BIG_M: f64 = 2.0;

/// Intensities on a grid, row-major, normalized to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridInstance {
    graph: GridGraph,
    y: Vec<f64>,
}

impl GridInstance {
    pub fn new(rows: usize, cols: usize, y: Vec<f64>) -> Result<Self> {
        let graph = GridGraph::new(rows, cols)?;
        if y.len() != graph.num_nodes() {
            return Err(Error::DimensionMismatch { what: "intensities", expected: graph.num_nodes(), found: y.len() });
        }
        if let Some((k, v)) = y.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInstance(format!("intensity {v} at node {k} is outside [0, 1]; normalize first")));
        }
        Ok(Self { graph, y })
    }

    /// Build an instance from raw values, rescaling linearly to `[0, 1]` when
    /// any value falls outside that range. A constant out-of-range image maps to 0.
    pub fn normalized(rows: usize, cols: usize, raw: Vec<f64>) -> Result<Self> {
        if let Some(v) = raw.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance(format!("non-finite intensity {v}")));
        }
        let (lo, hi) = min_max(&raw);
        let y = if lo >= 0.0 && hi <= 1.0 {
            raw
        } else if hi > lo {
            raw.iter().map(|v| (v - lo) / (hi - lo)).collect()
        } else {
            vec![0.0; raw.len()]
        };
        Self::new(rows, cols, y)
    }

    pub fn chain(y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        Self::new(1, n, y)
    }

    pub fn graph(&self) -> &GridGraph {
        &self.graph
    }

    pub fn rows(&self) -> usize {
        self.graph.rows()
    }

    pub fn cols(&self) -> usize {
        self.graph.cols()
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.y[self.graph.node(i, j)]
    }
}

pub(crate) fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Regularization weights and big-M.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// The user knob the lambdas were derived from, if any.
    pub xi: Option<f64>,
    /// One weight per grid row, applied to that row's horizontal edges.
    pub lambda_row: Vec<f64>,
    /// One weight per grid column, applied to that column's vertical edges.
    pub lambda_col: Vec<f64>,
    pub big_m: f64,
}

impl Params {
    /// Same `lambda` on every edge.
    pub fn uniform(graph: &GridGraph, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(Self { xi: None, lambda_row: vec![lambda; graph.rows()], lambda_col: vec![lambda; graph.cols()], big_m: DEFAULT_BIG_M })
    }

    pub fn edge_weight(&self, graph: &GridGraph, e: EdgeId) -> f64 {
        match graph.edge_position(e) {
            (EdgeKind::Row, i, _) => self.lambda_row[i],
            (EdgeKind::Col, _, j) => self.lambda_col[j],
        }
    }

    /// Mean of all row and column weights.
    pub fn mean_lambda(&self) -> f64 {
        let n = self.lambda_row.len() + self.lambda_col.len();
        if n == 0 {
            return 0.0;
        }
        (self.lambda_row.iter().sum::<f64>() + self.lambda_col.iter().sum::<f64>()) / n as f64
    }

    fn validate(&self, graph: &GridGraph) -> Result<()> {
        if self.lambda_row.len() != graph.rows() {
            return Err(Error::DimensionMismatch { what: "lambda_row", expected: graph.rows(), found: self.lambda_row.len() });
        }
        if self.lambda_col.len() != graph.cols() {
            return Err(Error::DimensionMismatch { what: "lambda_col", expected: graph.cols(), found: self.lambda_col.len() });
        }
        if self.lambda_row.iter().chain(&self.lambda_col).any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidParameter("lambda weights must be finite and >= 0".into()));
        }
        if !(self.big_m > 0.0 && self.big_m.is_finite()) {
            return Err(Error::InvalidParameter(format!("big-M must be positive, got {}", self.big_m)));
        }
        Ok(())
    }
}

/// Per-row and per-column weights `lambda = xi/2 * max |second difference of y|`
/// along that row or column; rows (columns) shorter than 3 get 0.
pub fn compute_lambda(instance: &GridInstance, xi: f64) -> Result<Params> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::InvalidParameter(format!("xi must be positive, got {xi}")));
    }
    let (m, n) = (instance.rows(), instance.cols());
    let lambda_row = (0..m)
        .map(|i| {
            let peak = (1..n.saturating_sub(1))
                .map(|j| (instance.value(i, j - 1) - 2.0 * instance.value(i, j) + instance.value(i, j + 1)).abs())
                .fold(0.0, f64::max);
            0.5 * xi * peak
        })
        .collect();
    let lambda_col = (0..n)
        .map(|j| {
            let peak = (1..m.saturating_sub(1))
                .map(|i| (instance.value(i - 1, j) - 2.0 * instance.value(i, j) + instance.value(i + 1, j)).abs())
                .fold(0.0, f64::max);
            0.5 * xi * peak
        })
        .collect();
    Ok(Params { xi: Some(xi), lambda_row, lambda_col, big_m: DEFAULT_BIG_M })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarType {
    Continuous,
    Binary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub var_type: VarType,
    pub lower: f64,
    pub upper: f64,
    /// Objective coefficient.
    pub cost: f64,
}

/// Where a constraint row came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintTag {
    SecondDerivativeRow,
    SecondDerivativeCol,
    ResidualLink,
    Multicut,
    /// Rows of auxiliary models (e.g. post-hoc L1 fits).
    Other,
}

impl fmt::Display for ConstraintTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintTag::SecondDerivativeRow => "second-derivative-row",
            ConstraintTag::SecondDerivativeCol => "second-derivative-col",
            ConstraintTag::ResidualLink => "residual-link",
            ConstraintTag::Multicut => "multicut",
            ConstraintTag::Other => "other",
        })
    }
}

/// `lower <= sum(coef * var) <= upper`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub lower: f64,
    pub upper: f64,
    pub tag: ConstraintTag,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(k, c)| c * values[k]).sum()
    }

    /// Amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        (self.lower - a).max(a - self.upper).max(0.0)
    }
}

/// A solver-agnostic linear (mixed-integer) minimization problem.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearModel {
    pub vars: Vec<Variable>,
    pub constraints: Vec<Constraint>,
}

impl LinearModel {
    pub fn add_var(&mut self, name: impl Into<String>, var_type: VarType, lower: f64, upper: f64, cost: f64) -> usize {
        self.vars.push(Variable { name: name.into(), var_type, lower, upper, cost });
        self.vars.len() - 1
    }

    pub fn add_constraint(&mut self, c: Constraint) -> usize {
        self.constraints.push(c);
        self.constraints.len() - 1
    }

    pub fn num_integer(&self) -> usize {
        self.vars.iter().filter(|v| v.var_type == VarType::Binary).count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.vars.iter().zip(values).map(|(v, x)| v.cost * x).sum()
    }

    /// Largest bound or row violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let bounds = self.vars.iter().zip(values).map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0)).fold(0.0, f64::max);
        self.constraints.iter().map(|c| c.violation(values)).fold(bounds, f64::max)
    }

    /// Reject rows that reference unknown columns or have non-finite data.
    pub fn validate(&self) -> Result<()> {
        for c in &self.constraints {
            for &(k, coef) in &c.terms {
                if k >= self.vars.len() {
                    return Err(Error::InvalidInstance(format!("row `{}` references column {k} of {}", c.name, self.vars.len())));
                }
                if !coef.is_finite() {
                    return Err(Error::InvalidInstance(format!("row `{}` has a non-finite coefficient", c.name)));
                }
            }
            if c.lower.is_nan() || c.upper.is_nan() || c.lower > c.upper {
                return Err(Error::InvalidInstance(format!("row `{}` has empty bounds", c.name)));
            }
        }
        Ok(())
    }
}

/// Column layout of a fitting model: `w` block, `eps+` block, `eps-` block, `x` block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarLayout {
    pub num_nodes: usize,
    pub num_edges: usize,
}

impl VarLayout {
    #[inline]
    pub fn w(&self, v: NodeId) -> usize {
        v
    }
    #[inline]
    pub fn eps_plus(&self, v: NodeId) -> usize {
        self.num_nodes + v
    }
    #[inline]
    pub fn eps_minus(&self, v: NodeId) -> usize {
        2 * self.num_nodes + v
    }
    #[inline]
    pub fn x(&self, e: EdgeId) -> usize {
        3 * self.num_nodes + e
    }
    pub fn num_cols(&self) -> usize {
        3 * self.num_nodes + self.num_edges
    }
    pub fn x_range(&self) -> std::ops::Range<usize> {
        3 * self.num_nodes..self.num_cols()
    }
}

/// A cycle inequality `sum_{e in C \ {target}} x_e >= x_target`.
///
/// `cycle` holds the edge ids of `C` sorted ascending; that plus `target`
/// is the canonical identity used for deduplication.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CycleInequality {
    pub cycle: Vec<EdgeId>,
    pub target: EdgeId,
}

impl CycleInequality {
    pub fn new(cycle_edges: &[EdgeId], target: EdgeId) -> Self {
        let mut cycle = cycle_edges.to_vec();
        cycle.sort_unstable();
        cycle.dedup();
        debug_assert!(cycle.binary_search(&target).is_ok());
        Self { cycle, target }
    }

    /// One inequality per edge of the cycle.
    pub fn all_for_cycle(cycle: &Cycle) -> Vec<Self> {
        cycle.edges.iter().map(|&t| Self::new(&cycle.edges, t)).collect()
    }

    pub fn is_violated_by(&self, x: &EdgeLabeling) -> bool {
        let rest = self.cycle.iter().filter(|&&e| e != self.target && x.is_active(e)).count();
        x.is_active(self.target) && rest == 0
    }

    pub fn to_constraint(&self, layout: &VarLayout, name: String) -> Constraint {
        let terms = self.cycle.iter().map(|&e| (layout.x(e), if e == self.target { -1.0 } else { 1.0 })).collect();
        Constraint { name, terms, lower: 0.0, upper: f64::INFINITY, tag: ConstraintTag::Multicut }
    }
}

/// The fitting MILP together with the grid and weights it was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelDescription {
    pub graph: GridGraph,
    pub params: Params,
    pub layout: VarLayout,
    pub model: LinearModel,
}

impl ModelDescription {
    pub fn add_multicut(&mut self, ineq: &CycleInequality) -> Result<()> {
        for &e in &ineq.cycle {
            self.graph.check_edge(e)?;
        }
        let name = format!("mc{}", self.model.constraints.len());
        let row = ineq.to_constraint(&self.layout, name);
        self.model.add_constraint(row);
        Ok(())
    }

    /// Fitted values of `w` from a full column vector.
    pub fn w_values(&self, values: &[f64]) -> Vec<f64> {
        values[..self.layout.num_nodes].to_vec()
    }

    pub fn x_labeling(&self, values: &[f64]) -> EdgeLabeling {
        EdgeLabeling::from_values(&values[self.layout.x_range()])
    }

    /// Assemble a column vector from `w` and `x`, with residuals split exactly.
    pub fn assemble(&self, y: &[f64], w: &[f64], x: &EdgeLabeling) -> Vec<f64> {
        let l = self.layout;
        let mut v = vec![0.0; l.num_cols()];
        for node in 0..l.num_nodes {
            v[l.w(node)] = w[node];
            let r = w[node] - y[node];
            v[l.eps_plus(node)] = r.max(0.0);
            v[l.eps_minus(node)] = (-r).max(0.0);
        }
        for e in 0..l.num_edges {
            v[l.x(e)] = if x.is_active(e) { 1.0 } else { 0.0 };
        }
        v
    }

    pub fn statistics(&self) -> ModelStatistics {
        model_statistics(self)
    }
}

/// Build the chain model. Requires a `1 x n` instance with `n >= 3`.
pub fn build_1d_model(instance: &GridInstance, params: &Params) -> Result<ModelDescription> {
    if instance.rows() != 1 {
        return Err(Error::InvalidInstance(format!("1D model needs a single row, got {}", instance.rows())));
    }
    if instance.cols() < 3 {
        return Err(Error::InvalidInstance(format!("1D model needs at least 3 points, got {}", instance.cols())));
    }
    build_2d_model(instance, params, &[])
}

/// Build the grid model with one inequality per (cycle, edge) pair for each
/// cycle in `initial_cycles`.
pub fn build_2d_model(instance: &GridInstance, params: &Params, initial_cycles: &[Cycle]) -> Result<ModelDescription> {
    let g = *instance.graph();
    params.validate(&g)?;
    let layout = VarLayout { num_nodes: g.num_nodes(), num_edges: g.num_edges() };
    let mut model = LinearModel::default();
    let inf = f64::INFINITY;

    for v in 0..g.num_nodes() {
        let (i, j) = g.coords(v);
        model.add_var(format!("w_{i}_{j}"), VarType::Continuous, -inf, inf, 0.0);
    }
    for v in 0..g.num_nodes() {
        let (i, j) = g.coords(v);
        model.add_var(format!("ep_{i}_{j}"), VarType::Continuous, 0.0, inf, 1.0);
    }
    for v in 0..g.num_nodes() {
        let (i, j) = g.coords(v);
        model.add_var(format!("em_{i}_{j}"), VarType::Continuous, 0.0, inf, 1.0);
    }
    for e in 0..g.num_edges() {
        let (kind, i, j) = g.edge_position(e);
        let name = match kind {
            EdgeKind::Row => format!("xr_{i}_{j}"),
            EdgeKind::Col => format!("xc_{i}_{j}"),
        };
        model.add_var(name, VarType::Binary, 0.0, 1.0, params.edge_weight(&g, e));
    }

    for v in 0..g.num_nodes() {
        let (i, j) = g.coords(v);
        model.add_constraint(Constraint {
            name: format!("fit_{i}_{j}"),
            terms: vec![(layout.w(v), 1.0), (layout.eps_plus(v), -1.0), (layout.eps_minus(v), 1.0)],
            lower: instance.values()[v],
            upper: instance.values()[v],
            tag: ConstraintTag::ResidualLink,
        });
    }

    let big_m = params.big_m;
    let add_pair = |model: &mut LinearModel, name: String, nodes: [NodeId; 3], edges: [EdgeId; 2], tag| {
        for (sign, suffix) in [(1.0, "p"), (-1.0, "m")] {
            model.add_constraint(Constraint {
                name: format!("{name}_{suffix}"),
                terms: vec![
                    (layout.w(nodes[0]), sign),
                    (layout.w(nodes[1]), -2.0 * sign),
                    (layout.w(nodes[2]), sign),
                    (layout.x(edges[0]), -big_m),
                    (layout.x(edges[1]), -big_m),
                ],
                lower: -inf,
                upper: 0.0,
                tag,
            });
        }
    };
    for i in 0..g.rows() {
        for j in 1..g.cols().saturating_sub(1) {
            add_pair(
                &mut model,
                format!("sdr_{i}_{j}"),
                [g.node(i, j - 1), g.node(i, j), g.node(i, j + 1)],
                [g.row_edge(i, j - 1), g.row_edge(i, j)],
                ConstraintTag::SecondDerivativeRow,
            );
        }
    }
    for j in 0..g.cols() {
        for i in 1..g.rows().saturating_sub(1) {
            add_pair(
                &mut model,
                format!("sdc_{i}_{j}"),
                [g.node(i - 1, j), g.node(i, j), g.node(i + 1, j)],
                [g.col_edge(i - 1, j), g.col_edge(i, j)],
                ConstraintTag::SecondDerivativeCol,
            );
        }
    }

    let mut desc = ModelDescription { graph: g, params: params.clone(), layout, model };
    for cycle in initial_cycles {
        for &e in &cycle.edges {
            g.check_edge(e)?;
        }
        for ineq in CycleInequality::all_for_cycle(cycle) {
            desc.add_multicut(&ineq)?;
        }
    }
    Ok(desc)
}

/// Variable and row counts of a model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelStatistics {
    pub binaries: usize,
    pub continuous: usize,
    pub fitted_values: usize,
    pub residual_vars: usize,
    pub constraints: usize,
    pub by_tag: BTreeMap<ConstraintTag, usize>,
}

impl ModelStatistics {
    pub fn rows_with(&self, tag: ConstraintTag) -> usize {
        self.by_tag.get(&tag).copied().unwrap_or(0)
    }

    /// Number of `|second difference| <= M(...)` pairs (each is two rows).
    pub fn second_derivative_pairs(&self) -> usize {
        (self.rows_with(ConstraintTag::SecondDerivativeRow) + self.rows_with(ConstraintTag::SecondDerivativeCol)) / 2
    }
}

pub fn model_statistics(model: &ModelDescription) -> ModelStatistics {
    let mut by_tag = BTreeMap::new();
    for c in &model.model.constraints {
        *by_tag.entry(c.tag).or_insert(0) += 1;
    }
    let binaries = model.model.num_integer();
    ModelStatistics {
        binaries,
        continuous: model.model.vars.len() - binaries,
        fitted_values: model.layout.num_nodes,
        residual_vars: 2 * model.layout.num_nodes,
        constraints: model.model.constraints.len(),
        by_tag,
    }
}
