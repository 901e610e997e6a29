//! Solver abstraction.
//!
//! A [`LinearBackend`] turns a [`LinearModel`] into a [`RawHandle`] that can be
//! warm-started, extended with rows and re-solved. [`SolverHandle`] layers the
//! fitting-model view on top (edge labelings in, `(w, x)` incumbents out).
//!
//! The backend is picked by name; `PWFIT_SOLVER` overrides the default.

mod highs;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::formulation::{Constraint, CycleInequality, LinearModel, ModelDescription};
use crate::grid::EdgeLabeling;
use crate::{Error, Result};

pub use highs::HighsBackend;

/// Environment variable selecting the backend by name.
pub const SOLVER_ENV: &str = "PWFIT_SOLVER";
pub const DEFAULT_BACKEND: &str = "highs";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Emphasis {
    #[default]
    Default,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveLimits {
    /// Wall-clock budget in seconds.
    pub time_limit: f64,
    /// Relative gap at which the backend may stop; 0 asks for a proof of optimality.
    pub gap_target: f64,
    pub emphasis: Emphasis,
}

impl SolveLimits {
    pub fn new(time_limit: f64, gap_target: f64) -> Result<Self> {
        if time_limit.is_nan() || time_limit <= 0.0 {
            return Err(Error::InvalidParameter(format!("time limit must be positive, got {time_limit}")));
        }
        if gap_target.is_nan() || gap_target < 0.0 {
            return Err(Error::InvalidParameter(format!("gap target must be >= 0, got {gap_target}")));
        }
        Ok(Self { time_limit, gap_target, emphasis: Emphasis::Default })
    }

    /// Same settings with a smaller time budget.
    pub fn with_time_limit(&self, time_limit: f64) -> Self {
        Self { time_limit, ..*self }
    }
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self { time_limit: 600.0, gap_target: 0.0, emphasis: Emphasis::Default }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// A limit was reached with an incumbent in hand.
    FeasibleLimit,
    Infeasible,
    /// A limit was reached (or the backend gave up) without any incumbent.
    NoSolution,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleLimit => "feasible-limit",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::NoSolution => "no-solution",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a backend returns from one solve of a [`LinearModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct RawSolution {
    pub status: SolveStatus,
    /// Objective of the incumbent; `NaN` when there is none.
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub node_count: u64,
    pub wall_time: f64,
    /// Full column vector of the incumbent.
    pub values: Option<Vec<f64>>,
    /// `(seconds since start, objective)` of each improving incumbent.
    pub improvements: Vec<(f64, f64)>,
}

/// A backend plug-in.
pub trait LinearBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn load(&self, model: &LinearModel) -> Result<Box<dyn RawHandle>>;
}

/// A loaded model owned by one worker at a time.
pub trait RawHandle: Send {
    fn num_cols(&self) -> usize;
    fn num_rows(&self) -> usize;
    /// Partial start assignment; unspecified columns are completed by the backend.
    fn set_start(&mut self, entries: &[(usize, f64)]) -> Result<()>;
    fn clear_start(&mut self);
    fn add_rows(&mut self, rows: &[Constraint]) -> Result<()>;
    fn set_col_bounds(&mut self, cols: &[usize], lower: &[f64], upper: &[f64]) -> Result<()>;
    fn solve(&mut self, limits: &SolveLimits) -> Result<RawSolution>;
}

/// Look up a backend by name.
pub fn backend_by_name(name: &str) -> Result<Box<dyn LinearBackend>> {
    match name.trim().to_ascii_lowercase().as_str() {
        "highs" => Ok(Box::new(HighsBackend)),
        other => Err(Error::BackendUnavailable(other.to_string())),
    }
}

/// The backend named by `PWFIT_SOLVER`, or the default.
pub fn backend_from_env() -> Result<Box<dyn LinearBackend>> {
    match std::env::var(SOLVER_ENV) {
        Ok(name) if !name.trim().is_empty() => backend_by_name(&name),
        _ => backend_by_name(DEFAULT_BACKEND),
    }
}

/// A feasible point of a fitting model split into its parts.
#[derive(Clone, Debug, PartialEq)]
pub struct Incumbent {
    pub w: Vec<f64>,
    pub x: EdgeLabeling,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub node_count: u64,
    pub wall_time: f64,
    pub incumbent: Option<Incumbent>,
    pub improvements: Vec<(f64, f64)>,
}

/// A fitting model loaded into a backend.
pub struct SolverHandle {
    raw: Box<dyn RawHandle>,
    model: ModelDescription,
    start: Option<EdgeLabeling>,
}

impl std::fmt::Debug for SolverHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolverHandle")
            .field("cols", &self.raw.num_cols())
            .field("rows", &self.raw.num_rows())
            .field("warm_start", &self.start.is_some())
            .finish()
    }
}

pub fn load_model(backend: &dyn LinearBackend, model: &ModelDescription) -> Result<SolverHandle> {
    model.model.validate()?;
    let raw = backend.load(&model.model)?;
    Ok(SolverHandle { raw, model: model.clone(), start: None })
}

impl SolverHandle {
    pub fn model(&self) -> &ModelDescription {
        &self.model
    }

    pub fn num_binaries(&self) -> usize {
        self.model.layout.num_edges
    }

    pub fn num_constraints(&self) -> usize {
        self.raw.num_rows()
    }

    /// Offer `x0` as the initial integer assignment. Only the binaries are
    /// passed; the backend completes `w` itself. The start is re-offered on
    /// every subsequent solve.
    pub fn warm_start(&mut self, x0: &EdgeLabeling) -> Result<()> {
        if x0.len() != self.model.layout.num_edges {
            return Err(Error::DimensionMismatch { what: "warm start", expected: self.model.layout.num_edges, found: x0.len() });
        }
        self.start = Some(x0.clone());
        Ok(())
    }

    pub fn clear_warm_start(&mut self) {
        self.start = None;
        self.raw.clear_start();
    }

    /// Append cycle inequalities. The caller deduplicates (see `CutPool`).
    pub fn add_constraints(&mut self, cuts: &[CycleInequality]) -> Result<usize> {
        let layout = self.model.layout;
        let mut rows = Vec::with_capacity(cuts.len());
        for cut in cuts {
            let before = self.model.model.constraints.len();
            self.model.add_multicut(cut)?;
            rows.push(self.model.model.constraints[before].clone());
        }
        debug_assert!(rows.iter().all(|r| r.terms.iter().all(|&(k, _)| k < layout.num_cols())));
        self.raw.add_rows(&rows)?;
        Ok(rows.len())
    }

    /// Fix every binary to the given labeling (turning the MILP into an LP in `w`).
    pub fn fix_labeling(&mut self, x: &EdgeLabeling) -> Result<()> {
        let layout = self.model.layout;
        if x.len() != layout.num_edges {
            return Err(Error::DimensionMismatch { what: "labeling", expected: layout.num_edges, found: x.len() });
        }
        let cols: Vec<usize> = layout.x_range().collect();
        let vals = x.to_values();
        self.raw.set_col_bounds(&cols, &vals, &vals)
    }

    pub fn solve(&mut self, limits: &SolveLimits) -> Result<SolveReport> {
        if let Some(x0) = &self.start {
            let layout = self.model.layout;
            let entries: Vec<(usize, f64)> =
                (0..layout.num_edges).map(|e| (layout.x(e), if x0.is_active(e) { 1.0 } else { 0.0 })).collect();
            self.raw.set_start(&entries)?;
        }
        let raw = self.raw.solve(limits)?;
        let incumbent = raw.values.map(|values| Incumbent { w: self.model.w_values(&values), x: self.model.x_labeling(&values), values });
        Ok(SolveReport {
            status: raw.status,
            objective: raw.objective,
            best_bound: raw.best_bound,
            gap: raw.gap,
            node_count: raw.node_count,
            wall_time: raw.wall_time,
            incumbent,
            improvements: raw.improvements,
        })
    }
}

/// Optimal fitted values and objective for a fixed labeling.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelingValue {
    pub objective: f64,
    pub w: Vec<f64>,
}

/// Solve the fitting LP with every binary fixed to `x`.
pub fn evaluate_labeling(backend: &dyn LinearBackend, model: &ModelDescription, x: &EdgeLabeling) -> Result<LabelingValue> {
    let mut handle = load_model(backend, model)?;
    handle.fix_labeling(x)?;
    let report = handle.solve(&SolveLimits::new(3600.0, 0.0)?)?;
    match (report.status, report.incumbent) {
        (SolveStatus::Optimal, Some(inc)) => Ok(LabelingValue { objective: report.objective, w: inc.w }),
        (status, _) => Err(Error::Backend(format!("fixed-labeling LP ended with status {status}"))),
    }
}

pub(crate) fn elapsed_secs(d: Duration) -> f64 {
    d.as_secs_f64()
}
