//! Run reports as TOML.
//!
//! Fields are written in declaration order. Optional values that do not apply
//! to a run (bounds of a heuristic run, ground-truth metrics of a real image)
//! are left out entirely rather than written as placeholders.

use serde::{Deserialize, Serialize};

use crate::formulation::Params;
use crate::postprocess::{Metrics, Norm};
use crate::separation::{FitSolution, RoundTrace, VariantConfig};
use crate::solver::{SolveLimits, SolveStatus};
use crate::{Error, Result};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    /// Input path, or `synthetic:<generator>`.
    pub source: String,
    pub rows: usize,
    pub cols: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noise_sigma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub clipped: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub xi: Option<f64>,
    pub big_m: f64,
    pub time_limit: f64,
    pub gap_target: f64,
    pub norm: Norm,
    pub lambda_row: Vec<f64>,
    pub lambda_col: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub backend: String,
    pub status: SolveStatus,
    pub wall_time: f64,
    pub initial_cuts: usize,
    pub repaired: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub first_incumbent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub heuristic_objective: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub variant: String,
    pub instance: InstanceDescriptor,
    pub params: RunParams,
    pub solve: SolveSummary,
    pub metrics: Metrics,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub rounds: Vec<RoundTrace>,
}

impl RunReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        instance: InstanceDescriptor,
        config: &VariantConfig,
        params: &Params,
        limits: &SolveLimits,
        norm: Norm,
        backend: &str,
        solution: &FitSolution,
        metrics: Metrics,
    ) -> Self {
        Self {
            format_version: REPORT_FORMAT_VERSION,
            variant: config.name.clone(),
            instance,
            params: RunParams {
                xi: params.xi,
                big_m: params.big_m,
                time_limit: limits.time_limit,
                gap_target: limits.gap_target,
                norm,
                lambda_row: params.lambda_row.clone(),
                lambda_col: params.lambda_col.clone(),
            },
            solve: SolveSummary {
                backend: backend.to_string(),
                status: solution.status,
                wall_time: solution.wall_time,
                initial_cuts: solution.initial_cuts,
                repaired: solution.repaired,
                first_incumbent: solution.first_incumbent,
                heuristic_objective: solution.heuristic_objective,
            },
            metrics,
            rounds: solution.rounds.clone(),
        }
    }
}

pub fn report_to_string(report: &RunReport) -> Result<String> {
    toml::to_string(report).map_err(|e| Error::Report(e.to_string()))
}

pub fn parse_report(text: &str) -> Result<RunReport> {
    #[derive(Deserialize)]
    struct Version {
        format_version: Option<u32>,
    }
    let v: Version = toml::from_str(text).map_err(|e| Error::Report(e.to_string()))?;
    match v.format_version {
        Some(REPORT_FORMAT_VERSION) => {}
        Some(other) => return Err(Error::Report(format!("unsupported format_version {other}"))),
        None => return Err(Error::Report("missing format_version".into())),
    }
    toml::from_str(text).map_err(|e| Error::Report(e.to_string()))
}

pub fn write_report(report: &RunReport, path: &std::path::Path) -> Result<()> {
    super::write_atomic(path, report_to_string(report)?.as_bytes())
}

pub fn read_report(path: &std::path::Path) -> Result<RunReport> {
    parse_report(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        RunReport {
            format_version: REPORT_FORMAT_VERSION,
            variant: "mph-4".into(),
            instance: InstanceDescriptor {
                source: "synthetic:quadrants".into(),
                rows: 2,
                cols: 3,
                noise_sigma2: Some(0.001),
                seed: Some(7),
                clipped: Some(0),
            },
            params: RunParams {
                xi: Some(0.5),
                big_m: 2.0,
                time_limit: 600.0,
                gap_target: 0.0,
                norm: Norm::L1,
                lambda_row: vec![0.1, 0.30000000000000004],
                lambda_col: vec![0.0, 0.0, 0.0],
            },
            solve: SolveSummary {
                backend: "highs".into(),
                status: SolveStatus::Optimal,
                wall_time: 0.125,
                initial_cuts: 8,
                repaired: false,
                first_incumbent: Some(0.5),
                heuristic_objective: Some(0.5),
            },
            metrics: Metrics {
                objective: 0.4,
                fit_term: 0.2,
                regularization_term: 0.2,
                segments: 2,
                boundary_length: 2,
                best_bound: Some(0.4),
                gap: Some(0.0),
                node_count: Some(1),
                cuts_added: 0,
                rounds: 1,
                rand_index: Some(1.0),
                exact_match: Some(true),
                mae_w: Some(1e-17),
                mae_f: Some(0.0),
            },
            rounds: vec![RoundTrace {
                round: 0,
                status: SolveStatus::Optimal,
                objective: 0.4,
                best_bound: 0.4,
                gap: 0.0,
                node_count: 1,
                wall_time: 0.1,
                violated_edges: 0,
                cuts_added: 0,
            }],
        }
    }

    #[test]
    fn round_trip() {
        let r = sample();
        let text = report_to_string(&r).unwrap();
        assert!(text.starts_with("format_version = 1\n"));
        assert_eq!(parse_report(&text).unwrap(), r);
    }

    #[test]
    fn omitted_fields_for_heuristic_runs() {
        let mut r = sample();
        r.metrics.best_bound = None;
        r.metrics.gap = None;
        let text = report_to_string(&r).unwrap();
        let metrics_section = text.split("[metrics]").nth(1).unwrap().split("[[rounds]]").next().unwrap();
        assert!(!metrics_section.contains("best_bound"));
        assert!(!metrics_section.contains("gap"));
        assert_eq!(parse_report(&text).unwrap(), r);
    }

    #[test]
    fn version_checked() {
        let text = report_to_string(&sample()).unwrap().replacen("format_version = 1", "format_version = 9", 1);
        assert!(matches!(parse_report(&text), Err(Error::Report(_))));
        assert!(parse_report("variant = \"mp\"").is_err());
    }
}
