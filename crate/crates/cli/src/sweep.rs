use std::path::Path;

use anyhow::Result;
use clap::ValueEnum;
use pwfit::io::{write_atomic, RunReport};
use pwfit::solver::SolveStatus;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Aggregate {
    Median,
    Mean,
}

impl Aggregate {
    /// NaN entries are ignored; an all-NaN input gives NaN.
    pub fn apply(&self, values: &[f64]) -> f64 {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return f64::NAN;
        }
        match self {
            Aggregate::Mean => v.iter().sum::<f64>() / v.len() as f64,
            Aggregate::Median => {
                v.sort_by(f64::total_cmp);
                let k = v.len() / 2;
                if v.len() % 2 == 1 {
                    v[k]
                } else {
                    0.5 * (v[k - 1] + v[k])
                }
            }
        }
    }
}

/// One aggregated cell of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellRow {
    pub source: String,
    pub size: String,
    pub noise: f64,
    pub variant: String,
    pub runs: usize,
    pub optimal: usize,
    pub objective: f64,
    pub gap: f64,
    pub nodes: f64,
    pub cuts: f64,
    pub segments: f64,
    pub rand_index: f64,
    pub wall_time: f64,
}

pub fn aggregate_cell(reports: &[RunReport], how: Aggregate) -> CellRow {
    let first = &reports[0];
    let col = |f: &dyn Fn(&RunReport) -> f64| how.apply(&reports.iter().map(f).collect::<Vec<_>>());
    CellRow {
        source: first.instance.source.clone(),
        size: format!("{}x{}", first.instance.rows, first.instance.cols),
        noise: first.instance.noise_sigma2.unwrap_or(f64::NAN),
        variant: first.variant.clone(),
        runs: reports.len(),
        optimal: reports.iter().filter(|r| r.solve.status == SolveStatus::Optimal).count(),
        objective: col(&|r| r.metrics.objective),
        gap: col(&|r| r.metrics.gap.unwrap_or(f64::NAN)),
        nodes: col(&|r| r.metrics.node_count.map_or(f64::NAN, |n| n as f64)),
        cuts: col(&|r| r.metrics.cuts_added as f64),
        segments: col(&|r| r.metrics.segments as f64),
        rand_index: col(&|r| r.metrics.rand_index.unwrap_or(f64::NAN)),
        wall_time: col(&|r| r.solve.wall_time),
    }
}

fn cell(v: f64, prec: usize) -> String {
    if v.is_nan() {
        "-".into()
    } else {
        format!("{v:.prec$}")
    }
}

pub fn format_cells(rows: &[CellRow]) -> String {
    let mut out = format!(
        "{:<20} {:>7} {:>7} {:<8} {:>5} {:>11} {:>9} {:>8} {:>6} {:>5} {:>6} {:>9}\n",
        "source", "size", "noise", "variant", "opt", "objective", "gap", "nodes", "cuts", "segs", "RI", "time[s]"
    );
    for r in rows {
        out += &format!(
            "{:<20} {:>7} {:>7} {:<8} {:>5} {:>11} {:>9} {:>8} {:>6} {:>5} {:>6} {:>9}\n",
            r.source,
            r.size,
            cell(r.noise, 4),
            r.variant,
            format!("{}/{}", r.optimal, r.runs),
            cell(r.objective, 6),
            cell(r.gap, 6),
            cell(r.nodes, 0),
            cell(r.cuts, 0),
            cell(r.segments, 0),
            cell(r.rand_index, 4),
            cell(r.wall_time, 2),
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct XiRow {
    pub xi: f64,
    pub status: SolveStatus,
    pub objective: f64,
    pub segments: usize,
    pub wall_time: f64,
}

pub fn format_xi(rows: &[XiRow]) -> String {
    let mut out = format!("{:>6} {:<15} {:>11} {:>5} {:>9}\n", "xi", "status", "objective", "segs", "time[s]");
    for r in rows {
        out +=
            &format!("{:>6} {:<15} {:>11} {:>5} {:>9}\n", r.xi, r.status.as_str(), cell(r.objective, 6), r.segments, cell(r.wall_time, 2));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitRow {
    pub time_limit: f64,
    pub status: SolveStatus,
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub wall_time: f64,
    /// The gap is larger than at some shorter limit.
    pub deviation: bool,
}

/// Mark rows whose gap exceeds the smallest gap seen at a shorter limit.
pub fn mark_deviations(rows: &mut [LimitRow], tol: f64) {
    let mut best = f64::INFINITY;
    for r in rows.iter_mut() {
        r.deviation = !r.gap.is_nan() && r.gap > best + tol;
        if !r.gap.is_nan() {
            best = best.min(r.gap);
        }
    }
}

pub fn format_limits(rows: &[LimitRow]) -> String {
    let mut out = format!("{:>8} {:<15} {:>11} {:>11} {:>9} {:>9}\n", "limit[s]", "status", "objective", "bound", "gap", "time[s]");
    for r in rows {
        out += &format!(
            "{:>8} {:<15} {:>11} {:>11} {:>9} {:>9}{}\n",
            r.time_limit,
            r.status.as_str(),
            cell(r.objective, 6),
            cell(r.best_bound, 6),
            cell(r.gap, 6),
            cell(r.wall_time, 2),
            if r.deviation { "  gap increased" } else { "" }
        );
    }
    out
}

pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!(e.to_string()))?;
    write_atomic(path, &bytes)?;
    Ok(())
}
