use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pwfit::formulation::{compute_lambda, GridInstance};
use pwfit::io::{
    encode_csv, encode_pgm, generate_synthetic, load_image, write_atomic, write_report, Generator, ImageFormat, InstanceDescriptor,
    RunReport,
};
use pwfit::postprocess::{evaluate, fit_pieces_with, labels_from_edges, GroundTruth, Metrics, Norm, Reconstruction, Segmentation};
use pwfit::separation::{cutting_plane_solve_with, FitSolution, Variant};
use pwfit::solver::{LinearBackend, SolveLimits};

const PGM_MAXVAL: u16 = 255;

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    File { path: PathBuf, format: ImageFormat },
    Synthetic { generator: Generator, rows: usize, cols: usize, noise: f64, seed: u64 },
}

pub struct Loaded {
    pub instance: GridInstance,
    pub descriptor: InstanceDescriptor,
    pub truth: Option<GroundTruth>,
}

impl Source {
    pub fn load(&self) -> Result<Loaded> {
        match self {
            Source::File { path, format } => {
                let instance = load_image(path, *format).with_context(|| format!("reading {}", path.display()))?;
                let descriptor = InstanceDescriptor {
                    source: path.display().to_string(),
                    rows: instance.rows(),
                    cols: instance.cols(),
                    noise_sigma2: None,
                    seed: None,
                    clipped: None,
                };
                Ok(Loaded { instance, descriptor, truth: None })
            }
            Source::Synthetic { generator, rows, cols, noise, seed } => {
                let data = generate_synthetic(&generator.spec(*rows, *cols, *noise, *seed))?;
                let descriptor = InstanceDescriptor {
                    source: format!("synthetic:{}", generator.name()),
                    rows: *rows,
                    cols: *cols,
                    noise_sigma2: Some(*noise),
                    seed: Some(*seed),
                    clipped: Some(data.clipped),
                };
                Ok(Loaded { instance: data.instance, descriptor, truth: Some(data.truth) })
            }
        }
    }
}

pub struct RunOutput {
    pub solution: FitSolution,
    /// `None` when the solve ended without a labeling.
    pub fitted: Option<(Segmentation, Reconstruction)>,
    pub report: RunReport,
}

fn empty_metrics(s: &FitSolution) -> Metrics {
    Metrics {
        objective: s.objective,
        fit_term: f64::NAN,
        regularization_term: f64::NAN,
        segments: 0,
        boundary_length: 0,
        best_bound: s.best_bound,
        gap: s.gap,
        node_count: s.node_count,
        cuts_added: s.cuts_added(),
        rounds: s.rounds.len(),
        rand_index: None,
        exact_match: None,
        mae_w: None,
        mae_f: None,
    }
}

pub fn run(backend: &dyn LinearBackend, loaded: &Loaded, variant: Variant, xi: f64, limits: &SolveLimits, norm: Norm) -> Result<RunOutput> {
    let inst = &loaded.instance;
    let params = compute_lambda(inst, xi)?;
    let config = variant.config();
    let solution = cutting_plane_solve_with(backend, inst, &params, &config, limits)?;
    let (fitted, metrics) = if solution.has_incumbent() {
        let seg = labels_from_edges(inst.graph(), &solution.x)?;
        let recon = fit_pieces_with(backend, inst, &seg, norm)?;
        let metrics = evaluate(inst, &solution, &seg, &recon, loaded.truth.as_ref())?;
        (Some((seg, recon)), metrics)
    } else {
        log::warn!("{variant}: {} without an incumbent", solution.status);
        (None, empty_metrics(&solution))
    };
    let report = RunReport::new(loaded.descriptor.clone(), &config, &params, limits, norm, backend.name(), &solution, metrics);
    Ok(RunOutput { solution, fitted, report })
}

pub fn write_grid_pair(dir: &Path, stem: &str, rows: usize, cols: usize, values: &[f64]) -> Result<()> {
    write_atomic(&dir.join(format!("{stem}.csv")), &encode_csv(rows, cols, values)?)?;
    write_atomic(&dir.join(format!("{stem}.pgm")), &encode_pgm(rows, cols, values, PGM_MAXVAL, true)?)?;
    Ok(())
}

pub fn write_labels(path: &Path, rows: usize, cols: usize, labels: &[usize]) -> Result<()> {
    write_atomic(path, &encode_csv(rows, cols, labels)?)?;
    Ok(())
}

/// w.{csv,pgm}, f.{csv,pgm}, labels.csv and report.toml.
pub fn write_artifacts(dir: &Path, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let (rows, cols) = (out.report.instance.rows, out.report.instance.cols);
    if let Some((seg, recon)) = &out.fitted {
        write_grid_pair(dir, "w", rows, cols, &out.solution.w)?;
        write_grid_pair(dir, "f", rows, cols, &recon.f)?;
        write_labels(&dir.join("labels.csv"), rows, cols, &seg.labels)?;
    }
    write_report(&out.report, &dir.join("report.toml"))?;
    Ok(())
}

pub fn parse_size(s: &str) -> Result<(usize, usize)> {
    let Some((r, c)) = s.trim().split_once(['x', 'X']) else {
        bail!("size `{s}` is not ROWSxCOLS");
    };
    let rows: usize = r.trim().parse().with_context(|| format!("bad row count in `{s}`"))?;
    let cols: usize = c.trim().parse().with_context(|| format!("bad column count in `{s}`"))?;
    Ok((rows, cols))
}
