//! `pwfit`: fit discontinuous piecewise affine models to images and run
//! benchmark sweeps over variants, sizes, noise levels, `xi` and time limits.

mod pipeline;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand};
use pwfit::formulation::{build_2d_model, compute_lambda};
use pwfit::io::{write_atomic, write_lp, write_report, Generator, ImageFormat, RunReport};
use pwfit::postprocess::Norm;
use pwfit::separation::{InitialCycles, Variant};
use pwfit::solver::{backend_from_env, SolveLimits};
use rayon::prelude::*;

use pipeline::{parse_size, Source};
use sweep::{Aggregate, LimitRow, XiRow};

#[derive(Parser)]
#[command(name = "pwfit", version, about = "Piecewise affine image fitting by MILP with lazy multicut constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one instance and write w, f, labels and a report.
    Solve(SolveArgs),
    /// Run every generator/size/noise/variant cell and aggregate repeats.
    Sweep(SweepArgs),
    /// Solve one instance for several values of xi.
    SweepXi(SweepXiArgs),
    /// Solve one instance under increasing time limits and tabulate the gap.
    SweepLimits(SweepLimitsArgs),
    /// Write a synthetic instance and its ground truth.
    Generate(GenerateArgs),
    /// Write the initial model of a variant in LP format.
    ExportLp(ExportLpArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Size(usize, usize);

fn size_arg(s: &str) -> Result<Size> {
    parse_size(s).map(|(r, c)| Size(r, c))
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["input", "synthetic"])))]
struct SourceArgs {
    /// Image to fit (.pgm or .csv).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Input format when the extension does not tell.
    #[arg(long, requires = "input")]
    format: Option<ImageFormat>,
    /// Built-in generator: quadrants, diagonals or stripes.
    #[arg(long)]
    synthetic: Option<Generator>,
    #[arg(long, default_value = "20x30", value_parser = size_arg)]
    size: Size,
    /// Noise variance of the synthetic instance.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SourceArgs {
    fn source(&self) -> Result<Source> {
        if let Some(path) = &self.input {
            let format = match self.format.or_else(|| ImageFormat::from_path(path)) {
                Some(f) => f,
                None => bail!("cannot tell the format of {}; pass --format pgm|csv", path.display()),
            };
            return Ok(Source::File { path: path.clone(), format });
        }
        let generator = self.synthetic.context("no input given")?;
        Ok(Source::Synthetic { generator, rows: self.size.0, cols: self.size.1, noise: self.noise, seed: self.seed })
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Relative gap at which the solver may stop.
    #[arg(long, default_value_t = 0.0)]
    gap: f64,
    /// Norm of the per-segment plane fit.
    #[arg(long, default_value = "l1")]
    norm: Norm,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// mp, mph, mph-4, mph-4-8, mph-f, mph-4-f or heuristic.
    #[arg(long, default_value = "mph")]
    variant: Variant,
    #[arg(long, default_value_t = 0.5)]
    xi: f64,
    /// Seconds.
    #[arg(long, default_value_t = 600.0)]
    time_limit: f64,
    #[arg(long, default_value = "pwfit-out")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "20x30", value_parser = size_arg)]
    sizes: Vec<Size>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    noise: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "mp,mph,mph-4,mph-4-8,mph-f")]
    variants: Vec<Variant>,
    #[arg(long, value_delimiter = ',', default_value = "quadrants,diagonals,stripes")]
    generators: Vec<Generator>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, value_enum, default_value_t = Aggregate::Median)]
    aggregate: Aggregate,
    #[arg(long, default_value_t = 0.5)]
    xi: f64,
    #[arg(long, default_value_t = 600.0)]
    time_limit: f64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Parallel workers; each owns its own solver.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value = "pwfit-sweep")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepXiArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
    xi: Vec<f64>,
    #[arg(long, default_value = "mph-4")]
    variant: Variant,
    #[arg(long, default_value_t = 600.0)]
    time_limit: f64,
    #[arg(long, default_value = "pwfit-xi")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepLimitsArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Seconds.
    #[arg(long, value_delimiter = ',', default_value = "50,200,600,1200")]
    limits: Vec<f64>,
    #[arg(long, default_value = "mph-4")]
    variant: Variant,
    #[arg(long, default_value_t = 0.5)]
    xi: f64,
    #[arg(long, default_value = "pwfit-limits")]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    generator: Generator,
    #[arg(long, default_value = "20x30", value_parser = size_arg)]
    size: Size,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "pwfit-instance")]
    out: PathBuf,
}

#[derive(Args)]
struct ExportLpArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value = "mp")]
    variant: Variant,
    #[arg(long, default_value_t = 0.5)]
    xi: f64,
    /// Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn limits(time_limit: f64, s: &SolverArgs) -> Result<SolveLimits> {
    Ok(SolveLimits::new(time_limit, s.gap)?)
}

fn xi_tag(xi: f64) -> String {
    format!("{xi}").replace('.', "_")
}

fn solve(a: &SolveArgs) -> Result<()> {
    let limits = limits(a.time_limit, &a.solver)?;
    let loaded = a.source.source()?.load()?;
    let backend = backend_from_env()?;
    let out = pipeline::run(backend.as_ref(), &loaded, a.variant, a.xi, &limits, a.solver.norm)?;
    pipeline::write_artifacts(&a.out, &out)?;
    let m = &out.report.metrics;
    println!(
        "{} {} objective {:.6} segments {} time {:.2}s -> {}",
        a.variant,
        out.report.solve.status,
        m.objective,
        m.segments,
        out.report.solve.wall_time,
        a.out.display()
    );
    Ok(())
}

struct Job {
    generator: Generator,
    size: Size,
    noise: f64,
    variant: Variant,
    repeat: usize,
}

impl Job {
    fn stem(&self) -> String {
        format!("{}-{}x{}-n{}-{}-r{}", self.generator.name(), self.size.0, self.size.1, self.noise, self.variant, self.repeat)
    }
}

fn run_sweep(a: &SweepArgs) -> Result<()> {
    if a.repeats == 0 || a.jobs == 0 {
        bail!("--repeats and --jobs must be positive");
    }
    let limits = limits(a.time_limit, &a.solver)?;
    let mut jobs = Vec::new();
    for &generator in &a.generators {
        for &size in &a.sizes {
            for &noise in &a.noise {
                for &variant in &a.variants {
                    jobs.extend((0..a.repeats).map(|repeat| Job { generator, size, noise, variant, repeat }));
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs).build()?;
    let reports: Vec<Result<RunReport>> = pool.install(|| {
        jobs.par_iter()
            .map(|j| {
                let source = Source::Synthetic { generator: j.generator, rows: j.size.0, cols: j.size.1, noise: j.noise, seed: a.seed };
                let backend = backend_from_env()?;
                let out =
                    pipeline::run(backend.as_ref(), &source.load()?, j.variant, a.xi, &limits, a.solver.norm).with_context(|| j.stem())?;
                log::info!("{} {} {:.2}s", j.stem(), out.report.solve.status, out.report.solve.wall_time);
                Ok(out.report)
            })
            .collect()
    });
    let reports: Vec<RunReport> = reports.into_iter().collect::<Result<_>>()?;
    let runs = a.out.join("runs");
    ensure_dir(&runs)?;
    for (j, r) in jobs.iter().zip(&reports) {
        write_report(r, &runs.join(format!("{}.toml", j.stem())))?;
    }
    let rows: Vec<_> = reports.chunks(a.repeats).map(|c| sweep::aggregate_cell(c, a.aggregate)).collect();
    sweep::write_csv_rows(&a.out.join("sweep.csv"), &rows)?;
    print!("{}", sweep::format_cells(&rows));
    Ok(())
}

fn sweep_xi(a: &SweepXiArgs) -> Result<()> {
    let limits = limits(a.time_limit, &a.solver)?;
    let loaded = a.source.source()?.load()?;
    let backend = backend_from_env()?;
    ensure_dir(&a.out)?;
    let (rows_n, cols_n) = (loaded.instance.rows(), loaded.instance.cols());
    let mut rows = Vec::new();
    for &xi in &a.xi {
        let out = pipeline::run(backend.as_ref(), &loaded, a.variant, xi, &limits, a.solver.norm)?;
        let tag = xi_tag(xi);
        if let Some((seg, _)) = &out.fitted {
            pipeline::write_labels(&a.out.join(format!("labels-xi{tag}.csv")), rows_n, cols_n, &seg.labels)?;
        }
        write_report(&out.report, &a.out.join(format!("report-xi{tag}.toml")))?;
        rows.push(XiRow {
            xi,
            status: out.report.solve.status,
            objective: out.report.metrics.objective,
            segments: out.report.metrics.segments,
            wall_time: out.report.solve.wall_time,
        });
    }
    sweep::write_csv_rows(&a.out.join("xi.csv"), &rows)?;
    print!("{}", sweep::format_xi(&rows));
    Ok(())
}

fn sweep_limits(a: &SweepLimitsArgs) -> Result<()> {
    let base = limits(1.0, &a.solver)?;
    let loaded = a.source.source()?.load()?;
    let backend = backend_from_env()?;
    ensure_dir(&a.out)?;
    let mut rows = Vec::new();
    for &t in &a.limits {
        let limits = SolveLimits::new(t, base.gap_target)?;
        let out = pipeline::run(backend.as_ref(), &loaded, a.variant, a.xi, &limits, a.solver.norm)?;
        write_report(&out.report, &a.out.join(format!("report-t{}.toml", xi_tag(t))))?;
        let m = &out.report.metrics;
        rows.push(LimitRow {
            time_limit: t,
            status: out.report.solve.status,
            objective: m.objective,
            best_bound: m.best_bound.unwrap_or(f64::NAN),
            gap: m.gap.unwrap_or(f64::NAN),
            wall_time: out.report.solve.wall_time,
            deviation: false,
        });
    }
    sweep::mark_deviations(&mut rows, 1e-9);
    sweep::write_csv_rows(&a.out.join("limits.csv"), &rows)?;
    print!("{}", sweep::format_limits(&rows));
    let n = rows.iter().filter(|r| r.deviation).count();
    if n > 0 {
        println!("{n} row(s) with a larger gap than a shorter limit");
    }
    Ok(())
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let source = Source::Synthetic { generator: a.generator, rows: a.size.0, cols: a.size.1, noise: a.noise, seed: a.seed };
    let loaded = source.load()?;
    let truth = loaded.truth.as_ref().context("generator produced no ground truth")?;
    let (r, c) = (a.size.0, a.size.1);
    ensure_dir(&a.out)?;
    pipeline::write_grid_pair(&a.out, "y", r, c, loaded.instance.values())?;
    pipeline::write_grid_pair(&a.out, "clean", r, c, &truth.clean)?;
    pipeline::write_labels(&a.out.join("truth-labels.csv"), r, c, &truth.labels)?;
    println!("{} {}x{} noise {} seed {} -> {}", a.generator.name(), r, c, a.noise, a.seed, a.out.display());
    Ok(())
}

fn export_lp(a: &ExportLpArgs) -> Result<()> {
    let loaded = a.source.source()?.load()?;
    let inst = &loaded.instance;
    let params = compute_lambda(inst, a.xi)?;
    let g = inst.graph();
    let cycles = match a.variant.config().initial_cycles {
        InitialCycles::None => Vec::new(),
        InitialCycles::Four => g.enumerate_4cycles(),
        InitialCycles::FourEight => {
            let mut c = g.enumerate_4cycles();
            c.extend(g.enumerate_8cycles());
            c
        }
    };
    let text = write_lp(&build_2d_model(inst, &params, &cycles)?);
    match &a.out {
        Some(p) => write_atomic(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => run_sweep(a),
        Command::SweepXi(a) => sweep_xi(a),
        Command::SweepLimits(a) => sweep_limits(a),
        Command::Generate(a) => generate(a),
        Command::ExportLp(a) => export_lp(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pwfit: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn ensure_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))
}
