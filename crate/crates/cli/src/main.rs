//! `sphmix`: generate data, fit mixtures, evaluate L1 error and sweep sample
//! sizes. Structures are JSON, samples and sweeps CSV, audits JSON lines.

mod data;
mod sweep;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use sphmix::estimator::{self, VarianceCenter};
use sphmix::{l1_mc, l1_quadrature_1d, EstimatorConfig, Report};

use data::Sidecar;

/// Input the user can fix: unreadable files, malformed numbers, bad flags.
#[derive(Debug)]
pub struct BadInput(pub String);

impl std::fmt::Display for BadInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for BadInput {}

#[derive(Parser, Debug)]
#[command(name = "sphmix", version, about = "Learn mixtures of spherical Gaussians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "snake_case")]
enum Command {
    /// Sample a dataset from a mixture JSON.
    Gen(GenArgs),
    /// Fit k spherical Gaussians (d ≥ 2).
    Fit(FitArgs),
    /// Fit a k-component mixture on the line.
    Fit1d(FitArgs),
    /// L1 distance between two mixtures.
    Eval(EvalArgs),
    /// Fit and evaluate a known mixture over a grid of sample sizes.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Serialize)]
struct GenArgs {
    /// Mixture JSON to sample from.
    #[arg(long)]
    mixture: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample CSV; the sidecar goes next to it with a .json extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Center {
    MinPair,
    ResidualSpectrum,
}

#[derive(Args, Debug, Clone, Serialize)]
struct EstimatorArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Multiplies the mean-grid and weight-grid spacings.
    #[arg(long, default_value_t = 1.0)]
    grid_scale: f64,
    #[arg(long)]
    weight_grid_scale: Option<f64>,
    /// Mean-grid half width, in units of the estimated standard deviation.
    #[arg(long)]
    span_extent: Option<f64>,
    #[arg(long)]
    max_candidates: Option<u128>,
    #[arg(long)]
    sigma_grid_size: Option<usize>,
    #[arg(long)]
    sigma_grid_window: Option<usize>,
    #[arg(long, value_enum, default_value = "min-pair")]
    variance_center: Center,
    /// Enumerate candidates up to relabeling of the components.
    #[arg(long)]
    dedupe: bool,
    /// Draws per candidate per Scheffe game.
    #[arg(long)]
    mc_samples: Option<usize>,
    /// Thin the 1-D construction samples to this many order statistics.
    #[arg(long)]
    construction_points: Option<usize>,
}

impl EstimatorArgs {
    fn config(&self) -> EstimatorConfig<f64> {
        EstimatorConfig {
            grid_scale: self.grid_scale,
            weight_grid_scale: self.weight_grid_scale,
            span_extent: self.span_extent,
            max_candidates: self.max_candidates,
            sigma_grid_size: self.sigma_grid_size,
            sigma_grid_window: self.sigma_grid_window,
            variance_center: match self.variance_center {
                Center::MinPair => VarianceCenter::MinPair,
                Center::ResidualSpectrum => VarianceCenter::ResidualSpectrum,
            },
            dedupe_symmetric: self.dedupe,
            n_mc: self.mc_samples,
            construction_points: self.construction_points,
            ..EstimatorConfig::new(self.k, self.eps, self.delta, self.seed)
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct FitArgs {
    /// Sample CSV.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    estimator: EstimatorArgs,
    /// Where to write the fitted mixture JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write split and game records as JSON lines.
    #[arg(long)]
    audit: Option<PathBuf>,
    /// Write per-sample cluster assignments as JSON.
    #[arg(long)]
    dump_clusters: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct EvalArgs {
    #[arg(long)]
    f: PathBuf,
    #[arg(long)]
    g: PathBuf,
    #[arg(long, default_value_t = 20_000)]
    mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use quadrature instead of Monte Carlo (1-D only).
    #[arg(long)]
    exact: bool,
    #[arg(long, default_value_t = 1e-8)]
    abs_tol: f64,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    /// Mixture JSON to sample from and measure against.
    #[arg(long)]
    mixture: PathBuf,
    /// Strictly increasing sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[command(flatten)]
    #[serde(flatten)]
    estimator: EstimatorArgs,
    /// Draws for the Monte Carlo L1 evaluation.
    #[arg(long, default_value_t = 20_000)]
    eval_samples: usize,
    /// Evaluate 1-D fits by quadrature.
    #[arg(long)]
    exact: bool,
    /// Sweep CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-cell results as JSON lines.
    #[arg(long)]
    audit: Option<PathBuf>,
}

pub fn exit_code(e: &sphmix::Error) -> i32 {
    use sphmix::Error::*;
    match e {
        CandidateOverflow { .. } => 3,
        NonConvergence { .. } => 4,
        DimensionMismatch { .. } | InvalidInput(_) | Empty(_) | InsufficientSamples { .. } => 2,
        NoQualifyingClusters | QuadratureBudget { .. } => 1,
    }
}

fn report_error(e: &anyhow::Error) -> ExitCode {
    let (code, body) = if let Some(err) = e.downcast_ref::<sphmix::Error>() {
        let mut body = json!({ "error": kind(err), "message": err.to_string() });
        if let sphmix::Error::CandidateOverflow { count, limit } = err {
            body["count"] = json!(count.to_string());
            body["limit"] = json!(limit.to_string());
        }
        (exit_code(err), body)
    } else if e.downcast_ref::<BadInput>().is_some() {
        (2, json!({ "error": "bad_input", "message": format!("{e:#}") }))
    } else {
        (1, json!({ "error": "failure", "message": format!("{e:#}") }))
    };
    eprintln!("{body}");
    ExitCode::from(code as u8)
}

fn kind(e: &sphmix::Error) -> &'static str {
    use sphmix::Error::*;
    match e {
        DimensionMismatch { .. } => "dimension_mismatch",
        InvalidInput(_) => "invalid_input",
        Empty(_) => "empty",
        InsufficientSamples { .. } => "insufficient_samples",
        NonConvergence { .. } => "non_convergence",
        CandidateOverflow { .. } => "candidate_overflow",
        NoQualifyingClusters => "no_qualifying_clusters",
        QuadratureBudget { .. } => "quadrature_budget",
    }
}

fn print_json<S: Serialize>(value: &S) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn gen(args: &GenArgs) -> Result<serde_json::Value> {
    let truth = data::read_mixture(&args.mixture)?;
    let ds = truth.sample(args.n, args.seed)?;
    data::write_samples(&args.out, &ds)?;
    let side = data::sidecar_path(&args.out);
    let sidecar = Sidecar {
        n: ds.n(),
        d: ds.dim(),
        seed: args.seed,
        generator_version: data::GENERATOR_VERSION,
        mixture: Some(truth.clone()),
    };
    data::write_json(&side, &sidecar)?;
    let mut counts = vec![0usize; truth.k()];
    for &l in ds.labels.as_deref().unwrap_or_default() {
        counts[l] += 1;
    }
    Ok(json!({ "n": ds.n(), "d": ds.dim(), "seed": args.seed, "csv": args.out, "sidecar": side, "label_counts": counts }))
}

fn write_audit(path: &Path, report: &Report) -> Result<()> {
    #[derive(Serialize)]
    #[serde(tag = "event", rename_all = "snake_case")]
    enum Line<'a> {
        Split(&'a sphmix::cluster::SplitRecord),
        Game(&'a sphmix::scheffe::GameRecord),
    }
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    let games = report.tournament.iter().flat_map(|t| &t.audit);
    for line in report.splits.iter().map(Line::Split).chain(games.map(Line::Game)) {
        serde_json::to_writer(&mut w, &line)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn fit(args: &FitArgs, one_dim: bool) -> Result<serde_json::Value> {
    let ds = data::read_samples(&args.data)?;
    let cfg = args.estimator.config();
    let (mixture, report) = if one_dim {
        if ds.dim() != 1 {
            return Err(BadInput(format!("fit1d needs one column, {} has {}", args.data.display(), ds.dim())).into());
        }
        if args.dump_clusters.is_some() {
            return Err(BadInput("--dump-clusters applies to fit only".into()).into());
        }
        estimator::learn_1d(ds.samples.as_slice(), &cfg)?
    } else {
        let plan = estimator::plan_k_sphere(&ds, &cfg)?;
        if let Some(path) = &args.dump_clusters {
            data::write_json(path, &plan.clustering.dump())?;
        }
        estimator::select_k_sphere(&ds, &cfg, &plan)?
    };
    if let Some(path) = &args.out {
        data::write_json(path, &mixture)?;
    }
    if let Some(path) = &args.audit {
        write_audit(path, &report)?;
    }
    Ok(json!({ "report": report, "mixture": mixture }))
}

fn eval(args: &EvalArgs) -> Result<serde_json::Value> {
    let f = data::read_mixture(&args.f)?;
    let g = data::read_mixture(&args.g)?;
    if args.exact {
        let value = l1_quadrature_1d(&f, &g, args.abs_tol)?;
        return Ok(json!({ "value": value, "method": "quadrature", "abs_tol": args.abs_tol }));
    }
    let e = l1_mc(&f, &g, args.mc_samples, args.seed)?;
    Ok(json!({ "value": e.value, "std_error": e.std_error, "n_mc": e.n_mc, "seed": e.seed, "method": "monte_carlo" }))
}

fn run_sweep(args: &SweepArgs) -> Result<serde_json::Value> {
    if args.n.is_empty() || args.n.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BadInput(format!("--n must be strictly increasing, got {:?}", args.n)).into());
    }
    if args.reps == 0 {
        return Err(BadInput("--reps must be positive".into()).into());
    }
    let truth = data::read_mixture(&args.mixture)?;
    if args.exact && truth.dim() != 1 {
        return Err(BadInput("--exact needs a one-dimensional mixture".into()).into());
    }
    let cfg = args.estimator.config();
    cfg.validate()?;
    let plan = sweep::Plan {
        truth: &truth,
        grid: &args.n,
        reps: args.reps,
        seed: args.estimator.seed,
        cfg,
        mc_samples: args.eval_samples,
        exact: args.exact,
    };
    let (rows, cells) = sweep::run(&plan);
    match &args.out {
        Some(path) => sweep::write_csv(File::create(path).with_context(|| format!("creating {}", path.display()))?, &rows)?,
        None => sweep::write_csv(std::io::stdout().lock(), &rows)?,
    }
    if let Some(path) = &args.audit {
        let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        for c in &cells {
            serde_json::to_writer(&mut w, c)?;
            writeln!(w)?;
        }
        w.flush()?;
    }
    let failed: usize = rows.iter().map(|r| r.failed).sum();
    Ok(json!({ "rows": rows.len(), "cells": cells.len(), "failed_cells": failed }))
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("SPHMIX_THREADS") else { return Ok(()) };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| BadInput(format!("SPHMIX_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    configure_threads()?;
    let echo = serde_json::to_value(&cli.command)?;
    let out = match &cli.command {
        Command::Gen(a) => gen(a)?,
        Command::Fit(a) => fit(a, false)?,
        Command::Fit1d(a) => fit(a, true)?,
        Command::Eval(a) => eval(a)?,
        Command::Sweep(a) => {
            let summary = run_sweep(a)?;
            // stdout may hold the CSV; the summary goes to stderr
            eprintln!("{}", json!({ "run": echo, "summary": summary }));
            return Ok(());
        }
    };
    print_json(&json!({ "run": echo, "result": out }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(&e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let overflow = sphmix::Error::CandidateOverflow { count: 11, limit: 10 };
        let stalled = sphmix::Error::NonConvergence { iterations: 5, residual: 1.0, eigenvalue: 0.0, best: vec![] };
        assert_eq!(exit_code(&overflow), 3);
        assert_eq!(exit_code(&stalled), 4);
        assert_eq!(exit_code(&sphmix::Error::InvalidInput("x".into())), 2);
        assert_eq!(exit_code(&sphmix::Error::NoQualifyingClusters), 1);
        let e = report_error(&anyhow::Error::new(overflow));
        assert_eq!(e, ExitCode::from(3));
    }
}
