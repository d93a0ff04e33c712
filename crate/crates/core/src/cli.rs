//! Command-line interface: `fit`, `cluster`, `sample`, `simulate`, `bench`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{self, BenchConfig};
use crate::error::{Error, Result};
use crate::estimate::{self, ConcentrationConfig, FrechetConfig, RootMethod, StepRule};
use crate::geometry::SpherePoint;
use crate::io::{self, LoadOptions};
use crate::metrics::{self, Agreement, LabelVector};
use crate::mixture::{
    self, Assignment, ConcentrationMode, EmConfig, InformationCriteria, StopRule,
};
use crate::rng_from_seed;
use crate::simulate::{self, Scenario};
use crate::sn::{self, SnParams};

#[derive(Debug, Parser)]
#[command(
    name = "spnorm",
    version,
    about = "Spherical normal distribution: fitting, clustering, sampling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a single SN distribution by maximum likelihood.
    Fit(FitArgs),
    /// Cluster observations with an SN mixture or a k-means baseline.
    Cluster(ClusterArgs),
    /// Draw from an SN distribution or a mixture model.
    Sample(SampleArgs),
    /// Generate a labeled synthetic dataset.
    Simulate(SimulateArgs),
    /// Run the location and concentration estimation benchmarks.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// CSV file, one observation per row in ambient coordinates.
    #[arg(long)]
    pub input: PathBuf,
    /// Scale every row to unit length before fitting.
    #[arg(long)]
    pub normalize: bool,
    /// Skip the first line of the CSV file.
    #[arg(long)]
    pub header: bool,
}

impl InputArgs {
    fn load(&self) -> Result<Vec<SpherePoint>> {
        let opts = LoadOptions {
            normalize: self.normalize,
            has_header: self.header,
        };
        Ok(io::load_csv(&self.input, opts)?.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Newton,
    Halley,
}

impl From<MethodArg> for RootMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Newton => RootMethod::Newton,
            MethodArg::Halley => RootMethod::Halley,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StepArg {
    Fixed,
    LineSearch,
}

#[derive(Debug, Args)]
pub struct EstimatorArgs {
    /// Concentration root finder.
    #[arg(long, value_enum, default_value = "newton")]
    pub method: MethodArg,
    /// Step rule for the Fréchet mean.
    #[arg(long, value_enum, default_value = "fixed")]
    pub step: StepArg,
    /// Step size for the fixed step rule.
    #[arg(long, default_value_t = 0.25)]
    pub step_size: f64,
    /// Finite-difference step relative to max(1, lambda).
    #[arg(long, default_value_t = 1e-4)]
    pub h: f64,
}

impl EstimatorArgs {
    fn step_rule(&self) -> StepRule {
        match self.step {
            StepArg::Fixed => StepRule::Fixed(self.step_size),
            StepArg::LineSearch => StepRule::LineSearch,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Write the fit as JSON here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Stopping tolerance for both solvers.
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    /// Iteration cap for the Fréchet mean.
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    SnSoft,
    SnHard,
    SnStochastic,
    Kmeans,
    Spkmeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AssignmentArg {
    Soft,
    Hard,
    Stochastic,
}

impl From<AssignmentArg> for Assignment {
    fn from(a: AssignmentArg) -> Self {
        match a {
            AssignmentArg::Soft => Assignment::Soft,
            AssignmentArg::Hard => Assignment::Hard,
            AssignmentArg::Stochastic => Assignment::Stochastic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConcentrationArg {
    Hetero,
    Homo,
}

impl From<ConcentrationArg> for ConcentrationMode {
    fn from(c: ConcentrationArg) -> Self {
        match c {
            ConcentrationArg::Hetero => ConcentrationMode::Heterogeneous,
            ConcentrationArg::Homo => ConcentrationMode::Homogeneous,
        }
    }
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Directory for labels.txt, model.json and report.json.
    #[arg(long)]
    pub output: PathBuf,
    /// Number of clusters.
    #[arg(short = 'K', long = "clusters")]
    pub k: usize,
    /// Clustering algorithm. Defaults to sn-soft.
    #[arg(long, value_enum)]
    pub algorithm: Option<Algorithm>,
    /// E-step variant for the SN mixture; must agree with --algorithm.
    #[arg(long, value_enum)]
    pub assignment: Option<AssignmentArg>,
    /// Per-component or shared concentration.
    #[arg(long, value_enum, default_value = "hetero")]
    pub concentration: ConcentrationArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Inner solver tolerance for the final M-step.
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    /// Membership change threshold, scaled by sqrt(N K).
    #[arg(long, default_value_t = 1e-6)]
    pub eps_gamma: f64,
    /// Stop on relative log-likelihood change instead of membership change.
    #[arg(long)]
    pub loglik_stop: bool,
    /// EM iteration cap.
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    /// Reference labels to score the clustering against.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Location, comma separated ambient coordinates.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        requires = "lambda",
        conflicts_with = "model"
    )]
    pub mu: Option<Vec<f64>>,
    /// Concentration.
    #[arg(long, requires = "mu")]
    pub lambda: Option<f64>,
    /// Mixture model JSON to sample from.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Number of draws.
    #[arg(short = 'n', long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV destination; standard output if omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write the generating component of each draw (1-based).
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// small-mix, large-mix or household.
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for points.csv, labels.txt and model.json.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableArg {
    Location,
    Concentration,
    Both,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Repetitions per cell.
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    #[arg(long, value_enum, default_value = "both")]
    pub table: TableArg,
    /// Directory for location.csv and concentration.csv; standard output if
    /// omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Sphere dimensions.
    #[arg(long, value_delimiter = ',', default_values_t = [5, 10, 20])]
    pub dims: Vec<usize>,
    /// Sample sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [50, 100, 150, 200])]
    pub sizes: Vec<usize>,
}

/// 2 for unreadable or empty input, 1 for everything else.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NoObservations
        | Error::Input { .. }
        | Error::Io(_)
        | Error::Csv(_)
        | Error::Json(_) => 2,
        _ => 1,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Fit(a) => cmd_fit(&a, &mut out),
        Command::Cluster(a) => cmd_cluster(&a, &mut out),
        Command::Sample(a) => cmd_sample(&a, &mut out),
        Command::Simulate(a) => cmd_simulate(&a, &mut out),
        Command::Bench(a) => cmd_bench(&a, &mut out),
    }
}

#[derive(Debug, Serialize)]
struct FitReport {
    n: usize,
    p: usize,
    mu: Vec<f64>,
    lambda: f64,
    c_hat: f64,
    log_likelihood: f64,
    iterations_mu: usize,
    iterations_lambda: usize,
    converged: bool,
    support_ok: bool,
    seconds: f64,
}

fn emit<W: Write, T: Serialize>(value: &T, path: Option<&Path>, out: &mut W) -> Result<()> {
    match path {
        Some(p) => io::save_json(p, value),
        None => {
            out.write_all(io::to_json_string(value)?.as_bytes())?;
            Ok(())
        }
    }
}

pub fn cmd_fit<W: Write>(a: &FitArgs, out: &mut W) -> Result<()> {
    let points = a.input.load()?;
    let fcfg = FrechetConfig {
        step_rule: a.estimator.step_rule(),
        epsilon: a.eps,
        max_iter: a.max_iter,
    };
    let ccfg = ConcentrationConfig {
        method: a.estimator.method.into(),
        h_scale: a.estimator.h,
        epsilon: a.eps,
        ..ConcentrationConfig::default()
    };
    let t = Instant::now();
    let fit = estimate::fit_sn(&points, None, &fcfg, &ccfg)?;
    let seconds = t.elapsed().as_secs_f64();
    let report = FitReport {
        n: points.len(),
        p: fit.params.dim(),
        mu: fit.params.mu().coords().to_vec(),
        lambda: fit.params.lambda(),
        c_hat: fit.c_hat,
        log_likelihood: estimate::log_likelihood(&points, &fit.params)?,
        iterations_mu: fit.iterations_mu,
        iterations_lambda: fit.iterations_lambda,
        converged: fit.converged,
        support_ok: fit.support_ok,
        seconds,
    };
    emit(&report, a.output.as_deref(), out)
}

#[derive(Debug, Serialize)]
struct Timings {
    total_seconds: f64,
}

#[derive(Debug, Serialize)]
struct SnClusterReport {
    algorithm: &'static str,
    #[serde(rename = "K")]
    k: usize,
    n: usize,
    p: usize,
    mode: ConcentrationMode,
    seed: u64,
    iterations: usize,
    converged: bool,
    log_likelihood: f64,
    loglik_trace: Vec<f64>,
    criteria: InformationCriteria,
    reseeded: Vec<mixture::ComponentEvent>,
    lambda_fallbacks: Vec<mixture::ComponentEvent>,
    inner_nonconverged: usize,
    timings: Timings,
    #[serde(skip_serializing_if = "Option::is_none")]
    agreement: Option<Agreement>,
}

#[derive(Debug, Serialize)]
struct BaselineReport {
    algorithm: &'static str,
    #[serde(rename = "K")]
    k: usize,
    n: usize,
    seed: u64,
    /// Within-cluster SSE for kmeans, total cosine similarity for spkmeans.
    objective: f64,
    timings: Timings,
    #[serde(skip_serializing_if = "Option::is_none")]
    agreement: Option<Agreement>,
}

fn algorithm_name(a: Algorithm) -> &'static str {
    match a {
        Algorithm::SnSoft => "sn-soft",
        Algorithm::SnHard => "sn-hard",
        Algorithm::SnStochastic => "sn-stochastic",
        Algorithm::Kmeans => "kmeans",
        Algorithm::Spkmeans => "spkmeans",
    }
}

fn resolve_algorithm(a: Option<Algorithm>, assignment: Option<AssignmentArg>) -> Result<Algorithm> {
    let from_assignment = assignment.map(|s| match s {
        AssignmentArg::Soft => Algorithm::SnSoft,
        AssignmentArg::Hard => Algorithm::SnHard,
        AssignmentArg::Stochastic => Algorithm::SnStochastic,
    });
    match (a, from_assignment) {
        (None, None) => Ok(Algorithm::SnSoft),
        (Some(x), None) | (None, Some(x)) => Ok(x),
        (Some(x), Some(y)) if x == y => Ok(x),
        (Some(x), Some(_)) => Err(Error::InvalidParameter(format!(
            "--assignment conflicts with --algorithm {}",
            algorithm_name(x)
        ))),
    }
}

pub fn cmd_cluster<W: Write>(a: &ClusterArgs, out: &mut W) -> Result<()> {
    let algorithm = resolve_algorithm(a.algorithm, a.assignment)?;
    let points = a.input.load()?;
    let truth = a.truth.as_deref().map(io::load_labels).transpose()?;
    let name = algorithm_name(algorithm);
    let score = |labels: &LabelVector| -> Result<Option<Agreement>> {
        truth
            .as_ref()
            .map(|t| metrics::agreement(labels, t))
            .transpose()
    };
    let labels_path = io::output_path(&a.output, "labels.txt")?;
    let t = Instant::now();
    let summary = match algorithm {
        Algorithm::Kmeans | Algorithm::Spkmeans => {
            let (labels, objective) = if algorithm == Algorithm::Kmeans {
                let r = metrics::kmeans(&points, a.k, a.seed)?;
                (r.labels, r.sse)
            } else {
                let r = metrics::spherical_kmeans(&points, a.k, a.seed)?;
                (r.labels, r.cohesion)
            };
            let total_seconds = t.elapsed().as_secs_f64();
            io::save_labels(&labels_path, &labels)?;
            let report = BaselineReport {
                algorithm: name,
                k: a.k,
                n: points.len(),
                seed: a.seed,
                objective,
                timings: Timings { total_seconds },
                agreement: score(&labels)?,
            };
            io::save_report(&a.output.join("report.json"), &report)?;
            format!("{name}: K={} objective={objective}", a.k)
        }
        _ => {
            let assignment = match algorithm {
                Algorithm::SnHard => Assignment::Hard,
                Algorithm::SnStochastic => Assignment::Stochastic,
                _ => Assignment::Soft,
            };
            let cfg = EmConfig {
                assignment,
                mode: a.concentration.into(),
                epsilon_gamma: a.eps_gamma,
                max_iter: a.max_iter,
                seed: a.seed,
                stop_rule: if a.loglik_stop {
                    StopRule::LogLikelihood
                } else {
                    StopRule::Membership
                },
                final_epsilon: a.eps,
                step_rule: a.estimator.step_rule(),
                root_method: a.estimator.method.into(),
                ..EmConfig::new(a.k)
            };
            let r = mixture::fit_em(&points, &cfg)?;
            let total_seconds = t.elapsed().as_secs_f64();
            let labels = r.labels();
            io::save_labels(&labels_path, &labels)?;
            io::save_model(&a.output.join("model.json"), &r.model)?;
            let criteria = mixture::information_criteria(&r, points.len())?;
            let report = SnClusterReport {
                algorithm: name,
                k: a.k,
                n: points.len(),
                p: r.model.dim(),
                mode: r.model.mode(),
                seed: a.seed,
                iterations: r.iterations,
                converged: r.converged,
                log_likelihood: r.log_likelihood(),
                loglik_trace: r.loglik_trace.clone(),
                criteria,
                reseeded: r.reseeded.clone(),
                lambda_fallbacks: r.lambda_fallbacks.clone(),
                inner_nonconverged: r.inner_nonconverged,
                timings: Timings { total_seconds },
                agreement: score(&labels)?,
            };
            io::save_report(&a.output.join("report.json"), &report)?;
            format!(
                "{name}: K={} loglik={} bic={} iterations={} converged={}",
                a.k,
                r.log_likelihood(),
                criteria.bic,
                r.iterations,
                r.converged
            )
        }
    };
    writeln!(out, "{summary}")?;
    Ok(())
}

fn write_points<W: Write>(points: &[SpherePoint], path: Option<&Path>, out: &mut W) -> Result<()> {
    match path {
        Some(p) => io::save_dataset(p, points),
        None => {
            for p in points {
                let line: Vec<String> = p.coords().iter().map(f64::to_string).collect();
                writeln!(out, "{}", line.join(","))?;
            }
            Ok(())
        }
    }
}

pub fn cmd_sample<W: Write>(a: &SampleArgs, out: &mut W) -> Result<()> {
    let mut rng = rng_from_seed(a.seed);
    let (points, comps) = match (&a.mu, a.lambda, &a.model) {
        (Some(mu), Some(lambda), None) => {
            let params = SnParams::new(SpherePoint::new(mu.clone())?, lambda)?;
            (sn::sample(&params, a.n, &mut rng)?, vec![0; a.n])
        }
        (None, None, Some(path)) => {
            let model = io::load_model(path)?;
            simulate::sample_mixture(&model, a.n, &mut rng)?
        }
        _ => {
            return Err(Error::InvalidParameter(
                "give either --mu with --lambda, or --model".into(),
            ))
        }
    };
    write_points(&points, a.output.as_deref(), out)?;
    if let Some(p) = &a.labels {
        io::save_labels(p, &LabelVector::from_indices(&comps)?)?;
    }
    Ok(())
}

pub fn cmd_simulate<W: Write>(a: &SimulateArgs, out: &mut W) -> Result<()> {
    let scenario: Scenario = a.scenario.parse()?;
    let s = simulate::generate(scenario, a.seed)?;
    io::save_dataset(&io::output_path(&a.output, "points.csv")?, &s.points)?;
    io::save_labels(&a.output.join("labels.txt"), &s.labels)?;
    io::save_model(&a.output.join("model.json"), &s.model)?;
    writeln!(
        out,
        "{}: {} points on S^{} written to {}",
        a.scenario,
        s.points.len(),
        s.points[0].dim(),
        a.output.display()
    )?;
    Ok(())
}

pub fn cmd_bench<W: Write>(a: &BenchArgs, out: &mut W) -> Result<()> {
    if a.reps == 0 {
        return Err(Error::InvalidParameter("--reps must be positive".into()));
    }
    let cfg = BenchConfig {
        reps: a.reps,
        seed: a.seed,
        epsilon: a.eps,
        dims: a.dims.clone(),
        sizes: a.sizes.clone(),
        ..BenchConfig::default()
    };
    if matches!(a.table, TableArg::Location | TableArg::Both) {
        let rows = bench::location_table(&cfg)?;
        match &a.output {
            Some(dir) => bench::write_location_csv(
                std::fs::File::create(io::output_path(dir, "location.csv")?)?,
                &rows,
            )?,
            None => bench::write_location_csv(&mut *out, &rows)?,
        }
    }
    if matches!(a.table, TableArg::Concentration | TableArg::Both) {
        let rows = bench::concentration_table(&cfg)?;
        match &a.output {
            Some(dir) => bench::write_concentration_csv(
                std::fs::File::create(io::output_path(dir, "concentration.csv")?)?,
                &rows,
            )?,
            None => bench::write_concentration_csv(&mut *out, &rows)?,
        }
    }
    Ok(())
}
