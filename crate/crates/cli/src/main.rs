//! `invlab`: simulate data, fit estimators, run benchmarks, samplers and
//! stability suites from the command line.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use invlab::bayes::GradientMode;
use invlab::estimators::Model;

use config::{parse_n_grid, Estimator, McmcConfig, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "invlab",
    version,
    about = "Estimators for elliptic PDE coefficient inverse problems"
)]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample noisy point observations of a fixture's solution.
    Simulate(SimulateArgs),
    /// Fit an estimator to a dataset CSV and write a JSON report.
    Fit(FitArgs),
    /// Convergence-rate and operation-count benchmarks.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Warm-started Langevin sampling of the Darcy posterior.
    Mcmc(McmcArgs),
    /// Random-pair suite of the stability inequality.
    Stability(StabilityArgs),
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Monte-Carlo error rates over a grid of sample sizes.
    Rates(BenchArgs),
    /// Flop counts and wall times of the plug-in estimator.
    Runtime(BenchArgs),
}

/// Model and fixture selection.
#[derive(Args, Default)]
struct ModelArgs {
    #[arg(long, value_parser = parse_model)]
    model: Option<Model>,
    /// Name of a registered ground truth.
    #[arg(long)]
    fixture: Option<String>,
    /// Smoothness of the coefficient.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Grids and frame parameters.
#[derive(Args, Default)]
struct GridArgs {
    /// Interior nodes per axis of the estimation grid.
    #[arg(long)]
    est_n: Option<usize>,
    /// Interior nodes per axis of the data-generation grid.
    #[arg(long)]
    fine_n: Option<usize>,
    /// Spline order of the frame.
    #[arg(long)]
    order: Option<usize>,
    /// Multiplier of the resolution-level rule.
    #[arg(long)]
    c_dim: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Number of observations.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Dataset CSV; the sidecar goes next to it with a .json extension.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Dataset CSV written by `simulate` (or any `x1[,x2],y` table).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum)]
    estimator: Option<Estimator>,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for GridField dumps of û and f̂.
    #[arg(long)]
    dump_fields: Option<PathBuf>,
    /// Joint estimator: maximum alternating iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Joint estimator: relative decrease stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Adaptive estimator: smallest candidate smoothness.
    #[arg(long)]
    beta_min: Option<u32>,
    /// Adaptive estimator: largest candidate smoothness.
    #[arg(long)]
    beta_max: Option<u32>,
    /// Adaptive estimator: penalty offset A.
    #[arg(long)]
    a: Option<f64>,
    /// Adaptive estimator: smoothness of the inversion penalty.
    #[arg(long)]
    alpha_min: Option<f64>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Sample sizes: `a:b` doubles from a to b, or a comma list.
    #[arg(long, value_parser = parse_sizes)]
    n_grid: Option<Sizes>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Worker threads for replications.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct McmcArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Number of eigenbasis coefficients.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// Langevin step size (default: half the inverse local curvature).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    burn_in_fraction: Option<f64>,
    #[arg(long)]
    link_floor: Option<f64>,
    #[arg(long)]
    clamp_margin: Option<f64>,
    #[arg(long, value_parser = parse_gradient)]
    gradient: Option<GradientMode>,
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StabilityArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Interior nodes per axis.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    f_min: Option<f64>,
    #[arg(long)]
    g_min: Option<f64>,
    #[arg(long)]
    c_min: Option<f64>,
    /// Ratio CSV; a JSON sidecar is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parsed `--n-grid` value (a newtype so clap treats it as one value).
#[derive(Clone)]
struct Sizes(Vec<usize>);

fn parse_sizes(s: &str) -> Result<Sizes, String> {
    parse_n_grid(s).map(Sizes)
}

fn parse_model(s: &str) -> Result<Model, String> {
    s.parse().map_err(|e: invlab::Error| e.to_string())
}

fn parse_gradient(s: &str) -> Result<GradientMode, String> {
    s.parse().map_err(|e: invlab::Error| e.to_string())
}

impl ModelArgs {
    fn apply(&self, c: &mut RunConfig) {
        c.model = self.model;
        c.fixture.clone_from(&self.fixture);
        c.alpha = self.alpha;
        c.d = self.d;
        c.seed = self.seed;
    }
}

impl GridArgs {
    fn apply(&self, c: &mut RunConfig) {
        c.est_n = self.est_n;
        c.fine_n = self.fine_n;
        c.order = self.order;
        c.c_dim = self.c_dim;
    }
}

/// Settings given on the command line, as a sparse configuration.
fn flag_config(cmd: &Command) -> RunConfig {
    let mut c = RunConfig::default();
    match cmd {
        Command::Simulate(a) => {
            a.model.apply(&mut c);
            a.grid.apply(&mut c);
            c.n = a.n;
            c.sigma = a.sigma;
            c.out.clone_from(&a.out);
        }
        Command::Fit(a) => {
            a.model.apply(&mut c);
            a.grid.apply(&mut c);
            c.data.clone_from(&a.data);
            c.estimator = a.estimator;
            c.out.clone_from(&a.out);
            c.dump_fields.clone_from(&a.dump_fields);
            c.iters = a.iters;
            c.tol = a.tol;
            c.beta_min = a.beta_min;
            c.beta_max = a.beta_max;
            c.a = a.a;
            c.alpha_min = a.alpha_min;
        }
        Command::Bench(BenchCommand::Rates(a) | BenchCommand::Runtime(a)) => {
            a.model.apply(&mut c);
            a.grid.apply(&mut c);
            c.n_grid = a.n_grid.as_ref().map(|s| s.0.clone());
            c.reps = a.reps;
            c.sigma = a.sigma;
            c.jobs = a.jobs;
            c.out.clone_from(&a.out);
        }
        Command::Mcmc(a) => {
            a.model.apply(&mut c);
            a.grid.apply(&mut c);
            c.n = a.n;
            c.sigma = a.sigma;
            c.out.clone_from(&a.out);
            c.mcmc = Some(McmcConfig {
                dim: a.dim,
                steps: a.steps,
                delta: a.delta,
                burn_in_fraction: a.burn_in_fraction,
                link_floor: a.link_floor,
                clamp_margin: a.clamp_margin,
                gradient: a.gradient,
                noise_sd: a.noise_sd,
            });
        }
        Command::Stability(a) => {
            a.model.apply(&mut c);
            c.n = a.n;
            c.pairs = a.pairs;
            c.f_min = a.f_min;
            c.g_min = a.g_min;
            c.c_min = a.c_min;
            c.out.clone_from(&a.out);
        }
    }
    c
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let file = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let cfg = file.overlay(&flag_config(&cli.command))?;
    match &cli.command {
        Command::Simulate(_) => commands::cmd_simulate(&cfg),
        Command::Fit(_) => commands::cmd_fit(&cfg),
        Command::Bench(BenchCommand::Rates(_)) => commands::cmd_bench_rates(&cfg),
        Command::Bench(BenchCommand::Runtime(_)) => commands::cmd_bench_runtime(&cfg),
        Command::Mcmc(_) => commands::cmd_mcmc(&cfg),
        Command::Stability(_) => commands::cmd_stability(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
