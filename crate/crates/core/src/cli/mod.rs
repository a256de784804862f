//! Command-line front end. Each subcommand writes its artifacts under
//! `--out` and prints a one-line summary on stdout.
//!
//! `--config FILE` takes a JSON object whose keys are flag names (`_` and `-`
//! are interchangeable). Keys already present on the command line are
//! ignored, so flags always win over the file.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

const WORKED_EXPR: &str = "(div (mul (exp (scale 2 x2)) (cos (mul x2 x3))) (add x1 x2))";

#[derive(Debug, Parser)]
#[command(name = "mfdl", version, about = "Numerical deep-learning toolkit demos and training runs")]
pub struct Cli {
    /// Seed for all random draws.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// JSON object of flag values; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write wall-clock times into trace files (outputs then differ between runs).
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Value, reverse-mode gradient and directional derivative of an expression.
    AutodiffDemo(AutodiffArgs),
    /// Sawtooth approximation of x² on a uniform grid.
    Uat(UatArgs),
    /// Deterministic optimizer on a built-in or user objective.
    Optimize(OptimizeArgs),
    /// Stochastic optimizer on the averaged family (x − z_i)².
    SgdBench(SgdArgs),
    /// Planning or learning on a tabular MDP.
    Rl(RlArgs),
    /// Neural-ODE adjoint gradient demos.
    Node(NodeArgs),
    /// Density-control training of a time-dependent MLP drift.
    Densctl(DensctlArgs),
    /// Train a small generative model and draw samples.
    Gen(GenArgs),
    /// Monte Carlo and divergence demos.
    Stat(StatArgs),
}

impl Command {
    const NAMES: [&'static str; 9] =
        ["autodiff-demo", "uat", "optimize", "sgd-bench", "rl", "node", "densctl", "gen", "stat"];
}

#[derive(Debug, Args)]
pub struct AutodiffArgs {
    /// Expression in prefix form over inputs x1, x2, ...
    #[arg(long, default_value = WORKED_EXPR)]
    pub expr: String,
    /// Evaluation point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,1,3.141592653589793")]
    pub at: Vec<f64>,
    /// Direction for the directional derivative.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "2,1,0")]
    pub dir: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct UatArgs {
    /// Number of sawtooth compositions.
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    /// Grid intervals on [0, 1].
    #[arg(long, default_value_t = 1024)]
    pub grid: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Problem {
    Rosenbrock,
    /// Expression given by --expr.
    Expr,
    /// Least squares on --data.
    LeastSquares,
    /// Logistic regression on --data (binary last column).
    Logistic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OptMethod {
    Gd,
    Bfgs,
    NewtonCg,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long, value_enum, default_value_t = Problem::Rosenbrock)]
    pub problem: Problem,
    #[arg(long, value_enum, default_value_t = OptMethod::Bfgs)]
    pub method: OptMethod,
    /// Objective expression for --problem expr.
    #[arg(long)]
    pub expr: Option<String>,
    /// CSV with header; last column is the target.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Starting point (default: zeros, or (−1.2, 1) for Rosenbrock).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Stop once the gradient norm falls below this.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Initial trial step for backtracking.
    #[arg(long, default_value_t = 1.0)]
    pub alpha_bar: f64,
    /// Backtracking reduction factor.
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    /// Armijo constant.
    #[arg(long, default_value_t = 1e-4)]
    pub c: f64,
}

#[derive(Debug, Args)]
pub struct HyperArgs {
    /// Optimizer: sgd, momentum, adagrad, rmsprop, adam, adamw.
    #[arg(long)]
    pub method: Option<String>,
    /// Base step size.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Use the step size α/(k + k0).
    #[arg(long, allow_hyphen_values = true)]
    pub k0: Option<f64>,
    /// Full hyperparameter block as JSON, e.g. '{"method":"adam","beta1":0.9}'.
    #[arg(long)]
    pub hyper: Option<String>,
}

#[derive(Debug, Args)]
pub struct SgdArgs {
    /// Number of components (odd).
    #[arg(long, default_value_t = 101)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub x0: f64,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Solver {
    Vi,
    Pi,
    Q,
    Sarsa,
}

#[derive(Debug, Args)]
pub struct RlArgs {
    #[arg(long, value_enum, default_value_t = Solver::Vi)]
    pub solver: Solver,
    /// MDP JSON file; without it the built-in gridworld is used.
    #[arg(long)]
    pub mdp: Option<PathBuf>,
    /// Side length of the built-in gridworld.
    #[arg(long, default_value_t = 4)]
    pub grid: usize,
    /// Discount of the built-in gridworld.
    #[arg(long, default_value_t = 0.9)]
    pub gamma: f64,
    /// Value-iteration stopping tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    /// Environment steps for the learners.
    #[arg(long, default_value_t = 50_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Episode length cap for the learners.
    #[arg(long, default_value_t = 200)]
    pub horizon: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NodeDemo {
    /// ẋ = θ with reward x(T); the gradient is T.
    ConstantDrift,
    /// Random tanh MLP drift checked against finite differences.
    Mlp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OdeMethod {
    Euler,
    Midpoint,
    Rk4,
}

#[derive(Debug, Args)]
pub struct NodeArgs {
    #[arg(long, value_enum, default_value_t = NodeDemo::ConstantDrift)]
    pub demo: NodeDemo,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Solver step.
    #[arg(long, default_value_t = 0.01)]
    pub h: f64,
    #[arg(long, value_enum, default_value_t = OdeMethod::Rk4)]
    pub solver: OdeMethod,
    /// Hidden width of the MLP drift.
    #[arg(long, default_value_t = 8)]
    pub hidden: usize,
}

#[derive(Debug, Args)]
pub struct DensctlArgs {
    /// CSV of initial samples (header row, one column per coordinate).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Solver step.
    #[arg(long, default_value_t = 0.05)]
    pub h: f64,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GenModel {
    Diffusion,
    Fm,
    Vae,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Sampler {
    Em,
    PfOde,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NoiseSchedule {
    Ou,
    Vp,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub model: GenModel,
    /// CSV of training points (header row, one column per coordinate).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    /// Number of samples to draw after training.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Integration steps of the sampler.
    #[arg(long, default_value_t = 200)]
    pub sample_steps: usize,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    /// Latent dimension of the VAE.
    #[arg(long, default_value_t = 2)]
    pub latent: usize,
    #[arg(long, value_enum, default_value_t = NoiseSchedule::Ou)]
    pub schedule: NoiseSchedule,
    /// Diffusion horizon T.
    #[arg(long, default_value_t = 5.0)]
    pub t_end: f64,
    #[arg(long, value_enum, default_value_t = Sampler::PfOde)]
    pub sampler: Sampler,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StatDemo {
    /// Euler–Maruyama estimate of ∫W dW as the step halves.
    Ito,
    /// Importance sampling of ∫₀^½ dx with a uniform proposal.
    Importance,
    /// Closed-form divergences on reference pairs.
    Divergence,
}

#[derive(Debug, Args)]
pub struct StatArgs {
    #[arg(long, value_enum, default_value_t = StatDemo::Ito)]
    pub demo: StatDemo,
    #[arg(long, default_value_t = 2000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Coarsest step; it is halved `--halvings` times.
    #[arg(long, default_value_t = 0.1)]
    pub h: f64,
    #[arg(long, default_value_t = 4)]
    pub halvings: usize,
}

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERIC: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub(crate) enum CliError {
    Usage(String),
    Run(crate::Error),
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Run(e)
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<String> = args.into_iter().map(|a| a.into().to_string_lossy().into_owned()).collect();
    let argv = match merge_config(argv) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::dispatch(&cli) {
        Ok(summary) => {
            println!("{summary}");
            EXIT_OK
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            EXIT_NUMERIC
        }
    }
}

fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Splices values from the config file into `argv` as `--key=value` tokens
/// right after the subcommand, skipping keys already given.
fn merge_config(mut argv: Vec<String>) -> Result<Vec<String>, String> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let Value::Object(map) = serde_json::from_str(&text).map_err(|e| format!("config {path}: {e}"))? else {
        return Err(format!("config {path} must hold a JSON object"));
    };
    let mut sub = argv.iter().position(|a| Command::NAMES.contains(&a.as_str()));
    if sub.is_none() {
        if let Some(Value::String(name)) = map.get("subcommand") {
            argv.push(name.clone());
            sub = Some(argv.len() - 1);
        }
    }
    let at = sub.map_or(argv.len(), |i| i + 1);
    let mut extra = Vec::new();
    for (key, value) in &map {
        if key == "subcommand" || key == "config" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let prefix = format!("{flag}=");
        if argv.iter().any(|a| *a == flag || a.starts_with(&prefix)) {
            continue;
        }
        let text = match value {
            Value::Null | Value::Bool(false) => continue,
            Value::Bool(true) => {
                extra.push(flag);
                continue;
            }
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
            Value::Object(_) => value.to_string(),
        };
        extra.push(format!("{flag}={text}"));
    }
    argv.splice(at..at, extra);
    Ok(argv)
}
