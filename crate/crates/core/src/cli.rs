//! Command-line front end. Every failure is reported as one line
//! `E_CODE: message` on stderr.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::baselines::{binning_estimator, nw_estimator, Bandwidth};
use crate::error::{Error, Result};
use crate::evaluation::{benchmark, score_curves, BenchmarkConfig, EstimatorKind, DEFAULT_KDE_GRID_POINTS};
use crate::fit::{fit, FitConfig};
use crate::io::{
    load_fit_config, load_model, load_series, log_returns, read_column, read_curves, read_series, save_model,
    write_curves, write_series, CurveTable, SavedModel,
};
use crate::predict::{linspace, predict, DEFAULT_CI_LEVEL, DEFAULT_GRID_POINTS};
use crate::simulator::{builtin_model, simulate_seeded, ModelId, SimConfig};

/// Exit status when a fit stops at its iteration budget without converging.
pub const EXIT_BUDGET: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sparse-sde", version, about = "Drift and diffusion estimation for 1-d SDEs with sparse Gaussian processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a benchmark model with Euler–Maruyama.
    Simulate(SimulateArgs),
    /// Fit the sparse GP model to a series.
    Fit(FitArgs),
    /// Tabulate the posterior drift and diffusion of a fitted model.
    Predict(PredictArgs),
    /// Score a curve table against a benchmark model's true coefficients.
    Evaluate(EvaluateArgs),
    /// Binning or kernel-regression estimates of a series.
    Baseline(BaselineArgs),
    /// Replicated simulate-estimate-score runs.
    Benchmark(BenchmarkArgs),
    /// Turn prices into a series of log returns.
    Preprocess(PreprocessArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: ModelId,
    /// Number of samples written.
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub dt: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Initial state; defaults to the model's usual starting point.
    #[arg(long, allow_negative_numbers = true)]
    pub x0: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Sampling period, required when the series has no `t` column.
    #[arg(long)]
    pub dt: Option<f64>,
    /// `key = value` file; omitted keys keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub grid_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub grid_max: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    pub grid_n: usize,
    #[arg(long, default_value_t = DEFAULT_CI_LEVEL)]
    pub ci: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub truth: ModelId,
    #[arg(long)]
    pub curves: PathBuf,
    #[arg(long)]
    pub series: PathBuf,
    #[arg(long, default_value_t = DEFAULT_KDE_GRID_POINTS)]
    pub grid_n: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BaselineMethod {
    Binning,
    Nw,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, value_enum)]
    pub method: BaselineMethod,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Kernel width; Silverman's rule when omitted.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Grid size for the kernel estimator (binning reports bin centres).
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    pub grid_n: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long, value_delimiter = ',', default_value = "M1")]
    pub models: Vec<ModelId>,
    #[arg(long, value_delimiter = ',', default_value = "sgp,binning,nw")]
    pub estimators: Vec<EstimatorKind>,
    #[arg(long, default_value_t = 10)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Samples per simulated path.
    #[arg(long, default_value_t = 10_001)]
    pub n: usize,
    #[arg(long, default_value_t = 0.001)]
    pub dt: f64,
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
    /// Fit settings for the sgp estimator.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_KDE_GRID_POINTS)]
    pub grid_n: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub log_returns: bool,
    /// Price column; the last column when omitted.
    #[arg(long)]
    pub column: Option<String>,
    /// Write a `t` column with this spacing.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn bandwidth(h: Option<f64>) -> Bandwidth {
    h.map_or(Bandwidth::Auto, Bandwidth::Fixed)
}

fn fit_config(path: Option<&Path>) -> Result<FitConfig> {
    match path {
        Some(p) => load_fit_config(p),
        None => Ok(FitConfig::default()),
    }
}

fn run_simulate(a: &SimulateArgs, stdout: &mut dyn Write) -> Result<i32> {
    let cfg = SimConfig {
        n_samples: a.n,
        dt: a.dt,
        x0: a.x0.unwrap_or(a.model.default_x0()),
        seed: a.seed,
        burn_in: a.burn_in,
    };
    let sim = simulate_seeded(&builtin_model(a.model), &cfg)?;
    write_series(create(&a.out)?, &sim.samples, Some(sim.dt))?;
    writeln!(stdout, "samples={} clipped={}", sim.samples.len(), sim.clip_count)?;
    Ok(0)
}

fn run_fit(a: &FitArgs, stdout: &mut dyn Write) -> Result<i32> {
    let dataset = load_series(&a.input, a.dt)?;
    let config = fit_config(a.config.as_deref())?;
    let result = fit(&dataset, &config)?;
    save_model(create(&a.out)?, &SavedModel::from_fit(&result, &dataset))?;
    writeln!(
        stdout,
        "elbo={} elbo_prime={} iterations={} converged={}",
        result.elbo, result.elbo_prime, result.iterations, result.converged
    )?;
    Ok(if result.converged { 0 } else { EXIT_BUDGET })
}

fn run_predict(a: &PredictArgs) -> Result<i32> {
    let model = load_model(&a.model)?;
    let lo = a.grid_min.unwrap_or(model.data_range[0]);
    let hi = a.grid_max.unwrap_or(model.data_range[1]);
    if !(lo < hi) || a.grid_n < 2 {
        return Err(Error::Usage(format!("grid needs min < max and at least 2 points, got [{lo}, {hi}] with {}", a.grid_n)));
    }
    let curve = predict(&model.state, &linspace(lo, hi, a.grid_n), a.ci)?;
    write_curves(create(&a.out)?, &CurveTable::from(&curve))?;
    Ok(0)
}

fn run_evaluate(a: &EvaluateArgs, stdout: &mut dyn Write) -> Result<i32> {
    let model = builtin_model(a.truth);
    let curves = read_curves(File::open(&a.curves)?)?;
    let series = read_series(&a.series)?;
    let (ef, eg) = score_curves(&model, &series.x, &curves.x, &curves.f_mean, &curves.g_median, a.grid_n)?;
    let mut w = csv::Writer::from_writer(create(&a.out)?);
    w.write_record(["model", "coefficient", "error"])?;
    w.write_record([a.truth.to_string(), "drift".into(), ef.to_string()])?;
    w.write_record([a.truth.to_string(), "diffusion".into(), eg.to_string()])?;
    w.flush()?;
    writeln!(stdout, "drift={ef} diffusion={eg}")?;
    Ok(0)
}

fn run_baseline(a: &BaselineArgs) -> Result<i32> {
    let dataset = load_series(&a.input, a.dt)?;
    let value = |v: &Option<f64>| v.unwrap_or(f64::NAN);
    let table = match a.method {
        BaselineMethod::Binning => {
            let b = binning_estimator(&dataset, a.bins)?;
            CurveTable::from_point_estimates(
                b.centers(),
                b.f_hat.iter().map(value).collect(),
                b.g_hat.iter().map(value).collect(),
            )
        }
        BaselineMethod::Nw => {
            if a.grid_n < 2 {
                return Err(Error::Usage("grid needs at least 2 points".into()));
            }
            let (lo, hi) = dataset.min_max();
            let r = nw_estimator(&dataset, bandwidth(a.bandwidth), &linspace(lo, hi, a.grid_n))?;
            CurveTable::from_point_estimates(r.grid, r.f_hat.iter().map(value).collect(), r.g_hat.iter().map(value).collect())
        }
    };
    write_curves(create(&a.out)?, &table)?;
    Ok(0)
}

fn run_benchmark(a: &BenchmarkArgs, stdout: &mut dyn Write) -> Result<i32> {
    let config = BenchmarkConfig {
        models: a.models.clone(),
        estimators: a.estimators.clone(),
        replicates: a.replicates,
        n_samples: a.n,
        dt: a.dt,
        burn_in: a.burn_in,
        seed: a.seed,
        fit: fit_config(a.config.as_deref())?,
        n_bins: a.bins,
        bandwidth: bandwidth(a.bandwidth),
        grid_points: a.grid_n,
    };
    let table = benchmark(&config)?;
    table.write_csv(create(&a.out)?)?;
    for s in table.summaries() {
        writeln!(
            stdout,
            "{} {} drift={} diffusion={} replicates={}",
            s.model, s.estimator, s.mean_drift, s.mean_diffusion, s.replicates
        )?;
    }
    Ok(0)
}

fn run_preprocess(a: &PreprocessArgs) -> Result<i32> {
    if !a.log_returns {
        return Err(Error::Usage("preprocess needs a transformation, e.g. --log-returns".into()));
    }
    let prices = read_column(&a.input, a.column.as_deref())?;
    let returns = log_returns(&prices)?;
    write_series(create(&a.out)?, &returns, a.dt)?;
    Ok(0)
}

/// Runs a parsed command; the value is the process exit status.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Simulate(a) => run_simulate(a, stdout),
        Command::Fit(a) => run_fit(a, stdout),
        Command::Predict(a) => run_predict(a),
        Command::Evaluate(a) => run_evaluate(a, stdout),
        Command::Baseline(a) => run_baseline(a),
        Command::Benchmark(a) => run_benchmark(a, stdout),
        Command::Preprocess(a) => run_preprocess(a),
    }
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses `args`, runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("E_USAGE: {}", one_line(first.trim_start_matches("error:")));
            return 1;
        }
    };
    match execute(&cli, &mut std::io::stdout().lock()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}: {}", e.code(), one_line(&e.to_string()));
            1
        }
    }
}
