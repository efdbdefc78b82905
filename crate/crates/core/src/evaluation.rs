//! Density-weighted integrated error and the replicate benchmark.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{binning_estimator, nw_estimator, Bandwidth};
use crate::error::{Error, Result};
use crate::fit::{fit, FitConfig};
use crate::inference::Dataset;
use crate::predict::{linspace, predict, DEFAULT_CI_LEVEL};
use crate::simulator::{builtin_model, simulate, ModelId, ModelSpec, SimConfig};

/// Points in the quadrature grid used by the benchmark.
pub const DEFAULT_KDE_GRID_POINTS: usize = 512;

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `0.9·min(sd, IQR/1.34)·n^(−1/5)`; falls back to `sd` when the IQR is zero.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::Config("bandwidth needs at least 2 samples".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config("samples must be finite".into()));
    }
    let (_, sd) = mean_sd(samples);
    if !(sd > 0.0) {
        return Err(Error::Config("samples have zero spread".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = crate::fit::quantile_sorted(&sorted, 0.75) - crate::fit::quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * (samples.len() as f64).powf(-0.2))
}

/// Gaussian kernel density estimate with Silverman's bandwidth.
pub fn kde_density(samples: &[f64], grid: &[f64]) -> Result<(Vec<f64>, f64)> {
    let h = silverman_bandwidth(samples)?;
    Ok((kde_with_bandwidth(samples, grid, h), h))
}

pub fn kde_with_bandwidth(samples: &[f64], grid: &[f64], h: f64) -> Vec<f64> {
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let c = -0.5 / (h * h);
    grid.iter()
        .map(|&g| samples.iter().map(|&x| (c * (g - x).powi(2)).exp()).sum::<f64>() * norm)
        .collect()
}

/// Grid over the sample range extended by `3h` on both sides.
pub fn kde_grid(samples: &[f64], h: f64, n: usize) -> Vec<f64> {
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    linspace(lo - 3.0 * h, hi + 3.0 * h, n)
}

pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Trapezoid rule for `∫|truth − estimate|·density`. Points whose density is
/// at most `1e−10·max` contribute nothing (and may carry undefined estimates).
pub fn integrated_error(truth: impl Fn(f64) -> f64, grid: &[f64], estimate: &[f64], density: &[f64]) -> Result<f64> {
    if grid.len() != estimate.len() || grid.len() != density.len() {
        return Err(Error::Usage(format!(
            "grid, estimate and density lengths differ ({}, {}, {})",
            grid.len(),
            estimate.len(),
            density.len()
        )));
    }
    let cutoff = 1e-10 * density.iter().cloned().fold(0.0, f64::max);
    let mut integrand = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        if density[i] <= cutoff {
            integrand.push(0.0);
            continue;
        }
        let v = (truth(grid[i]) - estimate[i]).abs() * density[i];
        if !v.is_finite() {
            return Err(Error::Numerical(format!("estimate is undefined at x = {} where the density is not negligible", grid[i])));
        }
        integrand.push(v);
    }
    Ok(trapezoid(grid, &integrand))
}

/// Piecewise-linear interpolation of `(xs, ys)` at `at`, held constant
/// beyond the end points. `xs` must be increasing.
pub fn interpolate_linear(xs: &[f64], ys: &[f64], at: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::Usage(format!("cannot interpolate {} values at {} points", ys.len(), xs.len())));
    }
    if let Some(i) = xs.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::Usage(format!("interpolation nodes must increase (index {})", i + 1)));
    }
    let n = xs.len();
    Ok(at
        .iter()
        .map(|&x| {
            if x <= xs[0] {
                return ys[0];
            }
            if x >= xs[n - 1] {
                return ys[n - 1];
            }
            let k = xs.partition_point(|&v| v <= x);
            let (x0, x1) = (xs[k - 1], xs[k]);
            let w = (x - x0) / (x1 - x0);
            ys[k - 1] + w * (ys[k] - ys[k - 1])
        })
        .collect())
}

/// Drift and diffusion errors of curves tabulated at `xs`, scored against
/// `model` on the density of `samples`.
pub fn score_curves(model: &ModelSpec, samples: &[f64], xs: &[f64], drift: &[f64], diffusion: &[f64], grid_points: usize)
    -> Result<(f64, f64)> {
    if grid_points < 2 {
        return Err(Error::Config("quadrature grid needs at least 2 points".into()));
    }
    let h = silverman_bandwidth(samples)?;
    let grid = kde_grid(samples, h, grid_points);
    let density = kde_with_bandwidth(samples, &grid, h);
    let f = interpolate_linear(xs, drift, &grid)?;
    let g = interpolate_linear(xs, diffusion, &grid)?;
    Ok((
        integrated_error(|x| model.f(x), &grid, &f, &density)?,
        integrated_error(|x| model.g(x), &grid, &g, &density)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    Sgp,
    Binning,
    NadarayaWatson,
    /// Returns the true coefficients; errors are zero by construction.
    Truth,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Sgp => "sgp",
            EstimatorKind::Binning => "binning",
            EstimatorKind::NadarayaWatson => "nw",
            EstimatorKind::Truth => "truth",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgp" => Ok(EstimatorKind::Sgp),
            "binning" => Ok(EstimatorKind::Binning),
            "nw" | "kernel" => Ok(EstimatorKind::NadarayaWatson),
            "truth" => Ok(EstimatorKind::Truth),
            _ => Err(Error::Usage(format!("unknown estimator '{s}', expected sgp, binning, nw or truth"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CoefficientKind {
    Drift,
    Diffusion,
}

impl fmt::Display for CoefficientKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoefficientKind::Drift => "drift",
            CoefficientKind::Diffusion => "diffusion",
        })
    }
}

/// Drift and diffusion estimates on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientCurves {
    pub grid: Vec<f64>,
    pub drift: Vec<f64>,
    pub diffusion: Vec<f64>,
    /// Bound traces of every successful restart; empty for the point estimators.
    pub elbo_traces: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub models: Vec<ModelId>,
    pub estimators: Vec<EstimatorKind>,
    pub replicates: usize,
    /// Path length `N + 1`.
    pub n_samples: usize,
    pub dt: f64,
    pub burn_in: usize,
    pub seed: u64,
    /// Used by the sgp estimator; its seed is replaced per replicate.
    pub fit: FitConfig,
    pub n_bins: usize,
    pub bandwidth: Bandwidth,
    pub grid_points: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            models: vec![ModelId::M1],
            estimators: vec![EstimatorKind::Sgp, EstimatorKind::Binning, EstimatorKind::NadarayaWatson],
            replicates: 10,
            n_samples: 10_001,
            dt: 0.001,
            burn_in: 0,
            seed: 0,
            fit: FitConfig::default(),
            n_bins: 20,
            bandwidth: Bandwidth::Auto,
            grid_points: DEFAULT_KDE_GRID_POINTS,
        }
    }
}

/// Seed for one (model, replicate) pair, independent of how jobs are scheduled.
pub fn replicate_seed(seed: u64, model: ModelId, replicate: usize) -> u64 {
    let mut z = seed
        .wrapping_add((model.index() as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((replicate as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs one estimator on a dataset and evaluates it on `grid`.
pub fn estimate_curves(
    kind: EstimatorKind,
    dataset: &Dataset,
    model: &ModelSpec,
    grid: &[f64],
    config: &BenchmarkConfig,
    fit_seed: u64,
) -> Result<CoefficientCurves> {
    let mut elbo_traces = Vec::new();
    let (drift, diffusion) = match kind {
        EstimatorKind::Truth => (grid.iter().map(|&x| model.f(x)).collect(), grid.iter().map(|&x| model.g(x)).collect()),
        EstimatorKind::Binning => {
            let b = binning_estimator(dataset, config.n_bins)?;
            let value = |v: Option<f64>| v.unwrap_or(f64::NAN);
            (
                grid.iter().map(|&x| value(b.f_at(x))).collect(),
                grid.iter().map(|&x| value(b.g_at(x))).collect(),
            )
        }
        EstimatorKind::NadarayaWatson => {
            let r = nw_estimator(dataset, config.bandwidth, grid)?;
            (
                r.f_hat.iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
                r.g_hat.iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
            )
        }
        EstimatorKind::Sgp => {
            let cfg = FitConfig {
                seed: fit_seed,
                ..config.fit.clone()
            };
            let result = fit(dataset, &cfg)?;
            let curve = predict(&result.state, grid, DEFAULT_CI_LEVEL)?;
            elbo_traces = result.restart_traces.into_iter().flatten().collect();
            (curve.drift_mean, curve.g_median)
        }
    };
    Ok(CoefficientCurves {
        grid: grid.to_vec(),
        drift,
        diffusion,
        elbo_traces,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub model: ModelId,
    pub estimator: EstimatorKind,
    pub coefficient: CoefficientKind,
    pub replicate: usize,
    /// `None` when the replicate failed for this estimator.
    pub error: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSummary {
    pub model: ModelId,
    pub estimator: EstimatorKind,
    pub mean_drift: f64,
    pub mean_diffusion: f64,
    /// Replicates that produced both errors.
    pub replicates: usize,
    pub failed: usize,
}

/// Per-replicate errors ordered by (model, replicate, estimator, coefficient).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorTable {
    pub records: Vec<ErrorRecord>,
    pub fit_traces: Vec<FitTraces>,
}

/// Bound traces of the sgp fit on one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTraces {
    pub model: ModelId,
    pub replicate: usize,
    pub traces: Vec<Vec<f64>>,
}

impl ErrorTable {
    pub fn errors(&self, model: ModelId, estimator: EstimatorKind, coefficient: CoefficientKind) -> Vec<Option<f64>> {
        self.records
            .iter()
            .filter(|r| r.model == model && r.estimator == estimator && r.coefficient == coefficient)
            .map(|r| r.error)
            .collect()
    }

    pub fn summaries(&self) -> Vec<ErrorSummary> {
        let mut keys: Vec<(ModelId, EstimatorKind)> = self.records.iter().map(|r| (r.model, r.estimator)).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .map(|(model, estimator)| {
                let d = self.errors(model, estimator, CoefficientKind::Drift);
                let g = self.errors(model, estimator, CoefficientKind::Diffusion);
                let ok: Vec<(f64, f64)> = d.iter().zip(&g).filter_map(|(a, b)| Some(((*a)?, (*b)?))).collect();
                let n = ok.len();
                let mean = |f: fn(&(f64, f64)) -> f64| if n == 0 { f64::NAN } else { ok.iter().map(f).sum::<f64>() / n as f64 };
                ErrorSummary {
                    model,
                    estimator,
                    mean_drift: mean(|p| p.0),
                    mean_diffusion: mean(|p| p.1),
                    replicates: n,
                    failed: d.len() - n,
                }
            })
            .collect()
    }

    pub fn summary(&self, model: ModelId, estimator: EstimatorKind) -> Option<ErrorSummary> {
        self.summaries().into_iter().find(|s| s.model == model && s.estimator == estimator)
    }

    /// Replicates where `a` has a strictly smaller error than `b`, and the
    /// number of replicates where both succeeded.
    pub fn wins(&self, model: ModelId, a: EstimatorKind, b: EstimatorKind, coefficient: CoefficientKind) -> (usize, usize) {
        let ea = self.errors(model, a, coefficient);
        let eb = self.errors(model, b, coefficient);
        let pairs: Vec<(f64, f64)> = ea.iter().zip(&eb).filter_map(|(x, y)| Some(((*x)?, (*y)?))).collect();
        (pairs.iter().filter(|(x, y)| x < y).count(), pairs.len())
    }

    /// CSV with header `model,estimator,coefficient,replicate,error`; failed
    /// entries are written as `NaN`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "estimator", "coefficient", "replicate", "error"])?;
        for r in &self.records {
            w.write_record([
                r.model.to_string(),
                r.estimator.to_string(),
                r.coefficient.to_string(),
                r.replicate.to_string(),
                r.error.map_or_else(|| "NaN".to_string(), |e| e.to_string()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn run_replicate(config: &BenchmarkConfig, model_id: ModelId, replicate: usize) -> (Vec<ErrorRecord>, Option<FitTraces>) {
    let seed = replicate_seed(config.seed, model_id, replicate);
    let model = builtin_model(model_id);
    let sim = SimConfig {
        n_samples: config.n_samples,
        dt: config.dt,
        x0: model_id.default_x0(),
        seed,
        burn_in: config.burn_in,
    };
    let prepared = simulate(&model, &sim, &mut ChaCha8Rng::seed_from_u64(seed))
        .and_then(|s| s.into_dataset())
        .and_then(|d| {
            let h = silverman_bandwidth(d.samples())?;
            let grid = kde_grid(d.samples(), h, config.grid_points);
            let density = kde_with_bandwidth(d.samples(), &grid, h);
            Ok((d, grid, density))
        });
    let mut records = Vec::new();
    let mut fit_traces = None;
    for &kind in &config.estimators {
        let outcome = prepared.as_ref().map_err(|e| e.to_string()).and_then(|(d, grid, density)| {
            let curves = estimate_curves(kind, d, &model, grid, config, seed).map_err(|e| e.to_string())?;
            if kind == EstimatorKind::Sgp {
                fit_traces = Some(FitTraces {
                    model: model_id,
                    replicate,
                    traces: curves.elbo_traces.clone(),
                });
            }
            let ed = integrated_error(|x| model.f(x), grid, &curves.drift, density).map_err(|e| e.to_string())?;
            let eg = integrated_error(|x| model.g(x), grid, &curves.diffusion, density).map_err(|e| e.to_string())?;
            Ok((ed, eg))
        });
        for (coefficient, pick) in [(CoefficientKind::Drift, 0), (CoefficientKind::Diffusion, 1)] {
            let (error, failure) = match &outcome {
                Ok(e) => (Some(if pick == 0 { e.0 } else { e.1 }), None),
                Err(msg) => (None, Some(msg.clone())),
            };
            records.push(ErrorRecord {
                model: model_id,
                estimator: kind,
                coefficient,
                replicate,
                error,
                failure,
            });
        }
    }
    (records, fit_traces)
}

/// Simulates `replicates` paths per model, runs every estimator on each and
/// scores it against the truth weighted by the path's own density estimate.
pub fn benchmark(config: &BenchmarkConfig) -> Result<ErrorTable> {
    if config.replicates == 0 || config.models.is_empty() || config.estimators.is_empty() {
        return Err(Error::Config("benchmark needs at least one model, estimator and replicate".into()));
    }
    if config.grid_points < 2 {
        return Err(Error::Config("benchmark grid needs at least 2 points".into()));
    }
    if config.estimators.contains(&EstimatorKind::Sgp) {
        config.fit.validate()?;
    }
    let jobs: Vec<(ModelId, usize)> = config
        .models
        .iter()
        .flat_map(|&m| (0..config.replicates).map(move |r| (m, r)))
        .collect();
    let results: Vec<_> = jobs.par_iter().map(|&(m, r)| run_replicate(config, m, r)).collect();
    let mut table = ErrorTable::default();
    for (records, traces) in results {
        table.records.extend(records);
        table.fit_traces.extend(traces);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn silverman_example() {
        // 100 points with sd = 1 and IQR/1.34 >= 1: h = 0.9·100^(−1/5)
        let normal = statrs::distribution::Normal::standard();
        use statrs::distribution::ContinuousCDF;
        let raw: Vec<f64> = (0..100).map(|i| normal.inverse_cdf((i as f64 + 0.5) / 100.0)).collect();
        let (mean, sd) = mean_sd(&raw);
        let x: Vec<f64> = raw.iter().map(|v| (v - mean) / sd).collect();
        let mut sorted = x.clone();
        sorted.sort_by(f64::total_cmp);
        let iqr = crate::fit::quantile_sorted(&sorted, 0.75) - crate::fit::quantile_sorted(&sorted, 0.25);
        assert!(iqr / 1.34 >= 1.0 - 0.02);
        let h = silverman_bandwidth(&x).unwrap();
        let expect = 0.9 * (1.0f64).min(iqr / 1.34) * 100f64.powf(-0.2);
        assert_relative_eq!(h, expect, epsilon = 1e-12);
        assert_relative_eq!(0.9 * 100f64.powf(-0.2), 0.35830, epsilon = 1e-5);
        assert!(silverman_bandwidth(&[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn kde_normalized_and_symmetric() {
        let x: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 / 10.0).collect();
        let h = silverman_bandwidth(&x).unwrap();
        let grid = kde_grid(&x, h, 2001);
        let (dens, _) = kde_density(&x, &grid).unwrap();
        assert!((trapezoid(&grid, &dens) - 1.0).abs() < 0.01);
        assert!(dens.iter().all(|d| *d >= 0.0));

        let sym = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
        let g = [-1.3, -0.2, 0.2, 1.3];
        let (d, _) = kde_density(&sym, &g).unwrap();
        assert_relative_eq!(d[0], d[3], max_relative = 1e-12);
        assert_relative_eq!(d[1], d[2], max_relative = 1e-12);
    }

    #[test]
    fn interpolation() {
        let xs = [0.0, 1.0, 3.0];
        let ys = [1.0, 3.0, -1.0];
        let v = interpolate_linear(&xs, &ys, &[-5.0, 0.0, 0.5, 1.0, 2.0, 3.0, 9.0]).unwrap();
        assert_eq!(v, vec![1.0, 1.0, 2.0, 3.0, 1.0, -1.0, -1.0]);
        assert!(interpolate_linear(&[0.0, 0.0], &[1.0, 2.0], &[0.0]).is_err());
        assert!(interpolate_linear(&[0.0], &[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn scoring_the_truth_gives_zero() {
        let model = builtin_model(ModelId::M1);
        let samples: Vec<f64> = (0..500).map(|i| 3.0 + ((i * 37) % 101) as f64 / 50.0 - 1.0).collect();
        let xs = linspace(-2.0, 8.0, 2001);
        let f: Vec<f64> = xs.iter().map(|&x| model.f(x)).collect();
        let g: Vec<f64> = xs.iter().map(|&x| model.g(x)).collect();
        let (ef, eg) = score_curves(&model, &samples, &xs, &f, &g, 512).unwrap();
        assert!(ef < 1e-12 && eg < 1e-12, "{ef} {eg}");
        let shifted: Vec<f64> = f.iter().map(|v| v + 0.5).collect();
        let (ef, _) = score_curves(&model, &samples, &xs, &shifted, &g, 512).unwrap();
        assert!((ef - 0.5).abs() < 0.01, "{ef}");
    }

    #[test]
    fn integrated_error_examples() {
        let grid = linspace(-1.0, 1.0, 201);
        let dens: Vec<f64> = grid.iter().map(|_| 0.5).collect();
        let truth = |x: f64| x * x;
        let exact: Vec<f64> = grid.iter().map(|&x| truth(x)).collect();
        assert_eq!(integrated_error(truth, &grid, &exact, &dens).unwrap(), 0.0);
        let shifted: Vec<f64> = exact.iter().map(|v| v + 0.3).collect();
        assert_relative_eq!(integrated_error(truth, &grid, &shifted, &dens).unwrap(), 0.3, epsilon = 1e-12);
        assert!(matches!(integrated_error(truth, &grid, &exact[1..], &dens), Err(Error::Usage(_))));
    }

    #[test]
    fn piecewise_trapezoid_oracle() {
        // |truth − estimate|·density is piecewise linear between grid points,
        // so the trapezoid rule is exact: Σ ½(x_{k+1}−x_k)(y_k + y_{k+1}).
        let grid = [0.0, 0.5, 1.5, 2.0, 3.0];
        let est = [1.0, 2.0, 0.0, -1.0, 4.0];
        let dens = [0.1, 0.4, 0.3, 0.2, 0.05];
        let truth = |_: f64| 1.0;
        let y = [0.0, 0.4, 0.3, 0.4, 0.15];
        let exact = 0.25 * (y[0] + y[1]) + 0.5 * (y[1] + y[2]) + 0.25 * (y[2] + y[3]) + 0.5 * (y[3] + y[4]);
        assert!((integrated_error(truth, &grid, &est, &dens).unwrap() - exact).abs() <= 1e-12);
    }

    #[test]
    fn density_rescaling_invariance() {
        let grid = linspace(0.0, 2.0, 101);
        let dens: Vec<f64> = grid.iter().map(|x| (-x * x).exp()).collect();
        let z = trapezoid(&grid, &dens);
        let scaled: Vec<f64> = dens.iter().map(|d| d * 7.0).collect();
        let z2 = trapezoid(&grid, &scaled);
        let est: Vec<f64> = grid.iter().map(|x| x.sin()).collect();
        let a = integrated_error(|x| x, &grid, &est, &dens.iter().map(|d| d / z).collect::<Vec<_>>()).unwrap();
        let b = integrated_error(|x| x, &grid, &est, &scaled.iter().map(|d| d / z2).collect::<Vec<_>>()).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn truth_oracle_scores_zero_and_is_deterministic() {
        let config = BenchmarkConfig {
            models: vec![ModelId::M1, ModelId::M4],
            estimators: vec![EstimatorKind::Truth, EstimatorKind::Binning],
            replicates: 2,
            n_samples: 3000,
            dt: 0.01,
            ..BenchmarkConfig::default()
        };
        let t = benchmark(&config).unwrap();
        assert_eq!(t.records.len(), 2 * 2 * 2 * 2);
        for r in t.records.iter().filter(|r| r.estimator == EstimatorKind::Truth) {
            assert_eq!(r.error, Some(0.0));
        }
        let mut a = Vec::new();
        let mut b = Vec::new();
        t.write_csv(&mut a).unwrap();
        benchmark(&config).unwrap().write_csv(&mut b).unwrap();
        assert_eq!(a, b);
        let reordered = BenchmarkConfig {
            estimators: vec![EstimatorKind::Binning, EstimatorKind::Truth],
            ..config
        };
        let t2 = benchmark(&reordered).unwrap();
        for kind in [EstimatorKind::Binning, EstimatorKind::Truth] {
            assert_eq!(
                t.errors(ModelId::M4, kind, CoefficientKind::Drift),
                t2.errors(ModelId::M4, kind, CoefficientKind::Drift)
            );
        }
        let s = t.summary(ModelId::M1, EstimatorKind::Binning).unwrap();
        assert_eq!(s.replicates, 2);
        let d = t.errors(ModelId::M1, EstimatorKind::Binning, CoefficientKind::Drift);
        assert_relative_eq!(s.mean_drift, (d[0].unwrap() + d[1].unwrap()) / 2.0);
    }

    #[test]
    fn failures_are_recorded() {
        let config = BenchmarkConfig {
            estimators: vec![EstimatorKind::Binning],
            replicates: 1,
            n_samples: 10,
            n_bins: 50,
            dt: 0.01,
            ..BenchmarkConfig::default()
        };
        let t = benchmark(&config).unwrap();
        assert!(t.records.iter().all(|r| r.error.is_none() && r.failure.is_some()));
        let s = t.summary(ModelId::M1, EstimatorKind::Binning).unwrap();
        assert_eq!((s.replicates, s.failed), (0, 1));
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().contains("M1,binning,drift,0,NaN"));
    }
}
