//! Posterior predictive curves of the drift and the diffusion.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::inference::{factor_inducing, row_dots, SgpState};
use crate::kernels::{cov_matrix, KernelSpec};
use crate::numerics::PsdFactor;

pub const DEFAULT_GRID_POINTS: usize = 200;
pub const DEFAULT_CI_LEVEL: f64 = 0.95;

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorCurve {
    pub grid: Vec<f64>,
    pub drift_mean: Vec<f64>,
    pub drift_var: Vec<f64>,
    pub s_mean: Vec<f64>,
    pub s_var: Vec<f64>,
    /// `exp(s_mean)`, the median of the lognormal `g`.
    pub g_median: Vec<f64>,
    pub g_lower: Vec<f64>,
    pub g_upper: Vec<f64>,
    /// `exp(s_mean + s_var/2)`, the mean of the lognormal `g`.
    pub g_mean: Vec<f64>,
    pub ci_level: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionPrediction {
    pub s_mean: Vec<f64>,
    pub s_var: Vec<f64>,
    pub g_median: Vec<f64>,
    pub g_lower: Vec<f64>,
    pub g_upper: Vec<f64>,
    pub g_mean: Vec<f64>,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Usage("prediction grid is empty".into()));
    }
    if let Some(i) = grid.iter().position(|x| !x.is_finite()) {
        return Err(Error::Usage(format!("prediction grid point {i} is not finite")));
    }
    Ok(())
}

/// Mean offset and variance of a GP at `grid` given a Gaussian
/// `N(mean, cov)` over its values at `xm` (mean offset excludes any prior mean).
fn project(spec: &KernelSpec, xm: &[f64], factor: &PsdFactor, mean: &DVector<f64>, cov: &DMatrix<f64>, grid: &[f64])
    -> Result<(DVector<f64>, DVector<f64>)> {
    let k_gm = cov_matrix(spec, grid, xm, false);
    let a = factor.solve_mat(&k_gm.transpose())?.transpose();
    let explained = row_dots(&k_gm, &a);
    let ac = &a * cov;
    let extra = row_dots(&ac, &a);
    let mu = &a * mean;
    let var = DVector::from_fn(grid.len(), |i, _| (spec.eval(grid[i], grid[i]) - explained[i] + extra[i]).max(0.0));
    Ok((mu, var))
}

/// Predictive mean and variance of `f` at each grid point.
pub fn predict_drift(state: &SgpState, grid: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_grid(grid)?;
    let (_, factor, _) = factor_inducing(&state.kernel_f, &state.pseudo_inputs, "drift")?;
    let (mu, var) = project(&state.kernel_f, &state.pseudo_inputs, &factor, &state.mu_f, &state.f_cov, grid)?;
    Ok((mu.as_slice().to_vec(), var.as_slice().to_vec()))
}

/// Predictive moments of `s` and the implied lognormal summaries of `g`;
/// the band holds `ci_level` of the mass, split evenly between the tails.
pub fn predict_diffusion(state: &SgpState, grid: &[f64], ci_level: f64) -> Result<DiffusionPrediction> {
    check_grid(grid)?;
    if !(ci_level > 0.0 && ci_level < 1.0) {
        return Err(Error::Usage(format!("confidence level must lie in (0, 1), got {ci_level}")));
    }
    let (_, factor, _) = factor_inducing(&state.kernel_s, &state.pseudo_inputs, "diffusion")?;
    let r = state.mu_s.add_scalar(-state.v);
    let (mu, var) = project(&state.kernel_s, &state.pseudo_inputs, &factor, &r, &state.s_cov, grid)?;
    let z = Normal::standard().inverse_cdf(0.5 * (1.0 + ci_level));
    let s_mean: Vec<f64> = mu.iter().map(|m| m + state.v).collect();
    let s_var = var.as_slice().to_vec();
    let sd: Vec<f64> = s_var.iter().map(|v| v.sqrt()).collect();
    Ok(DiffusionPrediction {
        g_median: s_mean.iter().map(|m| m.exp()).collect(),
        g_lower: s_mean.iter().zip(&sd).map(|(m, s)| (m - z * s).exp()).collect(),
        g_upper: s_mean.iter().zip(&sd).map(|(m, s)| (m + z * s).exp()).collect(),
        g_mean: s_mean.iter().zip(&s_var).map(|(m, v)| (m + 0.5 * v).exp()).collect(),
        s_mean,
        s_var,
    })
}

pub fn predict(state: &SgpState, grid: &[f64], ci_level: f64) -> Result<PosteriorCurve> {
    let (drift_mean, drift_var) = predict_drift(state, grid)?;
    let d = predict_diffusion(state, grid, ci_level)?;
    Ok(PosteriorCurve {
        grid: grid.to_vec(),
        drift_mean,
        drift_var,
        s_mean: d.s_mean,
        s_var: d.s_var,
        g_median: d.g_median,
        g_lower: d.g_lower,
        g_upper: d.g_upper,
        g_mean: d.g_mean,
        ci_level,
    })
}
