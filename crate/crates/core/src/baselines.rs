//! Histogram and kernel-regression estimators of the drift and diffusion,
//! `f ≈ E[Δx | x]/Δt` and `g ≈ E[Δx² | x]/Δt`.

use crate::error::{Error, Result};
use crate::evaluation::silverman_bandwidth;
use crate::inference::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedEstimate {
    /// `n_bins + 1` edges spanning the range of the increment start points.
    pub bin_edges: Vec<f64>,
    /// `None` for empty bins.
    pub f_hat: Vec<Option<f64>>,
    pub g_hat: Vec<Option<f64>>,
    pub counts: Vec<usize>,
}

impl BinnedEstimate {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn bin_of(&self, x: f64) -> usize {
        let lo = self.bin_edges[0];
        let hi = self.bin_edges[self.bin_edges.len() - 1];
        let n = self.n_bins();
        if !(hi > lo) {
            return 0;
        }
        let k = ((x - lo) / (hi - lo) * n as f64).floor();
        k.clamp(0.0, (n - 1) as f64) as usize
    }

    /// Value of the nearest nonempty bin (by bin index; ties go left).
    fn lookup(&self, values: &[Option<f64>], x: f64) -> Option<f64> {
        let k = self.bin_of(x);
        (0..self.n_bins()).find_map(|d| {
            let left = k.checked_sub(d).and_then(|i| values[i]);
            left.or_else(|| values.get(k + d).copied().flatten())
        })
    }

    /// Piecewise-constant drift, extended from the nearest nonempty bin.
    pub fn f_at(&self, x: f64) -> Option<f64> {
        self.lookup(&self.f_hat, x)
    }

    pub fn g_at(&self, x: f64) -> Option<f64> {
        self.lookup(&self.g_hat, x)
    }
}

/// Equal-width bins over `[min x_i, max x_i]` of the increment start points.
pub fn binning_estimator(dataset: &Dataset, n_bins: usize) -> Result<BinnedEstimate> {
    let n = dataset.n();
    if n_bins == 0 || n_bins > n {
        return Err(Error::Config(format!("number of bins must be in 1..={n}, got {n_bins}")));
    }
    let inputs = dataset.inputs();
    let (lo, hi) = inputs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let mut est = BinnedEstimate {
        bin_edges: (0..=n_bins).map(|k| lo + (hi - lo) * k as f64 / n_bins as f64).collect(),
        f_hat: vec![None; n_bins],
        g_hat: vec![None; n_bins],
        counts: vec![0; n_bins],
    };
    est.bin_edges[n_bins] = hi;
    let mut s1 = vec![0.0; n_bins];
    let mut s2 = vec![0.0; n_bins];
    for (&x, &dx) in inputs.iter().zip(dataset.increments()) {
        let k = est.bin_of(x);
        est.counts[k] += 1;
        s1[k] += dx;
        s2[k] += dx * dx;
    }
    let dt = dataset.dt();
    for k in 0..n_bins {
        let c = est.counts[k];
        if c > 0 {
            est.f_hat[k] = Some(s1[k] / (c as f64 * dt));
            est.g_hat[k] = Some(s2[k] / (c as f64 * dt));
        }
    }
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Silverman's rule on the increment start points.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelRegression {
    pub grid: Vec<f64>,
    /// `None` where every weight underflowed.
    pub f_hat: Vec<Option<f64>>,
    pub g_hat: Vec<Option<f64>>,
    pub bandwidth: f64,
}

/// Nadaraya–Watson regression with a Gaussian kernel.
pub fn nw_estimator(dataset: &Dataset, bandwidth: Bandwidth, grid: &[f64]) -> Result<KernelRegression> {
    let inputs = dataset.inputs();
    let h = match bandwidth {
        Bandwidth::Auto => silverman_bandwidth(inputs)?,
        Bandwidth::Fixed(h) if h > 0.0 => h,
        Bandwidth::Fixed(h) => return Err(Error::Config(format!("bandwidth must be positive, got {h}"))),
    };
    let dt = dataset.dt();
    let dx = dataset.increments();
    let c = -0.5 / (h * h);
    let mut f_hat = Vec::with_capacity(grid.len());
    let mut g_hat = Vec::with_capacity(grid.len());
    for &xi in grid {
        let (mut sw, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (&x, &d) in inputs.iter().zip(dx) {
            let w = (c * (xi - x).powi(2)).exp();
            sw += w;
            s1 += w * d;
            s2 += w * d * d;
        }
        if sw > 0.0 && sw.is_finite() {
            f_hat.push(Some(s1 / (sw * dt)));
            g_hat.push(Some(s2 / (sw * dt)));
        } else {
            f_hat.push(None);
            g_hat.push(None);
        }
    }
    Ok(KernelRegression {
        grid: grid.to_vec(),
        f_hat,
        g_hat,
        bandwidth: h,
    })
}
