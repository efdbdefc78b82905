//! Stationary covariance functions with a fixed total amplitude.
//!
//! Every family is parametrized so that `k(x, x) = A` for any value of the
//! free hyperparameters. Only `theta` is optimized; the amplitude `A` and the
//! diagonal jitter are fixed when the spec is built.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default ratio between the diagonal jitter and the amplitude.
pub const DEFAULT_JITTER_RATIO: f64 = 1e-6;

/// Default bounds for the rational-quadratic mixing parameter.
pub const DEFAULT_ALPHA_BOUNDS: (f64, f64) = (0.1, 10.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    /// `θ0·exp(−θ1·r²/2) + (A − θ0)`, theta = (θ0, θ1).
    SeConst,
    /// `θa·exp(−θ1·r²/2) + (A − θa)·exp(−θ2·r²/2)`, theta = (θa, θ1, θ2).
    SumSe,
    /// `A·(1 + θ1·r²/(2α))^(−α)`, theta = (α, θ1).
    RationalQuadratic,
}

impl KernelFamily {
    pub fn n_params(self) -> usize {
        match self {
            KernelFamily::SeConst => 2,
            KernelFamily::SumSe => 3,
            KernelFamily::RationalQuadratic => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KernelFamily::SeConst => "se-const",
            KernelFamily::SumSe => "sum-se",
            KernelFamily::RationalQuadratic => "rational-quadratic",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "se-const" | "squared-exponential-plus-constant" => Ok(KernelFamily::SeConst),
            "sum-se" | "sum-of-two-squared-exponentials" => Ok(KernelFamily::SumSe),
            "rational-quadratic" | "rq" => Ok(KernelFamily::RationalQuadratic),
            other => Err(Error::Config(format!("unknown kernel family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub theta: Vec<f64>,
    pub amplitude: f64,
    pub jitter: f64,
}

/// Box constraints on `theta`, same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl HyperBounds {
    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.lower.len()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(t, (lo, hi))| *t >= *lo && *t <= *hi)
    }
}

/// Gradient of one kernel entry with respect to theta and to its first input.
#[derive(Debug, Clone, Copy)]
pub struct KernelGrad {
    pub value: f64,
    pub d_theta: [f64; 3],
    /// ∂k(x, y)/∂x. The derivative with respect to `y` is the negation.
    pub d_x: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, theta: Vec<f64>, amplitude: f64, jitter: f64) -> Result<Self> {
        let spec = KernelSpec {
            family,
            theta,
            amplitude,
            jitter,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// SE+constant kernel with the default jitter ratio.
    pub fn se_const(theta0: f64, theta1: f64, amplitude: f64) -> Result<Self> {
        Self::new(
            KernelFamily::SeConst,
            vec![theta0, theta1],
            amplitude,
            DEFAULT_JITTER_RATIO * amplitude,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.amplitude;
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Config(format!("kernel amplitude must be positive, got {a}")));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::Config(format!("kernel jitter must be nonnegative, got {}", self.jitter)));
        }
        if self.theta.len() != self.family.n_params() {
            return Err(Error::Config(format!(
                "{} kernel expects {} hyperparameters, got {}",
                self.family,
                self.family.n_params(),
                self.theta.len()
            )));
        }
        let t = &self.theta;
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{} kernel: {name} must be positive, got {x}", self.family)))
            }
        };
        let weight = |x: f64| {
            if (0.0..=a).contains(&x) {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{} kernel: amplitude weight {x} outside [0, {a}]",
                    self.family
                )))
            }
        };
        match self.family {
            KernelFamily::SeConst => {
                weight(t[0])?;
                positive("theta1", t[1])
            }
            KernelFamily::SumSe => {
                weight(t[0])?;
                positive("theta1", t[1])?;
                positive("theta2", t[2])
            }
            KernelFamily::RationalQuadratic => {
                positive("alpha", t[0])?;
                positive("theta1", t[1])
            }
        }
    }

    pub fn with_theta(&self, theta: &[f64]) -> Self {
        KernelSpec {
            theta: theta.to_vec(),
            ..self.clone()
        }
    }

    /// k(xi, xj) without jitter.
    pub fn eval(&self, xi: f64, xj: f64) -> f64 {
        let r2 = (xi - xj) * (xi - xj);
        let a = self.amplitude;
        let t = &self.theta;
        match self.family {
            KernelFamily::SeConst => t[0] * (-0.5 * t[1] * r2).exp() + (a - t[0]),
            KernelFamily::SumSe => {
                t[0] * (-0.5 * t[1] * r2).exp() + (a - t[0]) * (-0.5 * t[2] * r2).exp()
            }
            KernelFamily::RationalQuadratic => {
                let alpha = t[0];
                a * (1.0 + t[1] * r2 / (2.0 * alpha)).powf(-alpha)
            }
        }
    }

    /// Value plus analytic derivatives, used by the hyperparameter gradient.
    pub fn eval_grad(&self, xi: f64, xj: f64) -> KernelGrad {
        let r = xi - xj;
        let r2 = r * r;
        let a = self.amplitude;
        let t = &self.theta;
        let (value, d_theta, d_r2) = match self.family {
            KernelFamily::SeConst => {
                let e = (-0.5 * t[1] * r2).exp();
                (
                    t[0] * e + (a - t[0]),
                    [e - 1.0, -0.5 * t[0] * e * r2, 0.0],
                    -0.5 * t[0] * t[1] * e,
                )
            }
            KernelFamily::SumSe => {
                let e1 = (-0.5 * t[1] * r2).exp();
                let e2 = (-0.5 * t[2] * r2).exp();
                let w2 = a - t[0];
                (
                    t[0] * e1 + w2 * e2,
                    [e1 - e2, -0.5 * t[0] * e1 * r2, -0.5 * w2 * e2 * r2],
                    -0.5 * (t[0] * t[1] * e1 + w2 * t[2] * e2),
                )
            }
            KernelFamily::RationalQuadratic => {
                let alpha = t[0];
                let base = 1.0 + t[1] * r2 / (2.0 * alpha);
                let k = a * base.powf(-alpha);
                let k_over_base = k / base;
                let d_alpha = k * (-base.ln() + t[1] * r2 / (2.0 * alpha * base));
                (k, [d_alpha, -0.5 * k_over_base * r2, 0.0], -0.5 * k_over_base * t[1])
            }
        };
        KernelGrad {
            value,
            d_theta,
            d_x: 2.0 * r * d_r2,
        }
    }

    /// Length-scale of the dominant component (the only one for SE+const and RQ).
    pub fn length_scale(&self) -> f64 {
        1.0 / self.theta[1].sqrt()
    }
}

/// Evaluates the kernel on every pair. With `self_cov`, `xs` and `ys` are the
/// same point set and the jitter is added to the main diagonal.
pub fn cov_matrix(spec: &KernelSpec, xs: &[f64], ys: &[f64], self_cov: bool) -> DMatrix<f64> {
    if self_cov {
        debug_assert_eq!(xs, ys);
        let n = xs.len();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let k = spec.eval(xs[i], xs[j]);
                m[(i, j)] = k;
                m[(j, i)] = k;
            }
            m[(j, j)] += spec.jitter;
        }
        m
    } else {
        DMatrix::from_fn(xs.len(), ys.len(), |i, j| spec.eval(xs[i], ys[j]))
    }
}

/// Converts length-scale bounds to theta bounds for the given family.
/// The weight parameters are bounded by `[0, A]`.
pub fn bounds_from_length_scales(
    spec: &KernelSpec,
    l_lower: f64,
    l_upper: f64,
    alpha_bounds: (f64, f64),
) -> Result<HyperBounds> {
    if !(l_lower > 0.0 && l_lower <= l_upper && l_upper.is_finite()) {
        return Err(Error::Config(format!(
            "length-scale bounds must satisfy 0 < lower <= upper, got [{l_lower}, {l_upper}]"
        )));
    }
    if !(alpha_bounds.0 > 0.0 && alpha_bounds.0 <= alpha_bounds.1) {
        return Err(Error::Config(format!(
            "mixing-parameter bounds must be a positive interval, got [{}, {}]",
            alpha_bounds.0, alpha_bounds.1
        )));
    }
    let t_lo = 1.0 / (l_upper * l_upper);
    let t_hi = 1.0 / (l_lower * l_lower);
    let a = spec.amplitude;
    let (lower, upper) = match spec.family {
        KernelFamily::SeConst => (vec![0.0, t_lo], vec![a, t_hi]),
        KernelFamily::SumSe => (vec![0.0, t_lo, t_lo], vec![a, t_hi, t_hi]),
        KernelFamily::RationalQuadratic => (vec![alpha_bounds.0, t_lo], vec![alpha_bounds.1, t_hi]),
    };
    Ok(HyperBounds { lower, upper })
}

/// Default box: length-scales in `[0.05·range, 2·range]`.
pub fn default_bounds(spec: &KernelSpec, data_range: f64) -> Result<HyperBounds> {
    if !(data_range > 0.0 && data_range.is_finite()) {
        return Err(Error::Config(format!("data range must be positive, got {data_range}")));
    }
    bounds_from_length_scales(spec, 0.05 * data_range, 2.0 * data_range, DEFAULT_ALPHA_BOUNDS)
}
