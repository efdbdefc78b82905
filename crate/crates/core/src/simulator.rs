//! Euler–Maruyama simulation of `dx = f(x)dt + sqrt(g(x))dW`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::Dataset;

pub type Coefficient = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Clearance kept from an open domain boundary when clipping.
pub const DOMAIN_MARGIN: f64 = 1e-6;

/// Drift `f`, diffusion `g` (the variance rate, not its square root) and an
/// optional state domain that paths are clipped into.
#[derive(Clone)]
pub struct ModelSpec {
    pub name: String,
    pub drift: Coefficient,
    pub diffusion_g: Coefficient,
    pub domain: Option<(f64, f64)>,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl ModelSpec {
    pub fn new(
        name: impl Into<String>,
        drift: impl Fn(f64) -> f64 + Send + Sync + 'static,
        diffusion_g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ModelSpec {
            name: name.into(),
            drift: Arc::new(drift),
            diffusion_g: Arc::new(diffusion_g),
            domain: None,
        }
    }

    /// Clip paths into `[lower, upper]`; use infinities for open sides.
    pub fn with_domain(mut self, lower: f64, upper: f64) -> Self {
        self.domain = Some((lower, upper));
        self
    }

    pub fn f(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    pub fn g(&self, x: f64) -> f64 {
        (self.diffusion_g)(x)
    }
}

/// The six benchmark models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelId {
    M1,
    M2,
    M3,
    M4,
    M5,
    M6,
}

impl ModelId {
    pub const ALL: [ModelId; 6] = [ModelId::M1, ModelId::M2, ModelId::M3, ModelId::M4, ModelId::M5, ModelId::M6];

    /// Default initial state: a stable point of the drift.
    pub fn default_x0(self) -> f64 {
        match self {
            ModelId::M1 => 3.0,
            ModelId::M2 => 0.0,
            ModelId::M3 => 0.0,
            ModelId::M4 => 0.5,
            ModelId::M5 => 0.225,
            ModelId::M6 => 0.0,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.index() + 1)
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "M1" => Ok(ModelId::M1),
            "M2" => Ok(ModelId::M2),
            "M3" => Ok(ModelId::M3),
            "M4" => Ok(ModelId::M4),
            "M5" => Ok(ModelId::M5),
            "M6" => Ok(ModelId::M6),
            _ => Err(Error::Usage(format!("unknown model '{s}', expected one of M1..M6"))),
        }
    }
}

pub fn builtin_model(id: ModelId) -> ModelSpec {
    let name = id.to_string();
    match id {
        ModelId::M1 => ModelSpec::new(name, |x| -(x - 3.0), |_| 2.0),
        ModelId::M2 => ModelSpec::new(name, |x| -(x * x * x - x), |_| 1.0),
        ModelId::M3 => ModelSpec::new(name, |x| -x * x * x, |x| (0.2 + x * x).powi(2)),
        ModelId::M4 => ModelSpec::new(name, |x| -0.7 * (x - 0.5), |x| 0.7 * x * (1.0 - x))
            .with_domain(DOMAIN_MARGIN, 1.0 - DOMAIN_MARGIN),
        ModelId::M5 => {
            ModelSpec::new(name, |x| -(x - 0.225), |x| 0.25 * x).with_domain(DOMAIN_MARGIN, f64::INFINITY)
        }
        ModelId::M6 => ModelSpec::new(name, |x| -x + (3.5 * x).sin() * (-x * x).exp(), |_| 0.431 * 0.431),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Length of the returned path, `N + 1`.
    pub n_samples: usize,
    pub dt: f64,
    pub x0: f64,
    pub seed: u64,
    /// Steps simulated and discarded before the first returned sample.
    pub burn_in: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::Config(format!("n_samples must be at least 2, got {}", self.n_samples)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !self.x0.is_finite() {
            return Err(Error::Config("x0 must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub samples: Vec<f64>,
    pub dt: f64,
    /// Steps whose raw update left the domain and were clipped back.
    pub clip_count: usize,
}

impl Simulation {
    pub fn into_dataset(self) -> Result<Dataset> {
        Dataset::new(self.samples, self.dt)
    }
}

fn step(model: &ModelSpec, x: f64, dt: f64, dw: f64) -> std::result::Result<(f64, bool), String> {
    let f = model.f(x);
    let g = model.g(x);
    if !f.is_finite() || !g.is_finite() {
        return Err(format!("coefficients are not finite at x = {x} (f = {f}, g = {g})"));
    }
    let raw = x + f * dt + g.max(0.0).sqrt() * dw;
    if !raw.is_finite() {
        return Err(format!("state became non-finite after x = {x}"));
    }
    Ok(match model.domain {
        Some((lo, _)) if raw < lo => (lo, true),
        Some((lo, hi)) if raw > hi => (hi.max(lo), true),
        _ => (raw, false),
    })
}

/// One Euler–Maruyama update with Wiener increment `dw ~ N(0, dt)`.
pub fn em_step(model: &ModelSpec, x: f64, dt: f64, dw: f64) -> Result<f64> {
    step(model, x, dt, dw)
        .map(|(x, _)| x)
        .map_err(|reason| Error::Simulation { step: 0, reason })
}

pub fn simulate<R: Rng>(model: &ModelSpec, cfg: &SimConfig, rng: &mut R) -> Result<Simulation> {
    cfg.validate()?;
    let sd = cfg.dt.sqrt();
    let mut x = cfg.x0;
    let mut clip_count = 0;
    let mut samples = Vec::with_capacity(cfg.n_samples);
    let total = cfg.burn_in + cfg.n_samples - 1;
    for k in 0..=total {
        if k >= cfg.burn_in {
            samples.push(x);
        }
        if k == total {
            break;
        }
        let z: f64 = rng.sample(StandardNormal);
        let (next, clipped) = step(model, x, cfg.dt, sd * z).map_err(|reason| Error::Simulation { step: k, reason })?;
        clip_count += clipped as usize;
        x = next;
    }
    Ok(Simulation {
        samples,
        dt: cfg.dt,
        clip_count,
    })
}

/// Simulates with a generator seeded from `cfg.seed`.
pub fn simulate_seeded(model: &ModelSpec, cfg: &SimConfig) -> Result<Simulation> {
    simulate(model, cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed))
}
