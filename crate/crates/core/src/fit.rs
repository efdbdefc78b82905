//! Fitting driver: initialization, alternating E and partial M steps,
//! restarts and selection by the modified bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{
    build_projections, e_step, elbo_and_gradient, evaluate_bound, modified_lower_bound, pack_hyperparameters,
    unpack_hyperparameters, Dataset, HyperLayout, Projections, SgpState,
};
use crate::kernels::{bounds_from_length_scales, default_bounds, HyperBounds, KernelFamily, KernelSpec};
use crate::numerics::{minimize_bounded, BoundedProblem, Termination};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Number of pseudo-inputs.
    pub m: usize,
    pub restarts: usize,
    pub max_em_iterations: usize,
    /// Iteration cap of the hyperparameter minimizer inside one M step.
    pub m_step_inner_iterations: usize,
    /// Stop when `|ΔL| <= em_tolerance·|L|`.
    pub em_tolerance: f64,
    pub seed: u64,
    /// Prior variance of the drift.
    pub a_f: f64,
    /// Prior variance of the diffusion `g`.
    pub a_g: f64,
    /// Length-scale box for the drift kernel; defaults to `[0.05, 2]·range`.
    pub length_scale_bounds_f: Option<[f64; 2]>,
    /// Length-scale box for the log-diffusion kernel; defaults to `[0.05, 2]·range`.
    pub length_scale_bounds_s: Option<[f64; 2]>,
    /// Bounds on the rational-quadratic mixing parameter.
    pub alpha_bounds: [f64; 2],
    /// Half-width of the uniform jitter on the initial pseudo-inputs, as a
    /// fraction of the data range; defaults to `0.25/(m−1)`.
    pub pseudo_input_noise: Option<f64>,
    pub kernel_f: KernelFamily,
    pub kernel_s: KernelFamily,
    /// Diagonal jitter as a fraction of each kernel's amplitude.
    pub jitter_ratio: f64,
    /// When false the hyperparameters keep their initial values and the fit
    /// is plain coordinate ascent on the variational parameters.
    pub m_step: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            m: 10,
            restarts: 3,
            max_em_iterations: 200,
            m_step_inner_iterations: 5,
            em_tolerance: 1e-6,
            seed: 0,
            a_f: 25.0,
            a_g: 25.0,
            length_scale_bounds_f: None,
            length_scale_bounds_s: None,
            alpha_bounds: [crate::kernels::DEFAULT_ALPHA_BOUNDS.0, crate::kernels::DEFAULT_ALPHA_BOUNDS.1],
            pseudo_input_noise: None,
            kernel_f: KernelFamily::SeConst,
            kernel_s: KernelFamily::SeConst,
            jitter_ratio: crate::kernels::DEFAULT_JITTER_RATIO,
            m_step: true,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if self.restarts == 0 || self.max_em_iterations == 0 || self.m_step_inner_iterations == 0 {
            return bad("restarts, max_em_iterations and m_step_inner_iterations must be positive".into());
        }
        if !(self.em_tolerance >= 0.0 && self.em_tolerance.is_finite()) {
            return bad(format!("em_tolerance must be nonnegative, got {}", self.em_tolerance));
        }
        if !(self.a_f > 0.0 && self.a_f.is_finite() && self.a_g > 0.0 && self.a_g.is_finite()) {
            return bad(format!("a_f and a_g must be positive, got {} and {}", self.a_f, self.a_g));
        }
        for [lo, hi] in [self.length_scale_bounds_f, self.length_scale_bounds_s].into_iter().flatten() {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return bad(format!("length-scale bounds must satisfy 0 < lower <= upper, got [{lo}, {hi}]"));
            }
        }
        let [a0, a1] = self.alpha_bounds;
        if !(a0 > 0.0 && a0 <= a1 && a1.is_finite()) {
            return bad(format!("alpha_bounds must be a positive interval, got [{a0}, {a1}]"));
        }
        if let Some(noise) = self.pseudo_input_noise {
            if !(noise >= 0.0 && noise.is_finite()) {
                return bad(format!("pseudo_input_noise must be nonnegative, got {noise}"));
            }
        }
        if !(self.jitter_ratio >= 0.0 && self.jitter_ratio.is_finite()) {
            return bad(format!("jitter_ratio must be nonnegative, got {}", self.jitter_ratio));
        }
        Ok(())
    }

    pub fn noise_fraction(&self) -> f64 {
        self.pseudo_input_noise
            .unwrap_or(if self.m > 1 { 0.25 / (self.m - 1) as f64 } else { 0.0 })
    }
}

/// Counters accumulated over the EM iterations of one restart.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Exponent clamps in ζ at the final state.
    pub clamp_count: usize,
    /// Times the pseudo-input covariances needed the extra jitter.
    pub jitter_retries: usize,
    /// Laplace diffusion moves that had to be shortened to keep the bound from decreasing.
    pub diffusion_steps_damped: usize,
    /// Laplace diffusion moves that were skipped entirely.
    pub diffusion_steps_rejected: usize,
    /// Newton solves for the diffusion mode that hit their cap.
    pub newton_not_converged: usize,
    /// M steps whose result was reverted because the bound went down.
    pub m_step_rejections: usize,
    /// M steps whose line search failed to find a decrease.
    pub m_step_line_search_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub index: usize,
    pub elbo: Option<f64>,
    pub elbo_prime: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub state: SgpState,
    pub elbo: f64,
    pub elbo_prime: f64,
    /// Bound after every EM iteration of the selected restart.
    pub elbo_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Index of the selected restart.
    pub restart: usize,
    pub diagnostics: FitDiagnostics,
    pub restarts: Vec<RestartSummary>,
    /// Traces of every successful restart, by restart index.
    pub restart_traces: Vec<Option<Vec<f64>>>,
    pub config: FitConfig,
    pub fingerprint: String,
}

/// Linear interpolation between order statistics (type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pseudo-inputs at the empirical quantiles `k/(m−1)` of `x`, jittered by
/// uniform noise of half-width `noise_frac·range`, then sorted, clipped to
/// the data range and spread apart where they coincide.
pub fn init_pseudo_inputs<R: Rng>(x: &[f64], m: usize, noise_frac: f64, rng: &mut R) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::Config("m must be at least 1".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("samples must be finite".into()));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if m > distinct.len() {
        return Err(Error::Config(format!(
            "m = {m} exceeds the number of distinct sample values ({})",
            distinct.len()
        )));
    }
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if m == 1 {
        return Ok(vec![quantile_sorted(&sorted, 0.5)]);
    }
    let range = hi - lo;
    let half_width = noise_frac * range;
    let mut xm: Vec<f64> = (0..m)
        .map(|k| {
            let q = quantile_sorted(&sorted, k as f64 / (m - 1) as f64);
            let jitter = if half_width > 0.0 { rng.random_range(-half_width..=half_width) } else { 0.0 };
            (q + jitter).clamp(lo, hi)
        })
        .collect();
    xm.sort_by(f64::total_cmp);
    let eps = 1e-6 * range;
    for k in 1..m {
        if xm[k] <= xm[k - 1] {
            xm[k] = xm[k - 1] + eps;
        }
    }
    if xm[m - 1] > hi {
        xm[m - 1] = hi;
        for k in (0..m - 1).rev() {
            if xm[k] >= xm[k + 1] {
                xm[k] = xm[k + 1] - eps;
            }
        }
    }
    Ok(xm)
}

/// Prior `(v, A_s)` of the log-diffusion, chosen so that the implied
/// lognormal prior on `g` has mean `Var[Δx]/Δt` and variance `a_g`.
pub fn init_diffusion_prior(dataset: &Dataset, a_g: f64) -> Result<(f64, f64)> {
    if !(a_g >= 0.0 && a_g.is_finite()) {
        return Err(Error::Config(format!("a_g must be nonnegative, got {a_g}")));
    }
    let dx = dataset.increments();
    let n = dx.len() as f64;
    let mean = dx.iter().sum::<f64>() / n;
    let var = dx.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Err(Error::Config("increments have zero variance".into()));
    }
    let scale = var / dataset.dt();
    let a_s = (a_g / (scale * scale)).ln_1p();
    Ok((scale.ln() - 0.5 * a_s, a_s))
}

/// Rule-of-thumb count of pseudo-inputs: `floor(range/l)`, at least 2.
pub fn heuristic_m(x: &[f64], l: f64) -> Result<usize> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::Config(format!("length-scale must be positive, got {l}")));
    }
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi >= lo) {
        return Ok(2);
    }
    Ok((((hi - lo) / l).floor() as usize).max(2))
}

fn kernel_bounds(spec: &KernelSpec, lbounds: Option<[f64; 2]>, config: &FitConfig, range: f64) -> Result<HyperBounds> {
    let alpha = (config.alpha_bounds[0], config.alpha_bounds[1]);
    match lbounds {
        Some([lo, hi]) => bounds_from_length_scales(spec, lo, hi, alpha),
        None => {
            let mut b = default_bounds(spec, range)?;
            if spec.family == KernelFamily::RationalQuadratic {
                b.lower[0] = alpha.0;
                b.upper[0] = alpha.1;
            }
            Ok(b)
        }
    }
}

/// Weights are drawn uniformly in their box, scale parameters log-uniformly.
fn random_theta<R: Rng>(bounds: &HyperBounds, rng: &mut R) -> Vec<f64> {
    bounds
        .lower
        .iter()
        .zip(&bounds.upper)
        .map(|(&lo, &hi)| {
            let u: f64 = rng.random();
            if lo <= 0.0 {
                lo + u * (hi - lo)
            } else {
                (lo.ln() + u * (hi.ln() - lo.ln())).exp()
            }
        })
        .collect()
}

/// Everything a restart needs that does not depend on the restart index.
struct Setup<'a> {
    dataset: &'a Dataset,
    config: &'a FitConfig,
    template_f: KernelSpec,
    template_s: KernelSpec,
    bounds_f: HyperBounds,
    bounds_s: HyperBounds,
    v0: f64,
}

impl<'a> Setup<'a> {
    fn new(dataset: &'a Dataset, config: &'a FitConfig) -> Result<Self> {
        let range = dataset.range();
        let (v0, a_s) = init_diffusion_prior(dataset, config.a_g)?;
        let template = |family: KernelFamily, amplitude: f64| KernelSpec {
            family,
            theta: match family {
                KernelFamily::SeConst => vec![amplitude, 1.0],
                KernelFamily::SumSe => vec![amplitude, 1.0, 1.0],
                KernelFamily::RationalQuadratic => vec![1.0, 1.0],
            },
            amplitude,
            jitter: config.jitter_ratio * amplitude,
        };
        let template_f = template(config.kernel_f, config.a_f);
        let template_s = template(config.kernel_s, a_s);
        let bounds_f = kernel_bounds(&template_f, config.length_scale_bounds_f, config, range)?;
        let bounds_s = kernel_bounds(&template_s, config.length_scale_bounds_s, config, range)?;
        Ok(Setup {
            dataset,
            config,
            template_f,
            template_s,
            bounds_f,
            bounds_s,
            v0,
        })
    }

    fn initial_state(&self, restart: usize) -> Result<SgpState> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(restart as u64);
        let xm = init_pseudo_inputs(self.dataset.samples(), self.config.m, self.config.noise_fraction(), &mut rng)?;
        let kf = self.template_f.with_theta(&random_theta(&self.bounds_f, &mut rng));
        let ks = self.template_s.with_theta(&random_theta(&self.bounds_s, &mut rng));
        SgpState::from_prior(xm, kf, ks, self.v0)
    }

    fn m_step_bounds(&self, lay: HyperLayout) -> (Vec<f64>, Vec<f64>) {
        let (lo, hi) = self.dataset.min_max();
        let mut lower = self.bounds_f.lower.clone();
        lower.extend_from_slice(&self.bounds_s.lower);
        lower.push(f64::NEG_INFINITY);
        lower.extend(std::iter::repeat_n(lo, lay.m));
        let mut upper = self.bounds_f.upper.clone();
        upper.extend_from_slice(&self.bounds_s.upper);
        upper.push(f64::INFINITY);
        upper.extend(std::iter::repeat_n(hi, lay.m));
        (lower, upper)
    }
}

struct RestartOutcome {
    state: SgpState,
    elbo: f64,
    trace: Vec<f64>,
    converged: bool,
    diagnostics: FitDiagnostics,
}

enum MStep {
    Accepted(SgpState, Projections, f64),
    Rejected,
}

/// Runs the hyperparameter minimizer with the given cap. The variational
/// parameters stay fixed; ζ and ψ are recomputed at every trial point.
fn m_step(setup: &Setup, state: &SgpState, current: f64, cap: usize, diag: &mut FitDiagnostics) -> Result<MStep> {
    let lay = HyperLayout::of(state);
    let (lower, upper) = setup.m_step_bounds(lay);
    let start = pack_hyperparameters(state);
    let objective = |p: &[f64]| match unpack_hyperparameters(state, p).and_then(|s| elbo_and_gradient(setup.dataset, &s)) {
        Ok((l, g)) => (-l, g.into_iter().map(|v| -v).collect()),
        Err(_) => (f64::INFINITY, vec![0.0; p.len()]),
    };
    let mut problem = BoundedProblem::new(objective, lower, upper).max_iterations(cap);
    let min = minimize_bounded(&mut problem, &start)?;
    if min.termination == Termination::LineSearchFailed {
        diag.m_step_line_search_failures += 1;
    }
    let mut next = unpack_hyperparameters(state, &min.argmin)?;
    next.sort_pseudo_inputs();
    let proj = match build_projections(setup.dataset, &next) {
        Ok(p) => p,
        Err(_) => return Ok(MStep::Rejected),
    };
    match evaluate_bound(setup.dataset, &proj, &next) {
        Ok((l, _, _, _)) if l >= current => Ok(MStep::Accepted(next, proj, l)),
        _ => Ok(MStep::Rejected),
    }
}

fn run_restart(setup: &Setup, restart: usize) -> Result<RestartOutcome> {
    let config = setup.config;
    let dataset = setup.dataset;
    let mut state = setup.initial_state(restart)?;
    let mut proj = build_projections(dataset, &state)?;
    let mut diag = FitDiagnostics {
        jitter_retries: proj.inducing.jitter_retries,
        ..FitDiagnostics::default()
    };
    let (mut prev, _, _, _) = evaluate_bound(dataset, &proj, &state)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut clamps = 0;
    for _ in 0..config.max_em_iterations {
        let rep = e_step(dataset, &proj, &mut state)?;
        clamps = rep.clamps;
        if !rep.newton_converged {
            diag.newton_not_converged += 1;
        }
        if rep.diffusion_step == 0.0 {
            diag.diffusion_steps_rejected += 1;
        } else if rep.diffusion_step < 1.0 {
            diag.diffusion_steps_damped += 1;
        }
        let mut l = rep.bound;
        if config.m_step {
            let mut cap = config.m_step_inner_iterations;
            loop {
                match m_step(setup, &state, l, cap, &mut diag)? {
                    MStep::Accepted(s, p, lm) => {
                        diag.jitter_retries += p.inducing.jitter_retries;
                        state = s;
                        proj = p;
                        l = lm;
                        break;
                    }
                    MStep::Rejected => {
                        diag.m_step_rejections += 1;
                        if cap == 1 {
                            break;
                        }
                        cap /= 2;
                    }
                }
            }
            clamps = crate::inference::compute_zeta(&proj, &state).1;
        }
        trace.push(l);
        let done = (l - prev).abs() <= config.em_tolerance * l.abs();
        prev = l;
        if done {
            converged = true;
            break;
        }
    }
    diag.clamp_count = clamps;
    if clamps > 0 {
        return Err(Error::Inference(format!(
            "{clamps} exponent(s) were clamped at the final state; rescale the series"
        )));
    }
    Ok(RestartOutcome {
        state,
        elbo: prev,
        trace,
        converged,
        diagnostics: diag,
    })
}

/// Fits the model from every restart (in parallel) and keeps the one with
/// the largest modified bound.
pub fn fit(dataset: &Dataset, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let setup = Setup::new(dataset, config)?;
    let outcomes: Vec<Result<RestartOutcome>> =
        (0..config.restarts).into_par_iter().map(|r| run_restart(&setup, r)).collect();

    let mut summaries = Vec::with_capacity(outcomes.len());
    let mut traces = Vec::with_capacity(outcomes.len());
    let mut best: Option<(usize, f64)> = None;
    for (index, out) in outcomes.iter().enumerate() {
        match out {
            Ok(o) => {
                let lp = modified_lower_bound(o.elbo, o.state.m());
                summaries.push(RestartSummary {
                    index,
                    elbo: Some(o.elbo),
                    elbo_prime: Some(lp),
                    iterations: o.trace.len(),
                    converged: o.converged,
                    error: None,
                });
                traces.push(Some(o.trace.clone()));
                if best.is_none_or(|(_, b)| lp > b) {
                    best = Some((index, lp));
                }
            }
            Err(e) => {
                summaries.push(RestartSummary {
                    index,
                    elbo: None,
                    elbo_prime: None,
                    iterations: 0,
                    converged: false,
                    error: Some(e.to_string()),
                });
                traces.push(None);
            }
        }
    }
    let Some((index, elbo_prime)) = best else {
        return Err(Error::Fit(
            summaries
                .iter()
                .map(|s| format!("restart {}: {}", s.index, s.error.as_deref().unwrap_or("unknown")))
                .collect(),
        ));
    };
    let Some(Ok(o)) = outcomes.into_iter().nth(index) else {
        unreachable!("selected restart succeeded")
    };
    Ok(FitResult {
        iterations: o.trace.len(),
        state: o.state,
        elbo: o.elbo,
        elbo_prime,
        elbo_trace: o.trace,
        converged: o.converged,
        restart: index,
        diagnostics: o.diagnostics,
        restarts: summaries,
        restart_traces: traces,
        config: config.clone(),
        fingerprint: dataset.fingerprint(),
    })
}
