//! Variational updates for the sparse drift/diffusion model.
//!
//! The drift `f` has a zero-mean GP prior and the log-diffusion `s = log g`
//! a GP prior with constant mean `v`. Both are summarized by inducing values
//! at shared pseudo-inputs `x_m` with Gaussian variational distributions
//! `N(mu_f, F)` and `N(mu_s, S)`.

mod dataset;
mod hyper;

pub use dataset::Dataset;
pub use hyper::{elbo_and_gradient, pack_hyperparameters, unpack_hyperparameters, HyperLayout};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{cov_matrix, KernelSpec};
use crate::numerics::{symmetrize, PsdFactor};

/// Upper clamp applied to the argument of `exp` in ζ and the diffusion objective.
pub const EXP_CLAMP: f64 = 700.0;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct SgpState {
    pub pseudo_inputs: Vec<f64>,
    pub kernel_f: KernelSpec,
    pub kernel_s: KernelSpec,
    pub v: f64,
    pub mu_f: DVector<f64>,
    pub f_cov: DMatrix<f64>,
    pub mu_s: DVector<f64>,
    pub s_cov: DMatrix<f64>,
}

impl SgpState {
    /// State whose variational distributions equal the priors at `x_m`.
    pub fn from_prior(pseudo_inputs: Vec<f64>, kernel_f: KernelSpec, kernel_s: KernelSpec, v: f64) -> Result<Self> {
        kernel_f.validate()?;
        kernel_s.validate()?;
        let m = pseudo_inputs.len();
        if m == 0 {
            return Err(Error::Config("at least one pseudo-input is required".into()));
        }
        let f_cov = cov_matrix(&kernel_f, &pseudo_inputs, &pseudo_inputs, true);
        let s_cov = cov_matrix(&kernel_s, &pseudo_inputs, &pseudo_inputs, true);
        Ok(SgpState {
            pseudo_inputs,
            kernel_f,
            kernel_s,
            v,
            mu_f: DVector::zeros(m),
            f_cov,
            mu_s: DVector::from_element(m, v),
            s_cov,
        })
    }

    pub fn m(&self) -> usize {
        self.pseudo_inputs.len()
    }

    /// Reorders the pseudo-inputs ascending, permuting the variational
    /// parameters with them. The bound is invariant under this relabelling.
    pub fn sort_pseudo_inputs(&mut self) {
        let m = self.m();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| self.pseudo_inputs[a].total_cmp(&self.pseudo_inputs[b]));
        if order.iter().enumerate().all(|(i, &o)| i == o) {
            return;
        }
        self.pseudo_inputs = order.iter().map(|&i| self.pseudo_inputs[i]).collect();
        self.mu_f = DVector::from_fn(m, |i, _| self.mu_f[order[i]]);
        self.mu_s = DVector::from_fn(m, |i, _| self.mu_s[order[i]]);
        self.f_cov = DMatrix::from_fn(m, m, |i, j| self.f_cov[(order[i], order[j])]);
        self.s_cov = DMatrix::from_fn(m, m, |i, j| self.s_cov[(order[i], order[j])]);
    }
}

/// Covariances among the pseudo-inputs and their factors.
#[derive(Debug, Clone)]
pub struct InducingCovariances {
    pub k_mm: DMatrix<f64>,
    pub k_factor: PsdFactor,
    pub j_mm: DMatrix<f64>,
    pub j_factor: PsdFactor,
    pub jitter_retries: usize,
}

/// Builds `K + εI` and factors it, retrying once with `10ε` more on the
/// diagonal.
pub fn factor_inducing(spec: &KernelSpec, xm: &[f64], name: &str) -> Result<(DMatrix<f64>, PsdFactor, bool)> {
    let mut k = cov_matrix(spec, xm, xm, true);
    match PsdFactor::new(&k) {
        Ok(f) => Ok((k, f, false)),
        Err(Error::Decomposition { .. }) => {
            for i in 0..xm.len() {
                k[(i, i)] += 10.0 * spec.jitter;
            }
            PsdFactor::new(&k).map(|f| (k, f, true)).map_err(|e| {
                Error::Inference(format!(
                    "{name} covariance at the pseudo-inputs is not positive definite after a jitter retry ({e})"
                ))
            })
        }
        Err(e) => Err(e),
    }
}

impl InducingCovariances {
    pub fn new(state: &SgpState) -> Result<Self> {
        let (k_mm, k_factor, rk) = factor_inducing(&state.kernel_f, &state.pseudo_inputs, "drift")?;
        let (j_mm, j_factor, rj) = factor_inducing(&state.kernel_s, &state.pseudo_inputs, "diffusion")?;
        Ok(InducingCovariances {
            k_mm,
            k_factor,
            j_mm,
            j_factor,
            jitter_retries: rk as usize + rj as usize,
        })
    }
}

/// Cached projections of the training inputs onto the pseudo-inputs.
/// `A = K_Nm K_mm⁻¹`, `P_ii = k(x_i, x_i) − [K_Nm K_mm⁻¹ K_mN]_ii`, and the
/// same for the diffusion kernel (`B`, `Q`). `K_NN` is never formed.
#[derive(Debug, Clone)]
pub struct Projections {
    pub inducing: InducingCovariances,
    pub k_nm: DMatrix<f64>,
    pub j_nm: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub p_diag: DVector<f64>,
    pub q_diag: DVector<f64>,
}

/// Returns `cross·M⁻¹` and the row-wise explained variance
/// `diag(cross·M⁻¹·crossᵀ)`, both through `V = cross·L⁻ᵀ`.
fn project_onto(factor: &PsdFactor, cross: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let l_inv = factor.lower_inverse();
    let v = cross * l_inv.transpose();
    let explained = row_dots(&v, &v);
    (v * l_inv, explained)
}

fn residual_diag(spec: &KernelSpec, inputs: &[f64], explained: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(inputs.len(), |i, _| (spec.eval(inputs[i], inputs[i]) - explained[i]).max(0.0))
}

/// `out_i = Σ_j x[i,j]·y[i,j]`.
pub(crate) fn row_dots(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(x.nrows());
    for j in 0..x.ncols() {
        out += x.column(j).component_mul(&y.column(j));
    }
    out
}

pub fn build_projections(dataset: &Dataset, state: &SgpState) -> Result<Projections> {
    let xm = &state.pseudo_inputs;
    if xm.is_empty() {
        return Err(Error::Config("at least one pseudo-input is required".into()));
    }
    let inducing = InducingCovariances::new(state)?;
    let inputs = dataset.inputs();
    let k_nm = cov_matrix(&state.kernel_f, inputs, xm, false);
    let j_nm = cov_matrix(&state.kernel_s, inputs, xm, false);
    let (a, explained_f) = project_onto(&inducing.k_factor, &k_nm);
    let (b, explained_s) = project_onto(&inducing.j_factor, &j_nm);
    let p_diag = residual_diag(&state.kernel_f, inputs, &explained_f);
    let q_diag = residual_diag(&state.kernel_s, inputs, &explained_s);
    Ok(Projections {
        inducing,
        k_nm,
        j_nm,
        a,
        b,
        p_diag,
        q_diag,
    })
}

fn clamped_exp(arg: f64, clamps: &mut usize) -> f64 {
    if arg > EXP_CLAMP {
        *clamps += 1;
        EXP_CLAMP.exp()
    } else {
        arg.exp()
    }
}

/// ζ_i = E[exp(−s_i)] under the current diffusion distribution. Also returns
/// how many exponents were clamped.
pub fn compute_zeta(proj: &Projections, state: &SgpState) -> (DVector<f64>, usize) {
    let r = state.mu_s.add_scalar(-state.v);
    let eta = &proj.b * &r;
    let bs = &proj.b * &state.s_cov;
    let quad = row_dots(&bs, &proj.b);
    let mut clamps = 0;
    let zeta = DVector::from_fn(eta.len(), |i, _| {
        let arg = -state.v - eta[i] + 0.5 * (proj.q_diag[i] + quad[i].max(0.0));
        clamped_exp(arg, &mut clamps)
    });
    (zeta, clamps)
}

/// ψ_i = E[(Δx_i − Δt·f_i)²] under the current drift distribution.
pub fn compute_psi(dataset: &Dataset, proj: &Projections, state: &SgpState) -> DVector<f64> {
    let dt = dataset.dt();
    let dx = dataset.increments();
    let am = &proj.a * &state.mu_f;
    let af = &proj.a * &state.f_cov;
    let quad = row_dots(&af, &proj.a);
    DVector::from_fn(dx.len(), |i, _| {
        let resid = dx[i] - dt * am[i];
        resid * resid + dt * dt * (proj.p_diag[i] + quad[i].max(0.0))
    })
}

/// `(diag(√w)·X)ᵀ(diag(√w)·X) = Xᵀ diag(w) X` for nonnegative weights.
fn weighted_gram(x: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = x.clone();
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            scaled[(i, j)] *= w[i].sqrt();
        }
    }
    let mut g = scaled.transpose() * &scaled;
    symmetrize(&mut g);
    g
}

/// Optimal Gaussian for the drift inducing values given ζ:
/// `F = [K⁻¹ + Δt·Aᵀdiag(ζ)A]⁻¹`, `mu_f = F·Aᵀ(ζ ⊙ Δx)`.
/// Evaluated as `F = K Σ⁻¹ K`, `mu_f = K Σ⁻¹ K_mN(ζ ⊙ Δx)` with
/// `Σ = K + Δt·K_mN diag(ζ) K_Nm`, which avoids forming `K⁻¹`.
pub fn update_drift(dataset: &Dataset, proj: &Projections, zeta: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if zeta.iter().any(|z| !(*z > 0.0) || !z.is_finite()) {
        return Err(Error::Inference("zeta must be positive and finite".into()));
    }
    let dt = dataset.dt();
    let k = &proj.inducing.k_mm;
    let sigma = k + weighted_gram(&proj.k_nm, zeta) * dt;
    let sigma_f = PsdFactor::new(&sigma)
        .map_err(|e| Error::Inference(format!("drift update: precision is not positive definite ({e})")))?;
    let weighted_dx = DVector::from_fn(zeta.len(), |i, _| zeta[i] * dataset.increments()[i]);
    let rhs = proj.k_nm.tr_mul(&weighted_dx);
    let mu = k * sigma_f.solve_vec(&rhs)?;
    let mut f_cov = k * sigma_f.solve_mat(k)?;
    symmetrize(&mut f_cov);
    PsdFactor::new(&f_cov)
        .map_err(|e| Error::Inference(format!("drift covariance is not positive definite ({e})")))?;
    Ok((mu, f_cov))
}

/// Negative log of the unnormalized diffusion update (constant dropped):
/// `(1/2Δt)Σψ_i·exp(−v − [B(s_m−v)]_i + Q_ii/2) + ½(s_m−v)ᵀJ⁻¹(s_m−v) + ½Σ[B(s_m−v)]_i`.
pub struct DiffusionObjective<'a> {
    dt: f64,
    v: f64,
    psi: &'a DVector<f64>,
    proj: &'a Projections,
    /// `−v + Q_ii/2`, the part of each exponent that does not depend on `s_m`.
    offsets: DVector<f64>,
    b_col_sums: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct DiffusionEval {
    pub value: f64,
    pub gradient: DVector<f64>,
    /// `ψ_i·exp(·)/(2Δt)`; zero where the exponent was clamped.
    pub weights: DVector<f64>,
    pub clamps: usize,
}

impl<'a> DiffusionObjective<'a> {
    pub fn new(dataset: &Dataset, proj: &'a Projections, v: f64, psi: &'a DVector<f64>) -> Result<Self> {
        if psi.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Inference("psi must be nonnegative".into()));
        }
        let offsets = proj.q_diag.map(|q| -v + 0.5 * q);
        let ones = DVector::from_element(proj.b.nrows(), 1.0);
        Ok(DiffusionObjective {
            dt: dataset.dt(),
            v,
            psi,
            proj,
            offsets,
            b_col_sums: proj.b.tr_mul(&ones),
        })
    }

    pub fn eval(&self, s_m: &DVector<f64>) -> Result<DiffusionEval> {
        let r = s_m.add_scalar(-self.v);
        let eta = &self.proj.b * &r;
        let j_inv_r = self.proj.inducing.j_factor.solve_vec(&r)?;
        let mut clamps = 0;
        let mut data = 0.0;
        let weights = DVector::from_fn(eta.len(), |i, _| {
            let arg = self.offsets[i] - eta[i];
            if arg > EXP_CLAMP {
                clamps += 1;
                data += self.psi[i] * EXP_CLAMP.exp();
                0.0
            } else {
                let w = self.psi[i] * arg.exp();
                data += w;
                w / (2.0 * self.dt)
            }
        });
        let value = data / (2.0 * self.dt) + 0.5 * r.dot(&j_inv_r) + 0.5 * eta.sum();
        let gradient = -self.proj.b.tr_mul(&weights) + j_inv_r + &self.b_col_sums * 0.5;
        if !value.is_finite() {
            return Err(Error::Inference(
                "diffusion objective overflowed; rescale the series or choose a larger v".into(),
            ));
        }
        Ok(DiffusionEval {
            value,
            gradient,
            weights,
            clamps,
        })
    }

    /// Hessian `Bᵀdiag(w)B + J⁻¹`; its inverse is the Laplace covariance.
    pub fn hessian(&self, eval: &DiffusionEval) -> DMatrix<f64> {
        let mut h = weighted_gram(&self.proj.b, &eval.weights) + self.proj.inducing.j_factor.inverse();
        symmetrize(&mut h);
        h
    }

    /// Factor of `Σ = J + J_mN diag(w) J_Nm`, so that `H⁻¹ = J Σ⁻¹ J`.
    fn sigma_factor(&self, eval: &DiffusionEval) -> Result<PsdFactor> {
        let sigma = &self.proj.inducing.j_mm + weighted_gram(&self.proj.j_nm, &eval.weights);
        PsdFactor::new(&sigma)
            .map_err(|e| Error::Inference(format!("diffusion Hessian is not negative definite ({e})")))
    }

    fn inverse_hessian_times(&self, sigma: &PsdFactor, g: &DVector<f64>) -> Result<DVector<f64>> {
        let j = &self.proj.inducing.j_mm;
        Ok(j * sigma.solve_vec(&(j * g))?)
    }
}

pub fn diffusion_objective(
    dataset: &Dataset,
    proj: &Projections,
    state: &SgpState,
    psi: &DVector<f64>,
    s_m: &DVector<f64>,
) -> Result<(f64, DVector<f64>)> {
    let obj = DiffusionObjective::new(dataset, proj, state.v, psi)?;
    let e = obj.eval(s_m)?;
    Ok((e.value, e.gradient))
}

#[derive(Debug, Clone)]
pub struct DiffusionUpdate {
    pub mu_s: DVector<f64>,
    pub s_cov: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub clamps: usize,
}

const NEWTON_MAX_ITERATIONS: usize = 100;

/// Laplace update of the diffusion inducing distribution: the mode of the
/// (convex) objective is found by damped Newton steps warm-started at the
/// current `mu_s`, and `S` is the inverse Hessian at the mode.
pub fn update_diffusion(dataset: &Dataset, proj: &Projections, state: &SgpState, psi: &DVector<f64>) -> Result<DiffusionUpdate> {
    let obj = DiffusionObjective::new(dataset, proj, state.v, psi)?;
    let mut s = state.mu_s.clone();
    let mut cur = obj.eval(&s)?;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < NEWTON_MAX_ITERATIONS {
        iterations += 1;
        let sigma = obj.sigma_factor(&cur)?;
        let step = -obj.inverse_hessian_times(&sigma, &cur.gradient)?;
        let decrement = -cur.gradient.dot(&step);
        let scale = cur.value.abs().max(1.0);
        if decrement <= 1e-14 * scale {
            converged = true;
            break;
        }
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..50 {
            let trial = &s + &step * t;
            if let Ok(e) = obj.eval(&trial) {
                if e.value <= cur.value - 1e-4 * t * decrement {
                    next = Some((trial, e));
                    break;
                }
            }
            t *= 0.5;
        }
        match next {
            Some((trial, e)) => {
                s = trial;
                cur = e;
            }
            None => {
                // no representable decrease left; accept if already near the mode
                converged = decrement <= 1e-8 * scale;
                break;
            }
        }
    }
    let sigma = obj.sigma_factor(&cur)?;
    let j = &proj.inducing.j_mm;
    let mut s_cov = j * sigma.solve_mat(j)?;
    symmetrize(&mut s_cov);
    PsdFactor::new(&s_cov)
        .map_err(|e| Error::Inference(format!("diffusion covariance is not positive definite ({e})")))?;
    Ok(DiffusionUpdate {
        mu_s: s,
        s_cov,
        iterations,
        converged,
        clamps: cur.clamps,
    })
}

/// Outcome of one E step (drift update followed by diffusion update).
#[derive(Debug, Clone)]
pub struct EStepReport {
    /// Bound after the step.
    pub bound: f64,
    /// Fraction of the Laplace move applied to the diffusion distribution:
    /// 1 when accepted as is, 0 when it was rejected.
    pub diffusion_step: f64,
    pub newton_converged: bool,
    pub clamps: usize,
}

const DIFFUSION_STEP_HALVINGS: usize = 10;

/// One E step. The drift update is exact coordinate ascent on the bound.
/// The Laplace diffusion update is not, so the move from the current
/// `(mu_s, S)` toward the Laplace solution is halved until the bound does
/// not decrease (and skipped if no fraction works).
pub fn e_step(dataset: &Dataset, proj: &Projections, state: &mut SgpState) -> Result<EStepReport> {
    let (zeta, _) = compute_zeta(proj, state);
    let (mu_f, f_cov) = update_drift(dataset, proj, &zeta)?;
    state.mu_f = mu_f;
    state.f_cov = f_cov;
    let psi = compute_psi(dataset, proj, state);
    let base = lower_bound(dataset, proj, state, &zeta, &psi)?;
    let up = update_diffusion(dataset, proj, state, &psi)?;
    let (mu0, s0) = (state.mu_s.clone(), state.s_cov.clone());
    let mut t = 1.0;
    for _ in 0..=DIFFUSION_STEP_HALVINGS {
        state.mu_s = &mu0 + (&up.mu_s - &mu0) * t;
        state.s_cov = &s0 + (&up.s_cov - &s0) * t;
        let (zeta, clamps) = compute_zeta(proj, state);
        if let Ok(l) = lower_bound(dataset, proj, state, &zeta, &psi) {
            if l >= base {
                return Ok(EStepReport {
                    bound: l,
                    diffusion_step: t,
                    newton_converged: up.converged,
                    clamps,
                });
            }
        }
        t *= 0.5;
    }
    state.mu_s = mu0;
    state.s_cov = s0;
    let (zeta, clamps) = compute_zeta(proj, state);
    Ok(EStepReport {
        bound: lower_bound(dataset, proj, state, &zeta, &psi)?,
        diffusion_step: 0.0,
        newton_converged: up.converged,
        clamps,
    })
}

/// Lower bound split into its terms; `total()` is the bound with the
/// additive constant dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboTerms {
    pub data_fit: f64,
    pub log_diffusion: f64,
    pub normalizer: f64,
    pub prior_f: f64,
    pub prior_s: f64,
    pub entropy_f: f64,
    pub entropy_s: f64,
}

impl ElboTerms {
    pub fn total(&self) -> f64 {
        self.data_fit + self.log_diffusion + self.normalizer + self.prior_f + self.prior_s + self.entropy_f + self.entropy_s
    }
}

/// `−½log|K| − (m/2)log 2π − ½[tr(K⁻¹Σ) + μᵀK⁻¹μ]` for a Gaussian `N(mean, cov)`
/// centered at `prior_mean`.
pub fn gaussian_cross_term(k_factor: &PsdFactor, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let m = mean.len() as f64;
    let trace = k_factor.solve_mat(cov)?.trace();
    let quad = mean.dot(&k_factor.solve_vec(mean)?);
    Ok(-0.5 * k_factor.logdet() - 0.5 * m * LN_2PI - 0.5 * (trace + quad))
}

/// `½log((2πe)^m |Σ|)`.
pub fn gaussian_entropy(cov: &DMatrix<f64>) -> Result<f64> {
    let f = PsdFactor::new(cov)?;
    let m = cov.nrows() as f64;
    Ok(0.5 * (m * (LN_2PI + 1.0) + f.logdet()))
}

pub fn lower_bound_terms(
    dataset: &Dataset,
    proj: &Projections,
    state: &SgpState,
    zeta: &DVector<f64>,
    psi: &DVector<f64>,
) -> Result<ElboTerms> {
    let dt = dataset.dt();
    let n = dataset.n() as f64;
    let r = state.mu_s.add_scalar(-state.v);
    let eta = &proj.b * &r;
    let terms = ElboTerms {
        data_fit: -psi.dot(zeta) / (2.0 * dt),
        log_diffusion: -0.5 * (n * state.v + eta.sum()),
        normalizer: -0.5 * n * (LN_2PI + dt.ln()),
        prior_f: gaussian_cross_term(&proj.inducing.k_factor, &state.mu_f, &state.f_cov)?,
        prior_s: gaussian_cross_term(&proj.inducing.j_factor, &r, &state.s_cov)?,
        entropy_f: gaussian_entropy(&state.f_cov)?,
        entropy_s: gaussian_entropy(&state.s_cov)?,
    };
    if !terms.total().is_finite() {
        return Err(Error::Inference(format!("lower bound is not finite: {terms:?}")));
    }
    Ok(terms)
}

pub fn lower_bound(
    dataset: &Dataset,
    proj: &Projections,
    state: &SgpState,
    zeta: &DVector<f64>,
    psi: &DVector<f64>,
) -> Result<f64> {
    lower_bound_terms(dataset, proj, state, zeta, psi).map(|t| t.total())
}

/// `L + log(m!)`, accounting for the `m!` relabellings of the pseudo-inputs.
pub fn modified_lower_bound(l: f64, m: usize) -> f64 {
    l + (2..=m).map(|k| (k as f64).ln()).sum::<f64>()
}

/// Recomputes ζ and ψ from scratch and returns the bound with both statistics.
pub fn evaluate_bound(dataset: &Dataset, proj: &Projections, state: &SgpState) -> Result<(f64, DVector<f64>, DVector<f64>, usize)> {
    let (zeta, clamps) = compute_zeta(proj, state);
    let psi = compute_psi(dataset, proj, state);
    let l = lower_bound(dataset, proj, state, &zeta, &psi)?;
    Ok((l, zeta, psi, clamps))
}
