//! Gradient of the lower bound with respect to the hyperparameters
//! `(θ_f, θ_s, v, x_m)`, holding the variational parameters fixed.
//!
//! The bound depends on the kernels only through `K_mm`, `K_Nm`, `J_mm` and
//! `J_Nm` (the kernel diagonals equal the fixed amplitude). We first form the
//! sensitivities of the bound to those four matrices and then contract them
//! with the analytic kernel derivatives.

use nalgebra::{DMatrix, DVector};

use super::{build_projections, compute_psi, compute_zeta, lower_bound, weighted_gram, Dataset, SgpState};
use crate::error::Result;
use crate::kernels::KernelSpec;

/// Flat layout `[θ_f.., θ_s.., v, x_m..]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HyperLayout {
    pub n_theta_f: usize,
    pub n_theta_s: usize,
    pub m: usize,
}

impl HyperLayout {
    pub fn of(state: &SgpState) -> Self {
        HyperLayout {
            n_theta_f: state.kernel_f.theta.len(),
            n_theta_s: state.kernel_s.theta.len(),
            m: state.m(),
        }
    }

    pub fn len(&self) -> usize {
        self.n_theta_f + self.n_theta_s + 1 + self.m
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn v_index(&self) -> usize {
        self.n_theta_f + self.n_theta_s
    }

    pub fn xm_offset(&self) -> usize {
        self.v_index() + 1
    }
}

pub fn pack_hyperparameters(state: &SgpState) -> Vec<f64> {
    let mut p = Vec::with_capacity(HyperLayout::of(state).len());
    p.extend_from_slice(&state.kernel_f.theta);
    p.extend_from_slice(&state.kernel_s.theta);
    p.push(state.v);
    p.extend_from_slice(&state.pseudo_inputs);
    p
}

/// Copy of `state` with the hyperparameters replaced; variational
/// parameters are untouched.
pub fn unpack_hyperparameters(state: &SgpState, params: &[f64]) -> Result<SgpState> {
    let lay = HyperLayout::of(state);
    debug_assert_eq!(params.len(), lay.len());
    let mut s = state.clone();
    s.kernel_f = state.kernel_f.with_theta(&params[..lay.n_theta_f]);
    s.kernel_s = state.kernel_s.with_theta(&params[lay.n_theta_f..lay.v_index()]);
    s.kernel_f.validate()?;
    s.kernel_s.validate()?;
    s.v = params[lay.v_index()];
    s.pseudo_inputs = params[lay.xm_offset()..].to_vec();
    Ok(s)
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Contracts `∂L/∂K_Nm` (N×m) and `∂L/∂K_mm` (symmetric) with the kernel
/// derivatives, adding into the theta and pseudo-input slots of `grad`.
fn contract_kernel(
    spec: &KernelSpec,
    inputs: &[f64],
    xm: &[f64],
    d_cross: &DMatrix<f64>,
    d_inducing: &DMatrix<f64>,
    grad_theta: &mut [f64],
    grad_xm: &mut [f64],
) {
    let np = grad_theta.len();
    for (j, &z) in xm.iter().enumerate() {
        let col = d_cross.column(j);
        let mut acc_theta = [0.0; 3];
        let mut acc_z = 0.0;
        for (i, &x) in inputs.iter().enumerate() {
            let w = col[i];
            let g = spec.eval_grad(x, z);
            for p in 0..np {
                acc_theta[p] += w * g.d_theta[p];
            }
            acc_z -= w * g.d_x;
        }
        for (b, &zb) in xm.iter().enumerate() {
            let y = d_inducing[(j, b)];
            let g = spec.eval_grad(z, zb);
            for p in 0..np {
                acc_theta[p] += y * g.d_theta[p];
            }
            acc_z += 2.0 * y * g.d_x;
        }
        for p in 0..np {
            grad_theta[p] += acc_theta[p];
        }
        grad_xm[j] += acc_z;
    }
}

/// Lower bound and its gradient in the packed layout.
pub fn elbo_and_gradient(dataset: &Dataset, state: &SgpState) -> Result<(f64, Vec<f64>)> {
    let proj = build_projections(dataset, state)?;
    let (zeta, _) = compute_zeta(&proj, state);
    let psi = compute_psi(dataset, &proj, state);
    let l = lower_bound(dataset, &proj, state, &zeta, &psi)?;

    let dt = dataset.dt();
    let n = dataset.n();
    let dx = DVector::from_column_slice(dataset.increments());
    let ones = DVector::from_element(n, 1.0);

    // drift: sensitivities to K_Nm and K_mm
    let kinv = proj.inducing.k_factor.inverse();
    let alpha = &kinv * &state.mu_f;
    let second = &state.mu_f * state.mu_f.transpose() + &state.f_cov;
    let kg = &kinv * &second * &kinv;
    let mmat = &kg - &kinv;
    let zdx = zeta.component_mul(&dx);
    let beta = &kinv * proj.k_nm.tr_mul(&zdx);
    let c = weighted_gram(&proj.k_nm, &zeta);
    let kc = &kinv * &c * &kinv;
    let y1 = &kg * &c * &kinv;
    let y_f = sym(&alpha * beta.transpose()) * -1.0 + (&y1 + y1.transpose() - &kc) * (0.5 * dt) - &kinv * 0.5
        + &kg * 0.5;
    let mut d_knm = &proj.k_nm * &mmat * (-dt);
    for j in 0..state.m() {
        for i in 0..n {
            d_knm[(i, j)] = zeta[i] * d_knm[(i, j)] + zdx[i] * alpha[j];
        }
    }

    // diffusion: sensitivities to J_Nm, J_mm and v
    let jinv = proj.inducing.j_factor.inverse();
    let r = state.mu_s.add_scalar(-state.v);
    let rho = &jinv * &r;
    let jsj = &jinv * &state.s_cov * &jinv;
    let ms = &jsj - &jinv;
    let w = DVector::from_fn(n, |i, _| psi[i] * zeta[i] / (2.0 * dt));
    let mut d_jnm = &proj.j_nm * &ms * -1.0;
    for j in 0..state.m() {
        for i in 0..n {
            d_jnm[(i, j)] = w[i] * d_jnm[(i, j)] + (w[i] - 0.5) * rho[j];
        }
    }
    let sw = weighted_gram(&proj.b, &w);
    let bw = proj.b.tr_mul(&w);
    let b1 = proj.b.tr_mul(&ones);
    let js = &jinv * &state.s_cov;
    let x = &rho * bw.transpose() + (&sw - &js * &sw - &sw * js.transpose()) * 0.5;
    let y_s = sym(&rho * b1.transpose() * 0.5 - x) - &jinv * 0.5 + &jsj * 0.5 + &rho * rho.transpose() * 0.5;
    let row_sums = &proj.b * DVector::from_element(state.m(), 1.0);
    let d_v: f64 = (0..n).map(|i| (w[i] - 0.5) * (1.0 - row_sums[i])).sum::<f64>() + rho.sum();

    let lay = HyperLayout::of(state);
    let mut grad = vec![0.0; lay.len()];
    let (theta_part, rest) = grad.split_at_mut(lay.v_index());
    let (theta_f, theta_s) = theta_part.split_at_mut(lay.n_theta_f);
    let (v_slot, xm_slot) = rest.split_at_mut(1);
    v_slot[0] = d_v;
    let inputs = dataset.inputs();
    contract_kernel(&state.kernel_f, inputs, &state.pseudo_inputs, &d_knm, &y_f, theta_f, xm_slot);
    contract_kernel(&state.kernel_s, inputs, &state.pseudo_inputs, &d_jnm, &y_s, theta_s, xm_slot);
    Ok((l, grad))
}
