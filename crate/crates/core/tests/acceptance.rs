//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! ```text
//! cargo test --release --test acceptance
//! ```

use std::error::Error;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sparse_sde::evaluation::{benchmark, BenchmarkConfig, CoefficientKind, ErrorTable, EstimatorKind};
use sparse_sde::fit::{fit, heuristic_m, init_diffusion_prior, FitConfig};
use sparse_sde::inference::{
    build_projections, compute_psi, compute_zeta, update_drift, Dataset, DiffusionObjective, SgpState,
};
use sparse_sde::kernels::{cov_matrix, KernelFamily, KernelSpec};
use sparse_sde::predict::predict;
use sparse_sde::simulator::{builtin_model, simulate_seeded, ModelId, ModelSpec, SimConfig};

type Outcome = Result<(bool, String), Box<dyn Error>>;

// Pinned tolerances.
const M1_DRIFT_BAND: (f64, f64) = (0.25, 0.75);
const M1_DIFFUSION_MAX: f64 = 0.05;
const M3_DIFFUSION_MAX: f64 = 0.02;
const M3_DRIFT_MAX: f64 = 0.25;
const MIN_WINS_OVER_BINNING: usize = 7;
const TRACE_REL_TOL: f64 = 1e-6;
const MC_DRAWS: usize = 1_000_000;
const MC_SE_MULTIPLE: f64 = 3.0;
/// Per-point guard for the Monte-Carlo comparison; 3 SE is applied to the
/// per-state totals, where it is one test rather than one per point.
const MC_POINTWISE_SE_MULTIPLE: f64 = 4.5;
const GRADIENT_REL_TOL: f64 = 1e-5;
const HESSIAN_REL_TOL: f64 = 1e-4;
const DRIFT_ORACLE_TOL: f64 = 1e-6;
const OU_MEAN_TOL: f64 = 0.05;
const OU_VAR_TOL: f64 = 0.05;
const SKEW_TOL: f64 = 0.05;
const EXCESS_KURTOSIS_TOL: f64 = 0.1;
const PSEUDO_INPUT_TOL: f64 = 1e-10;
const FAR_FIELD_TOL: f64 = 1e-6;
const LOGNORMAL_REL_TOL: f64 = 0.02;
const BENCHMARK_SEED: u64 = 0;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_pd(rng: &mut ChaCha8Rng, m: usize, scale: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(m, m, |_, _| normal(rng));
    (&g * g.transpose()) * (scale / m as f64) + DMatrix::identity(m, m) * (0.1 * scale)
}

/// A random dataset with `n` increments and a random variational state over `m` pseudo-inputs.
fn random_problem(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (Dataset, SgpState) {
    let mut x = vec![rng.random_range(-1.0..1.0)];
    for _ in 0..n {
        let last = x[x.len() - 1];
        x.push(last + rng.random_range(-0.3..0.3) - 0.1 * last);
    }
    let data = Dataset::new(x, rng.random_range(0.01..0.1)).unwrap();
    let (lo, hi) = data.min_max();
    let xm: Vec<f64> = (0..m)
        .map(|k| if m == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * (k as f64 + rng.random_range(0.0..0.5)) / m as f64 })
        .collect();
    let inv_sq = |rng: &mut ChaCha8Rng| 1.0 / rng.random_range(0.3f64..1.0).powi(2);
    let af = rng.random_range(0.5..3.0);
    let as_ = rng.random_range(0.2..1.0);
    let kf = KernelSpec::new(KernelFamily::SeConst, vec![rng.random_range(0.3..1.0) * af, inv_sq(rng)], af, 1e-3 * af).unwrap();
    let ks = if rng.random_bool(0.5) {
        KernelSpec::new(KernelFamily::SeConst, vec![rng.random_range(0.3..1.0) * as_, inv_sq(rng)], as_, 1e-3 * as_).unwrap()
    } else {
        KernelSpec::new(KernelFamily::RationalQuadratic, vec![rng.random_range(0.5..3.0), inv_sq(rng)], as_, 1e-3 * as_).unwrap()
    };
    let v = rng.random_range(-1.0..1.0);
    let mut state = SgpState::from_prior(xm, kf, ks, v).unwrap();
    state.mu_f = DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0));
    state.f_cov = random_pd(rng, m, 0.1);
    state.mu_s = DVector::from_fn(m, |_, _| v + rng.random_range(-0.5..0.5));
    state.s_cov = random_pd(rng, m, 0.05);
    (data, state)
}

/// Projection of the GP at `inputs` onto its values at `xm`: rows `k(x_i, x_m)K⁻¹` and
/// conditional variances `k(x_i, x_i) − k(x_i, x_m)K⁻¹k(x_m, x_i)`.
fn conditional(spec: &KernelSpec, xm: &[f64], inputs: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let k = cov_matrix(spec, xm, xm, true).cholesky().expect("inducing covariance is PD");
    let cross = DMatrix::from_fn(xm.len(), inputs.len(), |j, i| spec.eval(xm[j], inputs[i]));
    let proj = k.solve(&cross).transpose();
    let var = DVector::from_fn(inputs.len(), |i, _| {
        let explained: f64 = (0..xm.len()).map(|j| proj[(i, j)] * cross[(j, i)]).sum();
        (spec.eval(inputs[i], inputs[i]) - explained).max(0.0)
    });
    (proj, var)
}

struct MonteCarlo {
    zeta: Vec<(f64, f64)>,
    psi: Vec<(f64, f64)>,
    zeta_total: (f64, f64),
    psi_total: (f64, f64),
}

/// Mean and standard error of `exp(−s(x_i))` and `(Δx_i − Δt·f(x_i))²`,
/// drawing the inducing values from the variational distributions and the
/// function values from the GP conditionals.
fn monte_carlo(data: &Dataset, state: &SgpState, draws: usize, rng: &mut ChaCha8Rng) -> MonteCarlo {
    let n = data.n();
    let m = state.m();
    let (a, p) = conditional(&state.kernel_f, &state.pseudo_inputs, data.inputs());
    let (b, q) = conditional(&state.kernel_s, &state.pseudo_inputs, data.inputs());
    let lf = state.f_cov.clone().cholesky().unwrap().l();
    let ls = state.s_cov.clone().cholesky().unwrap().l();
    let (sp, sq) = (p.map(f64::sqrt), q.map(f64::sqrt));
    let dt = data.dt();
    let dx = data.increments();
    let mut acc = vec![[0.0f64; 4]; n];
    let mut totals = [0.0f64; 4];
    let mut z = DVector::zeros(m);
    for _ in 0..draws {
        z.iter_mut().for_each(|v| *v = normal(rng));
        let fm = &state.mu_f + &lf * &z;
        z.iter_mut().for_each(|v| *v = normal(rng));
        let rm = (&state.mu_s + &ls * &z).add_scalar(-state.v);
        let af = &a * &fm;
        let br = &b * &rm;
        let (mut zt, mut pt) = (0.0, 0.0);
        for i in 0..n {
            let s = state.v + br[i] + sq[i] * normal(rng);
            let f = af[i] + sp[i] * normal(rng);
            let zv = (-s).exp();
            let pv = (dx[i] - dt * f).powi(2);
            let c = &mut acc[i];
            c[0] += zv;
            c[1] += zv * zv;
            c[2] += pv;
            c[3] += pv * pv;
            zt += zv;
            pt += pv;
        }
        totals[0] += zt;
        totals[1] += zt * zt;
        totals[2] += pt;
        totals[3] += pt * pt;
    }
    let k = draws as f64;
    let stat = |s: f64, s2: f64| {
        let mean = s / k;
        (mean, ((s2 / k - mean * mean).max(0.0) / (k - 1.0)).sqrt())
    };
    MonteCarlo {
        zeta: acc.iter().map(|c| stat(c[0], c[1])).collect(),
        psi: acc.iter().map(|c| stat(c[2], c[3])).collect(),
        zeta_total: stat(totals[0], totals[1]),
        psi_total: stat(totals[2], totals[3]),
    }
}

fn central_gradient(f: &dyn Fn(&DVector<f64>) -> f64, at: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(at.len(), |i, _| {
        let mut p = at.clone();
        p[i] += h;
        let up = f(&p);
        p[i] -= 2.0 * h;
        (up - f(&p)) / (2.0 * h)
    })
}

fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn moments(x: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let c = |k: i32| x.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / n;
    let var = c(2);
    (mean, var * n / (n - 1.0), c(3) / var.powf(1.5), c(4) / (var * var) - 3.0)
}

fn desk_benchmark(model: ModelId, replicates: usize) -> Result<ErrorTable, Box<dyn Error>> {
    let config = BenchmarkConfig {
        models: vec![model],
        estimators: vec![EstimatorKind::Sgp, EstimatorKind::Binning, EstimatorKind::NadarayaWatson],
        replicates,
        n_samples: 10_001,
        dt: 0.001,
        seed: BENCHMARK_SEED,
        fit: FitConfig {
            m: 10,
            restarts: 3,
            ..FitConfig::default()
        },
        ..BenchmarkConfig::default()
    };
    let start = Instant::now();
    let table = benchmark(&config)?;
    println!("INFO  {model}: {replicates} replicates in {:.0}s", start.elapsed().as_secs_f64());
    for s in table.summaries() {
        println!(
            "INFO  {} {:8} mean drift {:.4}, mean diffusion {:.5} ({} ok, {} failed)",
            s.model, s.estimator, s.mean_drift, s.mean_diffusion, s.replicates, s.failed
        );
    }
    Ok(table)
}

fn sgp_means(table: &ErrorTable, model: ModelId, replicates: usize) -> Result<(f64, f64), String> {
    let s = table.summary(model, EstimatorKind::Sgp).ok_or("no sgp results")?;
    if s.replicates != replicates {
        return Err(format!("{} of {replicates} sgp replicates failed", s.failed));
    }
    Ok((s.mean_drift, s.mean_diffusion))
}

fn m1_reproduction(table: &ErrorTable) -> Outcome {
    let (drift, diffusion) = sgp_means(table, ModelId::M1, 10)?;
    let pass = (M1_DRIFT_BAND.0..=M1_DRIFT_BAND.1).contains(&drift) && diffusion <= M1_DIFFUSION_MAX;
    Ok((pass, format!("mean drift error {drift:.4} (band [0.25, 0.75]), mean diffusion error {diffusion:.5} (max 0.05)")))
}

fn m3_reproduction(table: &ErrorTable) -> Outcome {
    let (drift, diffusion) = sgp_means(table, ModelId::M3, 5)?;
    let pass = diffusion <= M3_DIFFUSION_MAX && drift <= M3_DRIFT_MAX;
    Ok((pass, format!("mean diffusion error {diffusion:.5} (max 0.02), mean drift error {drift:.4} (max 0.25)")))
}

fn ordering(table: &ErrorTable) -> Outcome {
    let (wins, paired) = table.wins(ModelId::M1, EstimatorKind::Sgp, EstimatorKind::Binning, CoefficientKind::Drift);
    Ok((wins >= MIN_WINS_OVER_BINNING, format!("sgp drift error below binning in {wins} of {paired} replicates (need 7)")))
}

fn monotone_traces(tables: &[&ErrorTable]) -> Outcome {
    let mut fits = 0;
    let mut pairs = 0;
    let mut worst = 0.0f64;
    let mut violations = 0;
    for t in tables {
        for ft in &t.fit_traces {
            for trace in &ft.traces {
                fits += 1;
                for w in trace.windows(2) {
                    pairs += 1;
                    let drop = (w[0] - w[1]) / w[0].abs().max(f64::MIN_POSITIVE);
                    worst = worst.max(drop);
                    if w[1] < w[0] - TRACE_REL_TOL * w[0].abs() {
                        violations += 1;
                    }
                }
            }
        }
    }
    Ok((
        violations == 0 && fits > 0,
        format!("{fits} restart traces, {pairs} consecutive pairs, {violations} violations, largest relative drop {worst:.2e}"),
    ))
}

fn zeta_psi_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(501);
    let mut worst_total = 0.0f64;
    let mut worst_point = 0.0f64;
    let mut points = 0;
    for _ in 0..20 {
        let n = rng.random_range(10..=50);
        let m = rng.random_range(1..=5);
        let (data, state) = random_problem(&mut rng, n, m);
        let proj = build_projections(&data, &state)?;
        let (zeta, clamps) = compute_zeta(&proj, &state);
        let psi = compute_psi(&data, &proj, &state);
        if clamps > 0 {
            return Ok((false, "unexpected exponent clamp".into()));
        }
        let mc = monte_carlo(&data, &state, MC_DRAWS, &mut rng);
        let z = |closed: f64, (mean, se): (f64, f64)| (closed - mean).abs() / se;
        worst_total = worst_total.max(z(zeta.sum(), mc.zeta_total)).max(z(psi.sum(), mc.psi_total));
        for i in 0..n {
            worst_point = worst_point.max(z(zeta[i], mc.zeta[i])).max(z(psi[i], mc.psi[i]));
            points += 1;
        }
    }
    let mc_ok = worst_total <= MC_SE_MULTIPLE && worst_point <= MC_POINTWISE_SE_MULTIPLE;

    let mut worst_grad = 0.0f64;
    let mut worst_hess = 0.0f64;
    for _ in 0..10 {
        let n = rng.random_range(10..=50);
        let m = rng.random_range(1..=5);
        let (data, state) = random_problem(&mut rng, n, m);
        let proj = build_projections(&data, &state)?;
        let psi = compute_psi(&data, &proj, &state);
        let obj = DiffusionObjective::new(&data, &proj, state.v, &psi)?;
        let s0 = DVector::from_fn(m, |i, _| state.mu_s[i] + 0.3 * normal(&mut rng));
        let e = obj.eval(&s0)?;
        let value = |s: &DVector<f64>| obj.eval(s).unwrap().value;
        worst_grad = worst_grad.max(rel_err(&e.gradient, &central_gradient(&value, &s0, 1e-5)));
        let h = obj.hessian(&e);
        let mut fd = DMatrix::zeros(m, m);
        for j in 0..m {
            let grad_j = |s: &DVector<f64>| obj.eval(s).unwrap().gradient[j];
            fd.set_row(j, &central_gradient(&grad_j, &s0, 1e-5).transpose());
        }
        worst_hess = worst_hess.max((&h - &fd).norm() / fd.norm());
    }
    let fd_ok = worst_grad <= GRADIENT_REL_TOL && worst_hess <= HESSIAN_REL_TOL;
    Ok((
        mc_ok && fd_ok,
        format!(
            "20 states, {points} points: worst total {worst_total:.2} SE (max 3), worst point {worst_point:.2} SE (max 4.5); \
             10 states: gradient rel err {worst_grad:.1e} (max 1e-5), Hessian rel err {worst_hess:.1e} (max 1e-4)"
        ),
    ))
}

fn drift_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(601);
    let mut worst = 0.0f64;
    let mut worst_stationarity = 0.0f64;
    for _ in 0..10 {
        let n = rng.random_range(10..=50);
        let m = rng.random_range(1..=5);
        let (data, state) = random_problem(&mut rng, n, m);
        let zeta = DVector::from_fn(n, |_, _| rng.random_range(0.1..10.0));
        let proj = build_projections(&data, &state)?;
        let (mu, cov) = update_drift(&data, &proj, &zeta)?;

        // log q(f_m) up to a constant: prior term plus the ζ-weighted expected data fit.
        let (a, p) = conditional(&state.kernel_f, &state.pseudo_inputs, data.inputs());
        let k = cov_matrix(&state.kernel_f, &state.pseudo_inputs, &state.pseudo_inputs, true).cholesky().unwrap();
        let dt = data.dt();
        let dx = data.increments().to_vec();
        let log_density = |fm: &DVector<f64>| {
            let af = &a * fm;
            let fit: f64 = (0..n).map(|i| zeta[i] * ((dx[i] - dt * af[i]).powi(2) + dt * dt * p[i])).sum();
            -0.5 * fm.dot(&k.solve(fm)) - fit / (2.0 * dt)
        };
        // Exact Newton step for the quadratic: central differences with unit step are exact.
        let origin = DVector::zeros(m);
        let g0 = central_gradient(&log_density, &origin, 1.0);
        let mut hess = DMatrix::zeros(m, m);
        for j in 0..m {
            let grad_j = |f: &DVector<f64>| {
                let mut e = DVector::zeros(m);
                e[j] = 1.0;
                (log_density(&(f + &e)) - log_density(&(f - &e))) / 2.0
            };
            hess.set_row(j, &central_gradient(&grad_j, &origin, 1.0).transpose());
        }
        let oracle_cov = (-&hess).try_inverse().ok_or("singular curvature")?;
        let mode = &oracle_cov * &g0;
        let scaled = |x: f64, y: f64| (x - y).abs() / y.abs().max(1.0);
        for i in 0..m {
            worst = worst.max(scaled(mu[i], mode[i]));
            for j in 0..m {
                worst = worst.max(scaled(cov[(i, j)], oracle_cov[(i, j)]));
            }
        }
        let g_mode = central_gradient(&log_density, &mu, 1.0);
        worst_stationarity = worst_stationarity.max(g_mode.amax() / g0.amax().max(1.0));
    }
    Ok((
        worst <= DRIFT_ORACLE_TOL && worst_stationarity <= DRIFT_ORACLE_TOL,
        format!("10 instances: worst deviation {worst:.1e}, gradient at the update {worst_stationarity:.1e} (max 1e-6)"),
    ))
}

fn simulator_moments() -> Outcome {
    let cfg = SimConfig {
        n_samples: 1_000_000,
        dt: 0.01,
        x0: 3.0,
        seed: 701,
        burn_in: 10_000,
    };
    let (mean, var, _, _) = moments(&simulate_seeded(&builtin_model(ModelId::M1), &cfg)?.samples);
    let ou_ok = (mean - 3.0).abs() <= OU_MEAN_TOL && (var - 1.0).abs() <= OU_VAR_TOL;

    let short = SimConfig { dt: 0.001, ..cfg.clone() };
    let (mean_s, var_s, _, _) = moments(&simulate_seeded(&builtin_model(ModelId::M1), &short)?.samples);
    println!("INFO  OU at dt = 0.001 (horizon 1000, standard error ~0.045): mean {mean_s:.4}, variance {var_s:.4}");

    let bm = ModelSpec::new("brownian", |_| 0.0, |_| 1.0);
    let steps = SimConfig {
        n_samples: 1_000_001,
        dt: 0.01,
        x0: 0.0,
        seed: 702,
        burn_in: 0,
    };
    let path = simulate_seeded(&bm, &steps)?.samples;
    let z: Vec<f64> = path.windows(2).map(|w| (w[1] - w[0]) / steps.dt.sqrt()).collect();
    let (zm, zv, skew, kurt) = moments(&z);
    let bm_ok = zm.abs() <= 4.0 / (z.len() as f64).sqrt()
        && (zv - 1.0).abs() <= 0.05
        && skew.abs() <= SKEW_TOL
        && kurt.abs() <= EXCESS_KURTOSIS_TOL;
    Ok((
        ou_ok && bm_ok,
        format!(
            "OU (N = 1e6, dt = 0.01) mean {mean:.4}, variance {var:.4}; standardized increments mean {zm:.1e}, \
             variance {zv:.4}, skew {skew:.4}, excess kurtosis {kurt:.4}"
        ),
    ))
}

fn prediction_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(801);
    let mut worst_interp = 0.0f64;
    let mut worst_far = 0.0f64;
    for _ in 0..10 {
        let m = rng.random_range(2..=6);
        let spacing = rng.random_range(0.5..1.5);
        let xm: Vec<f64> = (0..m).map(|k| k as f64 * spacing + rng.random_range(-0.1..0.1)).collect();
        let l = spacing * rng.random_range(0.4..0.8);
        let af = rng.random_range(1.0..30.0);
        let as_ = rng.random_range(0.2..3.0);
        let kf = KernelSpec::new(KernelFamily::SeConst, vec![af, 1.0 / (l * l)], af, 0.0)?;
        let ks = KernelSpec::new(KernelFamily::SeConst, vec![as_, 1.0 / (l * l)], as_, 0.0)?;
        let v = rng.random_range(-2.0..2.0);
        let mut state = SgpState::from_prior(xm.clone(), kf, ks, v)?;
        state.mu_f = DVector::from_fn(m, |_, _| rng.random_range(-3.0..3.0));
        state.f_cov = random_pd(&mut rng, m, 0.2);
        state.mu_s = DVector::from_fn(m, |_, _| v + rng.random_range(-1.0..1.0));
        state.s_cov = random_pd(&mut rng, m, 0.1);

        let at_xm = predict(&state, &xm, 0.95)?;
        for i in 0..m {
            worst_interp = worst_interp.max((at_xm.drift_mean[i] - state.mu_f[i]).abs());
        }
        let far = [xm[0] - 1e3, xm[m - 1] + 1e3];
        let c = predict(&state, &far, 0.95)?;
        for i in 0..2 {
            worst_far = worst_far
                .max(c.drift_mean[i].abs())
                .max((c.drift_var[i] - af).abs() / af)
                .max((c.s_mean[i] - v).abs())
                .max((c.s_var[i] - as_).abs() / as_);
        }
    }
    Ok((
        worst_interp <= PSEUDO_INPUT_TOL && worst_far <= FAR_FIELD_TOL,
        format!("10 states: drift mean at pseudo-inputs off by {worst_interp:.1e} (max 1e-10), far-field prior deviation {worst_far:.1e} (max 1e-6)"),
    ))
}

fn determinism() -> Outcome {
    let config = BenchmarkConfig {
        models: vec![ModelId::M1, ModelId::M4],
        replicates: 2,
        n_samples: 2_001,
        dt: 0.01,
        seed: 7,
        fit: FitConfig {
            m: 5,
            restarts: 2,
            max_em_iterations: 40,
            ..FitConfig::default()
        },
        ..BenchmarkConfig::default()
    };
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let mut buf = Vec::new();
        benchmark(&config)?.write_csv(&mut buf)?;
        outputs.push(buf);
    }
    let bench_ok = outputs[0] == outputs[1];

    let cfg = SimConfig {
        n_samples: 3_001,
        dt: 0.01,
        x0: 0.0,
        seed: 901,
        burn_in: 0,
    };
    let data = simulate_seeded(&builtin_model(ModelId::M2), &cfg)?.into_dataset()?;
    let fc = FitConfig {
        m: 6,
        seed: 42,
        max_em_iterations: 60,
        ..FitConfig::default()
    };
    let (a, b) = (fit(&data, &fc)?, fit(&data, &fc)?);
    let bits = |x: &[f64]| x.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let fit_ok = a.state == b.state
        && a.elbo.to_bits() == b.elbo.to_bits()
        && bits(&a.elbo_trace) == bits(&b.elbo_trace)
        && a.restart_traces == b.restart_traces;
    Ok((
        bench_ok && fit_ok,
        format!(
            "benchmark table ({} bytes) identical: {bench_ok}; fit state and traces bit-identical: {fit_ok}",
            outputs[0].len()
        ),
    ))
}

fn heuristic_and_initialization() -> Outcome {
    let m = heuristic_m(&[-1.0, 0.5, 3.0], 0.5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut details = vec![format!("heuristic m = {m} (expect 8)")];
    let mut pass = m == 8;
    // Increments with Var[Δx]/Δt = 2 exactly.
    let dt: f64 = 0.001;
    let raw: Vec<f64> = (0..10_000).map(|_| normal(&mut rng)).collect();
    let (mu, var, _, _) = moments(&raw);
    let mut x = vec![0.0];
    for r in &raw {
        x.push(x[x.len() - 1] + (r - mu) / var.sqrt() * (2.0 * dt).sqrt());
    }
    let data = Dataset::new(x, dt)?;
    let scale = 2.0;
    // The variance check is gated where 10⁶ draws resolve 2%; at a_g = 25 the
    // lognormal kurtosis puts the sampling error of the variance near 6%.
    for (a_g, gate_variance) in [(scale * scale * (0.1f64.exp() - 1.0), true), (scale * scale * (0.5f64.exp() - 1.0), true), (25.0, false)] {
        let (v, a_s) = init_diffusion_prior(&data, a_g)?;
        let draws: Vec<f64> = (0..MC_DRAWS).map(|_| (v + a_s.sqrt() * normal(&mut rng)).exp()).collect();
        let (mean, variance, _, _) = moments(&draws);
        let mean_err = (mean - scale).abs() / scale;
        let var_err = (variance - a_g).abs() / a_g;
        pass &= mean_err <= LOGNORMAL_REL_TOL && (!gate_variance || var_err <= LOGNORMAL_REL_TOL);
        details.push(format!(
            "a_g {a_g:.4}: A_s {a_s:.4}, mean err {:.2}%, variance err {:.2}%{}",
            100.0 * mean_err,
            100.0 * var_err,
            if gate_variance { "" } else { " (not gated)" }
        ));
    }
    Ok((pass, details.join("; ")))
}

fn table(t: &Result<ErrorTable, Box<dyn Error>>) -> Result<&ErrorTable, Box<dyn Error>> {
    t.as_ref().map_err(|e| e.to_string().into())
}

fn main() {
    let start = Instant::now();
    let mut failures = 0;
    let mut report = |id: usize, name: &str, outcome: Outcome| {
        let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        failures += usize::from(!pass);
        println!("{} [{id}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    };

    let m1 = desk_benchmark(ModelId::M1, 10);
    let m3 = desk_benchmark(ModelId::M3, 5);
    report(1, "M1 desk-scale errors", table(&m1).and_then(m1_reproduction));
    report(2, "M3 desk-scale errors", table(&m3).and_then(m3_reproduction));
    report(3, "M1 drift ordering against binning", table(&m1).and_then(ordering));
    report(4, "bound monotone along every fit", table(&m1).and_then(|a| table(&m3).and_then(|b| monotone_traces(&[a, b]))));
    report(5, "zeta/psi and diffusion-objective oracles", zeta_psi_oracles());
    report(6, "drift update oracle", drift_oracle());
    report(7, "simulator moments", simulator_moments());
    report(8, "prediction sanity", prediction_sanity());
    report(9, "determinism", determinism());
    report(10, "heuristic m and diffusion prior", heuristic_and_initialization());

    println!("INFO  total {:.0}s", start.elapsed().as_secs_f64());
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
