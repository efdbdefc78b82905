//! Simulate an Ornstein–Uhlenbeck path, fit the sparse model and print the
//! posterior drift and diffusion next to the true curves.
//!
//! ```text
//! cargo run --release --example fit_and_predict
//! ```

use std::time::Instant;

use sparse_sde::fit::{fit, FitConfig};
use sparse_sde::predict::{linspace, predict};
use sparse_sde::simulator::{builtin_model, simulate_seeded, ModelId, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = builtin_model(ModelId::M1);
    let sim = SimConfig {
        n_samples: 10_001,
        dt: 0.001,
        x0: ModelId::M1.default_x0(),
        seed: 7,
        burn_in: 0,
    };
    let data = simulate_seeded(&model, &sim)?.into_dataset()?;

    let start = Instant::now();
    let result = fit(&data, &FitConfig::default())?;
    println!(
        "fit: L = {:.3}, L' = {:.3}, {} iterations, converged = {}, restart {} ({:.1}s)",
        result.elbo,
        result.elbo_prime,
        result.iterations,
        result.converged,
        result.restart,
        start.elapsed().as_secs_f64()
    );
    for r in &result.restarts {
        println!("  restart {}: L' = {:?}, iterations {}, converged {}", r.index, r.elbo_prime, r.iterations, r.converged);
    }
    println!("  diagnostics: {:?}", result.diagnostics);
    println!("  drift kernel theta {:?}, diffusion kernel theta {:?}, v = {:.3}", result.state.kernel_f.theta, result.state.kernel_s.theta, result.state.v);

    let (lo, hi) = data.min_max();
    let curve = predict(&result.state, &linspace(lo, hi, 9), 0.95)?;
    println!("{:>7} {:>8} {:>8} {:>8} {:>8} {:>17}", "x", "f", "f_hat", "g", "g_hat", "95% band");
    for i in 0..curve.grid.len() {
        let x = curve.grid[i];
        println!(
            "{:7.3} {:8.3} {:8.3} {:8.3} {:8.3}  [{:6.3}, {:6.3}]",
            x,
            model.f(x),
            curve.drift_mean[i],
            model.g(x),
            curve.g_median[i],
            curve.g_lower[i],
            curve.g_upper[i]
        );
    }
    Ok(())
}
