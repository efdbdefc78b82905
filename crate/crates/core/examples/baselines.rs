//! Binning and Nadaraya–Watson estimates of a double-well model, scored by
//! density-weighted integrated error.
//!
//! ```text
//! cargo run --release --example baselines
//! ```

use sparse_sde::baselines::{binning_estimator, nw_estimator, Bandwidth};
use sparse_sde::evaluation::{integrated_error, kde_grid, kde_with_bandwidth, silverman_bandwidth};
use sparse_sde::simulator::{builtin_model, simulate_seeded, ModelId, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = builtin_model(ModelId::M2);
    let cfg = SimConfig {
        n_samples: 50_001,
        dt: 0.01,
        x0: 0.0,
        seed: 5,
        burn_in: 0,
    };
    let data = simulate_seeded(&model, &cfg)?.into_dataset()?;

    let h = silverman_bandwidth(data.samples())?;
    let grid = kde_grid(data.samples(), h, 512);
    let density = kde_with_bandwidth(data.samples(), &grid, h);

    for bins in [10, 20, 40] {
        let b = binning_estimator(&data, bins)?;
        let f: Vec<f64> = grid.iter().map(|&x| b.f_at(x).unwrap_or(f64::NAN)).collect();
        let g: Vec<f64> = grid.iter().map(|&x| b.g_at(x).unwrap_or(f64::NAN)).collect();
        println!(
            "binning {bins:3} bins: drift {:.4}, diffusion {:.4}, empty bins {}",
            integrated_error(|x| model.f(x), &grid, &f, &density)?,
            integrated_error(|x| model.g(x), &grid, &g, &density)?,
            b.counts.iter().filter(|&&c| c == 0).count()
        );
    }
    for bw in [Bandwidth::Auto, Bandwidth::Fixed(0.05), Bandwidth::Fixed(0.5)] {
        let r = nw_estimator(&data, bw, &grid)?;
        let f: Vec<f64> = r.f_hat.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        let g: Vec<f64> = r.g_hat.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        println!(
            "kernel h = {:.3}: drift {:.4}, diffusion {:.4}",
            r.bandwidth,
            integrated_error(|x| model.f(x), &grid, &f, &density)?,
            integrated_error(|x| model.g(x), &grid, &g, &density)?
        );
    }
    Ok(())
}
