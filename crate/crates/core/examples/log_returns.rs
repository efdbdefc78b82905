//! Preprocess a price series into log returns, write and re-read it, and fit
//! the returns with a coarse model.
//!
//! ```text
//! cargo run --release --example log_returns
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sparse_sde::fit::{fit, FitConfig};
use sparse_sde::io::{load_series, log_returns, write_series};
use sparse_sde::predict::{linspace, predict};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Geometric random walk whose volatility doubles halfway through.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = Normal::new(0.0, 1.0)?;
    let mut prices = vec![50.0];
    for k in 0..3000 {
        let vol: f64 = if k < 1500 { 0.01 } else { 0.02 };
        let last = prices[prices.len() - 1];
        prices.push(last * (vol * noise.sample(&mut rng)).exp());
    }
    let returns = log_returns(&prices)?;

    let dir = std::env::temp_dir().join("sparse-sde-log-returns");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("returns.csv");
    write_series(std::fs::File::create(&path)?, &returns, Some(1.0))?;
    let data = load_series(&path, None)?;
    println!("{} returns written to {}", data.n() + 1, path.display());

    let r = fit(&data, &FitConfig { m: 5, restarts: 2, ..FitConfig::default() })?;
    let (lo, hi) = data.min_max();
    let curve = predict(&r.state, &linspace(lo, hi, 5), 0.95)?;
    for i in 0..curve.grid.len() {
        println!("x = {:8.4}: f = {:8.5}, g = {:.6}", curve.grid[i], curve.drift_mean[i], curve.g_median[i]);
    }
    Ok(())
}
