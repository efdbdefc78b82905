//! Simulate every built-in model and print path statistics.
//!
//! ```text
//! cargo run --release --example simulate_models
//! ```

use sparse_sde::simulator::{builtin_model, simulate_seeded, ModelId, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:5} {:>9} {:>9} {:>9} {:>9} {:>8}", "model", "mean", "sd", "min", "max", "clipped");
    for id in ModelId::ALL {
        let cfg = SimConfig {
            n_samples: 100_001,
            dt: 0.001,
            x0: id.default_x0(),
            seed: 1,
            burn_in: 1000,
        };
        let sim = simulate_seeded(&builtin_model(id), &cfg)?;
        let n = sim.samples.len() as f64;
        let mean = sim.samples.iter().sum::<f64>() / n;
        let sd = (sim.samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let (lo, hi) = sim.samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        println!("{:5} {mean:9.4} {sd:9.4} {lo:9.4} {hi:9.4} {:8}", id.to_string(), sim.clip_count);
    }
    Ok(())
}
