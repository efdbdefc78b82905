//! Replicate benchmark of the estimators on built-in models.
//!
//! ```text
//! cargo run --release --example benchmark -- M1 10
//! ```

use std::time::Instant;

use sparse_sde::evaluation::{benchmark, BenchmarkConfig, EstimatorKind};
use sparse_sde::simulator::ModelId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let model: ModelId = args.first().map(String::as_str).unwrap_or("M1").parse()?;
    let replicates: usize = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(3);

    let config = BenchmarkConfig {
        models: vec![model],
        estimators: vec![EstimatorKind::Sgp, EstimatorKind::Binning, EstimatorKind::NadarayaWatson],
        replicates,
        seed: 2024,
        ..BenchmarkConfig::default()
    };
    let start = Instant::now();
    let table = benchmark(&config)?;
    for s in table.summaries() {
        println!(
            "{} {:8} drift {:.4}  diffusion {:.5}  ({} ok, {} failed)",
            s.model, s.estimator, s.mean_drift, s.mean_diffusion, s.replicates, s.failed
        );
    }
    for r in table.records.iter().filter(|r| r.failure.is_some()) {
        println!("replicate {} {}: {}", r.replicate, r.estimator, r.failure.as_deref().unwrap_or(""));
    }
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
