//! Fit, save the model file, load it back and check the prediction is unchanged.
//!
//! ```text
//! cargo run --release --example persistence
//! ```

use sparse_sde::fit::{fit, FitConfig};
use sparse_sde::io::{load_model, save_model, write_curves, CurveTable, SavedModel};
use sparse_sde::predict::{linspace, predict};
use sparse_sde::simulator::{builtin_model, simulate_seeded, ModelId, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SimConfig {
        n_samples: 2_001,
        dt: 0.01,
        x0: 0.0,
        seed: 12,
        burn_in: 0,
    };
    let data = simulate_seeded(&builtin_model(ModelId::M6), &cfg)?.into_dataset()?;
    let result = fit(&data, &FitConfig { m: 6, restarts: 1, ..FitConfig::default() })?;

    let dir = std::env::temp_dir().join("sparse-sde-persistence");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("model.toml");
    let saved = SavedModel::from_fit(&result, &data);
    save_model(std::fs::File::create(&path)?, &saved)?;
    let loaded = load_model(&path)?;
    println!("saved {} ({} bytes); identical after reload: {}", path.display(), std::fs::metadata(&path)?.len(), loaded == saved);

    let grid = linspace(loaded.data_range[0], loaded.data_range[1], 50);
    let curve = predict(&loaded.state, &grid, 0.9)?;
    let curves = dir.join("curves.csv");
    write_curves(std::fs::File::create(&curves)?, &CurveTable::from(&curve))?;
    println!("curves written to {}", curves.display());
    Ok(())
}
