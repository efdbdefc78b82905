//! The initialization helpers: heuristic number of pseudo-inputs, quantile
//! placement with jitter, and the lognormal diffusion prior.
//!
//! ```text
//! cargo run --example initialization
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparse_sde::fit::{heuristic_m, init_diffusion_prior, init_pseudo_inputs};
use sparse_sde::simulator::{builtin_model, simulate_seeded, ModelId, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("range 4, l = 0.5 -> m = {}", heuristic_m(&[-2.0, 0.0, 2.0], 0.5)?);

    let cfg = SimConfig {
        n_samples: 20_001,
        dt: 0.001,
        x0: ModelId::M1.default_x0(),
        seed: 4,
        burn_in: 0,
    };
    let data = simulate_seeded(&builtin_model(ModelId::M1), &cfg)?.into_dataset()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for noise in [0.0, 0.05] {
        let xm = init_pseudo_inputs(data.inputs(), 6, noise, &mut rng)?;
        let shown: Vec<String> = xm.iter().map(|x| format!("{x:.3}")).collect();
        println!("pseudo-inputs (noise {noise}): [{}]", shown.join(", "));
    }
    let (v, a_s) = init_diffusion_prior(&data, 25.0)?;
    let mean_g = (v + a_s / 2.0).exp();
    let var_g = (a_s.exp() - 1.0) * (2.0 * v + a_s).exp();
    println!("diffusion prior: v = {v:.4}, A_s = {a_s:.4}; E[g] = {mean_g:.4}, Var[g] = {var_g:.2}");
    Ok(())
}
