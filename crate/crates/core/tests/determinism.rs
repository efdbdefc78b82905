use sparse_sde::fit::{fit, FitConfig};
use sparse_sde::io::{parse_model, save_model, SavedModel};
use sparse_sde::predict::{linspace, predict_drift};
use sparse_sde::simulator::{builtin_model, simulate_seeded, ModelId, SimConfig};

fn data(seed: u64) -> sparse_sde::inference::Dataset {
    let cfg = SimConfig {
        n_samples: 800,
        dt: 0.01,
        x0: 0.0,
        seed,
        burn_in: 0,
    };
    simulate_seeded(&builtin_model(ModelId::M2), &cfg).unwrap().into_dataset().unwrap()
}

#[test]
fn fit_is_bit_reproducible() {
    let d = data(21);
    let config = FitConfig {
        m: 5,
        restarts: 3,
        max_em_iterations: 40,
        seed: 99,
        ..FitConfig::default()
    };
    let a = fit(&d, &config).unwrap();
    let b = fit(&d, &config).unwrap();
    assert_eq!(a.state, b.state);
    assert_eq!(a.elbo.to_bits(), b.elbo.to_bits());
    assert_eq!(a.restart_traces, b.restart_traces);

    let other = fit(&d, &FitConfig { seed: 100, ..config.clone() }).unwrap();
    assert_ne!(a.state.pseudo_inputs, other.state.pseudo_inputs);
}

#[test]
fn fitted_model_survives_the_file_round_trip() {
    let d = data(22);
    let result = fit(&d, &FitConfig { m: 4, restarts: 1, max_em_iterations: 30, ..FitConfig::default() }).unwrap();
    let saved = SavedModel::from_fit(&result, &d);
    let mut buf = Vec::new();
    save_model(&mut buf, &saved).unwrap();
    let loaded = parse_model(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(loaded, saved);
    assert_eq!(loaded.fingerprint, d.fingerprint());
    let grid = linspace(-1.5, 1.5, 31);
    assert_eq!(predict_drift(&saved.state, &grid).unwrap(), predict_drift(&loaded.state, &grid).unwrap());
}

#[test]
fn every_restart_trace_is_monotone() {
    let d = data(23);
    let result = fit(&d, &FitConfig { m: 6, restarts: 3, max_em_iterations: 60, ..FitConfig::default() }).unwrap();
    for trace in result.restart_traces.iter().flatten() {
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-6 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
    }
}
