use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bapc_core::models::ar2::fit_ar2_robust_params;
use bapc_core::series::TimeSeries;

const PHI1: f64 = 1.6;
const PHI2: f64 = -0.9;

/// AR(2) data with small uniform innovations and one large innovation at `spike`.
fn noisy_ar2(n: usize, spike: usize, size: f64, seed: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = vec![1.0, 1.2];
    for t in 3..=n {
        let shock = if t == spike { size } else { rng.gen_range(-0.01..0.01) };
        y.push(PHI1 * y[t - 2] + PHI2 * y[t - 3] + shock);
    }
    TimeSeries::new(y).unwrap()
}

#[test]
fn innovation_spike_is_removed() {
    for seed in 0..5 {
        let y = noisy_ar2(120, 60, 3.0, seed);
        let robust = fit_ar2_robust_params(&y, 3.0, 10, true).unwrap();
        let plain = fit_ar2_robust_params(&y, 3.0, 10, false).unwrap();
        assert!(robust.removed.contains(&60), "seed {seed}: removed {:?}", robust.removed);
        assert!(plain.removed.is_empty());
        let err = |p: &bapc_core::models::Ar2Params| (p.phi1 - PHI1).abs() + (p.phi2 - PHI2).abs();
        assert!(err(&robust.params) < err(&plain.params), "seed {seed}");
        assert!(err(&robust.params) < 5e-3, "seed {seed}: {:?}", robust.params);
    }
}

#[test]
fn clean_noise_keeps_most_rows() {
    let y = noisy_ar2(200, 0, 0.0, 9);
    let fit = fit_ar2_robust_params(&y, 3.0, 10, true).unwrap();
    assert!(fit.removed.len() <= 4, "{:?}", fit.removed);
    assert!(fit.converged);
}
