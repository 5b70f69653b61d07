//! Shared input builders for the kernel benchmarks.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

use netsis_core::model::{EpidemicState, ModelStep};

/// Random symmetric proximity-like step with row sums inside the
/// well-posedness budget for `h`.
pub fn random_step(n: usize, h: f64, seed: u64) -> (ModelStep, EpidemicState) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = 1.0;
        for j in (i + 1)..n {
            if rng.random::<f64>() < 4.0 / n as f64 {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
    }
    let max_row = (0..n)
        .map(|i| a.row(i).iter().sum::<f64>())
        .fold(0.0f64, f64::max);
    let beta = 0.9 / (h * max_row);
    let step = ModelStep::new(
        a,
        DVector::from_element(n, beta),
        DVector::from_fn(n, |_, _| rng.random::<f64>().min(1.0 / h)),
    )
    .unwrap();
    let x = EpidemicState::new(DVector::from_fn(n, |_, _| rng.random::<f64>()), 0).unwrap();
    (step, x)
}

/// Random matrix rescaled to the requested spectral radius.
pub fn random_stable_matrix(n: usize, rho: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0f64));
    let current = netsis_core::spectral::spectral_radius(&raw).unwrap();
    raw * (rho / current)
}
