//! Seeded random probes.
//!
//! Every trial draws from its own ChaCha8 stream `(seed, trial)`, so results
//! do not depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::domain::{GridDomain, GridFunction};
use crate::scalar::Real;

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Gaussian vector normalized to unit Euclidean length.
pub fn random_unit_coefficients<T: Real>(len: usize, rng: &mut (impl Rng + ?Sized)) -> Vec<T> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| T::lit(x / norm)).collect();
        }
    }
}

/// Cellwise Gaussian noise normalized to unit discrete `L²` norm.
pub fn random_unit_function<T: Real>(domain: &GridDomain<T>, rng: &mut (impl Rng + ?Sized)) -> GridFunction<T> {
    let mut a = random_unit_coefficients::<T>(domain.cells(), rng);
    let scale = domain.cell_volume().sqrt().recip();
    a.iter_mut().for_each(|v| *v *= scale);
    GridFunction::new(*domain, a).expect("cell count")
}
