//! Deterministic randomness keyed by (seed, trial index).
//!
//! Every randomized routine in the crate derives its generator through
//! [`trial_rng`], so trial i of a run is reproducible regardless of how
//! trials are scheduled or how many of them run.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::space::{ConfigurationSpace, Field};

/// Generator for a single trial: base seed selects the key, the trial index
/// selects the stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Amplitudes used for random test densities: near-constant through strongly
/// peaked.
pub const DENSITY_AMPLITUDES: [f64; 3] = [0.5, 2.0, 5.0];

/// A field with i.i.d. uniform entries in [-amplitude, amplitude].
pub fn random_log_field(
    space: &ConfigurationSpace,
    amplitude: f64,
    rng: &mut impl Rng,
) -> Field {
    let values = (0..space.total_size())
        .map(|_| rng.random_range(-amplitude..=amplitude))
        .collect();
    Field::new(space.clone(), values).expect("uniform entries are finite")
}

/// A strictly positive field f = exp(g) with g uniform in [-amplitude, amplitude].
pub fn random_positive_field(
    space: &ConfigurationSpace,
    amplitude: f64,
    rng: &mut impl Rng,
) -> Field {
    random_log_field(space, amplitude, rng).map(f64::exp)
}
