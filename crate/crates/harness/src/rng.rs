//! Per-trial random streams.
//!
//! Every trial owns a ChaCha stream selected by `(experiment, trial)` under the run
//! seed, so results do not depend on how trials are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Experiment;

const TRIAL_BITS: u32 = 48;

/// Stream for trial `trial` of `experiment`. `lane` separates independent uses
/// within one trial (e.g. codebook and channel).
pub fn trial_rng(seed: u64, experiment: Experiment, lane: u8, trial: u64) -> ChaCha8Rng {
    assert!(trial < 1 << TRIAL_BITS, "trial index out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let key = (experiment.stream_key() << 8) | u64::from(lane);
    rng.set_stream((key << TRIAL_BITS) | trial);
    rng
}

/// A 64-bit seed drawn from a trial stream, for seeding codebooks.
pub fn derived_seed(seed: u64, experiment: Experiment, trial: u64) -> u64 {
    use rand::Rng;
    trial_rng(seed, experiment, 0xff, trial).random()
}
