//! Seeded random streams. Every consumer derives its generator from the run
//! seed plus a stream index, so no RNG state needs to be saved.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream for student initialization.
pub const STUDENT_INIT_STREAM: u64 = u64::MAX;
/// Stream for generator initialization.
pub const GENERATOR_INIT_STREAM: u64 = u64::MAX - 1;
/// Stream for latents of exported sample dumps.
pub const EXPORT_STREAM: u64 = u64::MAX - 2;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Latent sampling for distillation epoch `epoch`.
pub fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    stream_rng(seed, epoch as u64)
}
