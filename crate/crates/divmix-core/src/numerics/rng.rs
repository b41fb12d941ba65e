use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type DivRng = ChaCha20Rng;

/// Recorded in reports so runs can be matched to the generator.
pub const RNG_NAME: &str = "chacha20-stream";

pub fn rng(seed: u64) -> DivRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Independent stream `index` of the generator keyed by `seed`.
pub fn split(seed: u64, index: u64) -> DivRng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}
