use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent stream identifiers so that every consumer of the global seed
/// draws from its own sequence.
pub(crate) mod stream {
    pub const LHS: u64 = 0;
    pub const SPLIT: u64 = 1;
    pub const INIT: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const DROPOUT: u64 = 4;
    pub const STARTS: u64 = 5;
    pub const NOISE: u64 = 6;
    /// Replacement rounds use `REPLACEMENT + round`.
    pub const REPLACEMENT: u64 = 1 << 32;
}

pub(crate) fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
