use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent, reproducible random streams derived from one user seed.
///
/// Every stage that draws randomness owns a stream id so that changing how
/// much one stage consumes never perturbs another.
pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

pub(crate) mod streams {
    pub const CORPUS_GRADES: u64 = 1;
    pub const CORPUS_FEATURES: u64 = 2;
    pub const CORPUS_MISSING: u64 = 3;
    pub const CORPUS_DEDUCTIONS: u64 = 4;
    pub const SPLIT: u64 = 10;
    pub const PATTERN_CODER: u64 = 20;
    pub const FACTORIZE: u64 = 30;
    pub const MLP_INIT: u64 = 40;
    pub const MLP_SHUFFLE: u64 = 41;
    pub const SWEEP_DEMOTE: u64 = 50;
}
