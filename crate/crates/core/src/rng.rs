//! Seeded random streams.
//!
//! Every stochastic component draws from its own ChaCha stream derived from
//! one run seed, so changing how much one component samples never shifts
//! the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers used by the simulators.
pub mod streams {
    pub const DRIFT: u64 = 1;
    pub const POLARIMETER: u64 = 2;
    pub const COUNTS_COMPENSATED: u64 = 3;
    pub const COUNTS_UNCOMPENSATED: u64 = 4;
    pub const BOOTSTRAP: u64 = 5;
    pub const CHANNEL: u64 = 6;
    /// Per-point streams start here (`POINT_BASE + index`).
    pub const POINT_BASE: u64 = 1 << 32;
}

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
