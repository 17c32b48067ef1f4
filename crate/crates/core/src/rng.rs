//! Named deterministic random streams split from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SOJOURN: u64 = 1;
pub const GREEN: u64 = 2;
pub const TEMPLATES: u64 = 3;
pub const EPISODES: u64 = 4;
pub const CORPUS: u64 = 5;
pub const ENCODER: u64 = 6;
pub const SYSTEM_LOGS: u64 = 7;
const POLICY_BASE: u64 = 1 << 16;

/// Stream `id` of the ChaCha8 generator seeded with `seed`.
///
/// Each stream has its own keystream position, so drawing from one never
/// shifts another.
pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn policy_stream(seed: u64, agent_slot: usize) -> ChaCha8Rng {
    stream(seed, POLICY_BASE + agent_slot as u64)
}
