//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a stream keyed by
//! `(seed, iteration, agent, role)`. The key is written verbatim into the
//! ChaCha seed, so two streams with different keys never share state and
//! results do not depend on the order in which agents are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct roles never collide for the same
/// `(seed, iteration, agent)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Role {
    CompressX = 0,
    CompressY = 1,
    Topology = 2,
    Weights = 3,
    Problem = 4,
    Certify = 5,
}

pub fn stream(seed: u64, iteration: u64, agent: u64, role: Role) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&iteration.to_le_bytes());
    key[16..24].copy_from_slice(&agent.to_le_bytes());
    key[24..32].copy_from_slice(&(role as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
