//! Deterministic random streams.
//!
//! Every chain owns a [`ChainSeed`] derived from a base seed and a replica
//! index. Each random clock of the process reads from its own ChaCha stream,
//! so two chains that are meant to share a clock simply open the same stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named sub-streams of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Clock {
    Refresh,
    Bounce,
    Velocity,
    Coupling,
    Aux(u32),
}

impl Clock {
    fn id(self) -> u64 {
        match self {
            Clock::Refresh => 1,
            Clock::Bounce => 2,
            Clock::Velocity => 3,
            Clock::Coupling => 4,
            Clock::Aux(k) => 16 + k as u64,
        }
    }
}

/// 256-bit key identifying one chain (or one coupled pair).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChainSeed {
    key: [u8; 32],
    /// Base seed and index, kept for reporting.
    pub base: u64,
    pub index: u64,
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl ChainSeed {
    pub fn new(base: u64, index: u64) -> Self {
        let mut st = base ^ index.rotate_left(32).wrapping_mul(0xD6E8_FEB8_6659_FD93);
        let mut key = [0u8; 32];
        for chunk in key.chunks_mut(8) {
            chunk.copy_from_slice(&splitmix(&mut st).to_le_bytes());
        }
        ChainSeed { key, base, index }
    }

    /// Child seed, e.g. for an independent sub-experiment.
    pub fn child(&self, tag: u64) -> Self {
        let mut st = u64::from_le_bytes(self.key[..8].try_into().unwrap()) ^ tag.wrapping_mul(0xA24B_AED4_963E_E407);
        let mut key = self.key;
        for chunk in key.chunks_mut(8) {
            let w = u64::from_le_bytes((&*chunk).try_into().unwrap()) ^ splitmix(&mut st);
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        ChainSeed { key, base: self.base, index: self.index }
    }

    pub fn stream(&self, clock: Clock) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(clock.id());
        rng
    }
}

/// The three streams consumed by a single simulated chain.
#[derive(Debug, Clone)]
pub struct ChainStreams {
    pub refresh: ChaCha8Rng,
    pub bounce: ChaCha8Rng,
    pub velocity: ChaCha8Rng,
}

impl ChainStreams {
    pub fn new(seed: &ChainSeed) -> Self {
        ChainStreams {
            refresh: seed.stream(Clock::Refresh),
            bounce: seed.stream(Clock::Bounce),
            velocity: seed.stream(Clock::Velocity),
        }
    }
}
