//! Counter-addressed random streams.
//!
//! Each stochastic stage draws from its own ChaCha stream, and every draw is
//! positioned by a global index (pulse, cycle or photon). A run split into
//! pulse shards therefore replays the unsharded run draw for draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream selector for one stochastic stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Source,
    Demux,
    Detector(u32),
    Splitter(u32),
    DarkCounts(u32),
}

impl Domain {
    fn stream_id(self) -> u64 {
        match self {
            Domain::Source => 1,
            Domain::Demux => 2,
            Domain::Detector(id) => (3 << 32) | u64::from(id),
            Domain::Splitter(id) => (4 << 32) | u64::from(id),
            Domain::DarkCounts(id) => (5 << 32) | u64::from(id),
        }
    }
}

/// A ChaCha8 stream with random access in fixed-size blocks of 32-bit words.
#[derive(Debug, Clone)]
pub struct KeyedRng {
    rng: ChaCha8Rng,
    words_per_index: u128,
}

impl KeyedRng {
    pub fn new(seed: u64, domain: Domain, words_per_index: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(domain.stream_id());
        Self {
            rng,
            words_per_index: u128::from(words_per_index.max(1)),
        }
    }

    /// Positions the stream at the first word reserved for `index`.
    pub fn at(&mut self, index: u64) -> &mut ChaCha8Rng {
        self.rng.set_word_pos(u128::from(index) * self.words_per_index);
        &mut self.rng
    }

    /// Continue drawing from the current position.
    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}
