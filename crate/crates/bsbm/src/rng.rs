//! Reproducible random number streams.
//!
//! Every randomized operation in this crate draws from an [`RngStream`]: a
//! master seed plus a `(major, minor)` stream id. In the experiment runner the
//! id is `(grid index, replication index)`, which makes parallel execution
//! replay-identical to serial execution. Distinct inputs produce statistically
//! independent ChaCha streams; identical inputs reproduce identical sequences
//! bit for bit.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A handle for one deterministic random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    master_seed: u64,
    stream: (u64, u64),
}

impl RngStream {
    pub fn new(master_seed: u64, stream: (u64, u64)) -> Self {
        Self {
            master_seed,
            stream,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> (u64, u64) {
        self.stream
    }

    /// Derives an independent substream, e.g. one per estimator within a
    /// replication. Forking with distinct tags never collides with the parent
    /// stream because the tag is folded into the key through a bijective mix.
    pub fn fork(&self, tag: u64) -> Self {
        Self {
            master_seed: splitmix64(self.master_seed ^ splitmix64(tag ^ FORK_SALT)),
            stream: self.stream,
        }
    }

    /// Instantiates the generator for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let words = [
            splitmix64(self.master_seed ^ KEY_SALT),
            splitmix64(self.stream.0 ^ 0x243f_6a88_85a3_08d3),
            splitmix64(self.stream.1 ^ 0x1319_8a2e_0370_7344),
            splitmix64(
                self.master_seed
                    .wrapping_add(self.stream.0 ^ self.stream.1.rotate_left(32)),
            ),
        ];
        for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

const FORK_SALT: u64 = 0xa076_1d64_78bd_642f;
const KEY_SALT: u64 = 0xe703_7ed1_a0b4_28db;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn draw(stream: RngStream, n: usize) -> Vec<u64> {
        let mut rng = stream.rng();
        (0..n).map(|_| rng.random()).collect()
    }

    #[test]
    fn identical_inputs_reproduce_identical_sequences() {
        let a = draw(RngStream::new(7, (3, 11)), 64);
        let b = draw(RngStream::new(7, (3, 11)), 64);
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_ids_give_distinct_sequences() {
        let base = draw(RngStream::new(7, (3, 11)), 64);
        for other in [
            RngStream::new(8, (3, 11)),
            RngStream::new(7, (4, 11)),
            RngStream::new(7, (3, 12)),
            RngStream::new(7, (11, 3)),
        ] {
            assert_ne!(base, draw(other, 64));
        }
    }

    #[test]
    fn fork_is_deterministic_and_distinct() {
        let s = RngStream::new(42, (0, 0));
        assert_eq!(s.fork(1), s.fork(1));
        assert_ne!(draw(s.fork(1), 16), draw(s.fork(2), 16));
        assert_ne!(draw(s.fork(1), 16), draw(s, 16));
    }
}
