use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed plus stream id. Each (seed, stream) pair yields its own reproducible
/// ChaCha8 sequence, so replications can be handed out to workers freely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream);
        r
    }

    pub fn split(&self, i: u64) -> RngStream {
        RngStream {
            seed: self.seed,
            stream: self.stream.wrapping_mul(1 << 20).wrapping_add(i),
        }
    }
}
