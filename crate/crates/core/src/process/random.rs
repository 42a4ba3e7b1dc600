use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

/// What a variate is used for. Each purpose reads its own ChaCha stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// `V_n^u`, the uniform compared against the draw probabilities.
    Draw = 0,
    /// Bernoulli(p) shared/solo indicator of an annealed environment.
    Environment = 1,
}

/// Counter-style random source.
///
/// The variate consumed for decision `(purpose, n, u)` is a pure function of
/// `(seed, grid, replication, purpose, n, u)`. Nothing about call order,
/// snapshots or thread scheduling can shift it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomSource {
    pub seed: u64,
    /// Grid-point index of a campaign; 0 for standalone runs.
    pub grid: u64,
    pub replication: u64,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource {
            seed,
            grid: 0,
            replication: 0,
        }
    }

    pub fn with_key(seed: u64, grid: u64, replication: u64) -> Self {
        RandomSource {
            seed,
            grid,
            replication,
        }
    }

    fn key_bytes(&self) -> [u8; 32] {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.grid.to_le_bytes());
        key[16..24].copy_from_slice(&self.replication.to_le_bytes());
        key
    }

    /// Reader positioned for `purpose`.
    pub fn reader(&self, purpose: Purpose) -> StreamReader {
        let mut rng = ChaCha8Rng::from_seed(self.key_bytes());
        rng.set_stream(purpose as u64);
        StreamReader { rng }
    }

    /// Random access to a single uniform in `[0, 1)`.
    pub fn uniform(&self, purpose: Purpose, n: u64, u: usize) -> f64 {
        let mut r = self.reader(purpose);
        r.seek(n, u);
        r.next_uniform()
    }
}

/// Sequential view over one purpose stream. After `seek(n, u)` successive
/// calls return the variates for `(n, u), (n, u + 1), ...`.
#[derive(Debug, Clone)]
pub struct StreamReader {
    rng: ChaCha8Rng,
}

impl StreamReader {
    pub fn seek(&mut self, n: u64, u: usize) {
        debug_assert!(n < 1 << 31 && (u as u64) < 1 << 32);
        let index = (u128::from(n) << 32) | u as u128;
        self.rng.set_word_pos(index * 2);
    }

    pub fn next_uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Fill `out` with the variates for `(n, 0..out.len())`.
    pub fn fill_row(&mut self, n: u64, out: &mut [f64]) {
        self.seek(n, 0);
        for v in out.iter_mut() {
            *v = self.next_uniform();
        }
    }
}
