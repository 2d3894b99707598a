//! Hierarchical, reproducible random streams.
//!
//! A [`SeededStream`] is a root seed plus a path of integer indices such as
//! `(replicate, draw, purpose, area)`. The generator for a path is a ChaCha8
//! keyed by a SplitMix64 fold of the seed and every path element, so any
//! stream can be rebuilt in isolation. Parallel work gets the same numbers
//! no matter which worker picks it up.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags used as path elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Rho = 1,
    Sigma2 = 2,
    Beta = 3,
    AreaEffect = 4,
    Completion = 5,
    Subsample = 6,
    Covariates = 7,
    SampleSelection = 8,
    Replicate = 9,
    Responses = 10,
    Posterior = 11,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeededStream {
    seed: u64,
    path: Vec<u64>,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            path: Vec::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    pub fn child(&self, index: u64) -> Self {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push(index);
        Self {
            seed: self.seed,
            path,
        }
    }

    pub fn purpose(&self, purpose: Purpose) -> Self {
        self.child(purpose as u64)
    }

    /// Area ids may be negative; they are mapped bijectively onto `u64`.
    pub fn area(&self, area: i64) -> Self {
        self.child(area as u64)
    }

    pub fn rng(&self) -> StreamRng {
        // Fold length first so that a path is never a prefix-collision of another.
        let mut h = splitmix64(self.seed ^ splitmix64(self.path.len() as u64));
        for &p in &self.path {
            h = splitmix64(h ^ splitmix64(p.wrapping_add(GOLDEN)));
        }
        let mut key = [0u8; 32];
        for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
            h = splitmix64(h.wrapping_add(i as u64));
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}
