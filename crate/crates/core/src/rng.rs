//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 generator whose key is derived from the master
//! seed and a lane id (the particle index, or a reserved lane for the shared
//! Brownian path), and whose 64-bit stream id is the replicate index. Streams
//! are therefore independent of scheduling and thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Lane reserved for the common-noise Brownian path of a replicate.
pub const PATH_LANE: u64 = u64::MAX;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The generator for `(seed, replicate, lane)`.
pub fn stream(seed: u64, replicate: u64, lane: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let a = splitmix(seed);
    let b = splitmix(a ^ lane);
    let c = splitmix(b ^ 0x5eed);
    let e = splitmix(c);
    for (i, w) in [a, b, c, e].iter().enumerate() {
        key[8 * i..8 * i + 8].copy_from_slice(&w.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replicate);
    rng
}

/// Discrete Brownian path on `[0, 1]` with `steps` uniform increments.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub m: usize,
    pub steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub replicate: u64,
    /// Row-major `steps × m` increments `ΔW_k ~ N(0, dt I_m)`.
    pub increments: Vec<f64>,
}

impl BrownianPath {
    pub fn generate(m: usize, steps: usize, seed: u64, replicate: u64) -> Self {
        let dt = 1.0 / steps as f64;
        let sq = dt.sqrt();
        let mut rng = stream(seed, replicate, PATH_LANE);
        let increments = (0..steps * m)
            .map(|_| sq * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        BrownianPath {
            m,
            steps,
            dt,
            seed,
            replicate,
            increments,
        }
    }

    /// The path with all increments zero (used for deterministic skeletons).
    pub fn zero(m: usize, steps: usize) -> Self {
        BrownianPath {
            m,
            steps,
            dt: 1.0 / steps as f64,
            seed: 0,
            replicate: 0,
            increments: vec![0.0; m * steps],
        }
    }

    /// The same realisation on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Option<Self> {
        if factor == 0 || self.steps % factor != 0 {
            return None;
        }
        let steps = self.steps / factor;
        let mut inc = vec![0.0; steps * self.m];
        for k in 0..steps {
            for j in 0..factor {
                for l in 0..self.m {
                    inc[k * self.m + l] += self.increments[(k * factor + j) * self.m + l];
                }
            }
        }
        Some(BrownianPath {
            m: self.m,
            steps,
            dt: 1.0 / steps as f64,
            seed: self.seed,
            replicate: self.replicate,
            increments: inc,
        })
    }

    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.m..(k + 1) * self.m]
    }

    /// `W` at the grid time `k·dt`.
    pub fn value_at(&self, k: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.m];
        for j in 0..k {
            for l in 0..self.m {
                w[l] += self.increments[j * self.m + l];
            }
        }
        w
    }
}
