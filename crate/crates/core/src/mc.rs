//! Seeded, thread-count independent Monte Carlo plumbing.
//!
//! Samples are produced in fixed-size chunks. Chunk `k` draws from the ChaCha8
//! stream `k` of the run seed, and chunks are reassembled in order, so results
//! are bit-identical for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Samples per RNG stream.
pub const CHUNK: usize = 1024;

pub type McRng = ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> McRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Independent seed for a named sub-computation (SplitMix64 finalizer).
pub fn subseed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draw `n` samples in parallel; `f` receives the chunk RNG.
pub fn par_samples<T, F>(n: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut McRng) -> Result<T> + Sync,
{
    let chunks: Vec<Result<Vec<T>>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k as u64);
            let len = CHUNK.min(n - k * CHUNK);
            (0..len).map(|_| f(&mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for chunk in chunks {
        out.extend(chunk?);
    }
    Ok(out)
}

/// Map `items` in parallel; item `i` shares the RNG of chunk `i / CHUNK`.
pub fn par_map<S, T, F>(items: &[S], seed: u64, f: F) -> Result<Vec<T>>
where
    S: Sync,
    T: Send,
    F: Fn(&S, &mut McRng) -> Result<T> + Sync,
{
    let chunks: Vec<Result<Vec<T>>> = items
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(k, chunk)| {
            let mut rng = stream(seed, k as u64);
            chunk.iter().map(|x| f(x, &mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(items.len());
    for chunk in chunks {
        out.extend(chunk?);
    }
    Ok(out)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            se: 0.0,
            n: 0,
        }
    }

    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / ((n - 1) as f64 * n as f64)).sqrt()
        } else {
            f64::NAN
        };
        Self { mean, se, n }
    }

    /// `|mean - target| / se`.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.se
        }
    }

    pub fn within(&self, target: f64, k: f64) -> bool {
        self.z_score(target) <= k
    }

    /// z-score of the difference of two independent estimates.
    pub fn z_score_against(&self, other: &Estimate) -> f64 {
        let d = (self.mean - other.mean).abs();
        if d == 0.0 {
            0.0
        } else {
            d / (self.se * self.se + other.se * other.se).sqrt()
        }
    }
}
