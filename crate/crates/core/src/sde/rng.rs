//! Per-path random streams.
//!
//! Every path owns a ChaCha8 generator keyed by the master seed (expanded by
//! `SeedableRng::seed_from_u64`) with the path index as the ChaCha stream id.
//! ChaCha is counter-based, so streams are independent and a path's noise
//! depends on nothing but `(master_seed, path_index)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Source of standard normal increments.
pub trait NoiseSource {
    fn next_normal(&mut self) -> f64;
}

#[derive(Debug, Clone)]
pub struct PathRng(ChaCha8Rng);

impl PathRng {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(path_index);
        Self(rng)
    }
}

impl NoiseSource for PathRng {
    #[inline]
    fn next_normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }
}

/// Replays a fixed sequence, then zeros. For tests and hand-built paths.
#[derive(Debug, Clone)]
pub struct SequenceNoise {
    values: Vec<f64>,
    pos: usize,
}

impl SequenceNoise {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, pos: 0 }
    }

    pub fn zeros() -> Self {
        Self::new(Vec::new())
    }
}

impl NoiseSource for SequenceNoise {
    fn next_normal(&mut self) -> f64 {
        let v = self.values.get(self.pos).copied().unwrap_or(0.0);
        self.pos += 1;
        v
    }
}
