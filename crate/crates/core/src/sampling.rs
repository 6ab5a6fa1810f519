//! Mini-batch partitions and the scaled block gradient.
//!
//! Block indices are 0-based: a partition with `r` blocks hands out
//! `0..r`, and component indices run over `0..N`.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::objectives::{FiniteSumObjective, ObjectiveError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("batch size {batch_size} is outside 1..={n_components}")]
    InvalidBatchSize {
        batch_size: usize,
        n_components: usize,
    },
    #[error("block index {0} out of range")]
    BlockOutOfRange(usize),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// Seeded, platform-independent random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
    seed: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Disjoint, covering split of `0..N` into `r` non-empty blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    n_components: usize,
    seed: u64,
}

impl Partition {
    /// Cuts a uniformly random permutation of `0..n_components` into
    /// `ceil(N / batch_size)` consecutive chunks; the last chunk holds the
    /// remainder.
    pub fn build(
        n_components: usize,
        batch_size: usize,
        rng: &mut RngStream,
    ) -> Result<Self, SamplingError> {
        if batch_size == 0 || batch_size > n_components {
            return Err(SamplingError::InvalidBatchSize {
                batch_size,
                n_components,
            });
        }
        let mut order: Vec<usize> = (0..n_components).collect();
        order.shuffle(rng.rng());
        let blocks = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
        Ok(Self {
            blocks,
            n_components,
            seed: rng.seed(),
        })
    }

    /// Partition from explicit blocks. Used by tests and callers that want a
    /// fixed layout; validity is checked.
    pub fn from_blocks(n_components: usize, blocks: Vec<Vec<usize>>) -> Option<Self> {
        let mut seen = vec![false; n_components];
        for block in &blocks {
            if block.is_empty() {
                return None;
            }
            for &j in block {
                if j >= n_components || std::mem::replace(&mut seen[j], true) {
                    return None;
                }
            }
        }
        if blocks.is_empty() || seen.iter().any(|s| !s) {
            return None;
        }
        Some(Self {
            blocks,
            n_components,
            seed: 0,
        })
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &[usize] {
        &self.blocks[i]
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw of a block index in `0..r`.
    pub fn sample_block(&self, rng: &mut RngStream) -> usize {
        // gen_range on integers rejects rather than reducing modulo r
        rng.rng().random_range(0..self.blocks.len())
    }

    /// `g^{(i)} = (r/N) Σ_{j ∈ block i} ∇f_j(x)`.
    pub fn stochastic_gradient<O: FiniteSumObjective + ?Sized>(
        &self,
        obj: &O,
        x: &DVector<f64>,
        i: usize,
    ) -> Result<DVector<f64>, SamplingError> {
        let block = self
            .blocks
            .get(i)
            .ok_or(SamplingError::BlockOutOfRange(i))?;
        let scale = self.blocks.len() as f64 / self.n_components as f64;
        let mut g = DVector::zeros(x.len());
        for &j in block {
            obj.add_component_gradient(j, x, 1.0, &mut g);
        }
        g *= scale;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(ObjectiveError::NonFiniteGradient.into());
        }
        Ok(g)
    }
}
