use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::params::{glorot, Bound, ParamId, ParamStore};
use crate::tensor::{Tape, Tensor, Var};

/// Position-wise `max(0, X·W₁ + b₁)·W₂ + b₂` with square `dim×dim` weights.
#[derive(Clone, Debug)]
pub struct FeedForward {
    pub dim: usize,
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl FeedForward {
    pub fn new(store: &mut ParamStore, prefix: &str, dim: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(FeedForward {
            dim,
            w1: store.add(format!("{prefix}.w1"), glorot(rng, dim, dim))?,
            b1: store.add(format!("{prefix}.b1"), Tensor::zeros(&[dim]))?,
            w2: store.add(format!("{prefix}.w2"), glorot(rng, dim, dim))?,
            b2: store.add(format!("{prefix}.b2"), Tensor::zeros(&[dim]))?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<Var> {
        let hidden = tape.matmul(x, bound[self.w1])?;
        let hidden = tape.add(hidden, bound[self.b1])?;
        let hidden = tape.relu(hidden);
        let out = tape.matmul(hidden, bound[self.w2])?;
        tape.add(out, bound[self.b2])
    }
}
