use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::params::{glorot, Bound, ParamId, ParamStore};
use crate::tensor::{Tape, Tensor, Var};

/// Two-class output layer: `softmax(x·W + b)`.
///
/// `W` is stored `feature_dim × class_count` (row-vector convention).
#[derive(Clone, Debug)]
pub struct DenseSoftmax {
    pub feature_dim: usize,
    pub class_count: usize,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl DenseSoftmax {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        feature_dim: usize,
        class_count: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if class_count != 2 {
            return Err(Error::Config(format!("class count must be 2, got {class_count}")));
        }
        Ok(DenseSoftmax {
            feature_dim,
            class_count,
            weight: store.add(format!("{prefix}.weight"), glorot(rng, feature_dim, class_count))?,
            bias: store.add(format!("{prefix}.bias"), Tensor::zeros(&[class_count]))?,
        })
    }

    /// Accepts a `[feature_dim]` vector or a `B×feature_dim` batch and returns
    /// probabilities over the last axis.
    pub fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<Var> {
        let logits = tape.matmul(x, bound[self.weight])?;
        let logits = tape.add(logits, bound[self.bias])?;
        let axis = tape.shape(logits).len() - 1;
        tape.softmax(logits, axis)
    }
}
