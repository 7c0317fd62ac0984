use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::params::{glorot, Bound, ParamId, ParamStore};
use crate::tensor::{Tape, Var};

#[derive(Clone, Debug)]
pub struct HeadParams {
    pub query: ParamId,
    pub key: ParamId,
    pub value: ParamId,
}

/// Multi-head self-attention over `L×model_dim` inputs.
///
/// Each head projects to `head_dim = model_dim / heads`; head outputs are
/// concatenated and mapped back through a `model_dim×model_dim` output
/// projection.
#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub model_dim: usize,
    pub head_dim: usize,
    pub heads: Vec<HeadParams>,
    pub output: ParamId,
}

impl MultiHeadAttention {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        model_dim: usize,
        head_count: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if head_count == 0 || !model_dim.is_multiple_of(head_count) {
            return Err(Error::Config(format!(
                "head count {head_count} must divide the attention width {model_dim}"
            )));
        }
        let head_dim = model_dim / head_count;
        let mut heads = Vec::with_capacity(head_count);
        for i in 0..head_count {
            heads.push(HeadParams {
                query: store.add(format!("{prefix}.head{i}.query"), glorot(rng, model_dim, head_dim))?,
                key: store.add(format!("{prefix}.head{i}.key"), glorot(rng, model_dim, head_dim))?,
                value: store.add(format!("{prefix}.head{i}.value"), glorot(rng, model_dim, head_dim))?,
            });
        }
        let output = store.add(format!("{prefix}.output"), glorot(rng, model_dim, model_dim))?;
        Ok(MultiHeadAttention {
            model_dim,
            head_dim,
            heads,
            output,
        })
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var, key_mask: &[bool]) -> Result<Var> {
        Ok(self.forward_traced(tape, bound, x, key_mask)?.0)
    }

    /// Forward pass that also returns each head's `L×L` attention weights.
    ///
    /// Keys with `key_mask[j] == false` get exactly zero weight.
    pub fn forward_traced(&self, tape: &mut Tape, bound: &Bound, x: Var, key_mask: &[bool]) -> Result<(Var, Vec<Var>)> {
        let shape = tape.shape(x).to_vec();
        match shape.as_slice() {
            [l, d] if *d == self.model_dim && *l == key_mask.len() => {}
            _ => {
                return Err(Error::dim(
                    "multi_head_attention",
                    &shape,
                    &[key_mask.len(), self.model_dim],
                ))
            }
        }
        let scale = 1.0 / (self.head_dim as f64).sqrt();
        let mut outputs = Vec::with_capacity(self.heads.len());
        let mut weights = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let q = tape.matmul(x, bound[head.query])?;
            let k = tape.matmul(x, bound[head.key])?;
            let v = tape.matmul(x, bound[head.value])?;
            let kt = tape.transpose(k)?;
            let scores = tape.matmul(q, kt)?;
            let scores = tape.scale(scores, scale);
            let attn = tape.masked_softmax(scores, key_mask)?;
            outputs.push(tape.matmul(attn, v)?);
            weights.push(attn);
        }
        let joined = if outputs.len() == 1 {
            outputs[0]
        } else {
            tape.concat(&outputs, 1)?
        };
        Ok((tape.matmul(joined, bound[self.output])?, weights))
    }
}
