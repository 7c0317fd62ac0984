//! Bidirectional recurrent encoders (LSTM and GRU).
//!
//! Gate weights are stored fused: an LSTM direction keeps one `in×4h`
//! input matrix, one `h×4h` recurrent matrix and one `4h` bias, with gate
//! blocks in the order input, forget, output, candidate. A GRU direction uses
//! blocks reset, update, new plus a separate `h` bias on the recurrent part of
//! the new gate.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{uniform, Bound, ParamId, ParamStore};
use crate::tensor::{Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    #[default]
    Bilstm,
    Bigru,
}

impl EncoderKind {
    fn gates(self) -> usize {
        match self {
            EncoderKind::Bilstm => 4,
            EncoderKind::Bigru => 3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DirectionParams {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
    /// GRU only: bias inside the reset-gated recurrent term.
    pub bias_hidden_new: Option<ParamId>,
}

/// Parameters of a bidirectional recurrent encoder.
#[derive(Clone, Debug)]
pub struct BiRecurrent {
    pub kind: EncoderKind,
    pub in_dim: usize,
    pub hidden: usize,
    pub forward: DirectionParams,
    pub backward: DirectionParams,
}

impl BiRecurrent {
    /// Registers `{prefix}.fwd.*` and `{prefix}.bwd.*`.
    ///
    /// Weights are uniform in `±1/√h`; LSTM forget-gate biases start at 1,
    /// all other biases at 0.
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        kind: EncoderKind,
        in_dim: usize,
        hidden: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if hidden == 0 || in_dim == 0 {
            return Err(Error::Config("recurrent dims must be positive".into()));
        }
        let mut direction = |dir: &str, rng: &mut ChaCha8Rng| -> Result<DirectionParams> {
            let g = kind.gates() * hidden;
            let bound = 1.0 / (hidden as f64).sqrt();
            let w_input = store.add(format!("{prefix}.{dir}.w_input"), uniform(rng, &[in_dim, g], bound))?;
            let w_hidden = store.add(format!("{prefix}.{dir}.w_hidden"), uniform(rng, &[hidden, g], bound))?;
            let mut b = Tensor::zeros(&[g]);
            if kind == EncoderKind::Bilstm {
                b.data_mut()[hidden..2 * hidden].fill(1.0);
            }
            let bias = store.add(format!("{prefix}.{dir}.bias"), b)?;
            let bias_hidden_new = match kind {
                EncoderKind::Bigru => {
                    Some(store.add(format!("{prefix}.{dir}.bias_hidden_new"), Tensor::zeros(&[hidden]))?)
                }
                EncoderKind::Bilstm => None,
            };
            Ok(DirectionParams {
                w_input,
                w_hidden,
                bias,
                bias_hidden_new,
            })
        };
        let forward = direction("fwd", rng)?;
        let backward = direction("bwd", rng)?;
        Ok(BiRecurrent {
            kind,
            in_dim,
            hidden,
            forward,
            backward,
        })
    }

    pub fn out_dim(&self) -> usize {
        2 * self.hidden
    }

    /// Encodes an `L×in_dim` sequence into `L×2h`, forward and backward
    /// states concatenated per position.
    ///
    /// Positions with `mask[i] == false` are skipped by both directions and
    /// produce all-zero rows.
    pub fn encode(&self, tape: &mut Tape, bound: &Bound, x: Var, mask: &[bool]) -> Result<Var> {
        let shape = tape.shape(x).to_vec();
        let len = match shape.as_slice() {
            [l, d] if *d == self.in_dim => *l,
            _ => return Err(Error::dim("bilstm_encode", &shape, &[0, self.in_dim])),
        };
        if mask.len() != len {
            return Err(Error::dim("bilstm_encode", &shape, &[mask.len()]));
        }
        let order: Vec<usize> = (0..len).filter(|&i| mask[i]).collect();
        let reversed: Vec<usize> = order.iter().rev().copied().collect();
        let fwd = self.run(tape, bound, &self.forward, x, &order, len)?;
        let bwd = self.run(tape, bound, &self.backward, x, &reversed, len)?;
        tape.concat(&[fwd, bwd], 1)
    }

    /// Runs one direction over `positions` in the given order and returns the
    /// `L×h` matrix of hidden states (zero rows where not visited).
    fn run(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        p: &DirectionParams,
        x: Var,
        positions: &[usize],
        len: usize,
    ) -> Result<Var> {
        let h = self.hidden;
        let zero = tape.constant(Tensor::zeros(&[h]));
        let mut rows = vec![zero; len];
        if positions.is_empty() {
            return tape.stack(&rows);
        }
        let projected = tape.matmul(x, bound[p.w_input])?;
        let projected = tape.add(projected, bound[p.bias])?;
        let mut state = zero;
        let mut cell = zero;
        for (step, &pos) in positions.iter().enumerate() {
            let xw = tape.row(projected, pos)?;
            let (new_state, new_cell) = match self.kind {
                EncoderKind::Bilstm => {
                    let z = if step == 0 {
                        xw
                    } else {
                        let hw = tape.matmul(state, bound[p.w_hidden])?;
                        tape.add(xw, hw)?
                    };
                    let sig = tape.slice_cols(z, 0, 3 * h)?;
                    let sig = tape.sigmoid(sig);
                    let cand = tape.slice_cols(z, 3 * h, 4 * h)?;
                    let cand = tape.tanh(cand);
                    let input_gate = tape.slice_cols(sig, 0, h)?;
                    let forget_gate = tape.slice_cols(sig, h, 2 * h)?;
                    let output_gate = tape.slice_cols(sig, 2 * h, 3 * h)?;
                    let write = tape.mul(input_gate, cand)?;
                    let c = if step == 0 {
                        write
                    } else {
                        let kept = tape.mul(forget_gate, cell)?;
                        tape.add(kept, write)?
                    };
                    let squashed = tape.tanh(c);
                    (tape.mul(output_gate, squashed)?, c)
                }
                EncoderKind::Bigru => {
                    let hw = tape.matmul(state, bound[p.w_hidden])?;
                    let xrz = tape.slice_cols(xw, 0, 2 * h)?;
                    let hrz = tape.slice_cols(hw, 0, 2 * h)?;
                    let rz = tape.add(xrz, hrz)?;
                    let rz = tape.sigmoid(rz);
                    let reset = tape.slice_cols(rz, 0, h)?;
                    let update = tape.slice_cols(rz, h, 2 * h)?;
                    let xn = tape.slice_cols(xw, 2 * h, 3 * h)?;
                    let hn = tape.slice_cols(hw, 2 * h, 3 * h)?;
                    let b_hn = p
                        .bias_hidden_new
                        .ok_or_else(|| Error::Config("GRU direction missing new-gate bias".into()))?;
                    let hn = tape.add(hn, bound[b_hn])?;
                    let gated = tape.mul(reset, hn)?;
                    let pre = tape.add(xn, gated)?;
                    let candidate = tape.tanh(pre);
                    // h' = (1 − z) ⊙ n + z ⊙ h
                    let keep_new = tape.one_minus(update);
                    let a = tape.mul(keep_new, candidate)?;
                    let b = tape.mul(update, state)?;
                    (tape.add(a, b)?, cell)
                }
            };
            state = new_state;
            cell = new_cell;
            rows[pos] = state;
        }
        tape.stack(&rows)
    }
}
