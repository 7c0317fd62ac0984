//! Gated adaptive interaction between pooled post and comment features.
//!
//! All vectors use the row convention `x·W`. With encoder width `2h`, the
//! pooled post and comment vectors are `4h` wide, every gate weight is
//! `4h×4h`, and the four interaction projections map `4h → 2h`.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::params::{glorot, Bound, ParamId, ParamStore};
use crate::tensor::{Tape, Tensor, Var};

/// Channel order used everywhere: post-word, post-emotion, comment-word,
/// comment-emotion.
pub const CHANNELS: [&str; 4] = ["post_word", "post_emotion", "comment_word", "comment_emotion"];

/// μ_f = σ(Xp·W_f1 + Xc·W_f2 + b_f); F = tanh((Xp⊙μ_f)·W_h1 + (Xc⊙(1−μ_f))·W_h2 + b_h)
#[derive(Clone, Debug)]
pub struct ConflictingGate {
    pub gate_post: ParamId,
    pub gate_comment: ParamId,
    pub gate_bias: ParamId,
    pub post: ParamId,
    pub comment: ParamId,
    pub bias: ParamId,
}

/// μ_r = σ(Xp·W_r1 + Xc·W_r2 + b_r); R = tanh((Xp⊙μ_r)·W_rp + (Xc⊙μ_r)·W_rc + b_rr)
#[derive(Clone, Debug)]
pub struct RefiningGate {
    pub gate_post: ParamId,
    pub gate_comment: ParamId,
    pub gate_bias: ParamId,
    pub post: ParamId,
    pub comment: ParamId,
    pub bias: ParamId,
}

/// `t = tanh(x·W + b)` for one channel.
#[derive(Clone, Debug)]
pub struct Projection {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Projection {
    fn new(store: &mut ParamStore, prefix: &str, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(Projection {
            weight: store.add(format!("{prefix}.weight"), glorot(rng, fan_in, fan_out))?,
            bias: store.add(format!("{prefix}.bias"), Tensor::zeros(&[fan_out]))?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<Var> {
        let z = tape.matmul(x, bound[self.weight])?;
        let z = tape.add(z, bound[self.bias])?;
        Ok(tape.tanh(z))
    }

    pub fn params(&self) -> [ParamId; 2] {
        [self.weight, self.bias]
    }
}

#[derive(Clone, Debug)]
pub struct GainParams {
    /// Pooled width `4h`.
    pub pooled_dim: usize,
    pub conflicting: ConflictingGate,
    pub refining: RefiningGate,
    /// `4h → 2h` projections of the adaptive features, one per channel.
    pub interaction: [Projection; 4],
    /// `8h → 2h` projections of a concatenated input, one per channel. Used
    /// when an ablation replaces GAIN or the adaptive mechanism with
    /// concatenation.
    pub concat_interaction: [Projection; 4],
}

impl GainParams {
    pub fn new(store: &mut ParamStore, prefix: &str, hidden: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let w = 4 * hidden;
        let out = 2 * hidden;
        let mut sq = |name: &str, rng: &mut ChaCha8Rng| store.add(format!("{prefix}.{name}"), glorot(rng, w, w));
        let conflicting_w = [
            sq("conflicting.gate_post", rng)?,
            sq("conflicting.gate_comment", rng)?,
            sq("conflicting.post", rng)?,
            sq("conflicting.comment", rng)?,
        ];
        let refining_w = [
            sq("refining.gate_post", rng)?,
            sq("refining.gate_comment", rng)?,
            sq("refining.post", rng)?,
            sq("refining.comment", rng)?,
        ];
        let conflicting = ConflictingGate {
            gate_post: conflicting_w[0],
            gate_comment: conflicting_w[1],
            gate_bias: store.add(format!("{prefix}.conflicting.gate_bias"), Tensor::zeros(&[w]))?,
            post: conflicting_w[2],
            comment: conflicting_w[3],
            bias: store.add(format!("{prefix}.conflicting.bias"), Tensor::zeros(&[w]))?,
        };
        let refining = RefiningGate {
            gate_post: refining_w[0],
            gate_comment: refining_w[1],
            gate_bias: store.add(format!("{prefix}.refining.gate_bias"), Tensor::zeros(&[w]))?,
            post: refining_w[2],
            comment: refining_w[3],
            bias: store.add(format!("{prefix}.refining.bias"), Tensor::zeros(&[w]))?,
        };
        let mut proj = |kind: &str, fan_in: usize, rng: &mut ChaCha8Rng| -> Result<[Projection; 4]> {
            let mk = |c: usize, store: &mut ParamStore, rng: &mut ChaCha8Rng| {
                Projection::new(store, &format!("{prefix}.{kind}.{}", CHANNELS[c]), fan_in, out, rng)
            };
            Ok([
                mk(0, store, rng)?,
                mk(1, store, rng)?,
                mk(2, store, rng)?,
                mk(3, store, rng)?,
            ])
        };
        let interaction = proj("interaction", w, rng)?;
        let concat_interaction = proj("concat_interaction", 2 * w, rng)?;
        Ok(GainParams {
            pooled_dim: w,
            conflicting,
            refining,
            interaction,
            concat_interaction,
        })
    }

    pub fn conflicting_params(&self) -> Vec<ParamId> {
        let c = &self.conflicting;
        vec![c.gate_post, c.gate_comment, c.gate_bias, c.post, c.comment, c.bias]
    }

    pub fn refining_params(&self) -> Vec<ParamId> {
        let r = &self.refining;
        vec![r.gate_post, r.gate_comment, r.gate_bias, r.post, r.comment, r.bias]
    }

    pub fn interaction_params(&self) -> Vec<ParamId> {
        self.interaction.iter().flat_map(Projection::params).collect()
    }

    pub fn concat_interaction_params(&self) -> Vec<ParamId> {
        self.concat_interaction.iter().flat_map(Projection::params).collect()
    }
}

/// Every intermediate of a full GAIN pass.
#[derive(Clone, Debug)]
pub struct GainOutput {
    pub conflict_gate: Var,
    pub refine_gate: Var,
    pub conflicting: Var,
    pub refined: Var,
    pub adaptive: Var,
    /// Interaction vectors in [`CHANNELS`] order.
    pub interaction: [Var; 4],
}

/// Per-channel max-pools of the four encoded sequences, concatenated into the
/// post vector `pool(pw) ⊕ pool(pe)` and comment vector `pool(cw) ⊕ pool(ce)`.
///
/// Returns `(post, comment, argmax per channel)`.
pub fn pool_and_concat(tape: &mut Tape, channels: [(Var, &[bool]); 4]) -> Result<(Var, Var, [Vec<usize>; 4])> {
    let mut pooled = Vec::with_capacity(4);
    let mut argmax: [Vec<usize>; 4] = Default::default();
    for (i, (h, mask)) in channels.into_iter().enumerate() {
        let (p, arg) = tape.max_pool(h, Some(mask))?;
        pooled.push(p);
        argmax[i] = arg;
    }
    let post = tape.concat(&pooled[0..2], 0)?;
    let comment = tape.concat(&pooled[2..4], 0)?;
    Ok((post, comment, argmax))
}

fn check_widths(tape: &Tape, op: &'static str, post: Var, comment: Var, width: usize) -> Result<()> {
    let (sp, sc) = (tape.shape(post), tape.shape(comment));
    if sp != [width] || sc != [width] {
        return Err(Error::dim(op, sp, sc));
    }
    Ok(())
}

fn gate(tape: &mut Tape, bound: &Bound, post: Var, comment: Var, wp: ParamId, wc: ParamId, b: ParamId) -> Result<Var> {
    let a = tape.matmul(post, bound[wp])?;
    let c = tape.matmul(comment, bound[wc])?;
    let z = tape.add(a, c)?;
    let z = tape.add(z, bound[b])?;
    Ok(tape.sigmoid(z))
}

/// Returns `(μ_f, F)`. The gate multiplies element-wise before the weight
/// matrix is applied.
pub fn conflicting_gate(
    tape: &mut Tape,
    bound: &Bound,
    params: &GainParams,
    post: Var,
    comment: Var,
) -> Result<(Var, Var)> {
    check_widths(tape, "conflicting_gate", post, comment, params.pooled_dim)?;
    let g = &params.conflicting;
    let mu = gate(tape, bound, post, comment, g.gate_post, g.gate_comment, g.gate_bias)?;
    let complement = tape.one_minus(mu);
    let post_part = tape.mul(post, mu)?;
    let post_part = tape.matmul(post_part, bound[g.post])?;
    let comment_part = tape.mul(comment, complement)?;
    let comment_part = tape.matmul(comment_part, bound[g.comment])?;
    let z = tape.add(post_part, comment_part)?;
    let z = tape.add(z, bound[g.bias])?;
    Ok((mu, tape.tanh(z)))
}

/// Returns `(μ_r, R)`; both branches are modulated by the same gate.
pub fn refining_gate(
    tape: &mut Tape,
    bound: &Bound,
    params: &GainParams,
    post: Var,
    comment: Var,
) -> Result<(Var, Var)> {
    check_widths(tape, "refining_gate", post, comment, params.pooled_dim)?;
    let g = &params.refining;
    let mu = gate(tape, bound, post, comment, g.gate_post, g.gate_comment, g.gate_bias)?;
    let post_part = tape.mul(post, mu)?;
    let post_part = tape.matmul(post_part, bound[g.post])?;
    let comment_part = tape.mul(comment, mu)?;
    let comment_part = tape.matmul(comment_part, bound[g.comment])?;
    let z = tape.add(post_part, comment_part)?;
    let z = tape.add(z, bound[g.bias])?;
    Ok((mu, tape.tanh(z)))
}

/// `S = R + (1 − μ_r) ⊙ F`, then one `tanh(S·W + b)` per channel.
pub fn adaptive_interaction(
    tape: &mut Tape,
    bound: &Bound,
    params: &GainParams,
    refined: Var,
    conflicting: Var,
    refine_gate: Var,
) -> Result<(Var, [Var; 4])> {
    let complement = tape.one_minus(refine_gate);
    let scaled = tape.mul(complement, conflicting)?;
    let adaptive = tape.add(refined, scaled)?;
    let t = project_all(tape, bound, &params.interaction, adaptive)?;
    Ok((adaptive, t))
}

/// Applies the four per-channel projections to the same input.
pub fn project_all(tape: &mut Tape, bound: &Bound, projections: &[Projection; 4], x: Var) -> Result<[Var; 4]> {
    Ok([
        projections[0].forward(tape, bound, x)?,
        projections[1].forward(tape, bound, x)?,
        projections[2].forward(tape, bound, x)?,
        projections[3].forward(tape, bound, x)?,
    ])
}

/// Full GAIN: both gates followed by the adaptive mechanism.
pub fn gain(tape: &mut Tape, bound: &Bound, params: &GainParams, post: Var, comment: Var) -> Result<GainOutput> {
    let (conflict_gate, conflicting) = conflicting_gate(tape, bound, params, post, comment)?;
    let (refine_gate, refined) = refining_gate(tape, bound, params, post, comment)?;
    let (adaptive, interaction) = adaptive_interaction(tape, bound, params, refined, conflicting, refine_gate)?;
    Ok(GainOutput {
        conflict_gate,
        refine_gate,
        conflicting,
        refined,
        adaptive,
        interaction,
    })
}
