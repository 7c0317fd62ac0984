//! Fusion self-attention channels: attention blocks whose outputs are
//! modulated by a channel's interaction vector before the feed-forward
//! layer, followed by a max-pool over positions.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{FeedForward, ForwardMode, MultiHeadAttention};
use crate::params::{glorot, Bound, ParamId, ParamStore};
use crate::tensor::{Tape, Var};

/// How the interaction vector is merged into an attention output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FusionKind {
    /// `t ⊙ O′`, broadcast over positions.
    #[default]
    Multiply,
    /// `t + O′`, broadcast over positions.
    Add,
    /// `[O′ ⊕ t]·W` with a learned `4h×2h` map back to the channel width.
    Concat,
}

#[derive(Clone, Debug)]
pub struct SfsnBlock {
    pub attention: MultiHeadAttention,
    pub ffn: FeedForward,
    /// Present only for [`FusionKind::Concat`].
    pub fuse: Option<ParamId>,
}

#[derive(Clone, Debug)]
pub struct SfsnChannel {
    pub width: usize,
    pub blocks: Vec<SfsnBlock>,
    pub fusion: FusionKind,
    pub residual: bool,
}

impl SfsnChannel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        width: usize,
        head_count: usize,
        block_count: usize,
        fusion: FusionKind,
        residual: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if block_count == 0 {
            return Err(Error::Config("fusion channel needs at least one block".into()));
        }
        let mut blocks = Vec::with_capacity(block_count);
        for b in 0..block_count {
            let p = format!("{prefix}.block{b}");
            let attention = MultiHeadAttention::new(store, &format!("{p}.attention"), width, head_count, rng)?;
            let ffn = FeedForward::new(store, &format!("{p}.ffn"), width, rng)?;
            let fuse = match fusion {
                FusionKind::Concat => Some(store.add(format!("{p}.fuse"), glorot(rng, 2 * width, width))?),
                _ => None,
            };
            blocks.push(SfsnBlock { attention, ffn, fuse });
        }
        Ok(SfsnChannel {
            width,
            blocks,
            fusion,
            residual,
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut ids = Vec::new();
        for b in &self.blocks {
            for h in &b.attention.heads {
                ids.extend([h.query, h.key, h.value]);
            }
            ids.push(b.attention.output);
            ids.extend([b.ffn.w1, b.ffn.b1, b.ffn.w2, b.ffn.b2]);
            ids.extend(b.fuse);
        }
        ids
    }

    fn fuse(&self, tape: &mut Tape, bound: &Bound, block: &SfsnBlock, attended: Var, t: Var) -> Result<Var> {
        match self.fusion {
            FusionKind::Multiply => tape.mul(attended, t),
            FusionKind::Add => tape.add(attended, t),
            FusionKind::Concat => {
                let rows = tape.shape(attended)[0];
                let tiled = tape.stack(&vec![t; rows])?;
                let joined = tape.concat(&[attended, tiled], 1)?;
                let w = block
                    .fuse
                    .ok_or_else(|| Error::Config("concat fusion block without projection".into()))?;
                tape.matmul(joined, bound[w])
            }
        }
    }
}

/// Result of one fusion channel.
#[derive(Clone, Debug)]
pub struct ChannelOutput {
    /// Fixed-size channel representation, width `2h`.
    pub pooled: Var,
    /// Winning position for each pooled dimension.
    pub argmax: Vec<usize>,
}

/// Runs every block of a channel over the encoded sequence `h` and pools.
///
/// `interaction = None` skips fusion entirely, which is how the unfused
/// attention stack (and the "t ≡ 1" ablations) are expressed.
#[allow(clippy::too_many_arguments)]
pub fn sfsn_channel(
    tape: &mut Tape,
    bound: &Bound,
    channel: &SfsnChannel,
    h: Var,
    interaction: Option<Var>,
    mask: &[bool],
    mode: &mut ForwardMode<'_>,
    dropout: f64,
) -> Result<ChannelOutput> {
    if let Some(t) = interaction {
        let ts = tape.shape(t);
        if ts != [channel.width] {
            return Err(Error::dim("sfsn_channel", ts, &[channel.width]));
        }
    }
    let mut x = h;
    for block in &channel.blocks {
        let attended = block.attention.forward(tape, bound, x, mask)?;
        let fused = match interaction {
            Some(t) => channel.fuse(tape, bound, block, attended, t)?,
            None => attended,
        };
        let mut out = block.ffn.forward(tape, bound, fused)?;
        if channel.residual {
            out = tape.add(out, x)?;
        }
        x = mode.dropout(tape, out, dropout)?;
    }
    let (pooled, argmax) = tape.max_pool(x, Some(mask))?;
    Ok(ChannelOutput { pooled, argmax })
}

/// `X^p = pw ⊕ pe`, `X^c = cw ⊕ ce`, `X^{pc} = X^p ⊕ X^c`.
pub fn integrate_channels(tape: &mut Tape, channels: [Var; 4]) -> Result<(Var, Var, Var)> {
    let post = tape.concat(&channels[0..2], 0)?;
    let comment = tape.concat(&channels[2..4], 0)?;
    let joint = tape.concat(&[post, comment], 0)?;
    Ok((post, comment, joint))
}
