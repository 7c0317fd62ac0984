use serde::{Deserialize, Serialize};

use super::aifn::{Aifn, SequenceLayout};
use crate::corpus::{comment_tokens, tokenize, Thread, PAD_TOKEN};
use crate::error::Result;
use crate::fusion::{FusionKind, CHANNELS};
use crate::layers::ForwardMode;
use crate::tensor::Tape;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSalience {
    pub token: String,
    pub position: usize,
    /// Pooled dimensions whose maximum came from this position.
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelAttribution {
    pub channel: String,
    /// Pooled width; the counts sum to this.
    pub width: usize,
    /// Every real position, highest count first, ties by position.
    pub tokens: Vec<TokenSalience>,
}

impl ChannelAttribution {
    /// Positions in the first quarter of the ranking (at least one).
    pub fn top_quartile(&self) -> Vec<usize> {
        let n = self.tokens.len().div_ceil(4).max(1);
        self.tokens.iter().take(n).map(|t| t.position).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub thread_id: String,
    pub variant: String,
    pub fusion: FusionKind,
    /// Probabilities of (true, false).
    pub probabilities: [f64; 2],
    /// Set when the thread had more tokens than the model keeps.
    pub truncated: bool,
    pub channels: Vec<ChannelAttribution>,
}

impl AttributionReport {
    pub fn channel(&self, name: &str) -> Option<&ChannelAttribution> {
        self.channels.iter().find(|c| c.channel == name)
    }
}

/// Counts, per channel, how many pooled dimensions each input position won.
pub fn attribute(model: &Aifn, thread: &Thread) -> Result<AttributionReport> {
    let tt = model.tokenize(thread);
    let mut tape = Tape::new();
    let bound = model.params().bind(&mut tape);
    let trace = model.forward_thread(&mut tape, &bound, &tt, &mut ForwardMode::Infer, SequenceLayout::Compact)?;
    let probs = tape.value(trace.probs).data();

    let post = tokenize(&thread.post);
    let comments = comment_tokens(thread);
    let width = model.config().channel_width();
    let channels = (0..4)
        .map(|c| {
            let source = if c < 2 { &post } else { &comments };
            let real = trace.masks[c].iter().filter(|&&m| m).count();
            let mut counts = vec![0usize; real];
            for &pos in &trace.argmax[c] {
                counts[pos] += 1;
            }
            let mut tokens: Vec<TokenSalience> = counts
                .into_iter()
                .enumerate()
                .map(|(position, count)| TokenSalience {
                    token: source.get(position).cloned().unwrap_or_else(|| PAD_TOKEN.to_string()),
                    position,
                    count,
                })
                .collect();
            tokens.sort_by(|a, b| b.count.cmp(&a.count).then(a.position.cmp(&b.position)));
            ChannelAttribution {
                channel: CHANNELS[c].to_string(),
                width,
                tokens,
            }
        })
        .collect();
    Ok(AttributionReport {
        thread_id: thread.id.clone(),
        variant: model.variant().name().to_string(),
        fusion: model.config().fusion,
        probabilities: [probs[0], probs[1]],
        truncated: tt.truncated(),
        channels,
    })
}

impl Aifn {
    /// Copy of this model whose channels merge interaction vectors with
    /// `fusion` instead. Shared parameters are copied; parameters only the
    /// new fusion needs keep their seeded initial values.
    pub fn with_fusion(&self, fusion: FusionKind) -> Result<Aifn> {
        let mut config = self.config().clone();
        config.fusion = fusion;
        let mut out = Aifn::new(
            config,
            self.vocab().clone(),
            self.word_table().clone(),
            self.emotion_table().clone(),
        )?;
        for (name, value) in self.params().iter() {
            if let Some(slot) = out.params_mut().by_name_mut(name) {
                *slot = value.clone();
            }
        }
        Ok(out)
    }
}
