use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::error::{Error, Result};

/// One published model configuration; exactly one is active per model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Full,
    /// GAIN replaced by `tanh([X^p ⊕ X^c]·W + b)` per channel.
    NoGainConcat,
    /// Only the refining gate: `S = R`.
    NoConflicting,
    /// Refining gate removed: `S = F`.
    NoRefining,
    /// Adaptive mechanism replaced by projections of `[R ⊕ F]`.
    NoAdaptive,
    SfsnMinusPostWord,
    SfsnMinusPostEmotion,
    SfsnMinusCommentWord,
    SfsnMinusCommentEmotion,
    /// No channel is fused with an interaction vector.
    NoSfsn,
    /// Encoders max-pooled straight into the classifier.
    NoSfsnNoGain,
}

/// Where a variant's interaction vectors come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InteractionSource {
    /// `S = R + (1 − μ_r) ⊙ F`.
    Adaptive,
    Refined,
    Conflicting,
    /// `[R ⊕ F]` through the wide projections.
    GateConcat,
    /// `[X^p ⊕ X^c]` through the wide projections.
    PooledConcat,
    None,
}

impl Variant {
    pub const ALL: [Variant; 11] = [
        Variant::Full,
        Variant::NoGainConcat,
        Variant::NoConflicting,
        Variant::NoRefining,
        Variant::NoAdaptive,
        Variant::SfsnMinusPostWord,
        Variant::SfsnMinusPostEmotion,
        Variant::SfsnMinusCommentWord,
        Variant::SfsnMinusCommentEmotion,
        Variant::NoSfsn,
        Variant::NoSfsnNoGain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoGainConcat => "no_gain_concat",
            Variant::NoConflicting => "no_conflicting",
            Variant::NoRefining => "no_refining",
            Variant::NoAdaptive => "no_adaptive",
            Variant::SfsnMinusPostWord => "sfsn_minus_post_word",
            Variant::SfsnMinusPostEmotion => "sfsn_minus_post_emotion",
            Variant::SfsnMinusCommentWord => "sfsn_minus_comment_word",
            Variant::SfsnMinusCommentEmotion => "sfsn_minus_comment_emotion",
            Variant::NoSfsn => "no_sfsn",
            Variant::NoSfsnNoGain => "no_sfsn_no_gain",
        }
    }

    /// Row label used in ablation tables.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "AIFN",
            Variant::NoGainConcat => "-All",
            Variant::NoConflicting => "-Conflicting",
            Variant::NoRefining => "-Refining",
            Variant::NoAdaptive => "-Adaptive",
            Variant::SfsnMinusPostWord => "SFSN-post-word",
            Variant::SfsnMinusPostEmotion => "SFSN-post-emotion",
            Variant::SfsnMinusCommentWord => "SFSN-comment-word",
            Variant::SfsnMinusCommentEmotion => "SFSN-comment-emotion",
            Variant::NoSfsn => "-SFSN",
            Variant::NoSfsnNoGain => "BiLSTM",
        }
    }

    /// Whether the attention blocks run at all.
    pub fn uses_attention(self) -> bool {
        self != Variant::NoSfsnNoGain
    }

    pub fn interaction_source(self) -> InteractionSource {
        match self {
            Variant::Full
            | Variant::SfsnMinusPostWord
            | Variant::SfsnMinusPostEmotion
            | Variant::SfsnMinusCommentWord
            | Variant::SfsnMinusCommentEmotion => InteractionSource::Adaptive,
            Variant::NoGainConcat => InteractionSource::PooledConcat,
            Variant::NoConflicting => InteractionSource::Refined,
            Variant::NoRefining => InteractionSource::Conflicting,
            Variant::NoAdaptive => InteractionSource::GateConcat,
            Variant::NoSfsn | Variant::NoSfsnNoGain => InteractionSource::None,
        }
    }

    /// Channels (post-word, post-emotion, comment-word, comment-emotion)
    /// whose attention output is fused with an interaction vector.
    pub fn fused_channels(self) -> [bool; 4] {
        match self {
            Variant::SfsnMinusPostWord => [false, true, true, true],
            Variant::SfsnMinusPostEmotion => [true, false, true, true],
            Variant::SfsnMinusCommentWord => [true, true, false, true],
            Variant::SfsnMinusCommentEmotion => [true, true, true, false],
            Variant::NoSfsn | Variant::NoSfsnNoGain => [false; 4],
            _ => [true; 4],
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

/// Returns `config` switched to the named variant.
pub fn apply_ablation(config: &ModelConfig, variant: &str) -> Result<ModelConfig> {
    Ok(config.clone().with_variant(variant.parse()?))
}

/// Named groups of variants compared against each other.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    /// Parts of the gated interaction network.
    Gain,
    /// Fusion removed from one channel at a time.
    Sfsn,
    /// Encoder-only, attention without gates, full model.
    Model,
    All,
}

impl Suite {
    pub fn variants(self) -> Vec<Variant> {
        match self {
            Suite::Gain => vec![
                Variant::NoGainConcat,
                Variant::NoConflicting,
                Variant::NoRefining,
                Variant::NoAdaptive,
                Variant::Full,
            ],
            Suite::Sfsn => vec![
                Variant::SfsnMinusPostWord,
                Variant::SfsnMinusPostEmotion,
                Variant::SfsnMinusCommentWord,
                Variant::SfsnMinusCommentEmotion,
                Variant::Full,
            ],
            Suite::Model => vec![Variant::NoSfsnNoGain, Variant::NoGainConcat, Variant::Full],
            Suite::All => Variant::ALL.to_vec(),
        }
    }

    /// Row label for `variant` within this suite.
    pub fn row_label(self, variant: Variant) -> &'static str {
        match (self, variant) {
            (Suite::Model, Variant::NoSfsnNoGain) => "BiLSTM",
            (Suite::Model, Variant::NoGainConcat) => "BiLSTM+SFSN",
            (Suite::Model, Variant::Full) => "BiLSTM+SFSN+GAIN",
            _ => variant.label(),
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gain" => Ok(Suite::Gain),
            "sfsn" => Ok(Suite::Sfsn),
            "model" => Ok(Suite::Model),
            "all" => Ok(Suite::All),
            other => Err(Error::Config(format!("unknown suite `{other}`"))),
        }
    }
}
