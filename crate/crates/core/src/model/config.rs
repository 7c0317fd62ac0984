use serde::{Deserialize, Serialize};

use super::variant::Variant;
use crate::error::{Error, Result};
use crate::fusion::FusionKind;
use crate::layers::dropout::check_rate;
use crate::layers::EncoderKind;

/// Every dimension and switch needed to build a model from a seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// `d`: word embedding width.
    pub word_dim: usize,
    /// `D`: emotion embedding width.
    pub emotion_dim: usize,
    /// `h`: recurrent hidden size per direction.
    pub hidden: usize,
    /// `l`: post tokens kept.
    pub post_len: usize,
    /// `k`: comment tokens kept.
    pub comment_len: usize,
    /// `j`: attention heads per block.
    pub head_count: usize,
    pub block_count: usize,
    pub dropout: f64,
    pub class_count: usize,
    pub encoder: EncoderKind,
    pub variant: Variant,
    pub fusion: FusionKind,
    /// Adds the block input back after the feed-forward layer.
    pub residual: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::desk()
    }
}

impl ModelConfig {
    /// Published hyper-parameters. Sequence lengths are not published and
    /// use the desk defaults.
    pub fn paper() -> Self {
        ModelConfig {
            word_dim: 768,
            emotion_dim: 300,
            hidden: 120,
            post_len: 32,
            comment_len: 96,
            head_count: 8,
            block_count: 4,
            dropout: 0.4,
            class_count: 2,
            encoder: EncoderKind::Bilstm,
            variant: Variant::Full,
            fusion: FusionKind::Multiply,
            residual: false,
            seed: 0,
        }
    }

    /// Small enough to train in seconds on one core.
    pub fn desk() -> Self {
        ModelConfig {
            word_dim: 16,
            emotion_dim: 8,
            hidden: 8,
            head_count: 2,
            block_count: 1,
            ..ModelConfig::paper()
        }
    }

    /// Gradient-check scale.
    pub fn tiny() -> Self {
        ModelConfig {
            word_dim: 8,
            emotion_dim: 4,
            hidden: 4,
            post_len: 6,
            comment_len: 8,
            head_count: 2,
            block_count: 1,
            dropout: 0.0,
            ..ModelConfig::paper()
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    /// Width of each channel after encoding: `2h`.
    pub fn channel_width(&self) -> usize {
        2 * self.hidden
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("word_dim", self.word_dim),
            ("emotion_dim", self.emotion_dim),
            ("hidden", self.hidden),
            ("post_len", self.post_len),
            ("comment_len", self.comment_len),
            ("head_count", self.head_count),
            ("block_count", self.block_count),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !self.channel_width().is_multiple_of(self.head_count) {
            return Err(Error::Config(format!(
                "head_count {} must divide 2h = {}",
                self.head_count,
                self.channel_width()
            )));
        }
        if self.class_count != 2 {
            return Err(Error::Config(format!(
                "class_count must be 2, got {}",
                self.class_count
            )));
        }
        check_rate(self.dropout)
    }
}

/// Named starting points for model and training settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Paper,
    #[default]
    Desk,
    Tiny,
}

impl Preset {
    pub fn model_config(self) -> ModelConfig {
        match self {
            Preset::Paper => ModelConfig::paper(),
            Preset::Desk => ModelConfig::desk(),
            Preset::Tiny => ModelConfig::tiny(),
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            "tiny" => Ok(Preset::Tiny),
            other => Err(Error::Config(format!("unknown preset `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_preset_values() {
        let c = ModelConfig::paper();
        assert_eq!((c.word_dim, c.emotion_dim, c.hidden), (768, 300, 120));
        assert_eq!((c.head_count, c.block_count), (8, 4));
        assert_eq!(c.dropout, 0.4);
        assert_eq!(c.channel_width(), 240);
        c.validate().unwrap();
    }

    #[test]
    fn presets_validate() {
        for p in [Preset::Paper, Preset::Desk, Preset::Tiny] {
            p.model_config().validate().unwrap();
        }
        let t = ModelConfig::tiny();
        assert_eq!(
            (
                t.word_dim,
                t.emotion_dim,
                t.hidden,
                t.post_len,
                t.comment_len,
                t.head_count
            ),
            (8, 4, 4, 6, 8, 2)
        );
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            ModelConfig {
                head_count: 3,
                ..ModelConfig::tiny()
            },
            ModelConfig {
                post_len: 0,
                ..ModelConfig::tiny()
            },
            ModelConfig {
                class_count: 3,
                ..ModelConfig::tiny()
            },
            ModelConfig {
                dropout: 1.0,
                ..ModelConfig::tiny()
            },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn json_fields_override_defaults() {
        let c: ModelConfig = serde_json::from_str(r#"{"hidden": 6, "variant": "no_adaptive"}"#).unwrap();
        assert_eq!(c.hidden, 6);
        assert_eq!(c.variant, Variant::NoAdaptive);
        assert_eq!(c.word_dim, ModelConfig::desk().word_dim);
        assert!(serde_json::from_str::<ModelConfig>(r#"{"hiden": 6}"#).is_err());
    }
}
