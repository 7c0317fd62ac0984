//! The assembled classifier, its ablation variants, loss, checkpoints and
//! token attribution.

mod aifn;
mod attribution;
mod checkpoint;
mod config;
mod variant;

pub use aifn::{cross_entropy, loss, Aifn, ChannelInput, SequenceLayout, ThreadTrace};
pub use attribution::{attribute, AttributionReport, ChannelAttribution, TokenSalience};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CheckpointMeta, MAGIC};
pub use config::{ModelConfig, Preset};
pub use variant::{apply_ablation, InteractionSource, Suite, Variant};
