//! Gated adaptive interaction (GAIN) and fusion self-attention (SFSN).

pub mod gain;
pub mod sfsn;

pub use gain::{
    adaptive_interaction, conflicting_gate, gain, pool_and_concat, project_all, refining_gate, GainOutput, GainParams,
    Projection, CHANNELS,
};
pub use sfsn::{integrate_channels, sfsn_channel, ChannelOutput, FusionKind, SfsnChannel};
