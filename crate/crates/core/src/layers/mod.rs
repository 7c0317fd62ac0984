//! Parameterized layers shared by the four feature channels.

pub mod attention;
pub mod dense;
pub mod dropout;
pub mod embedding;
pub mod feed_forward;
pub mod recurrent;

pub use attention::MultiHeadAttention;
pub use dense::DenseSoftmax;
pub use dropout::{dropout, DropoutMode, ForwardMode};
pub use embedding::{embed_sequence, lookup_sequence, read_embedding_text, EmbeddingTable, OOV_ID, PAD_ID};
pub use feed_forward::FeedForward;
pub use recurrent::{BiRecurrent, EncoderKind};
