//! Thread ingestion, tokenization, vocabulary, embedding tables, splitting,
//! batching and the synthetic conflict corpus.

mod batch;
mod embeddings;
mod split;
mod synthetic;
mod thread;
mod tokenize;
mod vocab;

pub use batch::{make_batches, Batches};
pub use embeddings::{embeddings_from_rows, load_embeddings, MISSING_ROW_RANGE, RANDOM_TABLE_RANGE};
pub use split::{split, split_by_tag, split_stratified, Split, MIN_SPLIT_THREADS};
pub use synthetic::{
    antonym_oracle, antonym_pair_count, generate_synthetic, sidecar_path, Lexicon, PlantRecord, ProfileShape,
    SyntheticCorpus, SyntheticSpec, VocabProfile,
};
pub use thread::{parse_corpus, parse_corpus_reader, write_corpus, Comment, Label, ParsedCorpus, SplitTag, Thread};
pub use tokenize::{comment_tokens, tokenize, tokenize_and_pad, TokenizedThread};
pub use vocab::{build_vocab, Vocabulary, OOV_TOKEN, PAD_TOKEN};
