//! Fixtures shared by the benchmarks.

use aifn_core::corpus::{generate_synthetic, SyntheticSpec, TokenizedThread, VocabProfile};
use aifn_core::model::{Aifn, ModelConfig, Variant};
use aifn_core::Result;

pub struct Fixture {
    pub model: Aifn,
    pub threads: Vec<TokenizedThread>,
}

/// A randomly initialized model over a synthetic corpus sized to its config.
pub fn fixture(config: ModelConfig, variant: Variant, threads: usize) -> Result<Fixture> {
    let profile = if config.post_len < VocabProfile::Desk.max_lengths().0 {
        VocabProfile::Tiny
    } else {
        VocabProfile::Desk
    };
    let corpus = generate_synthetic(&SyntheticSpec::new(threads, 0.8, 0.6, 1).with_profile(profile))?;
    let vocab = aifn_core::corpus::build_vocab(&corpus.threads, 1)?;
    let model = Aifn::with_random_embeddings(config.with_variant(variant), vocab)?;
    let threads = corpus.threads.iter().map(|t| model.tokenize(t)).collect();
    Ok(Fixture { model, threads })
}
