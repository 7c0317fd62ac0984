use std::fmt::Write as _;
use std::path::Path;

use aifn_core::corpus::{build_vocab, generate_synthetic, SyntheticSpec, Thread, TokenizedThread, VocabProfile};
use aifn_core::model::{Aifn, ModelConfig, Variant};
use aifn_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A freshly initialized tiny-config model plus a few synthetic threads.
pub fn tiny_model(variant: Variant, seed: u64) -> (Aifn, Vec<Thread>, Vec<TokenizedThread>) {
    let corpus = generate_synthetic(&SyntheticSpec::new(8, 1.0, 0.6, seed).with_profile(VocabProfile::Tiny)).unwrap();
    let vocab = build_vocab(&corpus.threads, 1).unwrap();
    let config = ModelConfig {
        seed,
        ..ModelConfig::tiny()
    }
    .with_variant(variant);
    let model = Aifn::with_random_embeddings(config, vocab).unwrap();
    let tokenized = corpus.threads.iter().map(|t| model.tokenize(t)).collect();
    (model, corpus.threads, tokenized)
}

/// Cells of the RumourEval-shaped statistics table: subset tag, label,
/// post count, comment count.
pub const SPLIT_CELLS: [(&str, &str, usize, usize); 6] = [
    ("train", "true", 83, 1949),
    ("train", "false", 70, 1504),
    ("val", "true", 10, 101),
    ("val", "false", 12, 141),
    ("test", "true", 9, 412),
    ("test", "false", 12, 437),
];

/// Writes a corpus with the table's post and comment counts, plus
/// unverified threads that the parser must drop.
pub fn write_split_fixture(path: &Path, unverified: usize) {
    let mut out = String::new();
    let mut id = 0;
    for (split, label, posts, comments) in SPLIT_CELLS {
        for p in 0..posts {
            // Spread the cell's comments as evenly as possible.
            let n = comments / posts + usize::from(p < comments % posts);
            let cs: Vec<String> = (0..n)
                .map(|c| format!(r#"{{"text":"reply {c} to {id}","ts":{}}}"#, 100 + c))
                .collect();
            let _ = writeln!(
                out,
                r#"{{"id":"t{id}","post":"claim number {id}","comments":[{}],"label":"{label}","split":"{split}"}}"#,
                cs.join(",")
            );
            id += 1;
        }
    }
    for u in 0..unverified {
        let _ = writeln!(
            out,
            r#"{{"id":"u{u}","post":"unclear {u}","comments":[],"label":"unverified"}}"#
        );
    }
    std::fs::write(path, out).unwrap();
}
