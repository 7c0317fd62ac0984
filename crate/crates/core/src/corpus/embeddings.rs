use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::layers::{read_embedding_text, EmbeddingTable, PAD_ID};
use crate::tensor::Tensor;

/// Half-width of the uniform range for tokens missing from an embedding file.
pub const MISSING_ROW_RANGE: f64 = 0.1;
/// Half-width of the uniform range for a table built without a file.
pub const RANDOM_TABLE_RANGE: f64 = 1.0;

/// Builds a `vocab.len() × dim` table. With a file, rows it names are copied
/// exactly and the rest are seeded uniform in `±MISSING_ROW_RANGE`. Without
/// one, every row is seeded uniform in `±RANDOM_TABLE_RANGE`. The pad row is
/// zero.
pub fn load_embeddings(path: Option<&Path>, vocab: &Vocabulary, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    match path {
        Some(p) => {
            let file = File::open(p).map_err(|e| Error::io(p, e))?;
            let rows = read_embedding_text(BufReader::new(file), dim)?;
            embeddings_from_rows(rows, vocab, dim, seed)
        }
        None => seeded_table(Vec::new(), vocab, dim, seed, RANDOM_TABLE_RANGE),
    }
}

/// Table from explicit rows; tokens without a row are seeded uniform in
/// `±MISSING_ROW_RANGE`.
pub fn embeddings_from_rows(
    rows: Vec<(String, Vec<f64>)>,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingTable> {
    seeded_table(rows, vocab, dim, seed, MISSING_ROW_RANGE)
}

fn seeded_table(
    rows: Vec<(String, Vec<f64>)>,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
    range: f64,
) -> Result<EmbeddingTable> {
    if dim == 0 {
        return Err(Error::Config("embedding dim must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data: Vec<f64> = (0..vocab.len() * dim).map(|_| rng.gen_range(-range..range)).collect();
    let from_file: HashMap<String, Vec<f64>> = rows.into_iter().collect();
    for (id, token) in vocab.tokens().iter().enumerate().skip(2) {
        if let Some(values) = from_file.get(token) {
            data[id * dim..(id + 1) * dim].copy_from_slice(values);
        }
    }
    data[PAD_ID * dim..(PAD_ID + 1) * dim].fill(0.0);
    EmbeddingTable::new(Tensor::matrix(vocab.len(), dim, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, Label, Thread};
    use std::io::Write;

    fn vocab() -> Vocabulary {
        let t = Thread {
            id: "a".into(),
            post: "fire smoke fire".into(),
            comments: vec![],
            label: Label::True,
            split: None,
        };
        build_vocab(&[t], 1).unwrap()
    }

    #[test]
    fn seeded_table_is_deterministic() {
        let v = vocab();
        let a = load_embeddings(None, &v, 5, 3).unwrap();
        let b = load_embeddings(None, &v, 5, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.row(PAD_ID).iter().all(|&x| x == 0.0));
        assert!(a.matrix().data().iter().all(|x| x.abs() < RANDOM_TABLE_RANGE));
        assert!(a.matrix().data().iter().any(|x| x.abs() > MISSING_ROW_RANGE));
        assert_ne!(a, load_embeddings(None, &v, 5, 4).unwrap());
    }

    #[test]
    fn file_rows_are_copied_exactly() {
        let v = vocab();
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "fire 0.125 -2.5 3").unwrap();
        writeln!(f, "unused 1 1 1").unwrap();
        let table = load_embeddings(Some(f.path()), &v, 3, 0).unwrap();
        assert_eq!(table.row(v.id("fire")), &[0.125, -2.5, 3.0]);
        assert!(table.row(v.id("smoke")).iter().all(|x| x.abs() < 0.1));
    }

    #[test]
    fn file_dim_mismatch_is_format_error() {
        let v = vocab();
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "fire 0.1 0.2").unwrap();
        assert!(matches!(
            load_embeddings(Some(f.path()), &v, 3, 0),
            Err(Error::Format(_))
        ));
    }
}
