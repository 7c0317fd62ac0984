use std::io::BufRead;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Reserved row for padding; always all-zero.
pub const PAD_ID: usize = 0;
/// Reserved row for out-of-vocabulary tokens.
pub const OOV_ID: usize = 1;

/// Frozen lookup table mapping token ids to dense rows.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    matrix: Tensor,
}

impl EmbeddingTable {
    /// `matrix` is `vocab_size × dim`; it must have the pad and OOV rows.
    pub fn new(matrix: Tensor) -> Result<Self> {
        match matrix.shape() {
            [v, _] if *v > OOV_ID => Ok(EmbeddingTable { matrix }),
            s => Err(Error::Config(format!(
                "embedding table needs at least 2 rows (pad, oov), got shape {s:?}"
            ))),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.matrix.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.matrix.shape()[1]
    }

    pub fn oov_id(&self) -> usize {
        OOV_ID
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    /// Row for `id`; ids outside the table fall back to the OOV row.
    pub fn row(&self, id: usize) -> &[f64] {
        let id = if id < self.vocab_size() { id } else { OOV_ID };
        self.matrix.row(id)
    }
}

/// Embeds up to `max_len` tokens as `[table[token_i] ; one_hot(i, max_len)]`.
///
/// Rows past the end of the sequence are all-zero. The returned mask is
/// `true` at real positions.
pub fn embed_sequence(tokens: &[usize], table: &EmbeddingTable, max_len: usize) -> Result<(Tensor, Vec<bool>)> {
    build_rows(tokens, table, max_len, true)
}

/// Like [`embed_sequence`] without the positional one-hot block.
pub fn lookup_sequence(tokens: &[usize], table: &EmbeddingTable, max_len: usize) -> Result<(Tensor, Vec<bool>)> {
    build_rows(tokens, table, max_len, false)
}

fn build_rows(
    tokens: &[usize],
    table: &EmbeddingTable,
    max_len: usize,
    with_position: bool,
) -> Result<(Tensor, Vec<bool>)> {
    if max_len == 0 {
        return Err(Error::Config("sequence length must be positive".into()));
    }
    if tokens.len() > max_len {
        return Err(Error::Contract(format!(
            "sequence of {} tokens exceeds max length {max_len}",
            tokens.len()
        )));
    }
    let dim = table.dim();
    let width = if with_position { dim + max_len } else { dim };
    let mut data = vec![0.0; max_len * width];
    for (i, &tok) in tokens.iter().enumerate() {
        let row = &mut data[i * width..(i + 1) * width];
        row[..dim].copy_from_slice(table.row(tok));
        if with_position {
            row[dim + i] = 1.0;
        }
    }
    let mask = (0..max_len).map(|i| i < tokens.len()).collect();
    Ok((Tensor::from_parts(vec![max_len, width], data), mask))
}

/// Parses a whitespace-separated text embedding file.
///
/// Each line is a token followed by `dim` decimal floats. A first line
/// consisting of exactly two integers is taken as a `vocab_size dim` header
/// (unless `dim == 1`, where such a line is ambiguous and read as data).
pub fn read_embedding_text<R: BufRead>(reader: R, dim: usize) -> Result<Vec<(String, Vec<f64>)>> {
    let mut rows = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Format(format!("embedding line {}: {e}", lineno + 1)))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if lineno == 0 && dim != 1 && fields.len() == 2 {
            if let (Ok(_), Ok(header_dim)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                if header_dim != dim {
                    return Err(Error::Format(format!(
                        "embedding header declares dim {header_dim}, expected {dim}"
                    )));
                }
                continue;
            }
        }
        if fields.len() != dim + 1 {
            return Err(Error::Format(format!(
                "embedding line {}: expected {dim} values after the token, found {}",
                lineno + 1,
                fields.len() - 1
            )));
        }
        let values = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("embedding line {}: {e}", lineno + 1)))?;
        rows.push((fields[0].to_string(), values));
    }
    Ok(rows)
}
