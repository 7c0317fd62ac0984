//! Binary checkpoint: magic `AIFN1`, a `u64` little-endian length followed by
//! a JSON header (config, vocabulary, epoch, validation metric), then one
//! record per tensor: `u32` name length, name, `u32` rank, `u64` extents,
//! little-endian `f64` values. Embedding tables are stored as the records
//! `embedding.word` and `embedding.emotion`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::aifn::Aifn;
use super::config::ModelConfig;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::layers::EmbeddingTable;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 5] = b"AIFN1";
const WORD_TABLE: &str = "embedding.word";
const EMOTION_TABLE: &str = "embedding.emotion";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub epoch: usize,
    pub val_metric: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: Vocabulary,
    epoch: usize,
    val_metric: Option<f64>,
    tensors: usize,
}

fn put_tensor(out: &mut Vec<u8>, name: &str, t: &Tensor) {
    out.extend((name.len() as u32).to_le_bytes());
    out.extend(name.as_bytes());
    out.extend((t.rank() as u32).to_le_bytes());
    for &e in t.shape() {
        out.extend((e as u64).to_le_bytes());
    }
    for &v in t.data() {
        out.extend(v.to_le_bytes());
    }
}

pub fn encode_checkpoint(model: &Aifn, meta: &CheckpointMeta) -> Result<Vec<u8>> {
    let header = Header {
        config: model.config().clone(),
        vocab: model.vocab().clone(),
        epoch: meta.epoch,
        val_metric: meta.val_metric,
        tensors: model.params().len() + 2,
    };
    let header = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(header.len() + 8 * model.params().scalar_count() + 64);
    out.extend(MAGIC);
    out.extend((header.len() as u64).to_le_bytes());
    out.extend(&header);
    for (name, value) in model.params().iter() {
        put_tensor(&mut out, name, value);
    }
    put_tensor(&mut out, WORD_TABLE, model.word_table().matrix());
    put_tensor(&mut out, EMOTION_TABLE, model.emotion_table().matrix());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Format(format!("checkpoint truncated while reading {what}"))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap_or_default()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap_or_default()))
    }

    fn tensor(&mut self) -> Result<(String, Tensor)> {
        let len = self.u32("record name length")? as usize;
        let name = String::from_utf8(self.take(len, "record name")?.to_vec())
            .map_err(|_| Error::Format("record name is not UTF-8".into()))?;
        let rank = self.u32(&format!("rank of `{name}`"))? as usize;
        if rank > 8 {
            return Err(Error::Format(format!("parameter `{name}` has implausible rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.u64(&format!("shape of `{name}`"))? as usize);
        }
        let count = shape.iter().try_fold(1usize, |a, &e| a.checked_mul(e));
        let count = count.ok_or_else(|| Error::Format(format!("parameter `{name}` shape overflows")))?;
        let raw = self.take(
            count
                .checked_mul(8)
                .ok_or_else(|| Error::Format(format!("parameter `{name}` too large")))?,
            &format!("values of `{name}`"),
        )?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap_or_default()))
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| Error::Format(format!("parameter `{name}`: {e}")))?;
        Ok((name, t))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(Aifn, CheckpointMeta)> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(MAGIC.len(), "magic")?;
    if magic != MAGIC {
        return Err(Error::Format(if magic.starts_with(b"AIFN") {
            format!("unsupported checkpoint version `{}`", String::from_utf8_lossy(magic))
        } else {
            "not an AIFN checkpoint".into()
        }));
    }
    let header_len = r.u64("header length")? as usize;
    let header: Header = serde_json::from_slice(r.take(header_len, "header")?)
        .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
    let config = header.config;
    let vocab = header.vocab;
    let placeholder = |dim| EmbeddingTable::new(Tensor::zeros(&[vocab.len(), dim]));
    let word = placeholder(config.word_dim)?;
    let emotion = placeholder(config.emotion_dim)?;
    let mut model = Aifn::new(config, vocab.clone(), word, emotion)?;

    let mut records: HashMap<String, Tensor> = HashMap::with_capacity(header.tensors);
    for _ in 0..header.tensors {
        let (name, t) = r.tensor()?;
        if records.insert(name.clone(), t).is_some() {
            return Err(Error::Format(format!("parameter `{name}` appears twice")));
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after the last record".into()));
    }
    let mut take = |name: &str, shape: &[usize]| -> Result<Tensor> {
        let t = records
            .remove(name)
            .ok_or_else(|| Error::Format(format!("parameter `{name}` missing from checkpoint")))?;
        if t.shape() != shape {
            return Err(Error::Format(format!(
                "parameter `{name}` has shape {:?}, expected {shape:?}",
                t.shape()
            )));
        }
        Ok(t)
    };
    let mut values = Vec::with_capacity(model.params().len());
    for (name, current) in model.params().iter() {
        values.push(take(name, current.shape())?);
    }
    let word = take(WORD_TABLE, model.word_table().matrix().shape())?;
    let emotion = take(EMOTION_TABLE, model.emotion_table().matrix().shape())?;
    if let Some(extra) = records.keys().min() {
        return Err(Error::Format(format!("unknown parameter `{extra}` in checkpoint")));
    }
    model.params_mut().load_values(values)?;
    model.set_tables(EmbeddingTable::new(word)?, EmbeddingTable::new(emotion)?);
    Ok((
        model,
        CheckpointMeta {
            epoch: header.epoch,
            val_metric: header.val_metric,
        },
    ))
}

pub fn save_checkpoint(model: &Aifn, meta: &CheckpointMeta, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(model, meta)?;
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Aifn, CheckpointMeta)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
