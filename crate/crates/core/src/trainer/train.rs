use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::MetricsReport;
use super::optimizer::{Optimizer, OptimizerKind};
use crate::corpus::{build_vocab, make_batches, tokenize_and_pad, Label, Split, TokenizedThread, Vocabulary};
use crate::error::{Error, Result};
use crate::layers::ForwardMode;
use crate::model::{cross_entropy, save_checkpoint, Aifn, CheckpointMeta, ModelConfig, Preset, SequenceLayout};
use crate::tensor::{Tape, Tensor};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const CHECKPOINT_FILE: &str = "best.ckpt";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without a strict validation-accuracy gain before stopping.
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub positive_class: Label,
    /// Minimum training-split frequency for a token to enter the vocabulary.
    pub min_freq: usize,
    /// Where the best checkpoint is written, if anywhere.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::for_preset(Preset::Desk)
    }
}

impl TrainConfig {
    pub fn for_preset(preset: Preset) -> Self {
        let base = TrainConfig {
            learning_rate: 0.001,
            max_epochs: 50,
            patience: 10,
            batch_size: 64,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            positive_class: Label::False,
            min_freq: 1,
            checkpoint_dir: None,
        };
        match preset {
            Preset::Paper => base,
            Preset::Desk => TrainConfig {
                learning_rate: 0.005,
                max_epochs: 40,
                batch_size: 16,
                ..base
            },
            Preset::Tiny => TrainConfig {
                learning_rate: 0.01,
                max_epochs: 200,
                batch_size: 8,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be finite and ≥ 0",
                self.learning_rate
            )));
        }
        if self.patience == 0 || self.batch_size == 0 || self.max_epochs == 0 || self.min_freq == 0 {
            return Err(Error::Config(
                "patience, batch_size, max_epochs and min_freq must be ≥ 1".into(),
            ));
        }
        Ok(())
    }
}

/// Vocabulary plus the three subsets tokenized for one model shape.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub vocab: Vocabulary,
    pub train: Vec<TokenizedThread>,
    pub val: Vec<TokenizedThread>,
    pub test: Vec<TokenizedThread>,
}

/// Builds the vocabulary from the training subset and tokenizes all three.
pub fn prepare_data(split: &Split, config: &ModelConfig, min_freq: usize) -> Result<PreparedData> {
    let vocab = build_vocab(&split.train, min_freq)?;
    let tok = |v: &[crate::corpus::Thread]| -> Vec<TokenizedThread> {
        v.iter()
            .map(|t| tokenize_and_pad(t, &vocab, config.post_len, config.comment_len))
            .collect()
    };
    let (train, val, test) = (tok(&split.train), tok(&split.val), tok(&split.test));
    let truncated = train.iter().chain(&val).chain(&test).filter(|t| t.truncated()).count();
    if truncated > 0 {
        log::warn!("{truncated} thread(s) truncated to post_len/comment_len");
    }
    Ok(PreparedData {
        vocab,
        train,
        val,
        test,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub improved: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunArtifacts {
    pub schema_version: u32,
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    /// Hash of everything but the variant: config, schedule and split ids.
    pub config_hash: String,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub stopped_early: bool,
    pub best_checkpoint: Option<PathBuf>,
    pub val: MetricsReport,
    /// Absent when the test subset is empty.
    pub test: Option<MetricsReport>,
}

/// Hash shared by runs that differ only in the ablation variant.
pub fn config_hash(model: &ModelConfig, train: &TrainConfig, data: &PreparedData) -> String {
    #[derive(Serialize)]
    struct Key<'a> {
        model: ModelConfig,
        train: TrainConfig,
        train_ids: Vec<&'a str>,
        val_ids: Vec<&'a str>,
        test_ids: Vec<&'a str>,
    }
    fn ids(v: &[TokenizedThread]) -> Vec<&str> {
        v.iter().map(|t| t.id.as_str()).collect()
    }
    let key = Key {
        model: model.clone().with_variant(Default::default()),
        train: TrainConfig {
            checkpoint_dir: None,
            ..train.clone()
        },
        train_ids: ids(&data.train),
        val_ids: ids(&data.val),
        test_ids: ids(&data.test),
    };
    let json = serde_json::to_vec(&key).unwrap_or_default();
    Sha256::digest(json).iter().map(|b| format!("{b:02x}")).collect()
}

/// Argmax predictions over `threads` scored against their labels.
pub fn evaluate(model: &Aifn, threads: &[TokenizedThread], positive_class: Label) -> Result<MetricsReport> {
    let predicted = model.predict(threads)?;
    let actual: Vec<usize> = threads.iter().map(|t| t.label).collect();
    MetricsReport::from_predictions(&predicted, &actual, positive_class)
}

/// Mean loss and summed-then-averaged gradients of one batch. Threads run
/// on independent tapes in parallel; results are reduced in batch order so
/// the sum is reproducible.
pub fn batch_gradients(model: &Aifn, batch: &[&TokenizedThread], dropout_seeds: &[u64]) -> Result<(f64, Vec<Tensor>)> {
    let params = model.params();
    let mut grads: Vec<Tensor> = params.values().iter().map(|v| Tensor::zeros(v.shape())).collect();
    let mut loss_sum = 0.0;
    let chunk = rayon::current_num_threads().max(1) * 2;
    for (threads, seeds) in batch.chunks(chunk).zip(dropout_seeds.chunks(chunk)) {
        let results: Vec<Result<(f64, Vec<Option<Tensor>>)>> = threads
            .par_iter()
            .zip(seeds)
            .map(|(t, &seed)| {
                let mut tape = Tape::new();
                let bound = params.bind(&mut tape);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let trace = model.forward_thread(
                    &mut tape,
                    &bound,
                    t,
                    &mut ForwardMode::Train(&mut rng),
                    SequenceLayout::Compact,
                )?;
                let probs = tape.reshape(trace.probs, &[1, 2])?;
                let loss = cross_entropy(&mut tape, probs, &[t.label])?;
                let value = tape.value(loss).item()?;
                tape.backward(loss)?;
                Ok((value, bound.vars().iter().map(|&v| tape.grad(v).cloned()).collect()))
            })
            .collect();
        for r in results {
            let (value, g) = r?;
            loss_sum += value;
            for (acc, g) in grads.iter_mut().zip(g) {
                if let Some(g) = g {
                    for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                        *a += b;
                    }
                }
            }
        }
    }
    let n = batch.len() as f64;
    for g in &mut grads {
        for v in g.data_mut() {
            *v /= n;
        }
    }
    Ok((loss_sum / n, grads))
}

/// Trains in place, keeping the parameters of the best validation epoch.
pub fn train(model: &mut Aifn, data: &PreparedData, cfg: &TrainConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    if data.train.is_empty() || data.val.is_empty() {
        return Err(Error::Size(
            "training needs nonempty train and validation subsets".into(),
        ));
    }
    if model.vocab() != &data.vocab {
        return Err(Error::Config("model vocabulary differs from the prepared data".into()));
    }
    if let Some(dir) = &cfg.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let hash = config_hash(model.config(), cfg, data);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, model.params());
    let mut history = Vec::new();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut best_values = model.params().values().to_vec();
    let mut best_checkpoint = None;
    let mut since_best = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        let shuffle_seed: u64 = rng.gen();
        let mut loss_total = 0.0;
        let mut seen = 0usize;
        for (b, batch) in make_batches(&data.train, cfg.batch_size, shuffle_seed, true)?.enumerate() {
            let seeds: Vec<u64> = (0..batch.len()).map(|_| rng.gen()).collect();
            let (loss, grads) = batch_gradients(model, &batch, &seeds)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: b + 1,
                    loss,
                });
            }
            opt.step(model.params_mut(), &grads)?;
            loss_total += loss * batch.len() as f64;
            seen += batch.len();
        }
        let train_accuracy = evaluate(model, &data.train, cfg.positive_class)?.accuracy;
        let val_accuracy = evaluate(model, &data.val, cfg.positive_class)?.accuracy;
        let improved = val_accuracy > best_val;
        if improved {
            best_val = val_accuracy;
            best_epoch = epoch;
            best_values = model.params().values().to_vec();
            since_best = 0;
            if let Some(dir) = &cfg.checkpoint_dir {
                let path = dir.join(CHECKPOINT_FILE);
                let meta = CheckpointMeta {
                    epoch,
                    val_metric: Some(val_accuracy),
                };
                save_checkpoint(model, &meta, &path)?;
                best_checkpoint = Some(path);
            }
        } else {
            since_best += 1;
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_total / seen as f64,
            train_accuracy,
            val_accuracy,
            improved,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} train acc {:.3} val acc {:.3}",
            record.train_loss,
            train_accuracy,
            val_accuracy
        );
        history.push(record);
        if since_best >= cfg.patience {
            stopped_early = epoch < cfg.max_epochs;
            break;
        }
    }

    model.params_mut().load_values(best_values)?;
    let val = evaluate(model, &data.val, cfg.positive_class)?;
    let test = if data.test.is_empty() {
        None
    } else {
        Some(evaluate(model, &data.test, cfg.positive_class)?)
    };
    Ok(RunArtifacts {
        schema_version: REPORT_SCHEMA_VERSION,
        model_config: model.config().clone(),
        train_config: cfg.clone(),
        config_hash: hash,
        history,
        best_epoch,
        best_val_accuracy: best_val,
        stopped_early,
        best_checkpoint,
        val,
        test,
    })
}
