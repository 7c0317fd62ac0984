use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::ModelConfig;
use super::variant::{InteractionSource, Variant};
use crate::corpus::{load_embeddings, tokenize_and_pad, Thread, TokenizedThread, Vocabulary};
use crate::error::{Error, Result};
use crate::fusion::{
    conflicting_gate, gain, integrate_channels, pool_and_concat, project_all, refining_gate, sfsn_channel, GainOutput,
    GainParams, SfsnChannel, CHANNELS,
};
use crate::layers::{embed_sequence, lookup_sequence, BiRecurrent, DenseSoftmax, EmbeddingTable, ForwardMode, PAD_ID};
use crate::params::{Bound, ParamId, ParamStore};
use crate::tensor::{Tape, Tensor, Var};

/// How padded positions are laid out on the tape.
///
/// `Compact` drops trailing padding before encoding; `Padded` keeps all
/// `l`/`k` rows and masks them. Both give bit-identical outputs because
/// padded rows never reach a real row or a pooled value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SequenceLayout {
    #[default]
    Compact,
    Padded,
}

/// Encoded input of one channel.
#[derive(Clone, Debug)]
pub struct ChannelInput {
    pub rows: Tensor,
    pub mask: Vec<bool>,
}

/// Everything recorded by one thread's forward pass.
#[derive(Clone, Debug)]
pub struct ThreadTrace {
    /// `[2]` class probabilities.
    pub probs: Var,
    /// Final pooled vector of each channel.
    pub pooled: [Var; 4],
    /// Winning position of every pooled dimension, per channel.
    pub argmax: [Vec<usize>; 4],
    /// Real-position masks actually used, per channel.
    pub masks: [Vec<bool>; 4],
    /// Interaction vectors fed to fused channels.
    pub interaction: [Option<Var>; 4],
    pub gain: Option<GainOutput>,
}

/// The assembled classifier: four encoders, GAIN, four fusion channels and
/// the dense softmax head. Embedding tables are frozen.
#[derive(Clone, Debug)]
pub struct Aifn {
    config: ModelConfig,
    vocab: Vocabulary,
    word_table: EmbeddingTable,
    emotion_table: EmbeddingTable,
    params: ParamStore,
    encoders: [BiRecurrent; 4],
    gain: GainParams,
    channels: [SfsnChannel; 4],
    classifier: DenseSoftmax,
}

impl Aifn {
    pub fn new(
        config: ModelConfig,
        vocab: Vocabulary,
        word_table: EmbeddingTable,
        emotion_table: EmbeddingTable,
    ) -> Result<Self> {
        config.validate()?;
        for (name, table, dim) in [
            ("word", &word_table, config.word_dim),
            ("emotion", &emotion_table, config.emotion_dim),
        ] {
            if table.vocab_size() != vocab.len() || table.dim() != dim {
                return Err(Error::Config(format!(
                    "{name} table is {}×{}, expected {}×{dim}",
                    table.vocab_size(),
                    table.dim(),
                    vocab.len()
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamStore::new();
        let h = config.hidden;
        let in_dims = [
            config.word_dim + config.post_len,
            config.emotion_dim,
            config.word_dim + config.comment_len,
            config.emotion_dim,
        ];
        let mut enc = Vec::with_capacity(4);
        for (c, in_dim) in in_dims.into_iter().enumerate() {
            enc.push(BiRecurrent::new(
                &mut params,
                &format!("encoder.{}", CHANNELS[c]),
                config.encoder,
                in_dim,
                h,
                &mut rng,
            )?);
        }
        let gain = GainParams::new(&mut params, "gain", h, &mut rng)?;
        let mut ch = Vec::with_capacity(4);
        for name in CHANNELS {
            ch.push(SfsnChannel::new(
                &mut params,
                &format!("sfsn.{name}"),
                config.channel_width(),
                config.head_count,
                config.block_count,
                config.fusion,
                config.residual,
                &mut rng,
            )?);
        }
        let classifier = DenseSoftmax::new(
            &mut params,
            "classifier",
            4 * config.channel_width(),
            config.class_count,
            &mut rng,
        )?;
        Ok(Aifn {
            config,
            vocab,
            word_table,
            emotion_table,
            params,
            encoders: enc
                .try_into()
                .map_err(|_| Error::Config("expected four encoders".into()))?,
            gain,
            channels: ch
                .try_into()
                .map_err(|_| Error::Config("expected four channels".into()))?,
            classifier,
        })
    }

    /// Builds with seeded random embedding tables (no pretrained file).
    pub fn with_random_embeddings(config: ModelConfig, vocab: Vocabulary) -> Result<Self> {
        let word = load_embeddings(None, &vocab, config.word_dim, config.seed)?;
        let emotion = load_embeddings(None, &vocab, config.emotion_dim, config.seed.wrapping_add(1))?;
        Aifn::new(config, vocab, word, emotion)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn word_table(&self) -> &EmbeddingTable {
        &self.word_table
    }

    pub fn emotion_table(&self) -> &EmbeddingTable {
        &self.emotion_table
    }

    pub(crate) fn set_tables(&mut self, word: EmbeddingTable, emotion: EmbeddingTable) {
        self.word_table = word;
        self.emotion_table = emotion;
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn encoders(&self) -> &[BiRecurrent; 4] {
        &self.encoders
    }

    pub fn gain_params(&self) -> &GainParams {
        &self.gain
    }

    pub fn channels(&self) -> &[SfsnChannel; 4] {
        &self.channels
    }

    pub fn classifier(&self) -> &DenseSoftmax {
        &self.classifier
    }

    pub fn tokenize(&self, thread: &Thread) -> TokenizedThread {
        tokenize_and_pad(thread, &self.vocab, self.config.post_len, self.config.comment_len)
    }

    /// Parameters that cannot influence the output under the active variant.
    pub fn unused_params(&self) -> Vec<ParamId> {
        let g = &self.gain;
        let mut ids = Vec::new();
        match self.config.variant.interaction_source() {
            InteractionSource::Adaptive => ids.extend(g.concat_interaction_params()),
            InteractionSource::Refined => {
                ids.extend(g.conflicting_params());
                ids.extend(g.concat_interaction_params());
            }
            InteractionSource::Conflicting => {
                ids.extend(g.refining_params());
                ids.extend(g.concat_interaction_params());
            }
            InteractionSource::GateConcat => ids.extend(g.interaction_params()),
            InteractionSource::PooledConcat => {
                ids.extend(g.conflicting_params());
                ids.extend(g.refining_params());
                ids.extend(g.interaction_params());
            }
            InteractionSource::None => {
                ids.extend(g.conflicting_params());
                ids.extend(g.refining_params());
                ids.extend(g.interaction_params());
                ids.extend(g.concat_interaction_params());
            }
        }
        let fused = self.config.variant.fused_channels();
        for (c, &on) in fused.iter().enumerate() {
            if !on && self.config.variant.interaction_source() != InteractionSource::None {
                ids.extend(self.projection_for(c).params());
            }
            if !on {
                ids.extend(self.channels[c].blocks.iter().filter_map(|b| b.fuse));
            }
            if !self.config.variant.uses_attention() {
                ids.extend(self.channels[c].params());
            }
        }
        ids.sort_by_key(|id| id.index());
        ids.dedup();
        ids
    }

    fn projection_for(&self, channel: usize) -> &crate::fusion::Projection {
        match self.config.variant.interaction_source() {
            InteractionSource::GateConcat | InteractionSource::PooledConcat => &self.gain.concat_interaction[channel],
            _ => &self.gain.interaction[channel],
        }
    }

    /// Builds the embedded rows of the four channels.
    pub fn channel_inputs(&self, thread: &TokenizedThread, layout: SequenceLayout) -> Result<[ChannelInput; 4]> {
        let (l, k) = (self.config.post_len, self.config.comment_len);
        let check = |ids: &[usize], mask: &[bool], len: usize, side: &str| -> Result<usize> {
            if ids.len() != len || mask.len() != len {
                return Err(Error::Config(format!(
                    "thread `{}` {side} has {} ids, model expects {len}",
                    thread.id,
                    ids.len()
                )));
            }
            let n = mask.iter().take_while(|&&m| m).count();
            if mask[n..].iter().any(|&m| m) {
                return Err(Error::Contract(format!(
                    "thread `{}` {side} mask is not a prefix",
                    thread.id
                )));
            }
            Ok(n)
        };
        let n_post = check(&thread.post_ids, &thread.post_mask, l, "post")?;
        let n_comment = check(&thread.comment_ids, &thread.comment_mask, k, "comments")?;
        let build =
            |ids: &[usize], n: usize, len: usize, table: &EmbeddingTable, position: bool| -> Result<ChannelInput> {
                // An empty side is read as one padding token at position 0.
                let tokens: &[usize] = if n == 0 { &[PAD_ID] } else { &ids[..n] };
                let (rows, mask) = if position {
                    embed_sequence(tokens, table, len)?
                } else {
                    lookup_sequence(tokens, table, len)?
                };
                Ok(match layout {
                    SequenceLayout::Padded => ChannelInput { rows, mask },
                    SequenceLayout::Compact => {
                        let real = tokens.len();
                        let width = rows.cols();
                        let data = rows.data()[..real * width].to_vec();
                        ChannelInput {
                            rows: Tensor::matrix(real, width, data)?,
                            mask: vec![true; real],
                        }
                    }
                })
            };
        Ok([
            build(&thread.post_ids, n_post, l, &self.word_table, true)?,
            build(&thread.post_ids, n_post, l, &self.emotion_table, false)?,
            build(&thread.comment_ids, n_comment, k, &self.word_table, true)?,
            build(&thread.comment_ids, n_comment, k, &self.emotion_table, false)?,
        ])
    }

    fn interactions(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        post: Var,
        comment: Var,
    ) -> Result<(Option<[Var; 4]>, Option<GainOutput>)> {
        let g = &self.gain;
        Ok(match self.config.variant.interaction_source() {
            InteractionSource::Adaptive => {
                let out = gain(tape, bound, g, post, comment)?;
                (Some(out.interaction), Some(out))
            }
            InteractionSource::Refined => {
                let (_, refined) = refining_gate(tape, bound, g, post, comment)?;
                (Some(project_all(tape, bound, &g.interaction, refined)?), None)
            }
            InteractionSource::Conflicting => {
                let (_, conflicting) = conflicting_gate(tape, bound, g, post, comment)?;
                (Some(project_all(tape, bound, &g.interaction, conflicting)?), None)
            }
            InteractionSource::GateConcat => {
                let (_, refined) = refining_gate(tape, bound, g, post, comment)?;
                let (_, conflicting) = conflicting_gate(tape, bound, g, post, comment)?;
                let joined = tape.concat(&[refined, conflicting], 0)?;
                (Some(project_all(tape, bound, &g.concat_interaction, joined)?), None)
            }
            InteractionSource::PooledConcat => {
                let joined = tape.concat(&[post, comment], 0)?;
                (Some(project_all(tape, bound, &g.concat_interaction, joined)?), None)
            }
            InteractionSource::None => (None, None),
        })
    }

    /// Forward pass of one thread on `tape`.
    pub fn forward_thread(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        thread: &TokenizedThread,
        mode: &mut ForwardMode<'_>,
        layout: SequenceLayout,
    ) -> Result<ThreadTrace> {
        let rate = self.config.dropout;
        let inputs = self.channel_inputs(thread, layout)?;
        let mut encoded = Vec::with_capacity(4);
        for (c, input) in inputs.iter().enumerate() {
            let x = tape.constant(input.rows.clone());
            let x = mode.dropout(tape, x, rate)?;
            encoded.push(self.encoders[c].encode(tape, bound, x, &input.mask)?);
        }
        let masks: [Vec<bool>; 4] = inputs.map(|i| i.mask);
        let variant = self.config.variant;

        let mut pooled = Vec::with_capacity(4);
        let mut argmax: [Vec<usize>; 4] = Default::default();
        let mut interaction: [Option<Var>; 4] = [None; 4];
        let mut gain_trace = None;
        if variant.uses_attention() {
            let (post, comment, _) = pool_and_concat(
                tape,
                [
                    (encoded[0], &masks[0]),
                    (encoded[1], &masks[1]),
                    (encoded[2], &masks[2]),
                    (encoded[3], &masks[3]),
                ],
            )?;
            let (t, trace) = self.interactions(tape, bound, post, comment)?;
            gain_trace = trace;
            let fused = variant.fused_channels();
            for c in 0..4 {
                interaction[c] = t.filter(|_| fused[c]).map(|t| t[c]);
                let out = sfsn_channel(
                    tape,
                    bound,
                    &self.channels[c],
                    encoded[c],
                    interaction[c],
                    &masks[c],
                    mode,
                    rate,
                )?;
                pooled.push(out.pooled);
                argmax[c] = out.argmax;
            }
        } else {
            for c in 0..4 {
                let (p, arg) = tape.max_pool(encoded[c], Some(&masks[c]))?;
                pooled.push(p);
                argmax[c] = arg;
            }
        }
        let pooled: [Var; 4] = [pooled[0], pooled[1], pooled[2], pooled[3]];
        let (_, _, joint) = integrate_channels(tape, pooled)?;
        let probs = self.classifier.forward(tape, bound, joint)?;
        Ok(ThreadTrace {
            probs,
            pooled,
            argmax,
            masks,
            interaction,
            gain: gain_trace,
        })
    }

    /// `B×2` probabilities for a batch, recorded on `tape`.
    pub fn forward_batch(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        batch: &[&TokenizedThread],
        mode: &mut ForwardMode<'_>,
    ) -> Result<Var> {
        if batch.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        let mut rows = Vec::with_capacity(batch.len());
        for thread in batch {
            rows.push(
                self.forward_thread(tape, bound, thread, mode, SequenceLayout::Compact)?
                    .probs,
            );
        }
        tape.stack(&rows)
    }

    /// `B×2` probabilities on a private tape.
    pub fn forward(&self, batch: &[TokenizedThread], mode: &mut ForwardMode<'_>) -> Result<Tensor> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let refs: Vec<&TokenizedThread> = batch.iter().collect();
        let probs = self.forward_batch(&mut tape, &bound, &refs, mode)?;
        Ok(tape.value(probs).clone())
    }

    /// Infer-mode probabilities, one independent tape per thread, in parallel.
    pub fn predict_proba(&self, threads: &[TokenizedThread]) -> Result<Vec<[f64; 2]>> {
        threads
            .par_iter()
            .map(|t| {
                let mut tape = Tape::new();
                let bound = self.params.bind(&mut tape);
                let trace =
                    self.forward_thread(&mut tape, &bound, t, &mut ForwardMode::Infer, SequenceLayout::Compact)?;
                let p = tape.value(trace.probs).data();
                Ok([p[0], p[1]])
            })
            .collect()
    }

    /// Arg-max class per thread; ties go to class 0.
    pub fn predict(&self, threads: &[TokenizedThread]) -> Result<Vec<usize>> {
        Ok(self
            .predict_proba(threads)?
            .into_iter()
            .map(|p| usize::from(p[1] > p[0]))
            .collect())
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }
}

/// Mean of `−ln max(p[label], 1e-12)` over the batch.
pub fn cross_entropy(tape: &mut Tape, probs: Var, labels: &[usize]) -> Result<Var> {
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::Contract(format!("label {bad} outside {{0, 1}}")));
    }
    let picked = tape.gather(probs, labels)?;
    let logs = tape.ln_clamped(picked, 1e-12);
    let mean = tape.mean(logs);
    Ok(tape.scale(mean, -1.0))
}

/// [`cross_entropy`] on plain values.
pub fn loss(probs: &Tensor, labels: &[usize]) -> Result<f64> {
    let mut tape = Tape::new();
    let p = tape.constant(probs.clone());
    let l = cross_entropy(&mut tape, p, labels)?;
    tape.value(l).item()
}
