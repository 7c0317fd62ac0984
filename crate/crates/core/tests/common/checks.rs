use aifn_core::corpus::TokenizedThread;
use aifn_core::fusion::{gain, sfsn_channel, FusionKind, GainParams, SfsnChannel, CHANNELS};
use aifn_core::layers::{BiRecurrent, DenseSoftmax, EncoderKind, FeedForward, ForwardMode, MultiHeadAttention};
use aifn_core::model::{cross_entropy, Aifn, Variant};
use aifn_core::params::{Bound, ParamStore};
use aifn_core::tensor::{grad_check, GradCheckOptions};
use aifn_core::{Result, Tape, Tensor, Var};
use rand_chacha::ChaCha8Rng;

use super::fixtures::{random_tensor, rng, tiny_model};

pub const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct Outcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Weighted sum with fixed random weights, so every output element matters.
fn probe(tape: &mut Tape, x: Var, seed: u64) -> Result<Var> {
    let shape = tape.shape(x).to_vec();
    let w = tape.constant(random_tensor(&mut rng(seed), &shape));
    let p = tape.mul(x, w)?;
    Ok(tape.sum(p))
}

fn grad_outcome<F>(name: &str, params: Vec<Tensor>, samples: Option<usize>, f: F) -> Outcome
where
    F: FnMut(&mut Tape, &[Var]) -> Result<Var>,
{
    let opts = GradCheckOptions {
        samples,
        seed: 17,
        ..GradCheckOptions::default()
    };
    match grad_check(f, &params, &opts) {
        Ok(r) => Outcome::new(
            name,
            r.max_rel_error < GRAD_TOLERANCE,
            format!("max rel err {:.2e} over {} coords", r.max_rel_error, r.checked),
        ),
        Err(e) => Outcome::new(name, false, format!("error: {e}")),
    }
}

fn t(seed: u64, shape: &[usize]) -> Tensor {
    random_tensor(&mut rng(seed), shape)
}

fn positive(seed: u64, shape: &[usize]) -> Tensor {
    let base = t(seed, shape);
    let data = base.data().iter().map(|v| 1.0 + 0.5 * v).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// One finite-difference check per tape operation.
pub fn operation_gradients() -> Vec<Outcome> {
    let keep = [true, false, true, true];
    vec![
        grad_outcome("matmul", vec![t(1, &[3, 4]), t(2, &[4, 2])], None, |tp, v| {
            let y = tp.matmul(v[0], v[1])?;
            probe(tp, y, 9)
        }),
        grad_outcome("matmul vector", vec![t(3, &[4]), t(4, &[4, 3])], None, |tp, v| {
            let y = tp.matmul(v[0], v[1])?;
            probe(tp, y, 9)
        }),
        grad_outcome("add broadcast", vec![t(5, &[3, 4]), t(6, &[4])], None, |tp, v| {
            let y = tp.add(v[0], v[1])?;
            probe(tp, y, 9)
        }),
        grad_outcome("sub", vec![t(7, &[2, 3]), t(8, &[2, 3])], None, |tp, v| {
            let y = tp.sub(v[0], v[1])?;
            probe(tp, y, 9)
        }),
        grad_outcome("mul broadcast", vec![t(10, &[3, 4]), t(11, &[4])], None, |tp, v| {
            let y = tp.mul(v[0], v[1])?;
            probe(tp, y, 9)
        }),
        grad_outcome("sigmoid", vec![t(12, &[2, 5])], None, |tp, v| {
            let y = tp.sigmoid(v[0]);
            probe(tp, y, 9)
        }),
        grad_outcome("tanh", vec![t(13, &[2, 5])], None, |tp, v| {
            let y = tp.tanh(v[0]);
            probe(tp, y, 9)
        }),
        grad_outcome("relu", vec![t(14, &[2, 5])], None, |tp, v| {
            let y = tp.relu(v[0]);
            probe(tp, y, 9)
        }),
        grad_outcome("softmax rows", vec![t(15, &[3, 4])], None, |tp, v| {
            let y = tp.softmax(v[0], 1)?;
            probe(tp, y, 9)
        }),
        grad_outcome("softmax columns", vec![t(16, &[3, 4])], None, |tp, v| {
            let y = tp.softmax(v[0], 0)?;
            probe(tp, y, 9)
        }),
        grad_outcome("masked_softmax", vec![t(17, &[4, 4])], None, |tp, v| {
            let y = tp.masked_softmax(v[0], &keep)?;
            probe(tp, y, 9)
        }),
        grad_outcome("concat", vec![t(18, &[2, 3]), t(19, &[2, 2])], None, |tp, v| {
            let y = tp.concat(&[v[0], v[1]], 1)?;
            probe(tp, y, 9)
        }),
        grad_outcome("stack", vec![t(20, &[3]), t(21, &[3])], None, |tp, v| {
            let y = tp.stack(&[v[0], v[1], v[0]])?;
            probe(tp, y, 9)
        }),
        grad_outcome("max_pool", vec![t(22, &[4, 3])], None, |tp, v| {
            let (y, _) = tp.max_pool(v[0], Some(&keep))?;
            probe(tp, y, 9)
        }),
        grad_outcome("transpose", vec![t(23, &[2, 3])], None, |tp, v| {
            let y = tp.transpose(v[0])?;
            probe(tp, y, 9)
        }),
        grad_outcome("affine, scale, one_minus", vec![t(24, &[5])], None, |tp, v| {
            let a = tp.affine(v[0], 1.5, -0.25);
            let b = tp.scale(a, -2.0);
            let c = tp.one_minus(b);
            probe(tp, c, 9)
        }),
        grad_outcome("sum and mean", vec![t(25, &[2, 3])], None, |tp, v| {
            let sq = tp.mul(v[0], v[0])?;
            let s = tp.sum(sq);
            let m = tp.mean(v[0]);
            let m = tp.mul(m, m)?;
            tp.add(s, m)
        }),
        grad_outcome("slice_cols, row, reshape", vec![t(26, &[3, 4])], None, |tp, v| {
            let s = tp.slice_cols(v[0], 1, 3)?;
            let r = tp.row(s, 2)?;
            let flat = tp.reshape(v[0], &[12])?;
            let a = probe(tp, r, 9)?;
            let b = probe(tp, flat, 8)?;
            tp.add(a, b)
        }),
        grad_outcome("ln_clamped", vec![positive(27, &[6])], None, |tp, v| {
            let y = tp.ln_clamped(v[0], 1e-12);
            probe(tp, y, 9)
        }),
        grad_outcome("gather", vec![t(28, &[3, 2])], None, |tp, v| {
            let y = tp.gather(v[0], &[1, 0, 1])?;
            probe(tp, y, 9)
        }),
    ]
}

/// Parameters of `store` followed by extra inputs, checked together.
fn layer_outcome<F>(name: &str, store: &ParamStore, inputs: Vec<Tensor>, mut f: F) -> Outcome
where
    F: FnMut(&mut Tape, &Bound, &[Var]) -> Result<Var>,
{
    let n = store.len();
    let mut params = store.values().to_vec();
    params.extend(inputs);
    grad_outcome(name, params, None, move |tp, v| {
        let bound = Bound::from_vars(v[..n].to_vec());
        f(tp, &bound, &v[n..])
    })
}

fn seeded() -> ChaCha8Rng {
    rng(31)
}

/// Layer and fusion building blocks with their parameters.
pub fn layer_gradients() -> Vec<Outcome> {
    let mut out = Vec::new();
    let mask = [true, true, true, false];
    for kind in [EncoderKind::Bilstm, EncoderKind::Bigru] {
        let mut s = ParamStore::new();
        let enc = BiRecurrent::new(&mut s, "enc", kind, 3, 2, &mut seeded()).unwrap();
        out.push(layer_outcome(
            &format!("{kind:?} encoder"),
            &s,
            vec![t(40, &[4, 3])],
            |tp, b, x| {
                let y = enc.encode(tp, b, x[0], &mask)?;
                probe(tp, y, 9)
            },
        ));
    }
    {
        let mut s = ParamStore::new();
        let mha = MultiHeadAttention::new(&mut s, "attn", 4, 2, &mut seeded()).unwrap();
        out.push(layer_outcome(
            "multi-head attention",
            &s,
            vec![t(41, &[4, 4])],
            |tp, b, x| {
                let y = mha.forward(tp, b, x[0], &mask)?;
                probe(tp, y, 9)
            },
        ));
    }
    {
        let mut s = ParamStore::new();
        let ffn = FeedForward::new(&mut s, "ffn", 4, &mut seeded()).unwrap();
        out.push(layer_outcome("feed-forward", &s, vec![t(42, &[3, 4])], |tp, b, x| {
            let y = ffn.forward(tp, b, x[0])?;
            probe(tp, y, 9)
        }));
    }
    {
        let mut s = ParamStore::new();
        let dense = DenseSoftmax::new(&mut s, "dense", 5, 2, &mut seeded()).unwrap();
        out.push(layer_outcome(
            "dense softmax + cross-entropy",
            &s,
            vec![t(43, &[3, 5])],
            |tp, b, x| {
                let p = dense.forward(tp, b, x[0])?;
                cross_entropy(tp, p, &[0, 1, 1])
            },
        ));
    }
    {
        let mut s = ParamStore::new();
        let g = GainParams::new(&mut s, "gain", 2, &mut seeded()).unwrap();
        out.push(layer_outcome(
            "gain (gates, adaptive, projections)",
            &s,
            vec![t(44, &[8]), t(45, &[8])],
            |tp, b, x| {
                let o = gain(tp, b, &g, x[0], x[1])?;
                let mut total = probe(tp, o.adaptive, 1)?;
                for (i, tv) in o.interaction.iter().enumerate() {
                    let p = probe(tp, *tv, 2 + i as u64)?;
                    total = tp.add(total, p)?;
                }
                Ok(total)
            },
        ));
    }
    for fusion in [FusionKind::Multiply, FusionKind::Add, FusionKind::Concat] {
        let mut s = ParamStore::new();
        let ch = SfsnChannel::new(&mut s, "sfsn", 4, 2, 2, fusion, false, &mut seeded()).unwrap();
        out.push(layer_outcome(
            &format!("fusion channel ({fusion:?})"),
            &s,
            vec![t(46, &[4, 4]), t(47, &[4])],
            |tp, b, x| {
                let o = sfsn_channel(tp, b, &ch, x[0], Some(x[1]), &mask, &mut ForwardMode::Infer, 0.0)?;
                probe(tp, o.pooled, 9)
            },
        ));
    }
    out
}

pub fn batch_loss(model: &Aifn, tape: &mut Tape, bound: &Bound, batch: &[&TokenizedThread]) -> Result<Var> {
    let probs = model.forward_batch(tape, bound, batch, &mut ForwardMode::Infer)?;
    let labels: Vec<usize> = batch.iter().map(|t| t.label).collect();
    cross_entropy(tape, probs, &labels)
}

/// Loss of the whole tiny model against 50 sampled parameter coordinates.
pub fn model_gradient(variant: Variant) -> Outcome {
    let (model, _, tokenized) = tiny_model(variant, 3);
    let batch: Vec<&TokenizedThread> = tokenized.iter().take(4).collect();
    let params = model.params().values().to_vec();
    grad_outcome(&format!("model {}", variant.name()), params, Some(50), |tp, v| {
        let bound = Bound::from_vars(v.to_vec());
        batch_loss(&model, tp, &bound, &batch)
    })
}

fn bits(t: &Tensor) -> Vec<u64> {
    t.data().iter().map(|v| v.to_bits()).collect()
}

fn all_equal(t: &Tensor, value: f64) -> bool {
    t.data().iter().all(|&v| v == value)
}

/// Degenerate cases of the gate, adaptive and fusion equations.
pub fn equation_identities() -> Vec<Outcome> {
    let mut out = Vec::new();
    let hidden = 3;
    let w = 4 * hidden;

    let mut store = ParamStore::new();
    let g = GainParams::new(&mut store, "gain", hidden, &mut seeded()).unwrap();
    let set = |store: &mut ParamStore, name: &str, value: f64| {
        store.by_name_mut(name).unwrap().data_mut().fill(value);
    };
    let run_gain = |store: &ParamStore, xp: &Tensor, xc: &Tensor| {
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let p = tape.constant(xp.clone());
        let c = tape.constant(xc.clone());
        let o = gain(&mut tape, &bound, &g, p, c).unwrap();
        let v = |x: Var| tape.value(x).clone();
        (
            v(o.conflict_gate),
            v(o.refine_gate),
            v(o.conflicting),
            v(o.refined),
            v(o.adaptive),
            o.interaction.map(|x| tape.value(x).clone()),
        )
    };
    let (xp, xc) = (t(50, &[w]), t(51, &[w]));

    let mut saturated = store.clone();
    set(&mut saturated, "gain.refining.gate_post", 0.0);
    set(&mut saturated, "gain.refining.gate_comment", 0.0);
    set(&mut saturated, "gain.refining.gate_bias", 40.0);
    let (_, mu_r, _, r, s, _) = run_gain(&saturated, &xp, &xc);
    out.push(Outcome::new(
        "μ_r ≡ 1 ⇒ S = R",
        all_equal(&mu_r, 1.0) && bits(&s) == bits(&r),
        "bit-exact comparison",
    ));

    let mut zero = store.clone();
    for v in zero.values_mut() {
        v.data_mut().fill(0.0);
    }
    let (mu_f, mu_r, f, r, s, tv) = run_gain(&zero, &xp, &xc);
    out.push(Outcome::new(
        "zero parameters ⇒ μ = 0.5, F = R = 0",
        all_equal(&mu_f, 0.5)
            && all_equal(&mu_r, 0.5)
            && all_equal(&f, 0.0)
            && all_equal(&r, 0.0)
            && all_equal(&s, 0.0)
            && tv.iter().all(|t| all_equal(t, 0.0)),
        "exact values",
    ));

    let (mu_f, ..) = run_gain(&store, &xp, &xc);
    let complement_ok = mu_f.data().iter().all(|&m| m + (1.0 - m) == 1.0 && m > 0.0 && m < 1.0);
    let mut post_only = store.clone();
    set(&mut post_only, "gain.conflicting.gate_post", 0.0);
    set(&mut post_only, "gain.conflicting.gate_comment", 0.0);
    set(&mut post_only, "gain.conflicting.gate_bias", 40.0);
    let (_, _, f1, ..) = run_gain(&post_only, &xp, &xc);
    let (_, _, f2, ..) = run_gain(&post_only, &xp, &t(52, &[w]));
    let drift = f1
        .data()
        .iter()
        .zip(f2.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    out.push(Outcome::new(
        "conflicting gate complementarity and saturation",
        complement_ok && drift < 1e-6,
        format!("F drift under comment perturbation {drift:.1e}"),
    ));

    let width = 2 * hidden;
    let mut s = ParamStore::new();
    let ch = SfsnChannel::new(&mut s, "sfsn", width, 2, 2, FusionKind::Multiply, false, &mut seeded()).unwrap();
    let h = t(53, &[5, width]);
    let mask = [true, true, true, true, false];
    let pooled = |interaction: Option<Tensor>| {
        let mut tape = Tape::new();
        let bound = s.bind(&mut tape);
        let hv = tape.constant(h.clone());
        let tv = interaction.map(|t| tape.constant(t));
        let o = sfsn_channel(&mut tape, &bound, &ch, hv, tv, &mask, &mut ForwardMode::Infer, 0.0).unwrap();
        tape.value(o.pooled).clone()
    };
    out.push(Outcome::new(
        "t ≡ 1 ⇒ fusion channel equals plain attention stack",
        bits(&pooled(Some(Tensor::new(vec![width], vec![1.0; width]).unwrap()))) == bits(&pooled(None)),
        "bit-exact comparison",
    ));

    let mut s = ParamStore::new();
    let mha = MultiHeadAttention::new(&mut s, "attn", 8, 4, &mut seeded()).unwrap();
    let mut tape = Tape::new();
    let bound = s.bind(&mut tape);
    let x = tape.constant(t(54, &[6, 8]));
    let mask = [true, true, false, true, true, false];
    let (_, weights) = mha.forward_traced(&mut tape, &bound, x, &mask).unwrap();
    let mut worst = 0.0f64;
    let mut masked_zero = true;
    for wv in weights {
        let a = tape.value(wv);
        for i in 0..6 {
            let row = &a.data()[i * 6..(i + 1) * 6];
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
            masked_zero &= row[2] == 0.0 && row[5] == 0.0;
        }
    }
    out.push(Outcome::new(
        "attention rows sum to 1",
        worst < 1e-9 && masked_zero,
        format!("max |row sum − 1| {worst:.1e}"),
    ));
    out
}

pub fn probabilities(model: &Aifn, threads: &[TokenizedThread]) -> Vec<u64> {
    model
        .forward(threads, &mut ForwardMode::Infer)
        .map(|p| bits(&p))
        .unwrap()
}

fn perturb(store: &mut ParamStore, ids: &[aifn_core::params::ParamId], seed: u64) {
    let mut r = rng(seed);
    for &id in ids {
        let shape = store.get(id).shape().to_vec();
        let noise = random_tensor(&mut r, &shape);
        for (v, n) in store.get_mut(id).data_mut().iter_mut().zip(noise.data()) {
            *v += 0.5 * n;
        }
    }
}

/// Perturbing the variant's unused parameters leaves outputs bit-identical,
/// while perturbing the used ones changes them.
pub fn dead_parameters(variant: Variant) -> Outcome {
    let (model, _, tokenized) = tiny_model(variant, 5);
    let base = probabilities(&model, &tokenized);
    let unused = model.unused_params();
    let mut touched = model.clone();
    perturb(touched.params_mut(), &unused, 1);
    let silent = probabilities(&touched, &tokenized) == base;

    let used: Vec<_> = (0..model.params().len())
        .map(|i| model.params().id(&model.params().names()[i]).unwrap())
        .filter(|id| !unused.contains(id))
        .collect();
    let mut live = model.clone();
    perturb(live.params_mut(), &used, 2);
    let responsive = probabilities(&live, &tokenized) != base;
    let expects_unused = variant != Variant::Full || !unused.is_empty();
    Outcome::new(
        format!("dead parameters {}", variant.name()),
        silent && responsive && expects_unused,
        format!("{} unused tensors", unused.len()),
    )
}

/// A full model whose interaction vectors are forced to ones matches the
/// no-fusion variant built from the same parameters.
pub fn no_sfsn_equivalence() -> Outcome {
    let (mut full, _, tokenized) = tiny_model(Variant::Full, 9);
    for c in CHANNELS {
        full.params_mut()
            .by_name_mut(&format!("gain.interaction.{c}.weight"))
            .unwrap()
            .data_mut()
            .fill(0.0);
        full.params_mut()
            .by_name_mut(&format!("gain.interaction.{c}.bias"))
            .unwrap()
            .data_mut()
            .fill(40.0);
    }
    let (mut plain, _, _) = tiny_model(Variant::NoSfsn, 9);
    plain.params_mut().load_values(full.params().values().to_vec()).unwrap();
    let same = probabilities(&full, &tokenized) == probabilities(&plain, &tokenized);
    Outcome::new("t ≡ 1 model equals no_sfsn", same, "bit-exact over 8 threads")
}
