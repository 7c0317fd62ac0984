//! Straight-line forward pass over plain `Vec<f64>` values, reading every
//! parameter by name. Shares no code with the tape implementation.

use aifn_core::corpus::TokenizedThread;
use aifn_core::fusion::FusionKind;
use aifn_core::model::{Aifn, Variant};

type Mat = Vec<Vec<f64>>;

const CH: [&str; 4] = ["post_word", "post_emotion", "comment_word", "comment_emotion"];

fn param(model: &Aifn, name: &str) -> Vec<f64> {
    model
        .params()
        .by_name(name)
        .unwrap_or_else(|| panic!("missing parameter {name}"))
        .data()
        .to_vec()
}

fn matrix(model: &Aifn, name: &str, rows: usize) -> Mat {
    let flat = param(model, name);
    let cols = flat.len() / rows;
    assert_eq!(rows * cols, flat.len(), "{name}");
    flat.chunks(cols).map(<[f64]>::to_vec).collect()
}

fn vecmat(x: &[f64], w: &Mat) -> Vec<f64> {
    let cols = w[0].len();
    let mut out = vec![0.0; cols];
    for (xi, row) in x.iter().zip(w) {
        for j in 0..cols {
            out[j] += xi * row[j];
        }
    }
    out
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn max_pool(x: &Mat) -> Vec<f64> {
    (0..x[0].len())
        .map(|j| x.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

fn lstm_direction(model: &Aifn, prefix: &str, x: &Mat, reverse: bool) -> Mat {
    let in_dim = x[0].len();
    let wi = matrix(model, &format!("{prefix}.w_input"), in_dim);
    let b = param(model, &format!("{prefix}.bias"));
    let hsize = b.len() / 4;
    let wh = matrix(model, &format!("{prefix}.w_hidden"), hsize);
    let mut h = vec![0.0; hsize];
    let mut c = vec![0.0; hsize];
    let mut out = vec![vec![0.0; hsize]; x.len()];
    let order: Vec<usize> = if reverse {
        (0..x.len()).rev().collect()
    } else {
        (0..x.len()).collect()
    };
    for t in order {
        let z = add(&add(&vecmat(&x[t], &wi), &b), &vecmat(&h, &wh));
        for u in 0..hsize {
            let i = sigmoid(z[u]);
            let f = sigmoid(z[hsize + u]);
            let o = sigmoid(z[2 * hsize + u]);
            let g = z[3 * hsize + u].tanh();
            c[u] = f * c[u] + i * g;
            h[u] = o * c[u].tanh();
        }
        out[t] = h.clone();
    }
    out
}

fn bilstm(model: &Aifn, channel: usize, x: &Mat) -> Mat {
    let prefix = format!("encoder.{}", CH[channel]);
    let f = lstm_direction(model, &format!("{prefix}.fwd"), x, false);
    let b = lstm_direction(model, &format!("{prefix}.bwd"), x, true);
    f.into_iter()
        .zip(b)
        .map(|(mut a, b)| {
            a.extend(b);
            a
        })
        .collect()
}

fn attention(model: &Aifn, prefix: &str, x: &Mat, heads: usize) -> Mat {
    let width = x[0].len();
    let dk = width / heads;
    let mut joined = vec![Vec::with_capacity(width); x.len()];
    for head in 0..heads {
        let q_w = matrix(model, &format!("{prefix}.head{head}.query"), width);
        let k_w = matrix(model, &format!("{prefix}.head{head}.key"), width);
        let v_w = matrix(model, &format!("{prefix}.head{head}.value"), width);
        let q: Mat = x.iter().map(|r| vecmat(r, &q_w)).collect();
        let k: Mat = x.iter().map(|r| vecmat(r, &k_w)).collect();
        let v: Mat = x.iter().map(|r| vecmat(r, &v_w)).collect();
        for i in 0..x.len() {
            let scores: Vec<f64> = k
                .iter()
                .map(|kj| q[i].iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() / (dk as f64).sqrt())
                .collect();
            let w = softmax(&scores);
            let mut o = vec![0.0; dk];
            for (wj, vj) in w.iter().zip(&v) {
                for d in 0..dk {
                    o[d] += wj * vj[d];
                }
            }
            joined[i].extend(o);
        }
    }
    let out_w = matrix(model, &format!("{prefix}.output"), width);
    joined.iter().map(|r| vecmat(r, &out_w)).collect()
}

fn channel_stack(model: &Aifn, channel: usize, h: &Mat, t: Option<&[f64]>) -> Vec<f64> {
    let cfg = model.config();
    let width = h[0].len();
    let mut x = h.clone();
    for b in 0..cfg.block_count {
        let p = format!("sfsn.{}.block{b}", CH[channel]);
        let attended = attention(model, &format!("{p}.attention"), &x, cfg.head_count);
        let fused: Mat = match t {
            None => attended,
            Some(t) => match cfg.fusion {
                FusionKind::Multiply => attended
                    .iter()
                    .map(|r| r.iter().zip(t).map(|(a, b)| a * b).collect())
                    .collect(),
                FusionKind::Add => attended.iter().map(|r| add(r, t)).collect(),
                FusionKind::Concat => {
                    let w = matrix(model, &format!("{p}.fuse"), 2 * width);
                    attended
                        .iter()
                        .map(|r| {
                            let mut joined = r.clone();
                            joined.extend_from_slice(t);
                            vecmat(&joined, &w)
                        })
                        .collect()
                }
            },
        };
        let w1 = matrix(model, &format!("{p}.ffn.w1"), width);
        let b1 = param(model, &format!("{p}.ffn.b1"));
        let w2 = matrix(model, &format!("{p}.ffn.w2"), width);
        let b2 = param(model, &format!("{p}.ffn.b2"));
        let out: Mat = fused
            .iter()
            .map(|r| {
                let hidden: Vec<f64> = add(&vecmat(r, &w1), &b1).into_iter().map(|v| v.max(0.0)).collect();
                add(&vecmat(&hidden, &w2), &b2)
            })
            .collect();
        x = if cfg.residual {
            out.iter().zip(&x).map(|(a, b)| add(a, b)).collect()
        } else {
            out
        };
    }
    max_pool(&x)
}

fn gate(model: &Aifn, which: &str, xp: &[f64], xc: &[f64]) -> Vec<f64> {
    let w = xp.len();
    let a = vecmat(xp, &matrix(model, &format!("gain.{which}.gate_post"), w));
    let c = vecmat(xc, &matrix(model, &format!("gain.{which}.gate_comment"), w));
    add(&add(&a, &c), &param(model, &format!("gain.{which}.gate_bias")))
        .into_iter()
        .map(sigmoid)
        .collect()
}

fn gated_features(model: &Aifn, which: &str, xp: &[f64], mp: &[f64], xc: &[f64], mc: &[f64]) -> Vec<f64> {
    let w = xp.len();
    let p: Vec<f64> = xp.iter().zip(mp).map(|(a, b)| a * b).collect();
    let c: Vec<f64> = xc.iter().zip(mc).map(|(a, b)| a * b).collect();
    let z = add(
        &vecmat(&p, &matrix(model, &format!("gain.{which}.post"), w)),
        &vecmat(&c, &matrix(model, &format!("gain.{which}.comment"), w)),
    );
    add(&z, &param(model, &format!("gain.{which}.bias")))
        .into_iter()
        .map(f64::tanh)
        .collect()
}

fn project(model: &Aifn, kind: &str, channel: usize, s: &[f64]) -> Vec<f64> {
    let prefix = format!("gain.{kind}.{}", CH[channel]);
    let w = matrix(model, &format!("{prefix}.weight"), s.len());
    add(&vecmat(s, &w), &param(model, &format!("{prefix}.bias")))
        .into_iter()
        .map(f64::tanh)
        .collect()
}

/// `(interaction source, fused channels, attention used)`.
fn variant_plan(v: Variant) -> (&'static str, [bool; 4], bool) {
    let all = [true; 4];
    match v.name() {
        "full" => ("adaptive", all, true),
        "no_gain_concat" => ("pooled", all, true),
        "no_conflicting" => ("refined", all, true),
        "no_refining" => ("conflicting", all, true),
        "no_adaptive" => ("gates", all, true),
        "sfsn_minus_post_word" => ("adaptive", [false, true, true, true], true),
        "sfsn_minus_post_emotion" => ("adaptive", [true, false, true, true], true),
        "sfsn_minus_comment_word" => ("adaptive", [true, true, false, true], true),
        "sfsn_minus_comment_emotion" => ("adaptive", [true, true, true, false], true),
        "no_sfsn" => ("none", [false; 4], true),
        "no_sfsn_no_gain" => ("none", [false; 4], false),
        other => panic!("unknown variant {other}"),
    }
}

/// Infer-mode class probabilities of one thread.
pub fn forward(model: &Aifn, thread: &TokenizedThread) -> [f64; 2] {
    let cfg = model.config();
    let real = |mask: &[bool]| mask.iter().filter(|&&m| m).count();
    let sides = [
        (&thread.post_ids, real(&thread.post_mask), cfg.post_len),
        (&thread.comment_ids, real(&thread.comment_mask), cfg.comment_len),
    ];
    let mut inputs: Vec<Mat> = Vec::new();
    for (ids, n, len) in sides {
        let tokens: Vec<usize> = if n == 0 { vec![0] } else { ids[..n].to_vec() };
        let word: Mat = tokens
            .iter()
            .enumerate()
            .map(|(pos, &id)| {
                let mut row = model.word_table().row(id).to_vec();
                row.extend((0..len).map(|j| if j == pos { 1.0 } else { 0.0 }));
                row
            })
            .collect();
        let emotion: Mat = tokens
            .iter()
            .map(|&id| model.emotion_table().row(id).to_vec())
            .collect();
        inputs.push(word);
        inputs.push(emotion);
    }
    let encoded: Vec<Mat> = inputs.iter().enumerate().map(|(c, x)| bilstm(model, c, x)).collect();

    let (source, fused, uses_attention) = variant_plan(cfg.variant);
    let pooled: Vec<Vec<f64>> = if uses_attention {
        let enc_pool: Vec<Vec<f64>> = encoded.iter().map(max_pool).collect();
        let xp = [enc_pool[0].clone(), enc_pool[1].clone()].concat();
        let xc = [enc_pool[2].clone(), enc_pool[3].clone()].concat();
        let conflicting = || {
            let mu = gate(model, "conflicting", &xp, &xc);
            let comp: Vec<f64> = mu.iter().map(|m| 1.0 - m).collect();
            gated_features(model, "conflicting", &xp, &mu, &xc, &comp)
        };
        let refining = || {
            let mu = gate(model, "refining", &xp, &xc);
            (gated_features(model, "refining", &xp, &mu, &xc, &mu), mu)
        };
        let t: Option<Vec<Vec<f64>>> = match source {
            "adaptive" => {
                let f = conflicting();
                let (r, mu) = refining();
                let s: Vec<f64> = (0..r.len()).map(|i| r[i] + (1.0 - mu[i]) * f[i]).collect();
                Some((0..4).map(|c| project(model, "interaction", c, &s)).collect())
            }
            "refined" => {
                let (r, _) = refining();
                Some((0..4).map(|c| project(model, "interaction", c, &r)).collect())
            }
            "conflicting" => {
                let f = conflicting();
                Some((0..4).map(|c| project(model, "interaction", c, &f)).collect())
            }
            "gates" => {
                let (r, _) = refining();
                let joined = [r, conflicting()].concat();
                Some(
                    (0..4)
                        .map(|c| project(model, "concat_interaction", c, &joined))
                        .collect(),
                )
            }
            "pooled" => {
                let joined = [xp.clone(), xc.clone()].concat();
                Some(
                    (0..4)
                        .map(|c| project(model, "concat_interaction", c, &joined))
                        .collect(),
                )
            }
            _ => None,
        };
        (0..4)
            .map(|c| {
                let tc = t.as_ref().filter(|_| fused[c]).map(|t| t[c].as_slice());
                channel_stack(model, c, &encoded[c], tc)
            })
            .collect()
    } else {
        encoded.iter().map(max_pool).collect()
    };

    let joint = pooled.concat();
    let w = matrix(model, "classifier.weight", joint.len());
    let logits = add(&vecmat(&joint, &w), &param(model, "classifier.bias"));
    let p = softmax(&logits);
    [p[0], p[1]]
}
