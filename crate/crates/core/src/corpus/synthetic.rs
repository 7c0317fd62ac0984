//! Synthetic threads whose labels live in post/comment interactions.
//!
//! Posts assert one side of an antonym pair (`posN` / `negN`) and carry an
//! emotion token. Comments of true threads repeat the asserted side; comments
//! of false threads switch to the antonym with probability equal to the
//! conflict strength, and echo the post's emotion class with probability
//! equal to the emotion strength. No single token is informative on its own:
//! both sides of every pair occur equally often in each class.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::thread::{write_jsonl, Comment, Label, Thread};
use super::tokenize::{comment_tokens, tokenize};
use crate::error::{Error, Result};

const EMOTIONS: [&str; 6] = ["joy", "anger", "fear", "sadness", "surprise", "disgust"];

/// Size presets for the generated lexicon and thread lengths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum VocabProfile {
    Tiny,
    #[default]
    Desk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProfileShape {
    pub pairs: usize,
    pub emotions: usize,
    pub tokens_per_emotion: usize,
    pub fillers: usize,
    pub assertions: (usize, usize),
    pub post_len: (usize, usize),
    pub comments: (usize, usize),
    pub comment_len: (usize, usize),
}

impl VocabProfile {
    pub fn shape(self) -> ProfileShape {
        match self {
            VocabProfile::Tiny => ProfileShape {
                pairs: 4,
                emotions: 2,
                tokens_per_emotion: 2,
                fillers: 8,
                assertions: (1, 1),
                post_len: (3, 5),
                comments: (1, 2),
                comment_len: (2, 4),
            },
            VocabProfile::Desk => ProfileShape {
                pairs: 8,
                emotions: 4,
                tokens_per_emotion: 3,
                fillers: 30,
                assertions: (1, 2),
                post_len: (5, 8),
                comments: (2, 4),
                comment_len: (3, 6),
            },
        }
    }

    /// Longest post and comment sequence this profile can produce.
    pub fn max_lengths(self) -> (usize, usize) {
        let s = self.shape();
        (s.post_len.1, s.comments.1 * s.comment_len.1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub threads: usize,
    pub profile: VocabProfile,
    pub conflict_strength: f64,
    pub emotion_strength: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(threads: usize, conflict_strength: f64, emotion_strength: f64, seed: u64) -> Self {
        SyntheticSpec {
            threads,
            profile: VocabProfile::Desk,
            conflict_strength,
            emotion_strength,
            seed,
        }
    }

    pub fn with_profile(mut self, profile: VocabProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("conflict", self.conflict_strength), ("emotion", self.emotion_strength)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} strength {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// The generated word lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub pairs: Vec<(String, String)>,
    pub emotions: Vec<Vec<String>>,
    pub fillers: Vec<String>,
}

impl Lexicon {
    fn new(shape: &ProfileShape) -> Self {
        Lexicon {
            pairs: (0..shape.pairs)
                .map(|i| (format!("pos{i}"), format!("neg{i}")))
                .collect(),
            emotions: EMOTIONS[..shape.emotions]
                .iter()
                .map(|e| (0..shape.tokens_per_emotion).map(|j| format!("{e}{j}")).collect())
                .collect(),
            fillers: (0..shape.fillers).map(|i| format!("w{i}")).collect(),
        }
    }

    pub fn antonym(&self, token: &str) -> Option<&str> {
        self.pairs.iter().find_map(|(a, b)| {
            if a == token {
                Some(b.as_str())
            } else if b == token {
                Some(a.as_str())
            } else {
                None
            }
        })
    }
}

/// Ground truth for one thread, written to the sidecar file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantRecord {
    pub id: String,
    pub label: Label,
    /// Positions in the chronological comment token sequence holding an
    /// antonym of a post assertion.
    pub comment_positions: Vec<usize>,
    /// Positions in the post token sequence of the contradicted assertions.
    pub post_positions: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub threads: Vec<Thread>,
    pub plants: Vec<PlantRecord>,
    pub lexicon: Lexicon,
}

impl SyntheticCorpus {
    /// Writes the corpus and, next to it, `<stem>.plants.jsonl`.
    pub fn write(&self, corpus_path: &Path) -> Result<std::path::PathBuf> {
        super::thread::write_corpus(corpus_path, &self.threads)?;
        let sidecar = sidecar_path(corpus_path);
        write_jsonl(&sidecar, &self.plants)?;
        Ok(sidecar)
    }
}

pub fn sidecar_path(corpus_path: &Path) -> std::path::PathBuf {
    let stem = corpus_path.file_stem().and_then(|s| s.to_str()).unwrap_or("corpus");
    corpus_path.with_file_name(format!("{stem}.plants.jsonl"))
}

fn range(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    rng.gen_range(lo..=hi)
}

struct Generator<'a> {
    rng: ChaCha8Rng,
    spec: &'a SyntheticSpec,
    shape: ProfileShape,
    lex: Lexicon,
}

impl Generator<'_> {
    fn filler(&mut self) -> String {
        self.lex.fillers.choose(&mut self.rng).cloned().unwrap_or_default()
    }

    fn emotion_token(&mut self, class: usize) -> String {
        self.lex.emotions[class]
            .choose(&mut self.rng)
            .cloned()
            .unwrap_or_default()
    }

    fn thread(&mut self, label: Label) -> (Thread, PlantRecord) {
        let asserted_pairs: Vec<usize> = {
            let n = range(&mut self.rng, self.shape.assertions);
            rand::seq::index::sample(&mut self.rng, self.shape.pairs, n).into_vec()
        };
        let sides: Vec<bool> = asserted_pairs.iter().map(|_| self.rng.gen()).collect();
        let side_token = |lex: &Lexicon, pair: usize, positive: bool| {
            let (a, b) = &lex.pairs[pair];
            if positive {
                a.clone()
            } else {
                b.clone()
            }
        };
        let post_emotion = self.rng.gen_range(0..self.shape.emotions);

        let mut post: Vec<String> = asserted_pairs
            .iter()
            .zip(&sides)
            .map(|(&p, &s)| side_token(&self.lex, p, s))
            .collect();
        post.push(self.emotion_token(post_emotion));
        let post_len = range(&mut self.rng, self.shape.post_len).max(post.len());
        while post.len() < post_len {
            let f = self.filler();
            post.push(f);
        }
        post.shuffle(&mut self.rng);

        let n_comments = range(&mut self.rng, self.shape.comments);
        let mut references: Vec<bool> = (0..n_comments).map(|_| self.rng.gen_bool(0.6)).collect();
        if !references.iter().any(|&r| r) {
            let i = self.rng.gen_range(0..n_comments);
            references[i] = true;
        }

        let is_false = label == Label::False;
        let mut comments = Vec::with_capacity(n_comments);
        let mut planted_tokens: Vec<Vec<usize>> = Vec::with_capacity(n_comments);
        let mut contradicted = Vec::new();
        for &refers in &references {
            let mut tokens = Vec::new();
            let mut plant = None;
            if refers {
                let which = self.rng.gen_range(0..asserted_pairs.len());
                let flip = is_false && self.rng.gen_bool(self.spec.conflict_strength);
                tokens.push(side_token(&self.lex, asserted_pairs[which], sides[which] ^ flip));
                if flip {
                    plant = Some(tokens[0].clone());
                    contradicted.push(side_token(&self.lex, asserted_pairs[which], sides[which]));
                }
            }
            if self.rng.gen_bool(0.5) {
                let class = if is_false && self.rng.gen_bool(self.spec.emotion_strength) {
                    post_emotion
                } else {
                    self.rng.gen_range(0..self.shape.emotions)
                };
                let e = self.emotion_token(class);
                tokens.push(e);
            }
            let len = range(&mut self.rng, self.shape.comment_len).max(tokens.len());
            while tokens.len() < len {
                let f = self.filler();
                tokens.push(f);
            }
            tokens.shuffle(&mut self.rng);
            planted_tokens.push(match &plant {
                Some(p) => tokens
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| *t == p)
                    .map(|(i, _)| i)
                    .collect(),
                None => Vec::new(),
            });
            comments.push(tokens);
        }

        let mut comment_positions = Vec::new();
        let mut offset = 0;
        let mut timed = Vec::with_capacity(n_comments);
        for (j, (tokens, planted)) in comments.iter().zip(&planted_tokens).enumerate() {
            comment_positions.extend(planted.iter().map(|p| offset + p));
            offset += tokens.len();
            let ts = 1000.0 + 60.0 * j as f64 + self.rng.gen_range(0..30) as f64;
            timed.push(Comment {
                text: tokens.join(" "),
                ts,
            });
        }
        timed.shuffle(&mut self.rng);
        comment_positions.sort_unstable();
        comment_positions.dedup();

        let mut post_positions: Vec<usize> = post
            .iter()
            .enumerate()
            .filter(|(_, t)| contradicted.contains(t))
            .map(|(i, _)| i)
            .collect();
        post_positions.sort_unstable();

        let thread = Thread {
            id: String::new(),
            post: post.join(" "),
            comments: timed,
            label,
            split: None,
        };
        let record = PlantRecord {
            id: String::new(),
            label,
            comment_positions,
            post_positions,
        };
        (thread, record)
    }
}

/// Generates a label-balanced corpus with recorded plant positions.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let shape = spec.profile.shape();
    let mut gen = Generator {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        spec,
        shape,
        lex: Lexicon::new(&shape),
    };
    let mut rows: Vec<(Thread, PlantRecord)> = (0..spec.threads)
        .map(|i| gen.thread(if i % 2 == 0 { Label::True } else { Label::False }))
        .collect();
    rows.shuffle(&mut gen.rng);
    let width = spec.threads.max(1).to_string().len();
    let (threads, plants) = rows
        .into_iter()
        .enumerate()
        .map(|(i, (mut t, mut p))| {
            let id = format!("syn{i:0width$}");
            t.id = id.clone();
            p.id = id;
            (t, p)
        })
        .unzip();
    Ok(SyntheticCorpus {
        threads,
        plants,
        lexicon: gen.lex,
    })
}

/// Counts comment tokens that are antonyms of some post token.
pub fn antonym_pair_count(lexicon: &Lexicon, thread: &Thread) -> usize {
    let post = tokenize(&thread.post);
    comment_tokens(thread)
        .iter()
        .filter(|c| lexicon.antonym(c).is_some_and(|a| post.iter().any(|p| p == a)))
        .count()
}

/// Predicts false exactly when any antonym pair spans post and comments.
pub fn antonym_oracle(lexicon: &Lexicon, thread: &Thread) -> Label {
    if antonym_pair_count(lexicon, thread) > 0 {
        Label::False
    } else {
        Label::True
    }
}
