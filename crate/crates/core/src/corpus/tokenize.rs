use serde::{Deserialize, Serialize};

use super::thread::Thread;
use super::vocab::Vocabulary;
use crate::layers::PAD_ID;

/// Lowercased maximal runs of alphanumeric characters. Whitespace,
/// punctuation and symbols separate tokens and are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Tokens of all comments, earliest timestamp first.
pub fn comment_tokens(thread: &Thread) -> Vec<String> {
    thread
        .chronological_comments()
        .iter()
        .flat_map(|c| tokenize(&c.text))
        .collect()
}

/// A thread mapped to fixed-length id sequences.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedThread {
    pub id: String,
    /// Exactly `l` ids, padded with `PAD_ID`.
    pub post_ids: Vec<usize>,
    /// Exactly `k` ids, padded with `PAD_ID`.
    pub comment_ids: Vec<usize>,
    pub post_mask: Vec<bool>,
    pub comment_mask: Vec<bool>,
    pub label: usize,
    /// Real tokens dropped by truncation, per side.
    pub post_overflow: usize,
    pub comment_overflow: usize,
}

impl TokenizedThread {
    pub fn post_len(&self) -> usize {
        self.post_mask.iter().filter(|&&m| m).count()
    }

    pub fn comment_len(&self) -> usize {
        self.comment_mask.iter().filter(|&&m| m).count()
    }

    pub fn truncated(&self) -> bool {
        self.post_overflow > 0 || self.comment_overflow > 0
    }
}

fn pad(tokens: &[String], vocab: &Vocabulary, len: usize) -> (Vec<usize>, Vec<bool>, usize) {
    let kept = tokens.len().min(len);
    let mut ids: Vec<usize> = tokens[..kept].iter().map(|t| vocab.id(t)).collect();
    ids.resize(len, PAD_ID);
    let mask = (0..len).map(|i| i < kept).collect();
    (ids, mask, tokens.len() - kept)
}

/// Tokenizes, truncates and pads a thread to `(l, k)`.
pub fn tokenize_and_pad(thread: &Thread, vocab: &Vocabulary, l: usize, k: usize) -> TokenizedThread {
    let (post_ids, post_mask, post_overflow) = pad(&tokenize(&thread.post), vocab, l);
    let (comment_ids, comment_mask, comment_overflow) = pad(&comment_tokens(thread), vocab, k);
    TokenizedThread {
        id: thread.id.clone(),
        post_ids,
        comment_ids,
        post_mask,
        comment_mask,
        label: thread.label.index(),
        post_overflow,
        comment_overflow,
    }
}
