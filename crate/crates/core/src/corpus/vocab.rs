use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::thread::Thread;
use super::tokenize::{comment_tokens, tokenize};
use crate::error::{Error, Result};
use crate::layers::{OOV_ID, PAD_ID};

pub const PAD_TOKEN: &str = "<pad>";
pub const OOV_TOKEN: &str = "<oov>";

/// Token/id mapping with `0 = <pad>` and `1 = <oov>`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds from an id-ordered token list whose first two entries are
    /// the reserved tokens.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[PAD_ID] != PAD_TOKEN || tokens[OOV_ID] != OOV_TOKEN {
            return Err(Error::Format("vocabulary must start with <pad>, <oov>".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate().skip(2) {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary token `{t}`")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Id of `token`, or `OOV_ID` when unknown.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(OOV_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or(OOV_TOKEN, String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        Vocabulary::from_tokens(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

/// Keeps tokens seen at least `min_freq` times across posts and comments.
/// Ids follow descending frequency, ties broken lexicographically.
pub fn build_vocab(threads: &[Thread], min_freq: usize) -> Result<Vocabulary> {
    if min_freq == 0 {
        return Err(Error::Config("min_freq must be at least 1".into()));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for t in threads {
        for tok in tokenize(&t.post).into_iter().chain(comment_tokens(t)) {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let mut kept: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_freq && t != PAD_TOKEN && t != OOV_TOKEN)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let tokens = [PAD_TOKEN.to_string(), OOV_TOKEN.to_string()]
        .into_iter()
        .chain(kept.into_iter().map(|(t, _)| t))
        .collect();
    Vocabulary::from_tokens(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;

    fn posts(texts: &[&str]) -> Vec<Thread> {
        texts
            .iter()
            .enumerate()
            .map(|(i, p)| Thread {
                id: i.to_string(),
                post: p.to_string(),
                comments: vec![],
                label: Label::True,
                split: None,
            })
            .collect()
    }

    #[test]
    fn min_freq_filters() {
        let v = build_vocab(&posts(&["a a b"]), 2).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.id("a"), 2);
        assert_eq!(v.id("b"), OOV_ID);
    }

    #[test]
    fn min_freq_one_keeps_everything() {
        let v = build_vocab(&posts(&["x y", "z x"]), 1).unwrap();
        for t in ["x", "y", "z"] {
            assert!(v.contains(t));
        }
        assert_eq!(v.token(2), "x");
    }

    #[test]
    fn ties_break_lexicographically() {
        let v = build_vocab(&posts(&["pear apple fig"]), 1).unwrap();
        assert_eq!(&v.tokens()[2..], &["apple", "fig", "pear"]);
    }

    #[test]
    fn zero_min_freq_rejected() {
        assert!(matches!(build_vocab(&[], 0), Err(Error::Config(_))));
    }

    #[test]
    fn bijective_and_serde_round_trip() {
        let v = build_vocab(&posts(&["one two two three three three"]), 1).unwrap();
        for (i, t) in v.tokens().iter().enumerate().skip(2) {
            assert_eq!(v.id(t), i);
        }
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<Vocabulary>("[\"a\",\"b\"]").is_err());
    }
}
