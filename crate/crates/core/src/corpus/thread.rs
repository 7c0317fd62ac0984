use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Veracity label. Index 0 is true news, 1 is false news.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    True,
    False,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::True, Label::False];

    pub fn index(self) -> usize {
        match self {
            Label::True => 0,
            Label::False => 1,
        }
    }

    pub fn from_index(i: usize) -> Result<Label> {
        match i {
            0 => Ok(Label::True),
            1 => Ok(Label::False),
            _ => Err(Error::Contract(format!("label index {i} outside {{0, 1}}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::True => "true",
            Label::False => "false",
        }
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "true" => Ok(Label::True),
            "false" => Ok(Label::False),
            other => Err(Error::Config(format!("unknown label `{other}`"))),
        }
    }
}

/// Optional subset assignment carried by a corpus line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comment {
    pub text: String,
    pub ts: f64,
}

/// A source post, its comments, and a veracity label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thread {
    pub id: String,
    pub post: String,
    #[serde(default)]
    pub comments: Vec<Comment>,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitTag>,
}

impl Thread {
    /// Comments in timestamp order; equal timestamps keep file order.
    pub fn chronological_comments(&self) -> Vec<&Comment> {
        let mut c: Vec<&Comment> = self.comments.iter().collect();
        c.sort_by(|a, b| a.ts.total_cmp(&b.ts));
        c
    }
}

#[derive(Deserialize)]
struct RawThread {
    id: String,
    post: String,
    #[serde(default)]
    comments: Vec<Comment>,
    label: String,
    #[serde(default)]
    split: Option<SplitTag>,
}

#[derive(Clone, Debug, Default)]
pub struct ParsedCorpus {
    pub threads: Vec<Thread>,
    /// Lines labelled "unverified", which are skipped.
    pub dropped_unverified: usize,
}

/// Reads a JSON-lines corpus: one `{id, post, comments[{text, ts}], label}`
/// object per line. Blank lines are ignored.
pub fn parse_corpus(path: impl AsRef<Path>) -> Result<ParsedCorpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus_reader(BufReader::new(file), path)
}

pub fn parse_corpus_reader<R: BufRead>(reader: R, path: &Path) -> Result<ParsedCorpus> {
    let err = |line: usize, message: String| Error::Corpus {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut out = ParsedCorpus::default();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| err(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawThread = serde_json::from_str(&line).map_err(|e| err(lineno, e.to_string()))?;
        let label = match raw.label.as_str() {
            "unverified" => {
                out.dropped_unverified += 1;
                continue;
            }
            other => other.parse::<Label>().map_err(|e| err(lineno, e.to_string()))?,
        };
        if raw.post.trim().is_empty() {
            return Err(err(lineno, format!("thread `{}` has an empty post", raw.id)));
        }
        if !seen.insert(raw.id.clone()) {
            return Err(err(lineno, format!("duplicate thread id `{}`", raw.id)));
        }
        out.threads.push(Thread {
            id: raw.id,
            post: raw.post,
            comments: raw.comments,
            label,
            split: raw.split,
        });
    }
    if out.dropped_unverified > 0 {
        log::warn!(
            "{}: dropped {} unverified thread(s)",
            path.display(),
            out.dropped_unverified
        );
    }
    Ok(out)
}

pub fn write_corpus(path: impl AsRef<Path>, threads: &[Thread]) -> Result<()> {
    write_jsonl(path, threads)
}

pub(crate) fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
