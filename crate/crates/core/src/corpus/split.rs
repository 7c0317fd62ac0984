use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::thread::{Label, SplitTag, Thread};
use crate::error::{Error, Result};

pub const MIN_SPLIT_THREADS: usize = 10;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Split {
    pub train: Vec<Thread>,
    pub val: Vec<Thread>,
    pub test: Vec<Thread>,
}

impl Split {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

fn cut_sizes(n: usize) -> (usize, usize) {
    (n * 7 / 10, n / 10)
}

/// Seeded shuffle then a contiguous 70/10/20 cut: `train = ⌊0.7n⌋`,
/// `val = ⌊0.1n⌋`, test takes the rest.
pub fn split(threads: &[Thread], seed: u64) -> Result<Split> {
    check_size(threads.len())?;
    let mut order: Vec<&Thread> = threads.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (n_train, n_val) = cut_sizes(order.len());
    Ok(Split {
        train: order[..n_train].iter().map(|t| (*t).clone()).collect(),
        val: order[n_train..n_train + n_val].iter().map(|t| (*t).clone()).collect(),
        test: order[n_train + n_val..].iter().map(|t| (*t).clone()).collect(),
    })
}

/// Applies the 70/10/20 cut within each label so every subset keeps the
/// corpus label ratio. Subsets are shuffled after merging.
pub fn split_stratified(threads: &[Thread], seed: u64) -> Result<Split> {
    check_size(threads.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Split::default();
    for label in Label::ALL {
        let mut group: Vec<&Thread> = threads.iter().filter(|t| t.label == label).collect();
        group.shuffle(&mut rng);
        let (n_train, n_val) = cut_sizes(group.len());
        out.train.extend(group[..n_train].iter().map(|t| (*t).clone()));
        out.val
            .extend(group[n_train..n_train + n_val].iter().map(|t| (*t).clone()));
        out.test.extend(group[n_train + n_val..].iter().map(|t| (*t).clone()));
    }
    out.train.shuffle(&mut rng);
    out.val.shuffle(&mut rng);
    out.test.shuffle(&mut rng);
    Ok(out)
}

/// Uses each thread's `split` field; every thread must carry one.
pub fn split_by_tag(threads: &[Thread]) -> Result<Split> {
    let mut out = Split::default();
    for t in threads {
        let dest = match t.split {
            Some(SplitTag::Train) => &mut out.train,
            Some(SplitTag::Val) => &mut out.val,
            Some(SplitTag::Test) => &mut out.test,
            None => return Err(Error::Config(format!("thread `{}` has no split tag", t.id))),
        };
        dest.push(t.clone());
    }
    Ok(out)
}

fn check_size(n: usize) -> Result<()> {
    if n < MIN_SPLIT_THREADS {
        return Err(Error::Size(format!(
            "splitting needs at least {MIN_SPLIT_THREADS} threads, got {n}"
        )));
    }
    Ok(())
}
