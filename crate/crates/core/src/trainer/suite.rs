use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::MetricsReport;
use super::train::{prepare_data, train, PreparedData, TrainConfig, REPORT_SCHEMA_VERSION};
use crate::corpus::Split;
use crate::error::{Error, Result};
use crate::model::{Aifn, ModelConfig, Suite, Variant};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub config_hash: String,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub val_accuracy: f64,
    /// Test metrics, or validation metrics when there is no test subset.
    pub metrics: MetricsReport,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub variant: Variant,
    pub label: String,
    pub runs: Vec<SeedRun>,
    pub mean: Option<MetricSummary>,
    /// Sample standard deviation; zero for a single seed.
    pub sd: Option<MetricSummary>,
    /// One message per failed seed; other seeds and variants still run.
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub suite: Option<Suite>,
    pub seeds: Vec<u64>,
    pub rows: Vec<SuiteRow>,
    /// Every successful run with the same seed shares one config hash.
    pub fair: bool,
}

impl SuiteReport {
    pub fn row(&self, variant: Variant) -> Option<&SuiteRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    /// Plain-text table of mean ± sd percentages.
    pub fn render_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(7);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>13}  {:>13}  {:>13}  {:>13}",
            "Variant", "A (%)", "P (%)", "R (%)", "F1 (%)"
        );
        for row in &self.rows {
            let _ = write!(out, "{:<width$}", row.label);
            match (row.mean, row.sd) {
                (Some(m), Some(s)) => {
                    for (mv, sv) in [
                        (m.accuracy, s.accuracy),
                        (m.precision, s.precision),
                        (m.recall, s.recall),
                        (m.f1, s.f1),
                    ] {
                        let _ = write!(out, "  {:>13}", format!("{:.2}±{:.2}", 100.0 * mv, 100.0 * sv));
                    }
                }
                _ => out.push_str("  failed"),
            }
            if !row.errors.is_empty() {
                let _ = write!(out, "  ({} error(s))", row.errors.len());
            }
            out.push('\n');
        }
        out
    }
}

fn summarize(runs: &[SeedRun]) -> Option<(MetricSummary, MetricSummary)> {
    if runs.is_empty() {
        return None;
    }
    let n = runs.len() as f64;
    let fields = |r: &SeedRun| [r.metrics.accuracy, r.metrics.precision, r.metrics.recall, r.metrics.f1];
    let mut mean = [0.0; 4];
    for r in runs {
        for (m, v) in mean.iter_mut().zip(fields(r)) {
            *m += v / n;
        }
    }
    let mut var = [0.0; 4];
    if runs.len() > 1 {
        for r in runs {
            for ((s, v), m) in var.iter_mut().zip(fields(r)).zip(mean) {
                *s += (v - m) * (v - m) / (n - 1.0);
            }
        }
    }
    let pack = |a: [f64; 4]| MetricSummary {
        accuracy: a[0],
        precision: a[1],
        recall: a[2],
        f1: a[3],
    };
    Some((pack(mean), pack(var.map(f64::sqrt))))
}

fn run_one(
    data: &PreparedData,
    base: &ModelConfig,
    variant: Variant,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<SeedRun> {
    let mut config = base.clone().with_variant(variant);
    config.seed = seed;
    let mut cfg = train_cfg.clone();
    cfg.seed = seed;
    cfg.checkpoint_dir = train_cfg
        .checkpoint_dir
        .as_ref()
        .map(|d| d.join(variant.name()).join(format!("seed{seed}")));
    let mut model = Aifn::with_random_embeddings(config, data.vocab.clone())?;
    let run = train(&mut model, data, &cfg)?;
    Ok(SeedRun {
        seed,
        config_hash: run.config_hash,
        best_epoch: run.best_epoch,
        epochs_run: run.history.len(),
        val_accuracy: run.best_val_accuracy,
        metrics: run.test.unwrap_or(run.val),
    })
}

/// Trains every variant under every seed with the same split and schedule.
/// Runs are independent and execute in parallel.
pub fn run_ablation_suite(
    split: &Split,
    base: &ModelConfig,
    variants: &[Variant],
    train_cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<SuiteReport> {
    if variants.is_empty() || seeds.is_empty() {
        return Err(Error::Config("suite needs at least one variant and one seed".into()));
    }
    train_cfg.validate()?;
    let data = prepare_data(split, base, train_cfg.min_freq)?;
    let jobs: Vec<(Variant, u64)> = variants
        .iter()
        .flat_map(|&v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let results: Vec<Result<SeedRun>> = jobs
        .par_iter()
        .map(|&(v, s)| run_one(&data, base, v, train_cfg, s))
        .collect();

    let mut rows: Vec<SuiteRow> = variants
        .iter()
        .map(|&v| SuiteRow {
            variant: v,
            label: v.label().to_string(),
            runs: Vec::new(),
            mean: None,
            sd: None,
            errors: Vec::new(),
        })
        .collect();
    for ((v, s), r) in jobs.iter().zip(results) {
        let row = rows
            .iter_mut()
            .find(|row| row.variant == *v)
            .ok_or_else(|| Error::Config("duplicate variant".into()))?;
        match r {
            Ok(run) => row.runs.push(run),
            Err(e) => {
                log::error!("variant {v} seed {s} failed: {e}");
                row.errors.push(format!("seed {s}: {e}"));
            }
        }
    }
    let mut hashes: BTreeMap<u64, &str> = BTreeMap::new();
    let mut fair = true;
    for row in &rows {
        for run in &row.runs {
            let h = hashes.entry(run.seed).or_insert(&run.config_hash);
            fair &= *h == run.config_hash;
        }
    }
    for row in &mut rows {
        if let Some((m, s)) = summarize(&row.runs) {
            row.mean = Some(m);
            row.sd = Some(s);
        }
    }
    Ok(SuiteReport {
        schema_version: REPORT_SCHEMA_VERSION,
        suite: None,
        seeds: seeds.to_vec(),
        rows,
        fair,
    })
}

/// [`run_ablation_suite`] over a named variant group, with its row labels.
pub fn run_named_suite(
    split: &Split,
    base: &ModelConfig,
    suite: Suite,
    train_cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<SuiteReport> {
    let mut report = run_ablation_suite(split, base, &suite.variants(), train_cfg, seeds)?;
    for row in &mut report.rows {
        row.label = suite.row_label(row.variant).to_string();
    }
    report.suite = Some(suite);
    Ok(report)
}
