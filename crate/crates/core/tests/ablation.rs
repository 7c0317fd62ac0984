mod common;

use aifn_core::corpus::{generate_synthetic, split, SyntheticSpec, VocabProfile};
use aifn_core::model::{load_checkpoint, ModelConfig, Preset, Suite, Variant};
use aifn_core::trainer::{run_ablation_suite, run_named_suite, TrainConfig};
use tempfile::TempDir;

fn quick() -> TrainConfig {
    TrainConfig {
        max_epochs: 1,
        ..TrainConfig::for_preset(Preset::Tiny)
    }
}

#[test]
fn every_variant_trains_and_checkpoints() {
    let corpus = generate_synthetic(&SyntheticSpec::new(40, 1.0, 0.5, 6).with_profile(VocabProfile::Tiny)).unwrap();
    let s = split(&corpus.threads, 6).unwrap();
    let dir = TempDir::new().unwrap();
    let cfg = TrainConfig {
        checkpoint_dir: Some(dir.path().to_path_buf()),
        ..quick()
    };
    let report = run_ablation_suite(&s, &ModelConfig::tiny(), &Variant::ALL, &cfg, &[1]).unwrap();
    assert!(report.fair);
    for row in &report.rows {
        assert!(row.errors.is_empty(), "{}: {:?}", row.label, row.errors);
        assert_eq!(row.runs.len(), 1);
        let (model, _) = load_checkpoint(dir.path().join(row.variant.name()).join("seed1/best.ckpt")).unwrap();
        assert_eq!(model.config().variant, row.variant);
    }
}

#[test]
fn named_suites_cover_their_tables() {
    let corpus = generate_synthetic(&SyntheticSpec::new(30, 1.0, 0.5, 2).with_profile(VocabProfile::Tiny)).unwrap();
    let s = split(&corpus.threads, 2).unwrap();
    let sfsn = run_named_suite(&s, &ModelConfig::tiny(), Suite::Sfsn, &quick(), &[1]).unwrap();
    assert_eq!(sfsn.rows.len(), Suite::Sfsn.variants().len());
    assert!(sfsn.rows.iter().all(|r| r.mean.is_some()));
    let labels: Vec<&str> = sfsn.rows.iter().map(|r| r.label.as_str()).collect();
    assert!(sfsn.render_table().lines().count() > labels.len());
    for l in labels {
        assert!(sfsn.render_table().contains(l));
    }
}
