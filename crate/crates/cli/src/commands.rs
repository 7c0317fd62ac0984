use std::fs;
use std::path::{Path, PathBuf};

use aifn_core::corpus::{
    generate_synthetic, load_embeddings, parse_corpus, split, split_by_tag, Label, Split, SyntheticSpec, Thread,
    VocabProfile,
};
use aifn_core::fusion::FusionKind;
use aifn_core::model::{attribute, load_checkpoint, Aifn, AttributionReport, Preset, Suite, Variant};
use aifn_core::trainer::{evaluate, prepare_data, run_named_suite, train, MetricsReport, REPORT_SCHEMA_VERSION};
use aifn_core::{Error, Result};
use serde::Serialize;

use crate::settings::{self, Settings, SEED_ENV};
use crate::{
    AblateArgs, AttributeArgs, Cli, Command, EvalArgs, FusionArg, GenerateArgs, LabelArg, PresetArg, ProfileArg,
    Subset, SuiteArg, TrainArgs,
};

struct Context {
    settings: Settings,
    /// Seed given on the command line or through the environment.
    explicit_seed: Option<u64>,
}

pub fn run(cli: Cli) -> Result<()> {
    let env = std::env::var(SEED_ENV).ok();
    let explicit_seed = settings::resolve_seed(cli.seed, env.as_deref())?;
    let text = cli.config.as_deref().map(settings::read_config).transpose()?;
    let preset = match cli.preset {
        PresetArg::Paper => Preset::Paper,
        PresetArg::Desk => Preset::Desk,
        PresetArg::Tiny => Preset::Tiny,
    };
    let ctx = Context {
        settings: settings::resolve(preset, text.as_deref(), explicit_seed)?,
        explicit_seed,
    };
    match cli.command {
        Command::Generate(a) => generate(&ctx, a),
        Command::Train(a) => train_cmd(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Ablate(a) => ablate(&ctx, a),
        Command::Attribute(a) => attribute_cmd(&ctx, a),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_threads(path: &Path) -> Result<Vec<Thread>> {
    let parsed = parse_corpus(path)?;
    if parsed.dropped_unverified > 0 {
        println!("dropped {} unverified thread(s)", parsed.dropped_unverified);
    }
    Ok(parsed.threads)
}

/// Tagged corpora keep their own split; untagged ones are shuffled by seed.
fn split_threads(threads: &[Thread], seed: u64) -> Result<Split> {
    if !threads.is_empty() && threads.iter().all(|t| t.split.is_some()) {
        split_by_tag(threads)
    } else {
        split(threads, seed)
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn metrics_line(m: &MetricsReport) -> String {
    format!(
        "accuracy {}%  precision {}%  recall {}%  f1 {}%  macro-f1 {}%  (positive = {}, n = {})",
        pct(m.accuracy),
        pct(m.precision),
        pct(m.recall),
        pct(m.f1),
        pct(m.macro_f1),
        m.positive_class.name(),
        m.total()
    )
}

fn generate(ctx: &Context, a: GenerateArgs) -> Result<()> {
    let profile = match a.profile {
        ProfileArg::Tiny => VocabProfile::Tiny,
        ProfileArg::Desk => VocabProfile::Desk,
    };
    let seed = ctx.explicit_seed.unwrap_or(0);
    let spec = SyntheticSpec::new(a.threads, a.conflict, a.emotion, seed).with_profile(profile);
    let corpus = generate_synthetic(&spec)?;
    let sidecar = corpus.write(&a.out)?;
    let false_count = corpus.threads.iter().filter(|t| t.label == Label::False).count();
    println!(
        "wrote {} threads ({} true, {} false) to {}",
        corpus.threads.len(),
        corpus.threads.len() - false_count,
        false_count,
        a.out.display()
    );
    println!("plant positions: {}", sidecar.display());
    Ok(())
}

fn train_cmd(ctx: &Context, a: TrainArgs) -> Result<()> {
    let variant: Variant = a.variant.parse()?;
    let model_cfg = ctx.settings.model.clone().with_variant(variant);
    let mut train_cfg = ctx.settings.train.clone();
    train_cfg.checkpoint_dir = Some(a.out.clone());

    let threads = load_threads(&a.corpus)?;
    let split = split_threads(&threads, train_cfg.seed)?;
    let data = prepare_data(&split, &model_cfg, train_cfg.min_freq)?;
    let word = load_embeddings(
        a.word_embeddings.as_deref(),
        &data.vocab,
        model_cfg.word_dim,
        model_cfg.seed,
    )?;
    let emotion = load_embeddings(
        a.emotion_embeddings.as_deref(),
        &data.vocab,
        model_cfg.emotion_dim,
        model_cfg.seed.wrapping_add(1),
    )?;
    let mut model = Aifn::new(model_cfg, data.vocab.clone(), word, emotion)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let run = train(&mut model, &data, &train_cfg)?;
    let report = a.out.join("report.json");
    write_json(&report, &run)?;

    let (tr, va, te) = split.sizes();
    println!(
        "variant {} ({}), split {tr}/{va}/{te}, vocabulary {}",
        variant.name(),
        variant.label(),
        data.vocab.len()
    );
    for h in &run.history {
        println!(
            "epoch {:>3}  loss {:.4}  train {}%  val {}%{}",
            h.epoch,
            h.train_loss,
            pct(h.train_accuracy),
            pct(h.val_accuracy),
            if h.improved { "  *" } else { "" }
        );
    }
    println!(
        "best epoch {} (val {}%){}",
        run.best_epoch,
        pct(run.best_val_accuracy),
        if run.stopped_early { ", stopped early" } else { "" }
    );
    println!("val:  {}", metrics_line(&run.val));
    if let Some(t) = &run.test {
        println!("test: {}", metrics_line(t));
    }
    println!("report: {}", report.display());
    if let Some(c) = &run.best_checkpoint {
        println!("checkpoint: {}", c.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    schema_version: u32,
    checkpoint: PathBuf,
    corpus: PathBuf,
    subset: &'static str,
    variant: String,
    metrics: MetricsReport,
}

fn sibling(checkpoint: &Path, name: &str) -> PathBuf {
    checkpoint.with_file_name(name)
}

fn eval(ctx: &Context, a: EvalArgs) -> Result<()> {
    let (model, _) = load_checkpoint(&a.checkpoint)?;
    let threads = load_threads(&a.corpus)?;
    let seed = ctx.explicit_seed.unwrap_or(model.config().seed);
    let (subset, name) = match a.subset {
        Subset::All => (threads, "all"),
        s => {
            let sp = split_threads(&threads, seed)?;
            match s {
                Subset::Train => (sp.train, "train"),
                Subset::Val => (sp.val, "val"),
                _ => (sp.test, "test"),
            }
        }
    };
    let tokenized: Vec<_> = subset.iter().map(|t| model.tokenize(t)).collect();
    let positive = match a.positive {
        LabelArg::True => Label::True,
        LabelArg::False => Label::False,
    };
    let metrics = evaluate(&model, &tokenized, positive)?;
    let out = a.out.unwrap_or_else(|| sibling(&a.checkpoint, "eval.json"));
    write_json(
        &out,
        &EvalReport {
            schema_version: REPORT_SCHEMA_VERSION,
            checkpoint: a.checkpoint.clone(),
            corpus: a.corpus.clone(),
            subset: name,
            variant: model.variant().name().to_string(),
            metrics: metrics.clone(),
        },
    )?;
    println!("{name}: {}", metrics_line(&metrics));
    println!(
        "confusion: tp {}  fp {}  fn {}  tn {}",
        metrics.tp, metrics.fp, metrics.fn_, metrics.tn
    );
    println!("report: {}", out.display());
    Ok(())
}

fn ablate(ctx: &Context, a: AblateArgs) -> Result<()> {
    let suite = match a.suite {
        SuiteArg::Gain => Suite::Gain,
        SuiteArg::Sfsn => Suite::Sfsn,
        SuiteArg::Model => Suite::Model,
        SuiteArg::All => Suite::All,
    };
    let seeds = if a.seeds.is_empty() {
        vec![ctx.settings.train.seed]
    } else {
        a.seeds.clone()
    };
    let threads = load_threads(&a.corpus)?;
    let split = split_threads(&threads, ctx.settings.train.seed)?;
    let mut train_cfg = ctx.settings.train.clone();
    train_cfg.checkpoint_dir = Some(a.out.join("checkpoints"));
    let report = run_named_suite(&split, &ctx.settings.model, suite, &train_cfg, &seeds)?;
    let table = report.render_table();
    write_json(&a.out.join("ablation.json"), &report)?;
    fs::write(a.out.join("table.txt"), &table).map_err(|e| Error::io(a.out.join("table.txt"), e))?;

    print!("{table}");
    println!(
        "seeds {:?}; rows share one config hash per seed: {}",
        report.seeds,
        if report.fair { "yes" } else { "NO" }
    );
    println!("report: {}", a.out.join("ablation.json").display());
    let errors: Vec<&String> = report.rows.iter().flat_map(|r| &r.errors).collect();
    for (row, e) in report.rows.iter().flat_map(|r| r.errors.iter().map(move |e| (r, e))) {
        eprintln!("{} failed: {e}", row.label);
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Error::Contract(format!("{} ablation run(s) failed", errors.len())))
    }
}

fn attribute_cmd(_ctx: &Context, a: AttributeArgs) -> Result<()> {
    let (mut model, _) = load_checkpoint(&a.checkpoint)?;
    if let Some(f) = a.fusion {
        model = model.with_fusion(match f {
            FusionArg::Multiply => FusionKind::Multiply,
            FusionArg::Add => FusionKind::Add,
            FusionArg::Concat => FusionKind::Concat,
        })?;
    }
    let threads = load_threads(&a.corpus)?;
    let chosen: Vec<&Thread> = match (&a.thread, a.all) {
        (_, true) => threads.iter().collect(),
        (Some(id), false) => {
            let t = threads
                .iter()
                .find(|t| &t.id == id)
                .ok_or_else(|| Error::Config(format!("no thread `{id}` in {}", a.corpus.display())))?;
            vec![t]
        }
        (None, false) => threads.first().into_iter().collect(),
    };
    if chosen.is_empty() {
        return Err(Error::Size("corpus has no threads".into()));
    }
    let reports: Vec<AttributionReport> = chosen.iter().map(|t| attribute(&model, t)).collect::<Result<_>>()?;
    let out = a.out.unwrap_or_else(|| sibling(&a.checkpoint, "attribution.json"));
    if let [single] = reports.as_slice() {
        write_json(&out, single)?;
    } else {
        write_json(&out, &reports)?;
    }
    for r in &reports {
        println!(
            "thread {}  p(true) {:.4}  p(false) {:.4}{}",
            r.thread_id,
            r.probabilities[0],
            r.probabilities[1],
            if r.truncated { "  [truncated]" } else { "" }
        );
        for c in &r.channels {
            let top: Vec<String> = c
                .tokens
                .iter()
                .take(a.top)
                .map(|s| format!("{}@{}:{}", s.token, s.position, s.count))
                .collect();
            println!("  {:<16} {}", c.channel, top.join("  "));
        }
    }
    println!("report: {}", out.display());
    Ok(())
}
