use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod settings;

#[derive(Parser, Debug)]
#[command(
    name = "aifn",
    version,
    about = "Train, evaluate and inspect AIFN thread classifiers"
)]
struct Cli {
    /// JSON document with optional `model` and `train` sections merged over the preset.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Seed for generation, splitting, initialization and batching. AIFN_SEED overrides it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_enum, default_value_t = PresetArg::Desk)]
    preset: PresetArg,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PresetArg {
    Paper,
    Desk,
    Tiny,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic conflict corpus and its plant sidecar.
    Generate(GenerateArgs),
    /// Train one model and write its run directory.
    Train(TrainArgs),
    /// Score a checkpoint on a corpus subset.
    Eval(EvalArgs),
    /// Train a group of variants under shared seeds and splits.
    Ablate(AblateArgs),
    /// Per-token salience from the pooled argmax positions of each channel.
    Attribute(AttributeArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProfileArg {
    Tiny,
    Desk,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    threads: usize,
    #[arg(long, default_value_t = 0.8)]
    conflict: f64,
    #[arg(long, default_value_t = 0.5)]
    emotion: f64,
    #[arg(long, value_enum, default_value_t = ProfileArg::Desk)]
    profile: ProfileArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Run directory for the report and best checkpoint.
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// Ablation variant, e.g. `full`, `no_gain_concat`.
    #[arg(long, default_value = "full")]
    variant: String,
    #[arg(long, value_name = "PATH")]
    word_embeddings: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    emotion_embeddings: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Subset {
    Train,
    Val,
    Test,
    All,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LabelArg {
    True,
    False,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = Subset::Test)]
    subset: Subset,
    #[arg(long, value_enum, default_value_t = LabelArg::False)]
    positive: LabelArg,
    /// Report path; defaults to `eval.json` next to the checkpoint.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SuiteArg {
    Gain,
    Sfsn,
    Model,
    All,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = SuiteArg::Gain)]
    suite: SuiteArg,
    /// Comma-separated training seeds; defaults to the global seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long, default_value = "ablation")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FusionArg {
    Multiply,
    Add,
    Concat,
}

#[derive(Args, Debug)]
struct AttributeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Thread id; defaults to the first thread in the corpus.
    #[arg(long, conflicts_with = "all")]
    thread: Option<String>,
    /// Attribute every thread in the corpus.
    #[arg(long)]
    all: bool,
    /// Swap the fusion step before counting.
    #[arg(long, value_enum)]
    fusion: Option<FusionArg>,
    /// Top tokens per channel shown on stdout.
    #[arg(long, default_value_t = 3)]
    top: usize,
    /// Report path; defaults to `attribution.json` next to the checkpoint.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
