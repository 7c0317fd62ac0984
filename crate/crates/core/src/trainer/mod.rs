//! Training loop, evaluation metrics and the ablation suite runner.

mod metrics;
mod optimizer;
mod suite;
mod train;

pub use metrics::{ClassMetrics, MetricsReport};
pub use optimizer::{Optimizer, OptimizerKind, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use suite::{run_ablation_suite, run_named_suite, MetricSummary, SeedRun, SuiteReport, SuiteRow};
pub use train::{
    batch_gradients, config_hash, evaluate, prepare_data, train, EpochRecord, PreparedData, RunArtifacts, TrainConfig,
    CHECKPOINT_FILE, REPORT_SCHEMA_VERSION,
};
