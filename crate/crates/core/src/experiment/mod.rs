//! Experiment configuration, the end-to-end runner and report emission.

mod config;
mod report;
mod runner;

pub use config::{
    AugmentConfig, DatasetSpec, PretrainSource, RunConfig, ScalingConfig,
};
pub use report::{
    compare_reports, ComparisonTable, DatasetStats, ExperimentReport, FoldReport, MetricsSummary,
    PhaseTimings,
};
pub use runner::{
    analyze, prepare, prepare_scaled, run_ablation, run_baseline, run_experiment,
    AblationOutcome, AblationRow, BaselineBundle, BaselineChoice, BaselineFoldModel, FoldOutput,
    PreparedData, RunOutput,
    SeedAblation,
};
