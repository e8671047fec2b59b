//! End-to-end experiment orchestration from declarative scenario files:
//! forward runs, observation synthesis, Bayesian inversion, the
//! deterministic bounded least-squares baseline, knot-count trials,
//! sensitivity presets, and plot-ready table emission.

mod io;
mod optimize;
mod run;
mod scenario;

pub use io::{read_run_manifest, read_samples, MetricRow, RunManifest};
pub use optimize::{bounded_least_squares, OptimizerResult};
pub use run::{
    derive_seed, deterministic_baseline, knot_count_trial, report_run, run_forward, run_inversion,
    sensitivity_presets, synthesize_case, BaselineRecord, CaseContext, ForwardTables,
    KnotTrialEntry, KnotTrialReport, PresetOutcome, PresetReport, RunRecord, RunReport,
    RHAT_THRESHOLD,
};
pub use scenario::{
    CaseSpec, LikelihoodSettings, MetricsSettings, ObservationPlan, PresetPlan, PriorSettings,
    Scenario, TrialPlan, TruthSpec,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("failed to parse scenario: {0}")]
    Scenario(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("unknown case label '{0}'")]
    UnknownCase(String),
    #[error("unknown truth preset '{0}'")]
    UnknownPreset(String),
    #[error(transparent)]
    Fem(#[from] crate::fem::FemError),
    #[error(transparent)]
    Field(#[from] crate::field::FieldError),
    #[error(transparent)]
    Response(#[from] crate::response::ResponseError),
    #[error(transparent)]
    Bayes(#[from] crate::bayes::BayesError),
    #[error(transparent)]
    Sampler(#[from] crate::demc::DemcError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("failed to parse '{path}': {message}")]
    Table { path: String, message: String },
    #[error("manifest error: {0}")]
    Manifest(String),
}
