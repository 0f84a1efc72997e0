//! Dataset ingestion, the pretrain/chunk stream protocol and experiment runs.

pub mod dataset;
pub mod experiment;
pub mod featfile;
pub mod plan;
pub mod synth;

pub use dataset::Dataset;
pub use experiment::{
    accuracy, accuracy_on, mean_std, run_compare, run_experiment, run_sweep, AdaptMethod, Comparison, Experiment,
    MethodKind, RunReport, SweepReport,
};
pub use featfile::{load_features, parse_features, to_feature_string, write_features};
pub use plan::{make_plan, StreamPlan};
pub use synth::generate_synthetic;
