//! Seeded experiment orchestration, summary metrics, and artifact output.

pub mod artifacts;
pub mod config;
pub mod experiment;
pub mod metrics;

pub use artifacts::{emit_artifacts, learning_curve_svg, parse_returns_csv, returns_csv, summary_json};
pub use config::{load_config, EnvKind, ExperimentConfig};
pub use experiment::{run_comparison, run_experiment, run_seed, RunSummary};
pub use metrics::{compute_metrics, Metrics};
