//! Repeated-trial experiments: recovery at fixed sample counts, the minimum
//! sample count search, baseline comparison and report files.
//!
//! Trial `t` of a run always uses the seed `derive_seed(config.seed, t)`, so
//! trials can run in parallel and any single trial can be reproduced alone.

mod compare;
mod config;
mod experiment;
pub mod plot;
mod report;
mod search;

pub use compare::{cig_threshold, compare_baselines, ComparisonRow, ComparisonTable};
pub use config::{ConfigOverrides, ExperimentConfig, GraphSpec, LambdaRule, NSearch, PilotConfig, PilotObjective};
pub use experiment::{Experiment, PilotPoint, TrialData, TrialDiagnostics, TrialReport, TrialSummary};
pub use report::{emit_report, GraphInfo, Manifest, NMinOutcome, RunResults};
pub use search::{find_n_min, nmin_vs_log_p, NMinSearch, ScalingPoint};
