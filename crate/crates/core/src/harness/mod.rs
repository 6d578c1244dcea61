//! Experiment harness: configuration, the episode loop, output, and the
//! fixed-grid baseline.

pub mod baseline;
pub mod config;
pub mod episode;
pub mod output;

pub use baseline::GridUcb;
pub use config::{CoverSource, LearnerConfig, LearnerFactory, OutputConfig, RunConfig};
pub use episode::{run_coupled, run_episode, run_with_learner, CoupledOutcome, Prepared};
pub use output::{aggregate, cumulative_regret, emit_csv, emit_json, RoundRecord, Summary};
