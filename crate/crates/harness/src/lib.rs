//! Experiment driver for the edge-core VNF migration simulator: configuration,
//! the per-episode training loop, metrics, multi-policy comparison and the
//! event-log replay check.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod compare;
pub mod config;
pub mod experiment;
pub mod metrics;

pub use compare::{compare_policies, summarize, Comparison};
pub use config::{ExperimentConfig, LearningConfig, PolicyKind};
pub use experiment::{run_experiment, run_experiment_with, RunOutput};
pub use metrics::{normalize_rewards, replay_events, EpisodeMetrics};
