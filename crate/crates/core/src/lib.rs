//! Discrete-time simulator of VNF forwarding-graph migration in an edge-core
//! network, with delay and energy accounting and baseline migration policies.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod mdp;
pub mod orchestrator;
pub mod perf;
pub mod state;
pub mod topology;
pub mod workload;

pub use error::{CommandError, ConfigError, PerfError, StateError};
pub use orchestrator::{
    DeployOutcome, Event, MigrationCommand, MigrationOutcome, MigrationPolicy, NoOpPolicy, RevertReason,
    SimConfig, StepReport, World,
};
pub use topology::{generate_waxman, Topology, TopologyConfig};
pub use workload::{generate_requests, VnfFg, WorkloadConfig};
