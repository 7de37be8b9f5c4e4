use thiserror::Error;

use crate::topology::{LinkId, ServerId};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("configuration error: {0}")]
pub struct ConfigError(pub String);

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

/// Mutations rejected by the network state. The state is left untouched.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("placing vnf {fg}:{vnf} on server {server} exceeds its {resource} capacity")]
    InfeasiblePlacement { fg: usize, vnf: usize, server: ServerId, resource: &'static str },
    #[error("routing logical link {fg}:{logical} over link {link} exceeds its bandwidth")]
    InfeasibleRoute { fg: usize, logical: usize, link: LinkId },
    #[error("unknown index: {0}")]
    BadIndex(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerfError {
    #[error("server {server} is saturated (cpu utilization {utilization})")]
    Saturated { server: ServerId, utilization: f64 },
    #[error("vnf-fg {0} is not fully placed and routed")]
    IncompleteMapping(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CommandError {
    #[error("vnf-fg {0} is not active")]
    InactiveFg(usize),
    #[error("vnf index {vnf} out of range for vnf-fg {fg}")]
    BadVnf { fg: usize, vnf: usize },
    #[error("server {0} does not exist")]
    BadServer(ServerId),
    #[error("action index {action} outside [0, {max}]")]
    BadAction { action: usize, max: usize },
}
