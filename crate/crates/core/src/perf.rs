//! Delay and energy models, migration deltas and the composite objective.

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, PerfError};
use crate::state::NetworkState;
use crate::topology::{Link, LinkId, ServerId, Topology};
use crate::workload::VnfFg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerfConfig {
    pub packet_size_bytes: f64,
    /// Baseline per-packet processing delay, ms.
    pub tau_ms: f64,
    /// Weight on the delay reduction.
    pub tau1: f64,
    /// Weight on the energy reduction.
    pub tau2: f64,
    pub eps_base: f64,
    pub eps_max: f64,
    pub eps_trans: f64,
    /// Scale delay/energy reductions by their pre-migration totals.
    pub normalize_lambda: bool,
}

impl Default for PerfConfig {
    fn default() -> Self {
        Self {
            packet_size_bytes: 1500.0,
            tau_ms: 1.0,
            tau1: 0.5,
            tau2: 0.5,
            eps_base: 10.0,
            eps_max: 110.0,
            eps_trans: 2.0,
            normalize_lambda: true,
        }
    }
}

impl PerfConfig {
    pub fn eps_cons(&self) -> f64 {
        self.eps_max - self.eps_base
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.tau1) || !(0.0..=1.0).contains(&self.tau2) {
            return Err(ConfigError::new("lambda weights must lie in [0, 1]"));
        }
        if !(self.packet_size_bytes > 0.0) || !(self.tau_ms >= 0.0) {
            return Err(ConfigError::new("packet size must be positive and tau non-negative"));
        }
        if !(self.eps_base >= 0.0 && self.eps_max >= self.eps_base && self.eps_trans >= 0.0) {
            return Err(ConfigError::new("energy constants must satisfy 0 <= base <= max, trans >= 0"));
        }
        Ok(())
    }
}

/// Per-packet serialization delay in ms.
pub fn transmission_delay_ms(packet_size_bytes: f64, bandwidth_gbps: f64) -> f64 {
    packet_size_bytes * 8.0 / (bandwidth_gbps * 1e9) * 1e3
}

/// Transmission plus propagation delay across one physical link, ms.
pub fn link_delay(link: &Link, cfg: &PerfConfig) -> f64 {
    transmission_delay_ms(cfg.packet_size_bytes, link.bandwidth_gbps) + link.prop_delay_ms
}

/// Queueing-style processing delay `u * tau / (1 - u)` for CPU utilization `u`.
pub fn proc_delay(utilization: f64, tau_ms: f64) -> Option<f64> {
    (utilization < 1.0).then(|| utilization * tau_ms / (1.0 - utilization))
}

pub fn server_proc_delay(state: &NetworkState, s: ServerId, cfg: &PerfConfig) -> Result<f64, PerfError> {
    let u = state.cpu_utilization(s);
    proc_delay(u, cfg.tau_ms).ok_or(PerfError::Saturated { server: s, utilization: u })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkTerm {
    pub link: LinkId,
    pub trans_ms: f64,
    pub prop_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayBreakdown {
    /// One entry per (logical link, physical link) hop.
    pub links: Vec<LinkTerm>,
    /// One entry per VNF: its host and that host's processing delay.
    pub servers: Vec<(ServerId, f64)>,
    pub total_ms: f64,
}

/// End-to-end delay of a fully mapped chain: every routed hop contributes
/// its link delay and every VNF its host's processing delay.
pub fn e2e_delay(
    state: &NetworkState,
    topo: &Topology,
    fg: &VnfFg,
    cfg: &PerfConfig,
) -> Result<DelayBreakdown, PerfError> {
    let m = state
        .mapping(fg.id)
        .filter(|m| m.is_complete())
        .ok_or(PerfError::IncompleteMapping(fg.id))?;
    let mut links = Vec::new();
    for route in m.routes.iter().flatten() {
        for &l in route {
            let link = &topo.links[l];
            links.push(LinkTerm {
                link: l,
                trans_ms: transmission_delay_ms(cfg.packet_size_bytes, link.bandwidth_gbps),
                prop_ms: link.prop_delay_ms,
            });
        }
    }
    let mut servers = Vec::with_capacity(m.hosts.len());
    for s in m.hosts.iter().flatten() {
        servers.push((*s, server_proc_delay(state, *s, cfg)?));
    }
    let total_ms = links.iter().map(|t| t.trans_ms + t.prop_ms).sum::<f64>()
        + servers.iter().map(|&(_, d)| d).sum::<f64>();
    Ok(DelayBreakdown { links, servers, total_ms })
}

/// Energy of one server in the current step: baseline plus utilization-linear
/// part while hosting, plus the transition charge when its activation flag
/// differs from the previous step.
pub fn server_energy(state: &NetworkState, s: ServerId, cfg: &PerfConfig) -> f64 {
    let active = state.is_server_active(s);
    let mut e = 0.0;
    if active {
        e += cfg.eps_base + cfg.eps_cons() * state.cpu_utilization(s);
    }
    if active != state.prev_active()[s] {
        e += cfg.eps_trans;
    }
    e
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub per_server: Vec<f64>,
    pub total: f64,
}

pub fn energy_report(state: &NetworkState, cfg: &PerfConfig) -> EnergyReport {
    let per_server: Vec<f64> = (0..state.num_servers()).map(|s| server_energy(state, s, cfg)).collect();
    let total = per_server.iter().sum();
    EnergyReport { per_server, total }
}

pub fn total_energy(state: &NetworkState, cfg: &PerfConfig) -> f64 {
    (0..state.num_servers()).map(|s| server_energy(state, s, cfg)).sum()
}

/// Delay and energy totals on which migration deltas are taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub delay_ms: f64,
    pub energy: f64,
}

/// `(delay reduction, energy reduction)`; positive means the migration helped.
pub fn migration_deltas(before: &Metrics, after: &Metrics) -> (f64, f64) {
    (before.delay_ms - after.delay_ms, before.energy - after.energy)
}

const NORM_FLOOR: f64 = 1e-9;

/// Weighted combination of delay and energy reductions. With normalization,
/// each reduction is divided by its pre-migration total.
pub fn lambda_composite(delta_ms: f64, eta: f64, before: &Metrics, cfg: &PerfConfig) -> f64 {
    let (d, e) = if cfg.normalize_lambda {
        (delta_ms / before.delay_ms.max(NORM_FLOOR), eta / before.energy.max(NORM_FLOOR))
    } else {
        (delta_ms, eta)
    };
    cfg.tau1 * d + cfg.tau2 * e
}

/// Time-averaged sum of composite reductions over an episode of `horizon` steps.
pub fn objective_value(lambdas: &[f64], horizon: u64) -> f64 {
    if horizon == 0 {
        return 0.0;
    }
    lambdas.iter().sum::<f64>() / horizon as f64
}
