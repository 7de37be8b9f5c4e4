//! Decision-process encoding: the per-chain state vector, the discrete
//! action space and the bounded reward.

use serde::{Deserialize, Serialize};

use crate::error::CommandError;
use crate::orchestrator::{MigrationCommand, MigrationOutcome, World};
use crate::perf::{self, PerfConfig};
use crate::state::NetworkState;
use crate::topology::Topology;
use crate::workload::VnfFg;

/// Reward assigned to a reverted (constraint-violating) migration.
pub const REVERT_REWARD: f64 = -0.5;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Applied migrations earn `sigmoid(lambda)`; reverted ones `sigmoid(0) - 1`.
pub fn reward(outcome: &MigrationOutcome) -> f64 {
    match *outcome {
        MigrationOutcome::Applied { lambda, .. } => sigmoid(lambda),
        MigrationOutcome::Reverted { .. } => REVERT_REWARD,
    }
}

/// Shape of the encoding for `n_servers` servers and chains of `chain_len` VNFs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub n_servers: usize,
    pub chain_len: usize,
}

impl Layout {
    pub fn new(n_servers: usize, chain_len: usize) -> Self {
        Self { n_servers, chain_len }
    }

    /// Six per-server blocks plus hosting index and two demands per VNF.
    pub fn state_dim(&self) -> usize {
        6 * self.n_servers + 3 * self.chain_len
    }

    /// One action per (VNF, server) pair plus the trailing no-op.
    pub fn num_actions(&self) -> usize {
        self.chain_len * self.n_servers + 1
    }

    pub fn noop_action(&self) -> usize {
        self.chain_len * self.n_servers
    }

    pub fn decode_action(&self, action: usize, fg_id: usize) -> Result<MigrationCommand, CommandError> {
        let noop = self.noop_action();
        match action {
            a if a == noop => Ok(MigrationCommand::NoOp),
            a if a < noop => Ok(MigrationCommand::Move {
                fg: fg_id,
                vnf: a / self.n_servers,
                server: a % self.n_servers,
            }),
            a => Err(CommandError::BadAction { action: a, max: noop }),
        }
    }

    pub fn encode_action(&self, cmd: &MigrationCommand) -> Option<usize> {
        match *cmd {
            MigrationCommand::NoOp => Some(self.noop_action()),
            MigrationCommand::Move { vnf, server, .. } if vnf < self.chain_len && server < self.n_servers => {
                Some(vnf * self.n_servers + server)
            }
            MigrationCommand::Move { .. } => None,
        }
    }
}

/// Encodes the network as seen by one focal chain. Every entry lies in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEncoder {
    pub layout: Layout,
    /// Largest possible CPU and memory demand of a VNF.
    pub demand_scale: (f64, f64),
    pub perf: PerfConfig,
}

impl StateEncoder {
    pub fn new(layout: Layout, demand_scale: (f64, f64), perf: PerfConfig) -> Self {
        Self { layout, demand_scale, perf }
    }

    /// Block order: active flags, hosting flags, CPU utilization, memory
    /// utilization, energy / eps_max, processing delay / deadline, then per VNF
    /// of the focal chain its host index / |servers|, then its CPU and memory
    /// demands scaled by their maxima.
    pub fn encode(&self, state: &NetworkState, topo: &Topology, fg: &VnfFg) -> Vec<f64> {
        let n = self.layout.n_servers;
        let p = self.layout.chain_len;
        debug_assert_eq!(n, topo.num_servers());
        let mut out = vec![0.0; self.layout.state_dim()];
        let d_max = fg.deadline_ms.max(f64::MIN_POSITIVE);
        for s in 0..n {
            let active = state.is_server_active(s);
            out[s] = f64::from(u8::from(active));
            out[n + s] = f64::from(u8::from(!state.hosted_vnfs(s).is_empty()));
            out[2 * n + s] = state.cpu_utilization(s).clamp(0.0, 1.0);
            out[3 * n + s] = state.mem_utilization(s).clamp(0.0, 1.0);
            out[4 * n + s] = (perf::server_energy(state, s, &self.perf) / self.perf.eps_max).clamp(0.0, 1.0);
            let d = perf::proc_delay(state.cpu_utilization(s), self.perf.tau_ms).unwrap_or(d_max);
            out[5 * n + s] = d.min(d_max) / d_max;
        }
        let base = 6 * n;
        for v in 0..p.min(fg.vnfs.len()) {
            if let Some(h) = state.host(fg.id, v) {
                out[base + v] = h as f64 / n as f64;
            }
            out[base + p + 2 * v] = (fg.vnfs[v].cpu_demand / self.demand_scale.0).clamp(0.0, 1.0);
            out[base + p + 2 * v + 1] = (fg.vnfs[v].mem_demand / self.demand_scale.1).clamp(0.0, 1.0);
        }
        out
    }

    pub fn encode_world(&self, world: &World, fg_id: usize) -> Vec<f64> {
        self.encode(&world.state, world.topology(), world.fg(fg_id))
    }
}
