//! Per-time-step orchestration: expire finished chains, deploy arrivals,
//! consult a migration policy for every active chain, and account for the
//! resulting delay and energy.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::CommandError;
use crate::perf::{self, Metrics, PerfConfig};
use crate::state::{NetworkState, Thresholds};
use crate::topology::{LinkId, ServerId, Topology};
use crate::workload::{service_status, VnfFg};

/// Slack on the end-to-end deadline check, ms.
const DEADLINE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MigrationCommand {
    NoOp,
    Move { fg: usize, vnf: usize, server: ServerId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevertReason {
    /// Server capacity, utilization threshold or link bandwidth (C1).
    Resource,
    /// Some chain would miss its end-to-end deadline (C2).
    Delay,
    /// The command did not name an active chain, a valid VNF or a server.
    InvalidCommand,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum MigrationOutcome {
    Applied { delta_ms: f64, eta: f64, lambda: f64 },
    Reverted { reason: RevertReason },
}

impl MigrationOutcome {
    pub const NOOP: MigrationOutcome = MigrationOutcome::Applied { delta_ms: 0.0, eta: 0.0, lambda: 0.0 };

    pub fn is_applied(&self) -> bool {
        matches!(self, MigrationOutcome::Applied { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeployOutcome {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub perf: PerfConfig,
    pub thresholds: Thresholds,
}

/// One record of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Expire {
        t: u64,
        fg: usize,
    },
    Deploy {
        t: u64,
        fg: usize,
        outcome: DeployOutcome,
        hosts: Vec<ServerId>,
        routes: Vec<Vec<LinkId>>,
        energy_before: f64,
        energy_after: f64,
    },
    Migrate {
        t: u64,
        fg: usize,
        vnf: usize,
        from: ServerId,
        to: ServerId,
        /// Routes of the logical links adjacent to the moved VNF, as committed.
        reroutes: Vec<(usize, Vec<LinkId>)>,
        outcome: MigrationOutcome,
        before: Metrics,
        after: Metrics,
    },
    Step {
        t: u64,
        active_fgs: usize,
        total_energy: f64,
        delays: Vec<(usize, f64)>,
        migrations: usize,
        reverts: usize,
        rejections: usize,
        arrivals: usize,
    },
}

/// Metrics of one completed time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub t: u64,
    /// `(fg id, end-to-end delay ms)` for every chain in service after the step.
    pub delays: Vec<(usize, f64)>,
    pub total_energy: f64,
    pub arrivals: usize,
    pub rejections: usize,
    /// Committed migrations that actually moved a VNF.
    pub migrations: usize,
    pub reverts: usize,
    pub decisions: usize,
}

impl StepReport {
    pub fn active_fgs(&self) -> usize {
        self.delays.len()
    }

    pub fn mean_delay_ms(&self) -> Option<f64> {
        (!self.delays.is_empty())
            .then(|| self.delays.iter().map(|&(_, d)| d).sum::<f64>() / self.delays.len() as f64)
    }
}

/// A migration policy is consulted once per active chain per time step.
pub trait MigrationPolicy {
    fn decide(&mut self, world: &World, fg_id: usize) -> MigrationCommand;

    /// Called right after the command was executed (or reverted).
    fn observe(&mut self, _world: &World, _fg_id: usize, _cmd: &MigrationCommand, _outcome: &MigrationOutcome) {}

    /// Called once per step after accounting, before the clock advances.
    fn end_step(&mut self, _world: &World) {}
}

/// Never migrates.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoOpPolicy;

impl MigrationPolicy for NoOpPolicy {
    fn decide(&mut self, _world: &World, _fg_id: usize) -> MigrationCommand {
        MigrationCommand::NoOp
    }
}

/// A single simulation instance: topology, request trace and network state.
#[derive(Debug, Clone)]
pub struct World {
    topo: Arc<Topology>,
    fgs: Vec<VnfFg>,
    pub state: NetworkState,
    cfg: SimConfig,
    t: u64,
    log: Option<Vec<Event>>,
}

impl World {
    /// `fgs[i].id` must equal `i`.
    pub fn new(topo: Arc<Topology>, fgs: Vec<VnfFg>, cfg: SimConfig) -> Self {
        assert!(fgs.iter().enumerate().all(|(i, f)| f.id == i), "request ids must be dense indices");
        let state = NetworkState::new(&topo);
        Self { topo, fgs, state, cfg, t: 0, log: None }
    }

    pub fn with_event_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn fgs(&self) -> &[VnfFg] {
        &self.fgs
    }

    pub fn fg(&self, id: usize) -> &VnfFg {
        &self.fgs[id]
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn events(&self) -> &[Event] {
        self.log.as_deref().unwrap_or(&[])
    }

    pub fn take_events(&mut self) -> Vec<Event> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    fn record(&mut self, e: impl FnOnce() -> Event) {
        if let Some(log) = &mut self.log {
            log.push(e());
        }
    }

    /// Chains currently deployed, in id order.
    pub fn active_fgs(&self) -> Vec<usize> {
        self.state.mapped_fgs().collect()
    }

    pub fn is_active(&self, fg_id: usize) -> bool {
        self.state.mapping(fg_id).is_some()
    }

    /// True once every request has arrived and nothing remains deployed.
    pub fn is_finished(&self) -> bool {
        self.fgs.iter().all(|f| f.arrival < self.t) && self.state.mapped_fgs().next().is_none()
    }

    pub fn fg_delay(&self, fg_id: usize) -> Option<f64> {
        perf::e2e_delay(&self.state, &self.topo, &self.fgs[fg_id], &self.cfg.perf).ok().map(|d| d.total_ms)
    }

    /// Removes every deployed chain whose service window has closed at `t`.
    pub fn expire_timeouts(&mut self, t: u64) {
        let expired: Vec<usize> =
            self.state.mapped_fgs().filter(|&id| service_status(&self.fgs[id], t) == 0).collect();
        for id in expired {
            self.state.remove_fg(id);
            self.record(|| Event::Expire { t, fg: id });
        }
    }

    /// Every deployed chain meets its deadline in `state`.
    fn deadlines_hold(&self, state: &NetworkState) -> bool {
        state.mapped_fgs().all(|id| {
            let fg = &self.fgs[id];
            perf::e2e_delay(state, &self.topo, fg, &self.cfg.perf)
                .is_ok_and(|d| d.total_ms <= fg.deadline_ms + DEADLINE_EPS)
        })
    }

    /// First-fit deployment: VNFs in chain order, each on the feasible edge
    /// server with the lowest CPU utilization, else on the least-utilized
    /// feasible core server, with each logical link on the shortest feasible
    /// path. Any failure rolls back and marks the request rejected.
    pub fn deploy_fg(&mut self, fg_id: usize) -> DeployOutcome {
        let energy_before = perf::total_energy(&self.state, &self.cfg.perf);
        let mut trial = self.state.clone();
        let ok = self.first_fit(&mut trial, fg_id) && self.deadlines_hold(&trial);
        let t = self.t;
        if ok {
            self.state = trial;
            let m = self.state.mapping(fg_id).expect("deployed");
            let hosts: Vec<ServerId> = m.hosts.iter().map(|h| h.expect("placed")).collect();
            let routes: Vec<Vec<LinkId>> = m.routes.iter().map(|r| r.clone().expect("routed")).collect();
            let energy_after = perf::total_energy(&self.state, &self.cfg.perf);
            self.record(|| Event::Deploy {
                t,
                fg: fg_id,
                outcome: DeployOutcome::Accepted,
                hosts,
                routes,
                energy_before,
                energy_after,
            });
            DeployOutcome::Accepted
        } else {
            self.fgs[fg_id].service_time = 0;
            self.record(|| Event::Deploy {
                t,
                fg: fg_id,
                outcome: DeployOutcome::Rejected,
                hosts: vec![],
                routes: vec![],
                energy_before,
                energy_after: energy_before,
            });
            DeployOutcome::Rejected
        }
    }

    fn first_fit(&self, trial: &mut NetworkState, fg_id: usize) -> bool {
        let fg = &self.fgs[fg_id];
        let th = self.cfg.thresholds;
        for (v, vnf) in fg.vnfs.iter().enumerate() {
            let mut order: Vec<ServerId> = (0..self.topo.num_servers()).collect();
            order.sort_by(|&a, &b| {
                (!self.topo.is_edge(a))
                    .cmp(&!self.topo.is_edge(b))
                    .then(trial.cpu_utilization(a).total_cmp(&trial.cpu_utilization(b)))
                    .then(a.cmp(&b))
            });
            let prev = v.checked_sub(1).map(|p| trial.host(fg_id, p).expect("previous vnf placed"));
            let mut placed = false;
            for s in order {
                if !trial.fits_within(s, vnf.cpu_demand, vnf.mem_demand, &th) {
                    continue;
                }
                let path = match prev {
                    None => None,
                    Some(p) => {
                        let bw = fg.logical_links[v - 1].bw_demand_gbps;
                        match self.topo.shortest_feasible_path(p, s, bw, trial.residual_bw()) {
                            Some(path) => Some(path),
                            None => continue,
                        }
                    }
                };
                if trial.apply_placement(fg, v, s).is_err() {
                    continue;
                }
                if let Some(path) = path {
                    trial.apply_route(fg, v - 1, path).expect("path checked against residuals");
                }
                placed = true;
                break;
            }
            if !placed {
                return false;
            }
        }
        true
    }

    /// Sum of end-to-end delays over chains with a VNF on any of `servers`
    /// plus `focal`.
    fn affected_delay(&self, state: &NetworkState, focal: usize, servers: &[ServerId]) -> f64 {
        let mut ids: Vec<usize> = servers
            .iter()
            .flat_map(|&s| state.hosted_vnfs(s).iter().map(|&(fg, _)| fg))
            .chain(std::iter::once(focal))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter()
            .filter_map(|id| perf::e2e_delay(state, &self.topo, &self.fgs[id], &self.cfg.perf).ok())
            .map(|d| d.total_ms)
            .sum()
    }

    fn validate(&self, cmd: &MigrationCommand) -> Result<(), CommandError> {
        if let MigrationCommand::Move { fg, vnf, server } = *cmd {
            if fg >= self.fgs.len() || !self.is_active(fg) {
                return Err(CommandError::InactiveFg(fg));
            }
            if vnf >= self.fgs[fg].chain_len() {
                return Err(CommandError::BadVnf { fg, vnf });
            }
            if server >= self.topo.num_servers() {
                return Err(CommandError::BadServer(server));
            }
        }
        Ok(())
    }

    /// Tentatively moves one VNF and re-routes its adjacent logical links. The
    /// move is committed only if resource constraints and every chain's deadline
    /// still hold; otherwise the state is left exactly as it was.
    pub fn execute_migration(&mut self, cmd: &MigrationCommand) -> Result<MigrationOutcome, CommandError> {
        self.validate(cmd)?;
        let MigrationCommand::Move { fg: fg_id, vnf, server: dest } = *cmd else {
            return Ok(MigrationOutcome::NOOP);
        };
        let src = self.state.host(fg_id, vnf).expect("active chain is fully placed");
        if src == dest {
            return Ok(MigrationOutcome::NOOP);
        }
        let perf_cfg = &self.cfg.perf;
        let before = Metrics {
            delay_ms: self.affected_delay(&self.state, fg_id, &[src, dest]),
            energy: perf::total_energy(&self.state, perf_cfg),
        };

        let fg = &self.fgs[fg_id];
        let mut trial = self.state.clone();
        let adjacent: Vec<usize> = [vnf.checked_sub(1), (vnf + 1 < fg.chain_len()).then_some(vnf)]
            .into_iter()
            .flatten()
            .collect();
        let reason = 'attempt: {
            let d = &fg.vnfs[vnf];
            if !trial.fits_within(dest, d.cpu_demand, d.mem_demand, &self.cfg.thresholds)
                || trial.apply_placement(fg, vnf, dest).is_err()
            {
                break 'attempt Some(RevertReason::Resource);
            }
            for &l in &adjacent {
                trial.remove_route(fg_id, l);
            }
            for &l in &adjacent {
                let a = trial.host(fg_id, l).expect("placed");
                let b = trial.host(fg_id, l + 1).expect("placed");
                let bw = fg.logical_links[l].bw_demand_gbps;
                match self.topo.shortest_feasible_path(a, b, bw, trial.residual_bw()) {
                    Some(path) => trial.apply_route(fg, l, path).expect("path checked against residuals"),
                    None => break 'attempt Some(RevertReason::Resource),
                }
            }
            if !self.deadlines_hold(&trial) {
                break 'attempt Some(RevertReason::Delay);
            }
            None
        };

        let t = self.t;
        if let Some(reason) = reason {
            let outcome = MigrationOutcome::Reverted { reason };
            self.record(|| Event::Migrate {
                t,
                fg: fg_id,
                vnf,
                from: src,
                to: dest,
                reroutes: vec![],
                outcome,
                before,
                after: before,
            });
            return Ok(outcome);
        }

        let after = Metrics {
            delay_ms: self.affected_delay(&trial, fg_id, &[src, dest]),
            energy: perf::total_energy(&trial, perf_cfg),
        };
        let (delta_ms, eta) = perf::migration_deltas(&before, &after);
        let lambda = perf::lambda_composite(delta_ms, eta, &before, perf_cfg);
        let reroutes: Vec<(usize, Vec<LinkId>)> =
            adjacent.iter().map(|&l| (l, trial.route(fg_id, l).expect("routed").to_vec())).collect();
        self.state = trial;
        let outcome = MigrationOutcome::Applied { delta_ms, eta, lambda };
        self.record(|| Event::Migrate { t, fg: fg_id, vnf, from: src, to: dest, reroutes, outcome, before, after });
        Ok(outcome)
    }

    /// Advances one time step: expire, deploy arrivals, one policy decision per
    /// active chain, then account delay and energy.
    pub fn step(&mut self, policy: &mut dyn MigrationPolicy) -> StepReport {
        let t = self.t;
        self.expire_timeouts(t);

        let arriving: Vec<usize> = self.fgs.iter().filter(|f| f.arrival == t).map(|f| f.id).collect();
        let mut rejections = 0;
        for &id in &arriving {
            if self.deploy_fg(id) == DeployOutcome::Rejected {
                rejections += 1;
            }
        }

        let (mut migrations, mut reverts, mut decisions) = (0, 0, 0);
        for id in self.active_fgs() {
            let cmd = policy.decide(self, id);
            let moves = match cmd {
                MigrationCommand::Move { fg, vnf, server } => {
                    self.is_active(fg) && self.state.host(fg, vnf).is_some_and(|h| h != server)
                }
                MigrationCommand::NoOp => false,
            };
            let outcome = self
                .execute_migration(&cmd)
                .unwrap_or(MigrationOutcome::Reverted { reason: RevertReason::InvalidCommand });
            decisions += 1;
            if !outcome.is_applied() {
                reverts += 1;
            } else if moves {
                migrations += 1;
            }
            policy.observe(self, id, &cmd, &outcome);
        }

        let delays: Vec<(usize, f64)> = self
            .active_fgs()
            .into_iter()
            .map(|id| (id, self.fg_delay(id).expect("deployed chains are fully mapped")))
            .collect();
        let total_energy = perf::total_energy(&self.state, &self.cfg.perf);
        let report = StepReport {
            t,
            delays,
            total_energy,
            arrivals: arriving.len(),
            rejections,
            migrations,
            reverts,
            decisions,
        };
        self.record(|| Event::Step {
            t,
            active_fgs: report.delays.len(),
            total_energy,
            delays: report.delays.clone(),
            migrations,
            reverts,
            rejections,
            arrivals: report.arrivals,
        });
        self.state.commit_activation();
        policy.end_step(self);
        self.t += 1;
        report
    }

    /// Steps until every request has arrived and expired.
    pub fn run_episode(&mut self, policy: &mut dyn MigrationPolicy) -> Vec<StepReport> {
        let mut reports = Vec::new();
        loop {
            reports.push(self.step(policy));
            if self.is_finished() {
                break;
            }
        }
        reports
    }
}
