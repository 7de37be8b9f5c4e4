//! Mutable network state: VNF placements, logical-link routes, activation
//! flags and residual capacities.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::StateError;
use crate::topology::{LinkId, ServerId, Topology};
use crate::workload::VnfFg;

/// Absolute slack used when comparing accumulated real-valued loads.
pub const LOAD_EPS: f64 = 1e-9;

/// Per-chain mapping, with the demands copied in so the state can be audited
/// without the request list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FgMapping {
    pub hosts: Vec<Option<ServerId>>,
    pub routes: Vec<Option<Vec<LinkId>>>,
    pub cpu: Vec<f64>,
    pub mem: Vec<f64>,
    pub bw: Vec<f64>,
}

impl FgMapping {
    fn new(fg: &VnfFg) -> Self {
        Self {
            hosts: vec![None; fg.vnfs.len()],
            routes: vec![None; fg.logical_links.len()],
            cpu: fg.vnfs.iter().map(|v| v.cpu_demand).collect(),
            mem: fg.vnfs.iter().map(|v| v.mem_demand).collect(),
            bw: fg.logical_links.iter().map(|l| l.bw_demand_gbps).collect(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.hosts.iter().all(Option::is_some) && self.routes.iter().all(Option::is_some)
    }

    pub fn is_empty(&self) -> bool {
        self.hosts.iter().all(Option::is_none) && self.routes.iter().all(Option::is_none)
    }
}

/// Utilization levels above which a server counts as overloaded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub cpu: f64,
    pub mem: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { cpu: 0.8, mem: 0.8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    ServerCpu,
    ServerMem,
    LinkBw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    mappings: BTreeMap<usize, FgMapping>,
    cpu_capacity: Vec<f64>,
    mem_capacity: Vec<f64>,
    bw_capacity: Vec<f64>,
    residual_cpu: Vec<f64>,
    residual_mem: Vec<f64>,
    residual_bw: Vec<f64>,
    /// `(fg, vnf)` pairs hosted per server.
    server_users: Vec<BTreeSet<(usize, usize)>>,
    /// `(fg, logical link)` pairs carried per link.
    link_users: Vec<BTreeSet<(usize, usize)>>,
    server_active: Vec<bool>,
    link_active: Vec<bool>,
    prev_active: Vec<bool>,
}

impl NetworkState {
    pub fn new(topo: &Topology) -> Self {
        let cpu: Vec<f64> = topo.servers.iter().map(|s| s.cpu_capacity).collect();
        let mem: Vec<f64> = topo.servers.iter().map(|s| s.mem_capacity).collect();
        let bw: Vec<f64> = topo.links.iter().map(|l| l.bandwidth_gbps).collect();
        let (ns, nl) = (cpu.len(), bw.len());
        Self {
            mappings: BTreeMap::new(),
            residual_cpu: cpu.clone(),
            residual_mem: mem.clone(),
            residual_bw: bw.clone(),
            cpu_capacity: cpu,
            mem_capacity: mem,
            bw_capacity: bw,
            server_users: vec![BTreeSet::new(); ns],
            link_users: vec![BTreeSet::new(); nl],
            server_active: vec![false; ns],
            link_active: vec![false; nl],
            prev_active: vec![false; ns],
        }
    }

    pub fn num_servers(&self) -> usize {
        self.cpu_capacity.len()
    }

    pub fn num_links(&self) -> usize {
        self.bw_capacity.len()
    }

    pub fn mapping(&self, fg_id: usize) -> Option<&FgMapping> {
        self.mappings.get(&fg_id)
    }

    /// Ids of chains with at least one placed VNF or routed logical link.
    pub fn mapped_fgs(&self) -> impl Iterator<Item = usize> + '_ {
        self.mappings.keys().copied()
    }

    pub fn host(&self, fg_id: usize, vnf: usize) -> Option<ServerId> {
        self.mappings.get(&fg_id).and_then(|m| m.hosts.get(vnf).copied().flatten())
    }

    pub fn route(&self, fg_id: usize, logical: usize) -> Option<&[LinkId]> {
        self.mappings.get(&fg_id).and_then(|m| m.routes.get(logical)).and_then(|r| r.as_deref())
    }

    pub fn residual_cpu(&self, s: ServerId) -> f64 {
        self.residual_cpu[s]
    }

    pub fn residual_mem(&self, s: ServerId) -> f64 {
        self.residual_mem[s]
    }

    pub fn residual_bw(&self) -> &[f64] {
        &self.residual_bw
    }

    pub fn cpu_capacity(&self, s: ServerId) -> f64 {
        self.cpu_capacity[s]
    }

    pub fn mem_capacity(&self, s: ServerId) -> f64 {
        self.mem_capacity[s]
    }

    pub fn cpu_used(&self, s: ServerId) -> f64 {
        self.sum_server(s, |m, v| m.cpu[v])
    }

    pub fn mem_used(&self, s: ServerId) -> f64 {
        self.sum_server(s, |m, v| m.mem[v])
    }

    pub fn bw_used(&self, l: LinkId) -> f64 {
        self.link_users[l].iter().map(|&(fg, ll)| self.mappings[&fg].bw[ll]).sum()
    }

    /// Fraction of the server's CPU capacity claimed by hosted VNFs.
    pub fn cpu_utilization(&self, s: ServerId) -> f64 {
        self.cpu_used(s) / self.cpu_capacity[s]
    }

    pub fn mem_utilization(&self, s: ServerId) -> f64 {
        self.mem_used(s) / self.mem_capacity[s]
    }

    pub fn hosted_vnfs(&self, s: ServerId) -> &BTreeSet<(usize, usize)> {
        &self.server_users[s]
    }

    pub fn carried_logical_links(&self, l: LinkId) -> &BTreeSet<(usize, usize)> {
        &self.link_users[l]
    }

    pub fn is_server_active(&self, s: ServerId) -> bool {
        self.server_active[s]
    }

    pub fn server_active(&self) -> &[bool] {
        &self.server_active
    }

    pub fn is_link_active(&self, l: LinkId) -> bool {
        self.link_active[l]
    }

    /// Activation flags at the end of the previous time step.
    pub fn prev_active(&self) -> &[bool] {
        &self.prev_active
    }

    /// Closes the time step: current activation becomes the reference for
    /// transition energy in the next step.
    pub fn commit_activation(&mut self) {
        self.prev_active.clone_from(&self.server_active);
    }

    fn sum_server(&self, s: ServerId, f: impl Fn(&FgMapping, usize) -> f64) -> f64 {
        self.server_users[s].iter().map(|&(fg, v)| f(&self.mappings[&fg], v)).sum()
    }

    fn refresh_server(&mut self, s: ServerId) {
        self.residual_cpu[s] = self.cpu_capacity[s] - self.cpu_used(s);
        self.residual_mem[s] = self.mem_capacity[s] - self.mem_used(s);
        self.server_active[s] = !self.server_users[s].is_empty();
    }

    fn refresh_link(&mut self, l: LinkId) {
        self.residual_bw[l] = self.bw_capacity[l] - self.bw_used(l);
        self.link_active[l] = !self.link_users[l].is_empty();
    }

    /// Places (or moves) VNF `vnf` of `fg` onto server `s`. Fails without
    /// touching the state if the server's CPU or memory capacity would be exceeded.
    pub fn apply_placement(&mut self, fg: &VnfFg, vnf: usize, s: ServerId) -> Result<(), StateError> {
        if s >= self.num_servers() {
            return Err(StateError::BadIndex(format!("server {s}")));
        }
        let Some(v) = fg.vnfs.get(vnf) else {
            return Err(StateError::BadIndex(format!("vnf {}:{vnf}", fg.id)));
        };
        let current = self.host(fg.id, vnf);
        if current == Some(s) {
            return Ok(());
        }
        if v.cpu_demand > self.residual_cpu[s] + LOAD_EPS {
            return Err(StateError::InfeasiblePlacement { fg: fg.id, vnf, server: s, resource: "cpu" });
        }
        if v.mem_demand > self.residual_mem[s] + LOAD_EPS {
            return Err(StateError::InfeasiblePlacement { fg: fg.id, vnf, server: s, resource: "mem" });
        }
        self.mappings.entry(fg.id).or_insert_with(|| FgMapping::new(fg)).hosts[vnf] = Some(s);
        if let Some(old) = current {
            self.server_users[old].remove(&(fg.id, vnf));
            self.refresh_server(old);
        }
        self.server_users[s].insert((fg.id, vnf));
        self.refresh_server(s);
        Ok(())
    }

    pub fn remove_placement(&mut self, fg_id: usize, vnf: usize) {
        let Some(m) = self.mappings.get_mut(&fg_id) else { return };
        let Some(s) = m.hosts.get_mut(vnf).and_then(Option::take) else { return };
        self.server_users[s].remove(&(fg_id, vnf));
        self.refresh_server(s);
        self.prune(fg_id);
    }

    /// Routes logical link `logical` of `fg` over `path`, replacing any previous
    /// route. Fails without touching the state if a link lacks bandwidth.
    pub fn apply_route(&mut self, fg: &VnfFg, logical: usize, path: Vec<LinkId>) -> Result<(), StateError> {
        let Some(ll) = fg.logical_links.get(logical) else {
            return Err(StateError::BadIndex(format!("logical link {}:{logical}", fg.id)));
        };
        let old: Vec<LinkId> = self.route(fg.id, logical).map(<[_]>::to_vec).unwrap_or_default();
        for &l in &path {
            if l >= self.num_links() {
                return Err(StateError::BadIndex(format!("link {l}")));
            }
            let freed = if old.contains(&l) { ll.bw_demand_gbps } else { 0.0 };
            if ll.bw_demand_gbps > self.residual_bw[l] + freed + LOAD_EPS {
                return Err(StateError::InfeasibleRoute { fg: fg.id, logical, link: l });
            }
        }
        for &l in &old {
            self.link_users[l].remove(&(fg.id, logical));
        }
        for &l in &path {
            self.link_users[l].insert((fg.id, logical));
        }
        self.mappings.entry(fg.id).or_insert_with(|| FgMapping::new(fg)).routes[logical] = Some(path.clone());
        for l in old.into_iter().chain(path) {
            self.refresh_link(l);
        }
        Ok(())
    }

    pub fn remove_route(&mut self, fg_id: usize, logical: usize) {
        let Some(m) = self.mappings.get_mut(&fg_id) else { return };
        let Some(path) = m.routes.get_mut(logical).and_then(Option::take) else { return };
        for &l in &path {
            self.link_users[l].remove(&(fg_id, logical));
            self.refresh_link(l);
        }
        self.prune(fg_id);
    }

    /// Drops every placement and route of a chain, restoring residuals.
    pub fn remove_fg(&mut self, fg_id: usize) {
        let Some(m) = self.mappings.get(&fg_id) else { return };
        let (nv, nl) = (m.hosts.len(), m.routes.len());
        for l in 0..nl {
            self.remove_route(fg_id, l);
        }
        for v in 0..nv {
            self.remove_placement(fg_id, v);
        }
        self.mappings.remove(&fg_id);
    }

    fn prune(&mut self, fg_id: usize) {
        if self.mappings.get(&fg_id).is_some_and(FgMapping::is_empty) {
            self.mappings.remove(&fg_id);
        }
    }

    /// Capacity and utilization-threshold violations, sorted.
    pub fn check_constraints(&self, thresholds: &Thresholds) -> Vec<Violation> {
        let mut out = Vec::new();
        for s in 0..self.num_servers() {
            let cpu_limit = self.cpu_capacity[s] * thresholds.cpu.min(1.0);
            let mem_limit = self.mem_capacity[s] * thresholds.mem.min(1.0);
            if self.cpu_used(s) > cpu_limit + LOAD_EPS {
                out.push(Violation { kind: ViolationKind::ServerCpu, id: s });
            }
            if self.mem_used(s) > mem_limit + LOAD_EPS {
                out.push(Violation { kind: ViolationKind::ServerMem, id: s });
            }
        }
        for l in 0..self.num_links() {
            if self.bw_used(l) > self.bw_capacity[l] + LOAD_EPS {
                out.push(Violation { kind: ViolationKind::LinkBw, id: l });
            }
        }
        out.sort();
        out
    }

    /// Whether hosting an extra `(cpu, mem)` load keeps server `s` within thresholds.
    pub fn fits_within(&self, s: ServerId, cpu: f64, mem: f64, thresholds: &Thresholds) -> bool {
        self.cpu_used(s) + cpu <= self.cpu_capacity[s] * thresholds.cpu.min(1.0) + LOAD_EPS
            && self.mem_used(s) + mem <= self.mem_capacity[s] * thresholds.mem.min(1.0) + LOAD_EPS
    }

    /// Server and link activation flags recomputed from the mappings alone.
    pub fn activation_from_scratch(&self) -> (Vec<bool>, Vec<bool>) {
        let mut servers = vec![false; self.num_servers()];
        let mut links = vec![false; self.num_links()];
        for m in self.mappings.values() {
            for s in m.hosts.iter().flatten() {
                servers[*s] = true;
            }
            for l in m.routes.iter().flatten().flatten() {
                links[*l] = true;
            }
        }
        (servers, links)
    }

    /// Deterministic digest of everything observable in the state.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for (id, m) in &self.mappings {
            id.hash(&mut h);
            m.hosts.hash(&mut h);
            m.routes.hash(&mut h);
        }
        for v in self.residual_cpu.iter().chain(&self.residual_mem).chain(&self.residual_bw) {
            v.to_bits().hash(&mut h);
        }
        self.server_active.hash(&mut h);
        self.link_active.hash(&mut h);
        self.prev_active.hash(&mut h);
        h.finish()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("state serializes")
    }
}
