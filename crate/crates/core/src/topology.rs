//! Edge-core physical network: Waxman-connected servers with CPU/MEM
//! capacities and bandwidth-limited links.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub type ServerId = usize;
pub type LinkId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Edge,
    Core,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Server {
    pub id: ServerId,
    pub tier: Tier,
    pub cpu_capacity: f64,
    pub mem_capacity: f64,
    /// Position in the unit square, used for Waxman distances.
    pub pos: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: LinkId,
    /// Endpoints, stored with `endpoints.0 < endpoints.1`.
    pub endpoints: (ServerId, ServerId),
    pub bandwidth_gbps: f64,
    pub prop_delay_ms: f64,
}

impl Link {
    pub fn other(&self, s: ServerId) -> ServerId {
        if self.endpoints.0 == s {
            self.endpoints.1
        } else {
            self.endpoints.0
        }
    }
}

/// Generation parameters. Defaults are the 60-server evaluation setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopologyConfig {
    pub n_edge: usize,
    pub n_core: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub edge_cpu: f64,
    pub edge_mem: f64,
    pub core_cpu: f64,
    pub core_mem: f64,
    pub link_bandwidth_gbps: f64,
    pub prop_delay_range_ms: (f64, f64),
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            n_edge: 20,
            n_core: 40,
            alpha: 0.5,
            beta: 0.2,
            seed: 1,
            edge_cpu: 40.0,
            edge_mem: 16.0,
            core_cpu: 200.0,
            core_mem: 64.0,
            link_bandwidth_gbps: 3.5,
            prop_delay_range_ms: (0.1, 1.0),
        }
    }
}

impl TopologyConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_edge < 1 || self.n_core < 1 {
            return Err(ConfigError::new("topology needs at least one edge and one core server"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ConfigError::new(format!("waxman alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(ConfigError::new(format!("waxman beta {} must be positive", self.beta)));
        }
        for (name, v) in [
            ("edge_cpu", self.edge_cpu),
            ("edge_mem", self.edge_mem),
            ("core_cpu", self.core_cpu),
            ("core_mem", self.core_mem),
            ("link_bandwidth_gbps", self.link_bandwidth_gbps),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConfigError::new(format!("{name} must be positive, got {v}")));
            }
        }
        let (lo, hi) = self.prop_delay_range_ms;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return Err(ConfigError::new(format!("invalid propagation delay range ({lo}, {hi})")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub servers: Vec<Server>,
    pub links: Vec<Link>,
    /// Per server, `(neighbor, link id)` pairs sorted by link id.
    pub adjacency: Vec<Vec<(ServerId, LinkId)>>,
    pub n_edge: usize,
    /// Parameters the topology was generated from, kept for reproducibility.
    pub config: TopologyConfig,
}

impl Topology {
    /// Builds a topology from explicit servers and links; edges are `(a, b, bandwidth, prop_delay)`.
    pub fn from_parts(
        servers: Vec<Server>,
        edges: &[(ServerId, ServerId, f64, f64)],
        config: TopologyConfig,
    ) -> Result<Self, ConfigError> {
        let n = servers.len();
        let n_edge = servers.iter().filter(|s| s.tier == Tier::Edge).count();
        for (i, s) in servers.iter().enumerate() {
            if s.id != i {
                return Err(ConfigError::new(format!("server at index {i} has id {}", s.id)));
            }
            if (s.tier == Tier::Edge) != (i < n_edge) {
                return Err(ConfigError::new("edge servers must occupy the lowest ids"));
            }
            if !(s.cpu_capacity > 0.0 && s.mem_capacity > 0.0) {
                return Err(ConfigError::new(format!("server {i} has non-positive capacity")));
            }
        }
        let mut links = Vec::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b, bw, prop) in edges {
            if a == b || a >= n || b >= n {
                return Err(ConfigError::new(format!("invalid link endpoints ({a}, {b})")));
            }
            if !(bw > 0.0) || !(prop >= 0.0) {
                return Err(ConfigError::new(format!("invalid link attributes on ({a}, {b})")));
            }
            let endpoints = (a.min(b), a.max(b));
            if links.iter().any(|l: &Link| l.endpoints == endpoints) {
                return Err(ConfigError::new(format!("duplicate link ({a}, {b})")));
            }
            let id = links.len();
            links.push(Link { id, endpoints, bandwidth_gbps: bw, prop_delay_ms: prop });
            adjacency[a].push((b, id));
            adjacency[b].push((a, id));
        }
        Ok(Self { servers, links, adjacency, n_edge, config })
    }

    pub fn num_servers(&self) -> usize {
        self.servers.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn is_edge(&self, s: ServerId) -> bool {
        s < self.n_edge
    }

    pub fn link_between(&self, a: ServerId, b: ServerId) -> Option<LinkId> {
        self.adjacency[a].iter().find(|&&(n, _)| n == b).map(|&(_, l)| l)
    }

    /// Breadth-first reachability from server 0.
    pub fn is_connected(&self) -> bool {
        let n = self.num_servers();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(s).map_err(|e| ConfigError::new(format!("topology json: {e}")))
    }

    /// Minimum-hop path from `src` to `dst` over links whose residual bandwidth
    /// covers `bw_demand`. Ties are broken by cumulative propagation delay, then
    /// by the lexicographic order of the link-id sequence.
    pub fn shortest_feasible_path(
        &self,
        src: ServerId,
        dst: ServerId,
        bw_demand: f64,
        residual_bw: &[f64],
    ) -> Option<Vec<LinkId>> {
        if src == dst {
            return Some(Vec::new());
        }
        let n = self.num_servers();
        // Label-setting search; labels compare (hops, delay, path) lexicographically,
        // which is preserved under extension by a common link.
        let mut best: Vec<Option<Label>> = vec![None; n];
        let mut done = vec![false; n];
        best[src] = Some(Label { hops: 0, delay: 0.0, path: Vec::new() });
        loop {
            let mut pick: Option<ServerId> = None;
            for u in 0..n {
                if done[u] {
                    continue;
                }
                if let Some(lu) = &best[u] {
                    match pick {
                        Some(p) if !lu.better_than(best[p].as_ref().unwrap()) => {}
                        _ => pick = Some(u),
                    }
                }
            }
            let u = pick?;
            if u == dst {
                return best[u].take().map(|l| l.path);
            }
            done[u] = true;
            let lu = best[u].clone().unwrap();
            for &(v, lid) in &self.adjacency[u] {
                if done[v] || residual_bw[lid] < bw_demand {
                    continue;
                }
                let mut path = lu.path.clone();
                path.push(lid);
                let cand = Label {
                    hops: lu.hops + 1,
                    delay: lu.delay + self.links[lid].prop_delay_ms,
                    path,
                };
                if best[v].as_ref().is_none_or(|bv| cand.better_than(bv)) {
                    best[v] = Some(cand);
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Label {
    hops: usize,
    delay: f64,
    path: Vec<LinkId>,
}

impl Label {
    fn better_than(&self, other: &Label) -> bool {
        (self.hops, self.delay)
            .partial_cmp(&(other.hops, other.delay))
            .map(|o| o.then_with(|| self.path.cmp(&other.path)))
            == Some(std::cmp::Ordering::Less)
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Waxman random graph over `n_edge + n_core` servers placed uniformly in the
/// unit square. Pairs are linked with probability `alpha * exp(-d / (beta * L))`,
/// `L` being the largest pairwise distance; disconnected components are then
/// joined through their closest server pair until the graph is connected.
pub fn generate_waxman(cfg: &TopologyConfig) -> Result<Topology, ConfigError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_edge + cfg.n_core;
    let servers: Vec<Server> = (0..n)
        .map(|id| {
            let pos = [rng.random::<f64>(), rng.random::<f64>()];
            let (tier, cpu, mem) = if id < cfg.n_edge {
                (Tier::Edge, cfg.edge_cpu, cfg.edge_mem)
            } else {
                (Tier::Core, cfg.core_cpu, cfg.core_mem)
            };
            Server { id, tier, cpu_capacity: cpu, mem_capacity: mem, pos }
        })
        .collect();

    let mut max_d: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            max_d = max_d.max(dist(servers[i].pos, servers[j].pos));
        }
    }
    let scale = cfg.beta * max_d.max(f64::MIN_POSITIVE);

    let (lo, hi) = cfg.prop_delay_range_ms;
    let draw_delay = |rng: &mut ChaCha8Rng| if hi > lo { rng.random_range(lo..hi) } else { lo };

    let mut edges: Vec<(ServerId, ServerId, f64, f64)> = Vec::new();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in i + 1..n {
            let p = cfg.alpha * (-dist(servers[i].pos, servers[j].pos) / scale).exp();
            if rng.random::<f64>() < p {
                let d = draw_delay(&mut rng);
                edges.push((i, j, cfg.link_bandwidth_gbps, d));
                uf.union(i, j);
            }
        }
    }

    loop {
        let mut closest: Option<(f64, ServerId, ServerId)> = None;
        for i in 0..n {
            for j in i + 1..n {
                if uf.find(i) == uf.find(j) {
                    continue;
                }
                let d = dist(servers[i].pos, servers[j].pos);
                if closest.is_none_or(|(cd, _, _)| d < cd) {
                    closest = Some((d, i, j));
                }
            }
        }
        let Some((_, i, j)) = closest else { break };
        let d = draw_delay(&mut rng);
        edges.push((i, j, cfg.link_bandwidth_gbps, d));
        uf.union(i, j);
    }

    Topology::from_parts(servers, &edges, cfg.clone())
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut c = x;
        while self.parent[c] != r {
            let next = self.parent[c];
            self.parent[c] = r;
            c = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}
