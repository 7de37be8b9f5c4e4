#![allow(dead_code)]

use edgemig_core::topology::{LinkId, Server, ServerId, Tier, Topology, TopologyConfig};
use edgemig_core::workload::{LogicalLink, Vnf, VnfFg};
use rand::Rng;

/// Random topology with `n` servers (the first `n_edge` edge-tier) and each
/// pair linked with probability `p`.
pub fn random_topology(rng: &mut impl Rng, n: usize, n_edge: usize, p: f64) -> Topology {
    let servers = (0..n)
        .map(|id| {
            let edge = id < n_edge;
            Server {
                id,
                tier: if edge { Tier::Edge } else { Tier::Core },
                cpu_capacity: if edge { 40.0 } else { 200.0 },
                mem_capacity: if edge { 16.0 } else { 64.0 },
                pos: [rng.random(), rng.random()],
            }
        })
        .collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                edges.push((a, b, 3.5, rng.random_range(0.1..1.0)));
            }
        }
    }
    let cfg = TopologyConfig { n_edge, n_core: n - n_edge, ..Default::default() };
    Topology::from_parts(servers, &edges, cfg).unwrap()
}

/// Line topology 0 - 1 - ... - (n-1).
pub fn line(n: usize, n_edge: usize, prop: f64) -> Topology {
    let servers = (0..n)
        .map(|id| {
            let edge = id < n_edge;
            Server {
                id,
                tier: if edge { Tier::Edge } else { Tier::Core },
                cpu_capacity: if edge { 40.0 } else { 200.0 },
                mem_capacity: if edge { 16.0 } else { 64.0 },
                pos: [id as f64, 0.0],
            }
        })
        .collect();
    let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 3.5, prop)).collect();
    Topology::from_parts(servers, &edges, TopologyConfig { n_edge, n_core: n - n_edge, ..Default::default() }).unwrap()
}

pub fn chain(id: usize, demands: &[(f64, f64)], bw: f64, arrival: u64, service: u64) -> VnfFg {
    VnfFg {
        id,
        vnfs: demands
            .iter()
            .enumerate()
            .map(|(p, &(c, m))| Vnf { fg_id: id, position: p, cpu_demand: c, mem_demand: m })
            .collect(),
        logical_links: (0..demands.len().saturating_sub(1)).map(|from| LogicalLink { from, bw_demand_gbps: bw }).collect(),
        arrival,
        service_time: service,
        packet_rate: 100.0,
        deadline_ms: 20.0,
    }
}

/// All simple paths from `src` to `dst` as link-id sequences.
pub fn all_simple_paths(topo: &Topology, src: ServerId, dst: ServerId) -> Vec<Vec<LinkId>> {
    fn go(
        topo: &Topology,
        u: ServerId,
        dst: ServerId,
        seen: &mut Vec<bool>,
        path: &mut Vec<LinkId>,
        out: &mut Vec<Vec<LinkId>>,
    ) {
        if u == dst {
            out.push(path.clone());
            return;
        }
        for l in &topo.links {
            let (a, b) = l.endpoints;
            let v = if a == u {
                b
            } else if b == u {
                a
            } else {
                continue;
            };
            if seen[v] {
                continue;
            }
            seen[v] = true;
            path.push(l.id);
            go(topo, v, dst, seen, path, out);
            path.pop();
            seen[v] = false;
        }
    }
    let mut seen = vec![false; topo.num_servers()];
    seen[src] = true;
    let mut out = Vec::new();
    go(topo, src, dst, &mut seen, &mut Vec::new(), &mut out);
    out
}
