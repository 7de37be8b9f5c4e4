//! Comparison policies: utilization-threshold migration and random migration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::orchestrator::{MigrationCommand, MigrationPolicy, World};
use crate::state::{NetworkState, Thresholds, LOAD_EPS};
use crate::topology::{ServerId, Topology};
use crate::workload::VnfFg;

/// If any VNF of `fg` sits on a server above the CPU or memory threshold,
/// moves the most CPU-hungry such VNF to the least CPU-utilized server that
/// can take it within thresholds. Otherwise, or with no such server, no-op.
pub fn threshold_policy(state: &NetworkState, topo: &Topology, fg: &VnfFg, th: &Thresholds) -> MigrationCommand {
    let overloaded = |s: ServerId| {
        state.cpu_used(s) > state.cpu_capacity(s) * th.cpu + LOAD_EPS
            || state.mem_used(s) > state.mem_capacity(s) * th.mem + LOAD_EPS
    };
    let candidate = fg
        .vnfs
        .iter()
        .enumerate()
        .filter_map(|(v, vnf)| state.host(fg.id, v).map(|h| (v, vnf, h)))
        .filter(|&(_, _, h)| overloaded(h))
        // largest demand first, lowest position on ties
        .min_by(|a, b| b.1.cpu_demand.total_cmp(&a.1.cpu_demand).then(a.0.cmp(&b.0)));
    let Some((v, vnf, host)) = candidate else {
        return MigrationCommand::NoOp;
    };
    let dest = (0..topo.num_servers())
        .filter(|&s| s != host && state.fits_within(s, vnf.cpu_demand, vnf.mem_demand, th))
        .min_by(|&a, &b| state.cpu_utilization(a).total_cmp(&state.cpu_utilization(b)).then(a.cmp(&b)));
    match dest {
        Some(server) => MigrationCommand::Move { fg: fg.id, vnf: v, server },
        None => MigrationCommand::NoOp,
    }
}

/// With probability `p_mig`, a uniformly random (VNF, server) pair; else no-op.
pub fn random_policy(fg: &VnfFg, n_servers: usize, p_mig: f64, rng: &mut impl Rng) -> MigrationCommand {
    if fg.vnfs.is_empty() || n_servers == 0 || !rng.random_bool(p_mig.clamp(0.0, 1.0)) {
        return MigrationCommand::NoOp;
    }
    let vnf = rng.random_range(0..fg.vnfs.len());
    let server = rng.random_range(0..n_servers);
    MigrationCommand::Move { fg: fg.id, vnf, server }
}

#[derive(Debug, Clone, Default)]
pub struct ThresholdPolicy;

impl MigrationPolicy for ThresholdPolicy {
    fn decide(&mut self, world: &World, fg_id: usize) -> MigrationCommand {
        threshold_policy(&world.state, world.topology(), world.fg(fg_id), &world.config().thresholds)
    }
}

#[derive(Debug, Clone)]
pub struct RandomPolicy {
    pub p_mig: f64,
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(p_mig: f64, seed: u64) -> Self {
        Self { p_mig, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl MigrationPolicy for RandomPolicy {
    fn decide(&mut self, world: &World, fg_id: usize) -> MigrationCommand {
        random_policy(world.fg(fg_id), world.topology().num_servers(), self.p_mig, &mut self.rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{generate_waxman, TopologyConfig};
    use crate::workload::{LogicalLink, Vnf};

    fn one_vnf(id: usize, cpu: f64) -> VnfFg {
        VnfFg {
            id,
            vnfs: vec![Vnf { fg_id: id, position: 0, cpu_demand: cpu, mem_demand: 1.0 }],
            logical_links: Vec::<LogicalLink>::new(),
            arrival: 0,
            service_time: 5,
            packet_rate: 100.0,
            deadline_ms: 20.0,
        }
    }

    #[test]
    fn random_with_zero_probability_never_moves() {
        let f = one_vnf(0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..1000).all(|_| random_policy(&f, 10, 0.0, &mut rng) == MigrationCommand::NoOp));
    }

    #[test]
    fn random_single_server_destination() {
        let f = one_vnf(0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(random_policy(&f, 1, 1.0, &mut rng), MigrationCommand::Move { fg: 0, vnf: 0, server: 0 });
        }
    }

    #[test]
    fn random_destinations_uniform() {
        let f = one_vnf(0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 8;
        let draws = 10_000;
        let mut counts = vec![0usize; n];
        for _ in 0..draws {
            if let MigrationCommand::Move { server, .. } = random_policy(&f, n, 1.0, &mut rng) {
                counts[server] += 1;
            }
        }
        let expected = draws as f64 / n as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 7 degrees of freedom, p = 0.001 critical value
        assert!(chi2 < 24.32, "chi2 {chi2}");
    }

    #[test]
    fn threshold_noop_when_below() {
        let topo = generate_waxman(&TopologyConfig { n_edge: 2, n_core: 2, ..Default::default() }).unwrap();
        let mut st = NetworkState::new(&topo);
        let f = one_vnf(0, 20.0);
        st.apply_placement(&f, 0, 0).unwrap();
        assert_eq!(threshold_policy(&st, &topo, &f, &Thresholds::default()), MigrationCommand::NoOp);
    }

    #[test]
    fn threshold_moves_to_least_loaded_feasible() {
        let topo = generate_waxman(&TopologyConfig { n_edge: 2, n_core: 3, ..Default::default() }).unwrap();
        let mut st = NetworkState::new(&topo);
        let hot = one_vnf(0, 20.0);
        let warm = one_vnf(1, 14.0);
        let filler = one_vnf(2, 30.0);
        let filler2 = one_vnf(3, 10.0);
        st.apply_placement(&hot, 0, 0).unwrap();
        st.apply_placement(&warm, 0, 0).unwrap(); // 34 / 40 = 85%
        st.apply_placement(&filler, 0, 2).unwrap();
        st.apply_placement(&filler2, 0, 1).unwrap();
        let cmd = threshold_policy(&st, &topo, &hot, &Thresholds::default());
        // argmin oracle over every other server that can take 20 cpu within 80%
        let th = Thresholds::default();
        let expect = (0..topo.num_servers())
            .filter(|&s| s != 0 && st.cpu_used(s) + 20.0 <= st.cpu_capacity(s) * th.cpu && st.mem_used(s) + 1.0 <= st.mem_capacity(s) * th.mem)
            .min_by(|&a, &b| st.cpu_utilization(a).partial_cmp(&st.cpu_utilization(b)).unwrap().then(a.cmp(&b)))
            .unwrap();
        assert_eq!(cmd, MigrationCommand::Move { fg: 0, vnf: 0, server: expect });
        assert_eq!(expect, 3);
    }

    #[test]
    fn threshold_noop_without_destination() {
        let topo = generate_waxman(&TopologyConfig {
            n_edge: 1,
            n_core: 1,
            core_cpu: 40.0,
            ..Default::default()
        })
        .unwrap();
        let mut st = NetworkState::new(&topo);
        let a = one_vnf(0, 20.0);
        let b = one_vnf(1, 14.0);
        let c = one_vnf(2, 30.0);
        st.apply_placement(&a, 0, 0).unwrap();
        st.apply_placement(&b, 0, 0).unwrap();
        st.apply_placement(&c, 0, 1).unwrap();
        assert_eq!(threshold_policy(&st, &topo, &a, &Thresholds::default()), MigrationCommand::NoOp);
    }
}
