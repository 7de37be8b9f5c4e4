use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, Context, Result};
use edgemig_core::baselines::{RandomPolicy, ThresholdPolicy};
use edgemig_core::mdp::{Layout, StateEncoder};
use edgemig_core::{generate_requests, generate_waxman, MigrationPolicy, Topology, TopologyConfig, World, WorkloadConfig};
use edgemig_learn::dt::TrainStats;
use edgemig_learn::{ActorCritic, DigitalTwin};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Learner, RewardTap};
use crate::config::{ExperimentConfig, PolicyKind};
use crate::metrics::{fill_normalized, write_csv, write_records, EpisodeMetrics, EpisodeTally};

const STREAM_TOPOLOGY: u64 = 1;
const STREAM_POLICY: u64 = 2;
const STREAM_INIT: u64 = 3;
const STREAM_TWIN: u64 = 4;
const STREAM_WORKLOAD: u64 = 1 << 32;

/// Independent sub-seed of `seed` for one purpose.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

pub fn run_topology(cfg: &ExperimentConfig) -> Result<Topology> {
    let tc = TopologyConfig { seed: derive_seed(cfg.seed, STREAM_TOPOLOGY), ..cfg.topology.clone() };
    Ok(generate_waxman(&tc)?)
}

pub fn episode_workload(cfg: &ExperimentConfig, episode: usize) -> WorkloadConfig {
    WorkloadConfig { seed: derive_seed(cfg.seed, STREAM_WORKLOAD + episode as u64), ..cfg.workload.clone() }
}

pub fn state_encoder(cfg: &ExperimentConfig) -> StateEncoder {
    let layout = Layout::new(cfg.n_servers(), cfg.workload.chain_len);
    let scale = (f64::from(cfg.workload.cpu_range.1), f64::from(cfg.workload.mem_range.1));
    StateEncoder::new(layout, scale, cfg.sim.perf.clone())
}

/// One step of the final evaluation window, for load-bucketed comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSample {
    pub episode: usize,
    pub active_fgs: usize,
    pub energy: f64,
    pub mean_delay_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub metrics: Vec<EpisodeMetrics>,
    pub window_steps: Vec<StepSample>,
    /// Actor-critic updates performed; zero for the baselines.
    pub updates: usize,
    /// Twin losses at each episode-end retrain.
    pub twin: Vec<(usize, TrainStats)>,
}

impl RunOutput {
    /// Mean of `f` over the last `window` episodes.
    pub fn final_mean(&self, window: usize, f: impl Fn(&EpisodeMetrics) -> f64) -> f64 {
        let tail = &self.metrics[self.metrics.len().saturating_sub(window)..];
        tail.iter().map(f).sum::<f64>() / tail.len().max(1) as f64
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    policy: PolicyKind,
    seed: u64,
    episodes: usize,
    updates: usize,
    final_window: usize,
    final_avg_delay_ms: f64,
    final_avg_energy: f64,
    final_cum_reward: f64,
    final_accept_rate: f64,
    twin: &'a [(usize, TrainStats)],
    config: &'a ExperimentConfig,
}

enum Agent {
    Learner(Box<Learner>),
    Fixed(Box<dyn MigrationPolicy>),
}

impl Agent {
    fn build(cfg: &ExperimentConfig) -> Self {
        let seed = cfg.seed;
        match cfg.policy {
            PolicyKind::Random => Agent::Fixed(Box::new(RandomPolicy::new(cfg.p_mig, derive_seed(seed, STREAM_POLICY)))),
            PolicyKind::Threshold => Agent::Fixed(Box::new(ThresholdPolicy)),
            PolicyKind::A2cDt | PolicyKind::A2cPlain => {
                let enc = state_encoder(cfg);
                let (dim, n_act) = (enc.layout.state_dim(), enc.layout.num_actions());
                // both learners start from the same weights for a given seed
                let ac = ActorCritic::new(
                    dim,
                    n_act,
                    cfg.learning.a2c.clone(),
                    &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_INIT)),
                );
                let twin = (cfg.policy == PolicyKind::A2cDt).then(|| {
                    DigitalTwin::new(
                        dim,
                        n_act,
                        cfg.learning.dt.clone(),
                        &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_TWIN)),
                    )
                });
                Agent::Learner(Box::new(Learner::new(ac, twin, enc, cfg.learning.clone(), derive_seed(seed, STREAM_POLICY))))
            }
        }
    }

    fn policy(&mut self) -> &mut dyn MigrationPolicy {
        match self {
            Agent::Learner(l) => l.as_mut(),
            Agent::Fixed(p) => p.as_mut(),
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunOutput> {
    run_experiment_with(cfg, out_dir, |_| {})
}

/// Trains or runs `cfg.policy` for `cfg.episodes` episodes on one topology,
/// calling `on_episode` after each. With `out_dir`, writes `metrics.csv`,
/// `summary.json`, `events.jsonl` (if enabled) and learner checkpoints there.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    out_dir: Option<&Path>,
    mut on_episode: impl FnMut(&EpisodeMetrics),
) -> Result<RunOutput> {
    cfg.validate()?;
    let topo = Arc::new(run_topology(cfg)?);
    let mut agent = Agent::build(cfg);

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut events = match out_dir {
        Some(dir) if cfg.log_events => Some(BufWriter::new(File::create(dir.join("events.jsonl"))?)),
        _ => None,
    };

    let window_start = cfg.episodes.saturating_sub(cfg.eval_window);
    let mut out = RunOutput { metrics: Vec::with_capacity(cfg.episodes), window_steps: Vec::new(), updates: 0, twin: Vec::new() };
    for ep in 0..cfg.episodes {
        let fgs = generate_requests(&episode_workload(cfg, ep))?;
        let mut world = World::new(topo.clone(), fgs, cfg.sim.clone());
        if events.is_some() {
            world = world.with_event_log();
        }
        let (reports, cum_reward, decisions) = {
            let mut tap = RewardTap::new(agent.policy());
            let reports = world.run_episode(&mut tap);
            (reports, tap.cum_reward, tap.decisions)
        };
        if let Some(w) = events.as_mut() {
            write_records(w, ep, cfg.policy, cfg.seed, world.take_events(), decisions)?;
        }
        if let Agent::Learner(l) = &mut agent {
            let stats = l.end_episode().map_err(|e| anyhow!("episode {ep}: training failed: {e}"))?;
            if let Some(s) = stats {
                out.twin.push((ep, s));
            }
            out.updates = l.updates;
        }
        if ep >= window_start {
            out.window_steps.extend(reports.iter().map(|r| StepSample {
                episode: ep,
                active_fgs: r.active_fgs(),
                energy: r.total_energy,
                mean_delay_ms: r.mean_delay_ms(),
            }));
        }
        let m = EpisodeTally::from_reports(&reports).finish(ep, cfg.policy, cfg.seed, cum_reward);
        on_episode(&m);
        out.metrics.push(m);
    }
    fill_normalized(&mut out.metrics);

    if let Some(mut w) = events {
        w.flush()?;
    }
    if let Some(dir) = out_dir {
        write_csv(&dir.join("metrics.csv"), &out.metrics)?;
        let win = cfg.eval_window;
        let summary = Summary {
            policy: cfg.policy,
            seed: cfg.seed,
            episodes: cfg.episodes,
            updates: out.updates,
            final_window: win.min(cfg.episodes),
            final_avg_delay_ms: out.final_mean(win, |m| m.avg_delay_ms),
            final_avg_energy: out.final_mean(win, |m| m.avg_energy),
            final_cum_reward: out.final_mean(win, |m| m.cum_reward),
            final_accept_rate: out.final_mean(win, |m| m.accept_rate),
            twin: &out.twin,
            config: cfg,
        };
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
        if let (true, Agent::Learner(l)) = (cfg.checkpoints, &agent) {
            let ck = dir.join("checkpoints");
            std::fs::create_dir_all(&ck)?;
            l.ac.save(&ck.join("actor_critic"))?;
            if let Some(t) = &l.twin {
                t.save(&ck.join("twin"))?;
            }
        }
    }
    Ok(out)
}
