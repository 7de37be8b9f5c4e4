use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use edgemig_core::state::Thresholds;
use edgemig_core::{SimConfig, TopologyConfig, WorkloadConfig};
use edgemig_learn::{A2cConfig, DtConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    A2cDt,
    A2cPlain,
    Threshold,
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [PolicyKind::A2cDt, PolicyKind::A2cPlain, PolicyKind::Threshold, PolicyKind::Random];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::A2cDt => "a2c-dt",
            PolicyKind::A2cPlain => "a2c-plain",
            PolicyKind::Threshold => "threshold",
            PolicyKind::Random => "random",
        }
    }

    pub fn is_learner(&self) -> bool {
        matches!(self, PolicyKind::A2cDt | PolicyKind::A2cPlain)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .with_context(|| format!("unknown policy {s:?} (expected a2c-dt, a2c-plain, threshold or random)"))
    }
}

/// Replay, update cadence and model settings shared by both learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningConfig {
    pub success_capacity: usize,
    pub fail_capacity: usize,
    pub dt_capacity: usize,
    /// Share of each physical batch drawn from the success buffer.
    pub kappa_balance: f64,
    pub batch_physical: usize,
    pub batch_dt: usize,
    /// Physical experiences collected before the first update.
    pub warmup: usize,
    pub a2c: A2cConfig,
    pub dt: DtConfig,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            success_capacity: 4000,
            fail_capacity: 2000,
            dt_capacity: 6000,
            kappa_balance: 0.35,
            batch_physical: 32,
            batch_dt: 32,
            warmup: 500,
            a2c: A2cConfig::default(),
            dt: DtConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// `seed` is ignored here and in `workload`: the topology seed and every
    /// episode's workload seed derive from the run seed.
    pub topology: TopologyConfig,
    pub workload: WorkloadConfig,
    pub sim: SimConfig,
    pub learning: LearningConfig,
    pub policy: PolicyKind,
    pub episodes: usize,
    pub seed: u64,
    /// Migration probability of the random baseline.
    pub p_mig: f64,
    /// Trailing episodes that count as "final performance" in comparisons.
    pub eval_window: usize,
    /// Write `events.jsonl`. Costs memory and disk on long runs.
    pub log_events: bool,
    pub checkpoints: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            topology: TopologyConfig::default(),
            workload: WorkloadConfig::default(),
            sim: SimConfig::default(),
            learning: LearningConfig::default(),
            policy: PolicyKind::A2cDt,
            episodes: 100,
            seed: 1,
            p_mig: 0.5,
            eval_window: 10,
            log_events: true,
            checkpoints: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.workload.validate()?;
        self.sim.perf.validate()?;
        let Thresholds { cpu, mem } = self.sim.thresholds;
        if !(cpu > 0.0 && cpu <= 1.0 && mem > 0.0 && mem <= 1.0) {
            bail!("utilization thresholds must lie in (0, 1], got cpu {cpu} mem {mem}");
        }
        if self.episodes == 0 {
            bail!("need at least one episode");
        }
        if !(0.0..=1.0).contains(&self.p_mig) {
            bail!("p_mig {} outside [0, 1]", self.p_mig);
        }
        if self.eval_window == 0 {
            bail!("eval_window must be at least 1");
        }
        let l = &self.learning;
        if l.success_capacity == 0 || l.fail_capacity == 0 || l.dt_capacity == 0 {
            bail!("buffer capacities must be positive");
        }
        if !(0.0..=1.0).contains(&l.kappa_balance) {
            bail!("kappa_balance {} outside [0, 1]", l.kappa_balance);
        }
        if l.batch_physical == 0 {
            bail!("physical batch size must be positive");
        }
        let a = &l.a2c;
        if !(a.lr_actor > 0.0 && a.lr_critic > 0.0 && a.lr_actor.is_finite() && a.lr_critic.is_finite()) {
            bail!("learning rates must be positive and finite");
        }
        if !(0.0..1.0).contains(&a.gamma) {
            bail!("gamma {} outside [0, 1)", a.gamma);
        }
        if a.entropy_coef < 0.0 || !(a.clip_norm > 0.0) {
            bail!("entropy coefficient must be non-negative and the clip norm positive");
        }
        if a.actor_hidden.iter().chain(&a.critic_hidden).any(|&w| w == 0) || a.actor_tanh == 0 {
            bail!("hidden layer widths must be positive");
        }
        let d = &l.dt;
        if d.latent == 0 || d.enc_hidden.0 == 0 || d.enc_hidden.1 == 0 || d.dec_hidden == 0 {
            bail!("twin layer widths must be positive");
        }
        if d.lstm_hidden == 0 || d.fc_hidden == 0 || d.batch == 0 {
            bail!("twin layer widths and batch must be positive");
        }
        if !(d.lr > 0.0) || !(0.0..=1.0).contains(&d.kappa1) || !(0.0..=1.0).contains(&d.kappa2) {
            bail!("twin learning rate must be positive and loss weights in [0, 1]");
        }
        Ok(())
    }

    pub fn n_servers(&self) -> usize {
        self.topology.n_edge + self.topology.n_core
    }
}
