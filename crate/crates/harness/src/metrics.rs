use std::io::{BufRead, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use edgemig_core::mdp::{self, REVERT_REWARD};
use edgemig_core::{Event, MigrationOutcome, StepReport};
use serde::{Deserialize, Serialize};

use crate::config::PolicyKind;

/// One row of `metrics.csv`. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub policy: PolicyKind,
    pub seed: u64,
    /// Mean end-to-end delay over every (step, chain in service) pair.
    pub avg_delay_ms: f64,
    /// Mean total network energy per step.
    pub avg_energy: f64,
    pub cum_reward: f64,
    pub norm_reward: f64,
    pub accept_rate: f64,
    pub migrations: usize,
    pub reverts: usize,
}

/// Per-step quantities of one episode, as the accounting sees them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeTally {
    pub delay_sum: f64,
    pub delay_count: usize,
    pub energy_sum: f64,
    pub steps: usize,
    pub arrivals: usize,
    pub rejections: usize,
    pub migrations: usize,
    pub reverts: usize,
}

impl EpisodeTally {
    pub fn add_step(&mut self, delays: &[(usize, f64)], energy: f64, arrivals: usize, rejections: usize, migrations: usize, reverts: usize) {
        for &(_, d) in delays {
            self.delay_sum += d;
        }
        self.delay_count += delays.len();
        self.energy_sum += energy;
        self.steps += 1;
        self.arrivals += arrivals;
        self.rejections += rejections;
        self.migrations += migrations;
        self.reverts += reverts;
    }

    pub fn from_reports(reports: &[StepReport]) -> Self {
        let mut t = Self::default();
        for r in reports {
            t.add_step(&r.delays, r.total_energy, r.arrivals, r.rejections, r.migrations, r.reverts);
        }
        t
    }

    /// `norm_reward` is left at zero; it is a property of the whole run.
    pub fn finish(&self, episode: usize, policy: PolicyKind, seed: u64, cum_reward: f64) -> EpisodeMetrics {
        let ratio = |a: f64, b: usize| if b == 0 { 0.0 } else { a / b as f64 };
        EpisodeMetrics {
            episode,
            policy,
            seed,
            avg_delay_ms: ratio(self.delay_sum, self.delay_count),
            avg_energy: ratio(self.energy_sum, self.steps),
            cum_reward,
            norm_reward: 0.0,
            accept_rate: if self.arrivals == 0 {
                1.0
            } else {
                (self.arrivals - self.rejections) as f64 / self.arrivals as f64
            },
            migrations: self.migrations,
            reverts: self.reverts,
        }
    }
}

/// Min-max normalization over the run. A constant series maps to all ones.
pub fn normalize_rewards(xs: &[f64]) -> Vec<f64> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![1.0; xs.len()];
    }
    xs.iter().map(|&x| ((x - lo) / span).clamp(0.0, 1.0)).collect()
}

pub fn fill_normalized(rows: &mut [EpisodeMetrics]) {
    let norm = normalize_rewards(&rows.iter().map(|m| m.cum_reward).collect::<Vec<_>>());
    for (m, n) in rows.iter_mut().zip(norm) {
        m.norm_reward = n;
    }
}

pub fn write_csv(path: &Path, rows: &[EpisodeMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<EpisodeMetrics>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<EpisodeMetrics>, _>>()?;
    Ok(rows)
}

/// One line of `events.jsonl`: a simulator event, or the closing record of an
/// episode carrying the decision count needed to rebuild its reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub episode: usize,
    pub policy: PolicyKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<Event>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decisions: Option<usize>,
}

pub fn write_records(out: &mut impl Write, episode: usize, policy: PolicyKind, seed: u64, events: Vec<Event>, decisions: usize) -> Result<()> {
    for ev in events {
        let rec = LogRecord { episode, policy, seed, sim: Some(ev), decisions: None };
        serde_json::to_writer(&mut *out, &rec)?;
        out.write_all(b"\n")?;
    }
    let end = LogRecord { episode, policy, seed, sim: None, decisions: Some(decisions) };
    serde_json::to_writer(&mut *out, &end)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Rebuilds per-episode metrics from an event log alone. Reward: applied moves
/// earn the sigmoid of their composite reduction, reverted ones the revert
/// penalty, and every decision without a move event is a no-op.
pub fn replay_events(input: impl BufRead) -> Result<Vec<EpisodeMetrics>> {
    struct Open {
        key: (usize, PolicyKind, u64),
        tally: EpisodeTally,
        reward: f64,
        move_events: usize,
        logged_reverts: usize,
    }
    let mut out = Vec::new();
    let mut cur: Option<Open> = None;
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LogRecord = serde_json::from_str(&line).with_context(|| format!("event log line {}", lineno + 1))?;
        let key = (rec.episode, rec.policy, rec.seed);
        let open = cur.get_or_insert_with(|| Open {
            key,
            tally: EpisodeTally::default(),
            reward: 0.0,
            move_events: 0,
            logged_reverts: 0,
        });
        if open.key != key {
            bail!("event log line {}: episode {:?} starts before {:?} was closed", lineno + 1, key, open.key);
        }
        match (rec.sim, rec.decisions) {
            (Some(Event::Step { delays, total_energy, arrivals, rejections, migrations, reverts, .. }), _) => {
                open.tally.add_step(&delays, total_energy, arrivals, rejections, migrations, reverts);
            }
            (Some(Event::Migrate { outcome, .. }), _) => {
                open.move_events += 1;
                match outcome {
                    MigrationOutcome::Applied { .. } => open.reward += mdp::reward(&outcome),
                    MigrationOutcome::Reverted { .. } => {
                        open.reward += REVERT_REWARD;
                        open.logged_reverts += 1;
                    }
                }
            }
            (Some(_), _) => {}
            (None, Some(decisions)) => {
                let o = cur.take().expect("opened above");
                // commands rejected before execution leave no move event
                let invalid = o.tally.reverts.saturating_sub(o.logged_reverts);
                let noops = decisions
                    .checked_sub(o.move_events + invalid)
                    .with_context(|| format!("episode {:?}: more move events than decisions", o.key))?;
                let reward = o.reward + invalid as f64 * REVERT_REWARD + noops as f64 * mdp::sigmoid(0.0);
                out.push(o.tally.finish(o.key.0, o.key.1, o.key.2, reward));
            }
            (None, None) => bail!("event log line {}: record carries neither an event nor a decision count", lineno + 1),
        }
    }
    if let Some(o) = cur {
        bail!("event log ends inside episode {:?}", o.key);
    }
    // normalization is per run
    let mut runs: Vec<(PolicyKind, u64)> = Vec::new();
    for m in &out {
        if !runs.contains(&(m.policy, m.seed)) {
            runs.push((m.policy, m.seed));
        }
    }
    for run in runs {
        let idx: Vec<usize> = (0..out.len()).filter(|&i| (out[i].policy, out[i].seed) == run).collect();
        let norm = normalize_rewards(&idx.iter().map(|&i| out[i].cum_reward).collect::<Vec<_>>());
        for (i, n) in idx.into_iter().zip(norm) {
            out[i].norm_reward = n;
        }
    }
    Ok(out)
}

/// Largest absolute difference over the numeric columns, or an error if the
/// row keys disagree.
pub fn max_metric_diff(a: &[EpisodeMetrics], b: &[EpisodeMetrics]) -> Result<f64> {
    if a.len() != b.len() {
        bail!("row counts differ: {} vs {}", a.len(), b.len());
    }
    let mut worst: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        if (x.episode, x.policy, x.seed) != (y.episode, y.policy, y.seed) {
            bail!("row keys differ: {:?} vs {:?}", (x.episode, x.policy, x.seed), (y.episode, y.policy, y.seed));
        }
        if (x.migrations, x.reverts) != (y.migrations, y.reverts) {
            bail!("episode {}: migration/revert counts differ", x.episode);
        }
        for (p, q) in [
            (x.avg_delay_ms, y.avg_delay_ms),
            (x.avg_energy, y.avg_energy),
            (x.cum_reward, y.cum_reward),
            (x.norm_reward, y.norm_reward),
            (x.accept_rate, y.accept_rate),
        ] {
            worst = worst.max((p - q).abs());
        }
    }
    Ok(worst)
}
