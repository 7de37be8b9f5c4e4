//! Multi-policy, multi-seed comparison: final-window medians, medians per
//! load bucket, and pairwise percentage reductions.

use std::path::Path;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, PolicyKind};
use crate::experiment::{run_experiment, RunOutput};

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Final-window means of one (policy, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunScore {
    pub seed: u64,
    pub avg_energy: f64,
    pub avg_delay_ms: f64,
    pub cum_reward: f64,
}

/// Steps whose concurrent active-chain count falls in `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub lo: usize,
    pub hi: usize,
    pub steps: usize,
    pub median_energy: Option<f64>,
    pub median_delay_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: PolicyKind,
    pub runs: Vec<RunScore>,
    pub median_energy: f64,
    pub median_delay_ms: f64,
    pub buckets: Vec<Bucket>,
}

/// How much lower `policy` is than `baseline`, in percent of the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub policy: PolicyKind,
    pub baseline: PolicyKind,
    pub energy_pct: f64,
    pub delay_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub window: usize,
    pub policies: Vec<PolicySummary>,
    pub reductions: Vec<Reduction>,
}

impl Comparison {
    /// First summary listed for `p`.
    pub fn get(&self, p: PolicyKind) -> Option<&PolicySummary> {
        self.policies.iter().find(|s| s.policy == p)
    }

    pub fn reduction(&self, policy: PolicyKind, baseline: PolicyKind) -> Option<&Reduction> {
        self.reductions.iter().find(|r| r.policy == policy && r.baseline == baseline)
    }
}

pub fn percent_reduction(value: f64, baseline: f64) -> f64 {
    if baseline == 0.0 {
        if value == 0.0 { 0.0 } else { f64::NEG_INFINITY }
    } else {
        100.0 * (baseline - value) / baseline
    }
}

/// Decile edges of the pooled positive active-chain counts, deduplicated.
fn decile_edges(counts: &mut [usize]) -> Vec<usize> {
    counts.sort_unstable();
    let n = counts.len();
    let mut edges: Vec<usize> = (1..10).filter_map(|k| counts.get(k * n / 10).copied()).collect();
    edges.dedup();
    edges
}

/// Summarizes one group of runs per listed policy, in order. A policy may be
/// listed more than once. Every run must cover at least `window` episodes.
pub fn summarize(groups: &[(PolicyKind, Vec<&RunOutput>)], window: usize) -> Result<Comparison> {
    let mut pooled: Vec<usize> = groups
        .iter()
        .flat_map(|(_, rs)| rs.iter().flat_map(|r| r.window_steps.iter().map(|s| s.active_fgs)))
        .filter(|&a| a > 0)
        .collect();
    let edges = decile_edges(&mut pooled);
    let bucket_of = |a: usize| edges.iter().filter(|&&e| e <= a).count();

    let mut policies = Vec::new();
    for (p, mine) in groups {
        let scores: Vec<RunScore> = mine
            .iter()
            .map(|r| RunScore {
                seed: r.metrics.first().map_or(0, |m| m.seed),
                avg_energy: r.final_mean(window, |m| m.avg_energy),
                avg_delay_ms: r.final_mean(window, |m| m.avg_delay_ms),
                cum_reward: r.final_mean(window, |m| m.cum_reward),
            })
            .collect();
        let med = |f: fn(&RunScore) -> f64| median(&scores.iter().map(f).collect::<Vec<_>>()).unwrap_or(f64::NAN);
        let mut buckets = Vec::new();
        for b in 0..=edges.len() {
            let steps: Vec<_> = mine
                .iter()
                .flat_map(|r| r.window_steps.iter())
                .filter(|s| s.active_fgs > 0 && bucket_of(s.active_fgs) == b)
                .collect();
            if steps.is_empty() {
                continue;
            }
            buckets.push(Bucket {
                lo: steps.iter().map(|s| s.active_fgs).min().unwrap_or(0),
                hi: steps.iter().map(|s| s.active_fgs).max().unwrap_or(0),
                steps: steps.len(),
                median_energy: median(&steps.iter().map(|s| s.energy).collect::<Vec<_>>()),
                median_delay_ms: median(&steps.iter().filter_map(|s| s.mean_delay_ms).collect::<Vec<_>>()),
            });
        }
        policies.push(PolicySummary {
            policy: *p,
            median_energy: med(|s| s.avg_energy),
            median_delay_ms: med(|s| s.avg_delay_ms),
            runs: scores,
            buckets,
        });
    }

    let mut reductions = Vec::new();
    for (i, a) in policies.iter().enumerate() {
        for (j, b) in policies.iter().enumerate() {
            if i != j {
                reductions.push(Reduction {
                    policy: a.policy,
                    baseline: b.policy,
                    energy_pct: percent_reduction(a.median_energy, b.median_energy),
                    delay_pct: percent_reduction(a.median_delay_ms, b.median_delay_ms),
                });
            }
        }
    }
    Ok(Comparison { window, policies, reductions })
}

/// Runs every (policy, seed) pair with `base` otherwise unchanged. With
/// `out_dir`, each run writes into `<policy>-seed<seed>/` and the comparison
/// goes to `comparison.json`.
pub fn compare_policies(
    base: &ExperimentConfig,
    policies: &[PolicyKind],
    seeds: &[u64],
    out_dir: Option<&Path>,
) -> Result<Comparison> {
    if seeds.is_empty() {
        bail!("compare needs at least one seed");
    }
    if policies.is_empty() {
        bail!("compare needs at least one policy");
    }
    let mut distinct: Vec<PolicyKind> = policies.to_vec();
    distinct.sort();
    distinct.dedup();
    let mut outputs = Vec::new();
    for &p in &distinct {
        for &seed in seeds {
            let cfg = ExperimentConfig { policy: p, seed, ..base.clone() };
            let dir = out_dir.map(|d| d.join(format!("{p}-seed{seed}")));
            outputs.push((p, run_experiment(&cfg, dir.as_deref())?));
        }
    }
    let groups: Vec<(PolicyKind, Vec<&RunOutput>)> = policies
        .iter()
        .map(|p| (*p, outputs.iter().filter(|(q, _)| q == p).map(|(_, r)| r).collect()))
        .collect();
    let cmp = summarize(&groups, base.eval_window)?;
    if let Some(d) = out_dir {
        std::fs::create_dir_all(d)?;
        std::fs::write(d.join("comparison.json"), serde_json::to_string_pretty(&cmp)?)?;
    }
    Ok(cmp)
}
