use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use edgemig::metrics::{max_metric_diff, read_csv};
use edgemig::{compare_policies, replay_events, run_experiment_with, ExperimentConfig, PolicyKind};

#[derive(Parser)]
#[command(name = "edgemig", version, about = "Edge-core VNF migration experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train or run one policy for one seed.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        policy: Option<PolicyKind>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Run several policies over several seeds and summarize.
    Compare {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_value = "a2c-dt,a2c-plain,threshold,random")]
        policies: Vec<PolicyKind>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Rebuild metrics from an event log and check them against a metrics CSV.
    Replay {
        /// Directory holding events.jsonl and metrics.csv.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
}

/// Applied in order: defaults, `--config`, then the individual flags.
#[derive(Args)]
struct ConfigArgs {
    /// JSON file with any subset of the configuration fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    n_edge: Option<usize>,
    #[arg(long)]
    n_core: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Requests per episode.
    #[arg(long)]
    fgs: Option<usize>,
    /// Mean arrivals per step.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    chain_len: Option<usize>,
    #[arg(long)]
    mean_service: Option<f64>,
    #[arg(long)]
    packet_rate: Option<f64>,
    #[arg(long)]
    deadline_ms: Option<f64>,
    #[arg(long)]
    tau_ms: Option<f64>,
    #[arg(long)]
    tau1: Option<f64>,
    #[arg(long)]
    tau2: Option<f64>,
    /// Learning rate of both actor and critic.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    entropy_coef: Option<f64>,
    #[arg(long)]
    kappa_balance: Option<f64>,
    #[arg(long)]
    batch_physical: Option<usize>,
    #[arg(long)]
    batch_dt: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    /// Twin training steps per episode.
    #[arg(long)]
    dt_steps: Option<usize>,
    #[arg(long)]
    p_mig: Option<f64>,
    #[arg(long)]
    eval_window: Option<usize>,
    #[arg(long)]
    no_events: bool,
    #[arg(long)]
    no_checkpoints: bool,
}

impl ConfigArgs {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_json_file(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $($dst:ident).+;)*) => {
                $(if let Some(v) = self.$field { c.$($dst).+ = v; })*
            };
        }
        set! {
            seed => seed;
            episodes => episodes;
            n_edge => topology.n_edge;
            n_core => topology.n_core;
            alpha => topology.alpha;
            beta => topology.beta;
            fgs => workload.count;
            rate => workload.rate;
            chain_len => workload.chain_len;
            mean_service => workload.mean_service_time;
            packet_rate => workload.packet_rate;
            deadline_ms => workload.deadline_ms;
            tau_ms => sim.perf.tau_ms;
            tau1 => sim.perf.tau1;
            tau2 => sim.perf.tau2;
            lr => learning.a2c.lr_actor;
            lr => learning.a2c.lr_critic;
            gamma => learning.a2c.gamma;
            entropy_coef => learning.a2c.entropy_coef;
            kappa_balance => learning.kappa_balance;
            batch_physical => learning.batch_physical;
            batch_dt => learning.batch_dt;
            warmup => learning.warmup;
            dt_steps => learning.dt.train_steps;
            p_mig => p_mig;
            eval_window => eval_window;
        }
        if self.no_events {
            c.log_events = false;
        }
        if self.no_checkpoints {
            c.checkpoints = false;
        }
        c.validate()?;
        Ok(c)
    }
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Run { cfg, policy, out_dir, quiet } => {
            let mut c = cfg.build()?;
            if let Some(p) = policy {
                c.policy = p;
            }
            let out = run_experiment_with(&c, Some(&out_dir), |m| {
                if !quiet {
                    eprintln!(
                        "episode {:>4}  delay {:>8.3} ms  energy {:>9.2}  reward {:>9.2}  accept {:.3}  mig {:>5}  rev {:>5}",
                        m.episode, m.avg_delay_ms, m.avg_energy, m.cum_reward, m.accept_rate, m.migrations, m.reverts
                    );
                }
            })?;
            let w = c.eval_window;
            println!(
                "{} seed {}: final {} episodes  delay {:.3} ms  energy {:.2}  ({} updates) -> {}",
                c.policy,
                c.seed,
                w.min(c.episodes),
                out.final_mean(w, |m| m.avg_delay_ms),
                out.final_mean(w, |m| m.avg_energy),
                out.updates,
                out_dir.display()
            );
        }
        Cmd::Compare { cfg, policies, seeds, out_dir } => {
            let c = cfg.build()?;
            let cmp = compare_policies(&c, &policies, &seeds, Some(&out_dir))?;
            println!("{:<10} {:>14} {:>14}", "policy", "median energy", "median delay");
            for p in &cmp.policies {
                println!("{:<10} {:>14.3} {:>14.4}", p.policy.as_str(), p.median_energy, p.median_delay_ms);
            }
            println!();
            for r in &cmp.reductions {
                println!(
                    "{:<10} vs {:<10} energy {:>+7.2}%  delay {:>+7.2}%",
                    r.policy.as_str(),
                    r.baseline.as_str(),
                    r.energy_pct,
                    r.delay_pct
                );
            }
            println!("\nwrote {}", out_dir.join("comparison.json").display());
        }
        Cmd::Replay { out_dir, events, metrics, tolerance } => {
            let ev = events.unwrap_or_else(|| out_dir.join("events.jsonl"));
            let mp = metrics.unwrap_or_else(|| out_dir.join("metrics.csv"));
            let replayed = replay_events(BufReader::new(File::open(&ev)?))?;
            let recorded = read_csv(&mp)?;
            let diff = max_metric_diff(&replayed, &recorded)?;
            println!("{} episodes replayed, max abs difference {diff:.3e}", replayed.len());
            if diff > tolerance {
                bail!("replayed metrics differ from {} by {diff:e} (tolerance {tolerance:e})", mp.display());
            }
        }
    }
    Ok(())
}
