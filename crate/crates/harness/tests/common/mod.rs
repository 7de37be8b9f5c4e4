#![allow(dead_code)]

use std::path::PathBuf;

use edgemig::{ExperimentConfig, PolicyKind};

/// 6 servers, 20 requests, small networks: a few seconds per run.
pub fn tiny(policy: PolicyKind, episodes: usize, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig { policy, episodes, seed, eval_window: 2, ..Default::default() };
    c.topology.n_edge = 2;
    c.topology.n_core = 4;
    c.workload.count = 20;
    c.workload.rate = 1.0;
    c.workload.mean_service_time = 5.0;
    c.learning.warmup = 40;
    c.learning.a2c.actor_hidden = vec![32, 16];
    c.learning.a2c.actor_tanh = 16;
    c.learning.a2c.critic_hidden = vec![32, 16];
    c.learning.dt.latent = 4;
    c.learning.dt.enc_hidden = (16, 8);
    c.learning.dt.dec_hidden = 16;
    c.learning.dt.lstm_hidden = 16;
    c.learning.dt.fc_hidden = 16;
    c.learning.dt.train_steps = 20;
    c
}

pub fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("edgemig-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}
