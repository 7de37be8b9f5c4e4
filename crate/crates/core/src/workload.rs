//! VNF forwarding-graph requests: Poisson arrivals, per-VNF demands and
//! service lifetimes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vnf {
    pub fg_id: usize,
    pub position: usize,
    pub cpu_demand: f64,
    pub mem_demand: f64,
}

/// Logical link between VNF `from` and VNF `from + 1` of the same chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalLink {
    pub from: usize,
    pub bw_demand_gbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VnfFg {
    pub id: usize,
    pub vnfs: Vec<Vnf>,
    pub logical_links: Vec<LogicalLink>,
    pub arrival: u64,
    /// Steps of service; zero marks a request rejected at deployment.
    pub service_time: u64,
    pub packet_rate: f64,
    pub deadline_ms: f64,
}

impl VnfFg {
    pub fn chain_len(&self) -> usize {
        self.vnfs.len()
    }

    pub fn is_rejected(&self) -> bool {
        self.service_time == 0
    }

    /// First step at which the request is no longer served.
    pub fn departure(&self) -> u64 {
        self.arrival + self.service_time
    }
}

/// Service status: 1 while `arrival <= t < arrival + service_time`.
pub fn service_status(fg: &VnfFg, t: u64) -> u8 {
    u8::from(fg.arrival <= t && t < fg.arrival + fg.service_time)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadConfig {
    pub count: usize,
    /// Mean arrivals per time step.
    pub rate: f64,
    pub chain_len: usize,
    pub seed: u64,
    pub cpu_range: (u32, u32),
    pub mem_range: (u32, u32),
    pub bw_range_gbps: (f64, f64),
    pub mean_service_time: f64,
    pub packet_rate: f64,
    pub deadline_ms: f64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            count: 300,
            rate: 0.2,
            chain_len: 4,
            seed: 1,
            cpu_range: (1, 20),
            mem_range: (1, 4),
            bw_range_gbps: (0.1, 0.5),
            mean_service_time: 100.0,
            packet_rate: 100.0,
            deadline_ms: 20.0,
        }
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.count < 1 {
            return Err(ConfigError::new("workload needs at least one request"));
        }
        if !(self.rate > 0.0) || !self.rate.is_finite() {
            return Err(ConfigError::new(format!("arrival rate {} must be positive", self.rate)));
        }
        if self.chain_len < 1 {
            return Err(ConfigError::new("chain length must be at least 1"));
        }
        let (c0, c1) = self.cpu_range;
        let (m0, m1) = self.mem_range;
        if c0 < 1 || c1 < c0 || m0 < 1 || m1 < m0 {
            return Err(ConfigError::new("demand ranges must be non-empty and positive"));
        }
        let (b0, b1) = self.bw_range_gbps;
        if !(b0 > 0.0 && b1 >= b0 && b1.is_finite()) {
            return Err(ConfigError::new(format!("invalid bandwidth demand range ({b0}, {b1})")));
        }
        if !(self.mean_service_time >= 1.0) || !self.mean_service_time.is_finite() {
            return Err(ConfigError::new("mean service time must be at least one step"));
        }
        if !(self.packet_rate > 0.0) || !(self.deadline_ms > 0.0) {
            return Err(ConfigError::new("packet rate and deadline must be positive"));
        }
        Ok(())
    }
}

/// Generates `cfg.count` chains. Arrival times are the floors of a Poisson
/// process with rate `cfg.rate`; service times are geometric on `{1, 2, ...}`
/// with mean `cfg.mean_service_time`.
pub fn generate_requests(cfg: &WorkloadConfig) -> Result<Vec<VnfFg>, ConfigError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gaps = Exp::new(cfg.rate).map_err(|e| ConfigError::new(e.to_string()))?;
    let lifetimes =
        Geometric::new(1.0 / cfg.mean_service_time).map_err(|e| ConfigError::new(e.to_string()))?;

    let mut clock = 0.0f64;
    let mut out = Vec::with_capacity(cfg.count);
    for id in 0..cfg.count {
        clock += gaps.sample(&mut rng);
        let vnfs = (0..cfg.chain_len)
            .map(|position| Vnf {
                fg_id: id,
                position,
                cpu_demand: f64::from(rng.random_range(cfg.cpu_range.0..=cfg.cpu_range.1)),
                mem_demand: f64::from(rng.random_range(cfg.mem_range.0..=cfg.mem_range.1)),
            })
            .collect();
        let (b0, b1) = cfg.bw_range_gbps;
        let logical_links = (0..cfg.chain_len - 1)
            .map(|from| LogicalLink {
                from,
                bw_demand_gbps: if b1 > b0 { rng.random_range(b0..b1) } else { b0 },
            })
            .collect();
        let service_time = 1 + lifetimes.sample(&mut rng);
        out.push(VnfFg {
            id,
            vnfs,
            logical_links,
            arrival: clock.floor() as u64,
            service_time,
            packet_rate: cfg.packet_rate,
            deadline_ms: cfg.deadline_ms,
        });
    }
    Ok(out)
}

pub fn trace_to_json(fgs: &[VnfFg]) -> String {
    serde_json::to_string(fgs).expect("trace serializes")
}

pub fn trace_from_json(s: &str) -> Result<Vec<VnfFg>, ConfigError> {
    serde_json::from_str(s).map_err(|e| ConfigError::new(format!("trace json: {e}")))
}
