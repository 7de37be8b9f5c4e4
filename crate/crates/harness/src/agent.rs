//! Policies driven by the experiment loop: the two actor-critic learners and a
//! reward tap that scores any policy's decisions the same way.

use edgemig_core::mdp::{self, Layout, StateEncoder};
use edgemig_core::workload::service_status;
use edgemig_core::{MigrationCommand, MigrationOutcome, MigrationPolicy, World};
use edgemig_learn::dt::TrainStats;
use edgemig_learn::{ActionMode, ActorCritic, Buffers, DigitalTwin, Experience, LearnError, Origin};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::LearningConfig;

struct Pending {
    fg: usize,
    s: Vec<f64>,
    a: usize,
    r: f64,
    origin: Origin,
}

/// Actor-critic agent. Transitions are completed at the end of every step,
/// when the next state of each decided chain is observable; one update per
/// step follows once `warmup` physical experiences exist.
pub struct Learner {
    pub ac: ActorCritic,
    /// Present for the twin-augmented variant.
    pub twin: Option<DigitalTwin>,
    pub buffers: Buffers,
    encoder: StateEncoder,
    layout: Layout,
    cfg: LearningConfig,
    rng: ChaCha8Rng,
    pending: Vec<Pending>,
    episode_transitions: usize,
    pub updates: usize,
    error: Option<LearnError>,
}

impl Learner {
    pub fn new(
        ac: ActorCritic,
        twin: Option<DigitalTwin>,
        encoder: StateEncoder,
        cfg: LearningConfig,
        seed: u64,
    ) -> Self {
        Self {
            buffers: Buffers::new(cfg.success_capacity, cfg.fail_capacity, cfg.dt_capacity),
            layout: encoder.layout,
            ac,
            twin,
            encoder,
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending: Vec::new(),
            episode_transitions: 0,
            updates: 0,
            error: None,
        }
    }

    fn train_step(&mut self) -> Result<(), LearnError> {
        if self.buffers.physical_len() < self.cfg.warmup.max(1) {
            return Ok(());
        }
        let mut batch = self.buffers.sample_physical(self.cfg.batch_physical, self.cfg.kappa_balance, &mut self.rng)?;
        if self.twin.is_some() {
            batch.extend(self.buffers.sample_dt(self.cfg.batch_dt, &mut self.rng));
        }
        self.ac.update(&batch)?;
        self.updates += 1;
        Ok(())
    }

    /// Surfaces a training failure from the last episode, then, for the twin
    /// variant, retrains the twin on all physical experience and adds as many
    /// synthetic transitions as were collected this episode.
    pub fn end_episode(&mut self) -> Result<Option<TrainStats>, LearnError> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        let generated = std::mem::take(&mut self.episode_transitions);
        let Some(twin) = self.twin.as_mut() else {
            return Ok(None);
        };
        let data: Vec<&Experience> = self.buffers.success.iter().chain(self.buffers.fail.iter()).collect();
        if data.is_empty() {
            return Ok(None);
        }
        let stats = twin.train(&data, self.cfg.dt.train_steps, &mut self.rng)?;
        let synthetic = twin.populate(&data, generated, &mut self.rng)?;
        for e in synthetic {
            self.buffers.push(e);
        }
        Ok(Some(stats))
    }
}

impl MigrationPolicy for Learner {
    fn decide(&mut self, world: &World, fg: usize) -> MigrationCommand {
        let s = self.encoder.encode_world(world, fg);
        let noop = self.layout.noop_action();
        let a = if self.error.is_some() {
            noop
        } else {
            match self.ac.select_action(&s, &mut self.rng, ActionMode::Sample) {
                Ok(a) => a,
                Err(e) => {
                    self.error = Some(e);
                    noop
                }
            }
        };
        self.pending.push(Pending { fg, s, a, r: 0.0, origin: Origin::PhysicalSuccess });
        self.layout.decode_action(a, fg).unwrap_or(MigrationCommand::NoOp)
    }

    fn observe(&mut self, _world: &World, _fg: usize, _cmd: &MigrationCommand, outcome: &MigrationOutcome) {
        if let Some(p) = self.pending.last_mut() {
            p.r = mdp::reward(outcome);
            p.origin = if outcome.is_applied() { Origin::PhysicalSuccess } else { Origin::PhysicalFail };
        }
    }

    fn end_step(&mut self, world: &World) {
        let next_t = world.time() + 1;
        for p in std::mem::take(&mut self.pending) {
            let active = world.is_active(p.fg);
            let terminal = !active || service_status(world.fg(p.fg), next_t) == 0;
            let s_next = if active { self.encoder.encode_world(world, p.fg) } else { p.s.clone() };
            self.buffers.push(Experience { s: p.s, a: p.a, r: p.r, s_next, terminal, origin: p.origin });
            self.episode_transitions += 1;
        }
        if self.error.is_none() {
            if let Err(e) = self.train_step() {
                self.error = Some(e);
            }
        }
    }
}

/// Forwards to `inner` and accumulates the reward of every decision.
pub struct RewardTap<'a> {
    pub inner: &'a mut dyn MigrationPolicy,
    pub cum_reward: f64,
    pub decisions: usize,
}

impl<'a> RewardTap<'a> {
    pub fn new(inner: &'a mut dyn MigrationPolicy) -> Self {
        Self { inner, cum_reward: 0.0, decisions: 0 }
    }
}

impl MigrationPolicy for RewardTap<'_> {
    fn decide(&mut self, world: &World, fg: usize) -> MigrationCommand {
        self.inner.decide(world, fg)
    }

    fn observe(&mut self, world: &World, fg: usize, cmd: &MigrationCommand, outcome: &MigrationOutcome) {
        self.cum_reward += mdp::reward(outcome);
        self.decisions += 1;
        self.inner.observe(world, fg, cmd, outcome);
    }

    fn end_step(&mut self, world: &World) {
        self.inner.end_step(world);
    }
}
