//! Advantage actor-critic over a categorical policy, trained from replayed
//! mini-batches with advantages recomputed by the current critic.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, LearnError, Result};
use crate::experience::Experience;
use crate::neural::{checkpoint, clip_grad_norm, log_softmax, Activation, Adam, DenseNet, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct A2cConfig {
    pub actor_hidden: Vec<usize>,
    /// Width of the tanh layer in front of the softmax head.
    pub actor_tanh: usize,
    pub critic_hidden: Vec<usize>,
    pub gamma: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub entropy_coef: f64,
    pub clip_norm: f64,
}

impl Default for A2cConfig {
    fn default() -> Self {
        Self {
            actor_hidden: vec![256, 128, 64],
            actor_tanh: 64,
            critic_hidden: vec![256, 128, 64],
            gamma: 0.95,
            lr_actor: 1e-3,
            lr_critic: 1e-3,
            entropy_coef: 0.01,
            clip_norm: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    Sample,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Losses {
    pub actor: f64,
    pub critic: f64,
}

#[derive(Debug, Clone)]
pub struct ActorCritic {
    pub actor: DenseNet,
    pub critic: DenseNet,
    pub cfg: A2cConfig,
    opt_actor: Adam,
    opt_critic: Adam,
}

fn stack(rows: impl ExactSizeIterator<Item = impl AsRef<[f64]>>, cols: usize) -> Result<Matrix> {
    let n = rows.len();
    let mut data = Vec::with_capacity(n * cols);
    for r in rows {
        check_dim("state vector", cols, r.as_ref().len())?;
        data.extend_from_slice(r.as_ref());
    }
    Ok(Matrix::from_vec(n, cols, data))
}

impl ActorCritic {
    pub fn new(state_dim: usize, n_actions: usize, cfg: A2cConfig, rng: &mut impl Rng) -> Self {
        assert!((0.0..1.0).contains(&cfg.gamma), "gamma must lie in [0, 1)");
        let mut a: Vec<(usize, Activation)> = cfg.actor_hidden.iter().map(|&w| (w, Activation::Relu)).collect();
        a.push((cfg.actor_tanh, Activation::Tanh));
        a.push((n_actions, Activation::Softmax));
        let mut c: Vec<(usize, Activation)> = cfg.critic_hidden.iter().map(|&w| (w, Activation::Relu)).collect();
        c.push((1, Activation::Linear));
        let actor = DenseNet::new(state_dim, &a, rng);
        let critic = DenseNet::new(state_dim, &c, rng);
        let opt_actor = Adam::new(actor.param_count(), cfg.lr_actor);
        let opt_critic = Adam::new(critic.param_count(), cfg.lr_critic);
        Self { actor, critic, cfg, opt_actor, opt_critic }
    }

    pub fn state_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn num_actions(&self) -> usize {
        self.actor.output_dim()
    }

    pub fn policy(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.actor.predict(s)
    }

    pub fn value(&self, s: &[f64]) -> Result<f64> {
        Ok(self.critic.predict(s)?[0])
    }

    pub fn select_action(&self, s: &[f64], rng: &mut impl Rng, mode: ActionMode) -> Result<usize> {
        let p = self.policy(s)?;
        Ok(match mode {
            ActionMode::Greedy => argmax(&p),
            ActionMode::Sample => sample_categorical(&p, rng),
        })
    }

    /// `r + gamma * V(s') * (1 - terminal) - V(s)`.
    pub fn advantage(&self, e: &Experience) -> Result<f64> {
        let next = if e.terminal { 0.0 } else { self.value(&e.s_next)? };
        Ok(e.r + self.cfg.gamma * next - self.value(&e.s)?)
    }

    /// Bootstrapped critic targets and current values `V(s)` for a batch.
    pub fn targets_and_values(&self, batch: &[Experience]) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.state_dim();
        let both = stack(batch.iter().map(|e| &e.s).chain(batch.iter().map(|e| &e.s_next)).collect::<Vec<_>>().into_iter(), d)?;
        let v = self.critic.forward(&both)?.output().data.clone();
        let n = batch.len();
        let targets =
            batch.iter().enumerate().map(|(i, e)| e.r + if e.terminal { 0.0 } else { self.cfg.gamma * v[n + i] }).collect();
        Ok((targets, v[..n].to_vec()))
    }

    /// Mean over the batch of `-A log pi(a|s) - c H(pi(.|s))` and its
    /// parameter gradient, with advantages held constant.
    pub fn actor_loss_grad(&self, batch: &[Experience], adv: &[f64]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(LearnError::EmptyBatch);
        }
        check_dim("advantages", batch.len(), adv.len())?;
        let x = stack(batch.iter().map(|e| &e.s), self.state_dim())?;
        let fwd = self.actor.forward(&x)?;
        let (n, k) = (batch.len() as f64, self.num_actions());
        let beta = self.cfg.entropy_coef;
        let mut dz = Matrix::zeros(batch.len(), k);
        let mut loss = 0.0;
        for (b, e) in batch.iter().enumerate() {
            if e.a >= k {
                return Err(LearnError::Dim { what: "action index", expected: k, got: e.a });
            }
            let logp = log_softmax(fwd.logits().row(b));
            let p = fwd.output().row(b);
            let h: f64 = -p.iter().zip(&logp).map(|(pi, lp)| pi * lp).sum::<f64>();
            loss += -adv[b] * logp[e.a] - beta * h;
            let row = dz.row_mut(b);
            for j in 0..k {
                let onehot = if j == e.a { 1.0 } else { 0.0 };
                row[j] = (adv[b] * (p[j] - onehot) + beta * p[j] * (logp[j] + h)) / n;
            }
        }
        let g = self.actor.backward_preact(&fwd, dz)?;
        Ok((loss / n, g.params))
    }

    /// Mean squared error between `V(s)` and fixed targets, and its gradient.
    pub fn critic_loss_grad(&self, batch: &[Experience], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(LearnError::EmptyBatch);
        }
        check_dim("targets", batch.len(), targets.len())?;
        let x = stack(batch.iter().map(|e| &e.s), self.state_dim())?;
        let fwd = self.critic.forward(&x)?;
        let n = batch.len() as f64;
        let v = &fwd.output().data;
        let loss = v.iter().zip(targets).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
        let dv = Matrix::from_vec(batch.len(), 1, v.iter().zip(targets).map(|(a, b)| 2.0 * (a - b) / n).collect());
        Ok((loss, self.critic.backward(&fwd, &dv)?.params))
    }

    /// One Adam step on each network. Returns the pre-update losses.
    pub fn update(&mut self, batch: &[Experience]) -> Result<Losses> {
        let (targets, values) = self.targets_and_values(batch)?;
        let adv: Vec<f64> = targets.iter().zip(&values).map(|(t, v)| t - v).collect();
        let (la, mut ga) = self.actor_loss_grad(batch, &adv)?;
        let (lc, mut gc) = self.critic_loss_grad(batch, &targets)?;
        if !la.is_finite() || !lc.is_finite() {
            return Err(LearnError::NonFinite("a2c loss"));
        }
        clip_grad_norm(&mut [&mut ga], self.cfg.clip_norm);
        clip_grad_norm(&mut [&mut gc], self.cfg.clip_norm);
        self.opt_actor.step(self.actor.params_mut(), &ga)?;
        self.opt_critic.step(self.critic.params_mut(), &gc)?;
        Ok(Losses { actor: la, critic: lc })
    }

    pub fn save(&self, stem: &Path) -> Result<()> {
        checkpoint::save(stem, &[("actor", self.actor.params()), ("critic", self.critic.params())])
    }

    pub fn load(&mut self, stem: &Path) -> Result<()> {
        let blocks = checkpoint::load(stem)?;
        checkpoint::restore(&blocks, "actor", self.actor.params_mut())?;
        checkpoint::restore(&blocks, "critic", self.critic.params_mut())
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > p[best] {
            best = i;
        }
    }
    best
}

pub fn sample_categorical(p: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random::<f64>() * p.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &x) in p.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    // rounding left `u` past the last bucket; take the last positive one
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}
