//! Digital twin: a VAE that synthesizes state-action pairs and an LSTM that
//! predicts the next state and reward for them.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::a2c::argmax;
use crate::error::{check_dim, LearnError, Result};
use crate::experience::{Experience, Origin};
use crate::neural::gaussian::{clamp_logvar, standard_normal, LOGVAR_MAX, LOGVAR_MIN};
use crate::neural::lstm::LstmState;
use crate::neural::{checkpoint, clip_grad_norm, sigmoid, Activation, Adam, DenseNet, LstmCell, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DtConfig {
    pub latent: usize,
    pub enc_hidden: (usize, usize),
    pub dec_hidden: usize,
    pub lstm_hidden: usize,
    pub fc_hidden: usize,
    /// Weight on the next-state error.
    pub kappa1: f64,
    /// Weight on the reward error.
    pub kappa2: f64,
    pub lr: f64,
    /// Training steps per retrain.
    pub train_steps: usize,
    pub batch: usize,
    pub clip_norm: f64,
}

impl Default for DtConfig {
    fn default() -> Self {
        Self {
            latent: 16,
            enc_hidden: (64, 32),
            dec_hidden: 64,
            lstm_hidden: 64,
            fc_hidden: 64,
            kappa1: 1.0,
            kappa2: 1.0,
            lr: 1e-3,
            train_steps: 200,
            batch: 64,
            clip_norm: 5.0,
        }
    }
}

pub fn one_hot(a: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[a] = 1.0;
    v
}

/// `[s, one_hot(a)]`.
pub fn pair_input(s: &[f64], a: usize, n_actions: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(s.len() + n_actions);
    v.extend_from_slice(s);
    v.extend(one_hot(a, n_actions));
    v
}

fn pair_batch(batch: &[&Experience], n_actions: usize) -> Matrix {
    Matrix::from_rows(&batch.iter().map(|e| pair_input(&e.s, e.a, n_actions)).collect::<Vec<_>>())
}

/// `max(l, 0) - l x + ln(1 + exp(-|l|))`: binary cross-entropy of target `x`
/// against probability `sigmoid(l)`.
pub fn bce_with_logits(l: f64, x: f64) -> f64 {
    l.max(0.0) - l * x + (-l.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaeLoss {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinVae {
    /// Outputs `[mean, logvar]` of the latent posterior.
    pub encoder: DenseNet,
    /// Outputs logits of the state head followed by the action head.
    pub decoder: DenseNet,
    pub state_dim: usize,
    pub n_actions: usize,
    pub latent: usize,
}

impl TwinVae {
    pub fn new(state_dim: usize, n_actions: usize, cfg: &DtConfig, rng: &mut impl Rng) -> Self {
        let input = state_dim + n_actions;
        let encoder = DenseNet::new(
            input,
            &[
                (cfg.enc_hidden.0, Activation::Relu),
                (cfg.enc_hidden.1, Activation::Relu),
                (2 * cfg.latent, Activation::Linear),
            ],
            rng,
        );
        let decoder =
            DenseNet::new(cfg.latent, &[(cfg.dec_hidden, Activation::Relu), (input, Activation::Linear)], rng);
        Self { encoder, decoder, state_dim, n_actions, latent: cfg.latent }
    }

    /// Mean over the batch of head-wise binary cross-entropy plus KL to the
    /// standard normal, using the given reparameterization noise. Returns the
    /// loss and the encoder and decoder gradients.
    pub fn loss_with_noise(&self, x: &Matrix, eps: &Matrix) -> Result<(VaeLoss, Vec<f64>, Vec<f64>)> {
        let (b, l) = (x.rows, self.latent);
        if b == 0 {
            return Err(LearnError::EmptyBatch);
        }
        check_dim("vae noise", b * l, eps.data.len())?;
        let enc = self.encoder.forward(x)?;
        let stats = enc.output();
        let mut z = Matrix::zeros(b, l);
        for i in 0..b {
            for k in 0..l {
                let (mu, lv) = (stats.get(i, k), clamp_logvar(stats.get(i, l + k)));
                z.data[i * l + k] = mu + (0.5 * lv).exp() * eps.get(i, k);
            }
        }
        let dec = self.decoder.forward(&z)?;
        let logits = dec.output();
        let n = b as f64;
        let mut recon = 0.0;
        let mut dlogits = Matrix::zeros(b, logits.cols);
        for (j, (&lg, &t)) in logits.data.iter().zip(&x.data).enumerate() {
            recon += bce_with_logits(lg, t);
            dlogits.data[j] = (sigmoid(lg) - t) / n;
        }
        let mut kl = 0.0;
        let gdec = self.decoder.backward(&dec, &dlogits)?;
        let dz = gdec.input;
        let mut dstats = Matrix::zeros(b, 2 * l);
        for i in 0..b {
            for k in 0..l {
                let (mu, raw) = (stats.get(i, k), stats.get(i, l + k));
                let lv = clamp_logvar(raw);
                kl += -0.5 * (1.0 + lv - mu * mu - lv.exp());
                let g = dz.get(i, k);
                dstats.data[i * 2 * l + k] = g + mu / n;
                let in_range = (LOGVAR_MIN..=LOGVAR_MAX).contains(&raw);
                dstats.data[i * 2 * l + l + k] = if in_range {
                    g * 0.5 * (0.5 * lv).exp() * eps.get(i, k) + 0.5 * (lv.exp() - 1.0) / n
                } else {
                    0.0
                };
            }
        }
        let genc = self.encoder.backward(&enc, &dstats)?.params;
        let total = (recon + kl) / n;
        if !total.is_finite() {
            return Err(LearnError::NonFinite("vae loss"));
        }
        Ok((VaeLoss { total, recon: recon / n, kl: kl / n }, genc, gdec.params))
    }

    pub fn loss(&self, x: &Matrix, rng: &mut impl Rng) -> Result<(VaeLoss, Vec<f64>, Vec<f64>)> {
        let eps = Matrix::from_vec(x.rows, self.latent, standard_normal(x.rows * self.latent, rng));
        self.loss_with_noise(x, &eps)
    }

    /// Encodes a physical pair, draws `z` (or takes the mean when `sample`
    /// is false) and decodes. The action head is reduced to its argmax.
    pub fn generate(&self, s: &[f64], a: usize, sample: bool, rng: &mut impl Rng) -> Result<(Vec<f64>, usize)> {
        let x = Matrix::from_vec(1, s.len() + self.n_actions, pair_input(s, a, self.n_actions));
        let mut out = self.generate_batch(&x, sample, rng)?;
        Ok(out.pop().expect("one row"))
    }

    pub fn generate_batch(&self, x: &Matrix, sample: bool, rng: &mut impl Rng) -> Result<Vec<(Vec<f64>, usize)>> {
        let stats = self.encoder.forward(x)?.output().clone();
        let l = self.latent;
        let mut z = Matrix::zeros(x.rows, l);
        for i in 0..x.rows {
            let noise = if sample { standard_normal(l, rng) } else { vec![0.0; l] };
            for k in 0..l {
                let lv = clamp_logvar(stats.get(i, l + k));
                z.data[i * l + k] = stats.get(i, k) + (0.5 * lv).exp() * noise[k];
            }
        }
        let logits = self.decoder.forward(&z)?.output().clone();
        Ok((0..x.rows)
            .map(|i| {
                let r = logits.row(i);
                let s = r[..self.state_dim].iter().map(|&v| sigmoid(v)).collect();
                (s, argmax(&r[self.state_dim..]))
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinLstm {
    pub cell: LstmCell,
    /// Hidden layer then a linear output of `state_dim + 1`: next state, reward.
    pub head: DenseNet,
    pub state_dim: usize,
    pub n_actions: usize,
}

impl TwinLstm {
    pub fn new(state_dim: usize, n_actions: usize, cfg: &DtConfig, rng: &mut impl Rng) -> Self {
        let cell = LstmCell::new(state_dim + n_actions, cfg.lstm_hidden, rng);
        let head = DenseNet::new(
            cfg.lstm_hidden,
            &[(cfg.fc_hidden, Activation::Relu), (state_dim + 1, Activation::Linear)],
            rng,
        );
        Self { cell, head, state_dim, n_actions }
    }

    /// Raw head outputs from a zero initial state, one row per input pair.
    pub fn forward_raw(&self, x: &Matrix) -> Result<Matrix> {
        let (h, _) = self.cell.step(x, &LstmState::zeros(x.rows, self.cell.hidden_dim()))?;
        Ok(self.head.forward(&h.h)?.output().clone())
    }

    /// Next-state prediction clamped to `[0, 1]` and predicted reward.
    pub fn predict(&self, s: &[f64], a: usize) -> Result<(Vec<f64>, f64)> {
        let x = Matrix::from_vec(1, s.len() + self.n_actions, pair_input(s, a, self.n_actions));
        let out = self.forward_raw(&x)?;
        let r = out.row(0);
        Ok((r[..self.state_dim].iter().map(|v| v.clamp(0.0, 1.0)).collect(), r[self.state_dim]))
    }

    /// Mean over the batch of `k1 |S_hat - s'|^2 + k2 (R_hat - r)^2` on the
    /// unclamped outputs, with cell and head gradients.
    pub fn loss(
        &self,
        x: &Matrix,
        s_next: &Matrix,
        r: &[f64],
        kappa1: f64,
        kappa2: f64,
    ) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let (b, d) = (x.rows, self.state_dim);
        if b == 0 {
            return Err(LearnError::EmptyBatch);
        }
        check_dim("lstm target rows", b, s_next.rows)?;
        check_dim("lstm target cols", d, s_next.cols)?;
        check_dim("lstm reward targets", b, r.len())?;
        let (state, cache) = self.cell.step(x, &LstmState::zeros(b, self.cell.hidden_dim()))?;
        let fwd = self.head.forward(&state.h)?;
        let out = fwd.output();
        let n = b as f64;
        let mut loss = 0.0;
        let mut dout = Matrix::zeros(b, d + 1);
        for i in 0..b {
            let o = out.row(i);
            let g = dout.row_mut(i);
            for k in 0..d {
                let e = o[k] - s_next.get(i, k);
                loss += kappa1 * e * e;
                g[k] = 2.0 * kappa1 * e / n;
            }
            let e = o[d] - r[i];
            loss += kappa2 * e * e;
            g[d] = 2.0 * kappa2 * e / n;
        }
        let gh = self.head.backward(&fwd, &dout)?;
        let gc = self.cell.backward(&cache, &gh.input, &Matrix::zeros(b, self.cell.hidden_dim()))?;
        let loss = loss / n;
        if !loss.is_finite() {
            return Err(LearnError::NonFinite("lstm loss"));
        }
        Ok((loss, gc.params, gh.params))
    }

    /// Mean squared next-state error per sample, the held-out fidelity metric.
    pub fn next_state_mse(&self, data: &[Experience]) -> Result<f64> {
        let refs: Vec<&Experience> = data.iter().collect();
        let out = self.forward_raw(&pair_batch(&refs, self.n_actions))?;
        let mut se = 0.0;
        for (i, e) in data.iter().enumerate() {
            se += out.row(i)[..self.state_dim].iter().zip(&e.s_next).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        Ok(se / data.len().max(1) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub vae_first: f64,
    pub vae_last: f64,
    pub lstm_first: f64,
    pub lstm_last: f64,
}

/// Both twin models with their optimizers.
#[derive(Debug, Clone)]
pub struct DigitalTwin {
    pub vae: TwinVae,
    pub lstm: TwinLstm,
    pub cfg: DtConfig,
    opt_enc: Adam,
    opt_dec: Adam,
    opt_cell: Adam,
    opt_head: Adam,
}

impl DigitalTwin {
    pub fn new(state_dim: usize, n_actions: usize, cfg: DtConfig, rng: &mut impl Rng) -> Self {
        let vae = TwinVae::new(state_dim, n_actions, &cfg, rng);
        let lstm = TwinLstm::new(state_dim, n_actions, &cfg, rng);
        Self {
            opt_enc: Adam::new(vae.encoder.param_count(), cfg.lr),
            opt_dec: Adam::new(vae.decoder.param_count(), cfg.lr),
            opt_cell: Adam::new(lstm.cell.params().len(), cfg.lr),
            opt_head: Adam::new(lstm.head.param_count(), cfg.lr),
            vae,
            lstm,
            cfg,
        }
    }

    pub fn vae_step(&mut self, batch: &[&Experience], rng: &mut impl Rng) -> Result<f64> {
        let x = pair_batch(batch, self.vae.n_actions);
        let (loss, mut ge, mut gd) = self.vae.loss(&x, rng)?;
        clip_grad_norm(&mut [&mut ge, &mut gd], self.cfg.clip_norm);
        self.opt_enc.step(self.vae.encoder.params_mut(), &ge)?;
        self.opt_dec.step(self.vae.decoder.params_mut(), &gd)?;
        Ok(loss.total)
    }

    pub fn lstm_step(&mut self, batch: &[&Experience]) -> Result<f64> {
        let x = pair_batch(batch, self.lstm.n_actions);
        let s_next = Matrix::from_rows(&batch.iter().map(|e| e.s_next.as_slice()).collect::<Vec<_>>());
        let r: Vec<f64> = batch.iter().map(|e| e.r).collect();
        let (loss, mut gc, mut gh) = self.lstm.loss(&x, &s_next, &r, self.cfg.kappa1, self.cfg.kappa2)?;
        clip_grad_norm(&mut [&mut gc, &mut gh], self.cfg.clip_norm);
        self.opt_cell.step(self.lstm.cell.params_mut(), &gc)?;
        self.opt_head.step(self.lstm.head.params_mut(), &gh)?;
        Ok(loss)
    }

    /// `steps` rounds of one VAE and one LSTM update, each on a uniform
    /// mini-batch (with replacement) from `data`.
    pub fn train(&mut self, data: &[&Experience], steps: usize, rng: &mut impl Rng) -> Result<TrainStats> {
        if data.is_empty() {
            return Err(LearnError::EmptyBuffer("no physical experience to train the twin on"));
        }
        let mut stats = TrainStats { vae_first: f64::NAN, vae_last: f64::NAN, lstm_first: f64::NAN, lstm_last: f64::NAN };
        for step in 0..steps {
            let batch: Vec<&Experience> =
                (0..self.cfg.batch).map(|_| data[rng.random_range(0..data.len())]).collect();
            let v = self.vae_step(&batch, rng)?;
            let l = self.lstm_step(&batch)?;
            if step == 0 {
                stats.vae_first = v;
                stats.lstm_first = l;
            }
            stats.vae_last = v;
            stats.lstm_last = l;
        }
        Ok(stats)
    }

    pub fn save(&self, stem: &Path) -> Result<()> {
        checkpoint::save(
            stem,
            &[
                ("encoder", self.vae.encoder.params()),
                ("decoder", self.vae.decoder.params()),
                ("lstm_cell", self.lstm.cell.params()),
                ("lstm_head", self.lstm.head.params()),
            ],
        )
    }

    /// Restores model parameters; optimizer moments start fresh.
    pub fn load(&mut self, stem: &Path) -> Result<()> {
        let blocks = checkpoint::load(stem)?;
        checkpoint::restore(&blocks, "encoder", self.vae.encoder.params_mut())?;
        checkpoint::restore(&blocks, "decoder", self.vae.decoder.params_mut())?;
        checkpoint::restore(&blocks, "lstm_cell", self.lstm.cell.params_mut())?;
        checkpoint::restore(&blocks, "lstm_head", self.lstm.head.params_mut())
    }

    /// Draws `g` seed pairs uniformly from `physical`, synthesizes a pair with
    /// the VAE and completes it with the LSTM's next state and reward.
    pub fn populate(&self, physical: &[&Experience], g: usize, rng: &mut impl Rng) -> Result<Vec<Experience>> {
        if g == 0 {
            return Ok(Vec::new());
        }
        if physical.is_empty() {
            return Err(LearnError::EmptyBuffer("no physical experience to seed the twin"));
        }
        let mut out = Vec::with_capacity(g);
        const CHUNK: usize = 256;
        let mut left = g;
        while left > 0 {
            let n = left.min(CHUNK);
            let seeds: Vec<&Experience> = (0..n).map(|_| physical[rng.random_range(0..physical.len())]).collect();
            let gen = self.vae.generate_batch(&pair_batch(&seeds, self.vae.n_actions), true, rng)?;
            let x = Matrix::from_rows(&gen.iter().map(|(s, a)| pair_input(s, *a, self.lstm.n_actions)).collect::<Vec<_>>());
            let pred = self.lstm.forward_raw(&x)?;
            for (i, (s, a)) in gen.into_iter().enumerate() {
                let row = pred.row(i);
                out.push(Experience {
                    s,
                    a,
                    r: row[self.lstm.state_dim],
                    s_next: row[..self.lstm.state_dim].iter().map(|v| v.clamp(0.0, 1.0)).collect(),
                    terminal: false,
                    origin: Origin::Synthetic,
                });
            }
            left -= n;
        }
        Ok(out)
    }
}
