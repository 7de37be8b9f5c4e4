//! Fully connected networks with per-layer activations and manual backprop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{gemm, Matrix};
use crate::error::{check_dim, LearnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Linear,
    /// Row-wise softmax.
    Softmax,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    fn apply(self, z: &Matrix) -> Matrix {
        let mut a = z.clone();
        match self {
            Activation::Relu => a.data.iter_mut().for_each(|x| *x = x.max(0.0)),
            Activation::Tanh => a.data.iter_mut().for_each(|x| *x = x.tanh()),
            Activation::Sigmoid => a.data.iter_mut().for_each(|x| *x = sigmoid(*x)),
            Activation::Linear => {}
            Activation::Softmax => {
                for i in 0..a.rows {
                    softmax_in_place(a.row_mut(i));
                }
            }
        }
        a
    }

    /// Gradient w.r.t. the pre-activation given the gradient w.r.t. the output.
    fn backprop(self, z: &Matrix, a: &Matrix, dy: &Matrix) -> Matrix {
        let mut dz = dy.clone();
        match self {
            Activation::Relu => {
                for (d, &zi) in dz.data.iter_mut().zip(&z.data) {
                    if zi <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            Activation::Tanh => dz.data.iter_mut().zip(&a.data).for_each(|(d, &ai)| *d *= 1.0 - ai * ai),
            Activation::Sigmoid => dz.data.iter_mut().zip(&a.data).for_each(|(d, &ai)| *d *= ai * (1.0 - ai)),
            Activation::Linear => {}
            Activation::Softmax => {
                for i in 0..dz.rows {
                    let ar = a.row(i);
                    let dot: f64 = dy.row(i).iter().zip(ar).map(|(g, p)| g * p).sum();
                    for (d, &p) in dz.row_mut(i).iter_mut().zip(ar) {
                        *d = p * (*d - dot);
                    }
                }
            }
        }
        dz
    }
}

pub fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in row.iter_mut() {
        *x = (*x - m).exp();
        s += *x;
    }
    row.iter_mut().for_each(|x| *x /= s);
}

/// Numerically stable `log softmax` of one row.
pub fn log_softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    row.iter().map(|x| x - lse).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

/// Parameters are one flat vector; layer `l` owns a weight block stored
/// `inputs x outputs` row-major followed by `outputs` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    layers: Vec<LayerShape>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

/// Cached activations of one batched forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Matrix>,
    pre: Vec<Matrix>,
}

impl Forward {
    pub fn output(&self) -> &Matrix {
        self.acts.last().expect("at least the input")
    }

    /// Pre-activation of the last layer (logits for a softmax head).
    pub fn logits(&self) -> &Matrix {
        self.pre.last().expect("non-empty network")
    }
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Matrix,
}

impl DenseNet {
    /// `spec` lists `(width, activation)` per layer. Weights are uniform in
    /// `±1/sqrt(fan_in)`, biases zero.
    pub fn new(input: usize, spec: &[(usize, Activation)], rng: &mut impl Rng) -> Self {
        let mut net = Self::zeros(input, spec);
        for l in 0..net.layers.len() {
            let fan_in = net.layers[l].inputs;
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            let (o, n) = (net.offsets[l], fan_in * net.layers[l].outputs);
            for w in &mut net.params[o..o + n] {
                *w = rng.random_range(-bound..=bound);
            }
        }
        net
    }

    pub fn zeros(input: usize, spec: &[(usize, Activation)]) -> Self {
        assert!(!spec.is_empty(), "network needs at least one layer");
        let mut layers = Vec::with_capacity(spec.len());
        let mut offsets = Vec::with_capacity(spec.len());
        let (mut fan_in, mut total) = (input, 0);
        for &(outputs, activation) in spec {
            layers.push(LayerShape { inputs: fan_in, outputs, activation });
            offsets.push(total);
            total += fan_in * outputs + outputs;
            fan_in = outputs;
        }
        Self { layers, offsets, params: vec![0.0; total] }
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        check_dim("set_params", self.params.len(), p.len())?;
        self.params.copy_from_slice(p);
        Ok(())
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        let s = self.layers[l];
        &self.params[self.offsets[l]..self.offsets[l] + s.inputs * s.outputs]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let s = self.layers[l];
        let b = self.offsets[l] + s.inputs * s.outputs;
        &self.params[b..b + s.outputs]
    }

    pub fn forward(&self, x: &Matrix) -> Result<Forward> {
        check_dim("dense input", self.input_dim(), x.cols)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        acts.push(x.clone());
        for (l, s) in self.layers.iter().enumerate() {
            let input = acts.last().expect("pushed");
            let mut z = Matrix::zeros(x.rows, s.outputs);
            let b = self.bias(l);
            for i in 0..z.rows {
                z.row_mut(i).copy_from_slice(b);
            }
            gemm(x.rows, s.inputs, s.outputs, &input.data, false, self.weights(l), false, 1.0, &mut z.data);
            acts.push(s.activation.apply(&z));
            pre.push(z);
        }
        Ok(Forward { acts, pre })
    }

    /// Forward pass of a single input vector.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let f = self.forward(&Matrix::from_vec(1, x.len(), x.to_vec()))?;
        Ok(f.acts.into_iter().last().expect("output").data)
    }

    /// Reverse-mode gradients given `dy`, the loss gradient w.r.t. the output.
    pub fn backward(&self, fwd: &Forward, dy: &Matrix) -> Result<Gradients> {
        let last = self.layers.len() - 1;
        let out = fwd.output();
        check_dim("upstream gradient rows", out.rows, dy.rows)?;
        check_dim("upstream gradient cols", out.cols, dy.cols)?;
        let dz = self.layers[last].activation.backprop(&fwd.pre[last], out, dy);
        self.backward_preact(fwd, dz)
    }

    /// Like [`backward`](Self::backward) but starting from the gradient
    /// w.r.t. the last layer's pre-activation, for fused losses such as
    /// cross-entropy on logits.
    pub fn backward_preact(&self, fwd: &Forward, dz_last: Matrix) -> Result<Gradients> {
        check_dim("forward cache depth", self.layers.len() + 1, fwd.acts.len())?;
        let last = self.layers.len() - 1;
        check_dim("pre-activation gradient rows", fwd.pre[last].rows, dz_last.rows)?;
        check_dim("pre-activation gradient cols", fwd.pre[last].cols, dz_last.cols)?;
        let batch = dz_last.rows;
        let mut grads = vec![0.0; self.params.len()];
        let mut dz = dz_last;
        for l in (0..self.layers.len()).rev() {
            let s = self.layers[l];
            let input = &fwd.acts[l];
            let o = self.offsets[l];
            let (gw, gb) = grads[o..o + s.inputs * s.outputs + s.outputs].split_at_mut(s.inputs * s.outputs);
            gemm(s.inputs, batch, s.outputs, &input.data, true, &dz.data, false, 0.0, gw);
            for i in 0..batch {
                for (g, d) in gb.iter_mut().zip(dz.row(i)) {
                    *g += d;
                }
            }
            let mut dx = Matrix::zeros(batch, s.inputs);
            gemm(batch, s.outputs, s.inputs, &dz.data, false, self.weights(l), true, 0.0, &mut dx.data);
            if l == 0 {
                return Ok(Gradients { params: grads, input: dx });
            }
            let prev = self.layers[l - 1].activation;
            dz = prev.backprop(&fwd.pre[l - 1], &fwd.acts[l], &dx);
        }
        unreachable!("loop returns at layer 0")
    }

    pub fn ensure_finite(&self) -> Result<()> {
        if self.params.iter().all(|p| p.is_finite()) {
            Ok(())
        } else {
            Err(LearnError::NonFinite("network parameters"))
        }
    }
}
