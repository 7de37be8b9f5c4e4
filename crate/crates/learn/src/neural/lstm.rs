//! Single LSTM cell with gate order input, forget, candidate, output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dense::sigmoid;
use super::matrix::{gemm, Matrix};
use crate::error::{check_dim, Result};

/// Parameters: `W` (`input x 4h`), then `U` (`hidden x 4h`), then `b` (`4h`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCell {
    input: usize,
    hidden: usize,
    params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Matrix,
    pub c: Matrix,
}

impl LstmState {
    pub fn zeros(batch: usize, hidden: usize) -> Self {
        Self { h: Matrix::zeros(batch, hidden), c: Matrix::zeros(batch, hidden) }
    }
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    x: Matrix,
    h_prev: Matrix,
    c_prev: Matrix,
    /// Gate activations, `batch x 4h` in gate order.
    gates: Matrix,
    tanh_c: Matrix,
}

impl LstmCache {
    pub fn gates(&self) -> &Matrix {
        &self.gates
    }
}

#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub params: Vec<f64>,
    pub x: Matrix,
    pub h_prev: Matrix,
    pub c_prev: Matrix,
}

impl LstmCell {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self { input, hidden, params: vec![0.0; (input + hidden + 1) * 4 * hidden] }
    }

    pub fn new(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut cell = Self::zeros(input, hidden);
        let bound = 1.0 / (hidden as f64).sqrt();
        let nw = (input + hidden) * 4 * hidden;
        for p in &mut cell.params[..nw] {
            *p = rng.random_range(-bound..=bound);
        }
        cell
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn split(&self) -> (&[f64], &[f64], &[f64]) {
        let g = 4 * self.hidden;
        let (w, rest) = self.params.split_at(self.input * g);
        let (u, b) = rest.split_at(self.hidden * g);
        (w, u, b)
    }

    /// One recurrence step. The new state is returned, the cell is not mutated.
    pub fn step(&self, x: &Matrix, state: &LstmState) -> Result<(LstmState, LstmCache)> {
        check_dim("lstm input", self.input, x.cols)?;
        check_dim("lstm hidden", self.hidden, state.h.cols)?;
        check_dim("lstm batch", x.rows, state.h.rows)?;
        let (h, g4, batch) = (self.hidden, 4 * self.hidden, x.rows);
        let (w, u, b) = self.split();
        let mut z = Matrix::zeros(batch, g4);
        for i in 0..batch {
            z.row_mut(i).copy_from_slice(b);
        }
        gemm(batch, self.input, g4, &x.data, false, w, false, 1.0, &mut z.data);
        gemm(batch, h, g4, &state.h.data, false, u, false, 1.0, &mut z.data);
        let mut gates = z;
        let mut c = Matrix::zeros(batch, h);
        let mut tanh_c = Matrix::zeros(batch, h);
        let mut h_new = Matrix::zeros(batch, h);
        for r in 0..batch {
            let row = gates.row_mut(r);
            for k in 0..h {
                row[k] = sigmoid(row[k]);
                row[h + k] = sigmoid(row[h + k]);
                row[2 * h + k] = row[2 * h + k].tanh();
                row[3 * h + k] = sigmoid(row[3 * h + k]);
            }
            let row = gates.row(r);
            let cp = state.c.row(r);
            for k in 0..h {
                let ck = row[h + k] * cp[k] + row[k] * row[2 * h + k];
                let tc = ck.tanh();
                c.data[r * h + k] = ck;
                tanh_c.data[r * h + k] = tc;
                h_new.data[r * h + k] = row[3 * h + k] * tc;
            }
        }
        let cache = LstmCache { x: x.clone(), h_prev: state.h.clone(), c_prev: state.c.clone(), gates, tanh_c };
        Ok((LstmState { h: h_new, c }, cache))
    }

    /// Backward through one step given gradients w.r.t. the new hidden and cell states.
    pub fn backward(&self, cache: &LstmCache, dh: &Matrix, dc: &Matrix) -> Result<LstmGrads> {
        let (h, g4, batch) = (self.hidden, 4 * self.hidden, cache.x.rows);
        check_dim("lstm dh", batch * h, dh.data.len())?;
        check_dim("lstm dc", batch * h, dc.data.len())?;
        let mut dz = Matrix::zeros(batch, g4);
        let mut dc_prev = Matrix::zeros(batch, h);
        for r in 0..batch {
            let g = cache.gates.row(r);
            let cp = cache.c_prev.row(r);
            let dzr = dz.row_mut(r);
            for k in 0..h {
                let (gi, gf, gg, go) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
                let tc = cache.tanh_c.data[r * h + k];
                let dhk = dh.data[r * h + k];
                let dct = dc.data[r * h + k] + dhk * go * (1.0 - tc * tc);
                dzr[k] = dct * gg * gi * (1.0 - gi);
                dzr[h + k] = dct * cp[k] * gf * (1.0 - gf);
                dzr[2 * h + k] = dct * gi * (1.0 - gg * gg);
                dzr[3 * h + k] = dhk * tc * go * (1.0 - go);
                dc_prev.data[r * h + k] = dct * gf;
            }
        }
        let (w, u, _) = self.split();
        let mut grads = vec![0.0; self.params.len()];
        {
            let (gw, rest) = grads.split_at_mut(self.input * g4);
            let (gu, gb) = rest.split_at_mut(h * g4);
            gemm(self.input, batch, g4, &cache.x.data, true, &dz.data, false, 0.0, gw);
            gemm(h, batch, g4, &cache.h_prev.data, true, &dz.data, false, 0.0, gu);
            for r in 0..batch {
                for (a, d) in gb.iter_mut().zip(dz.row(r)) {
                    *a += d;
                }
            }
        }
        let mut dx = Matrix::zeros(batch, self.input);
        gemm(batch, g4, self.input, &dz.data, false, w, true, 0.0, &mut dx.data);
        let mut dh_prev = Matrix::zeros(batch, h);
        gemm(batch, g4, h, &dz.data, false, u, true, 0.0, &mut dh_prev.data);
        Ok(LstmGrads { params: grads, x: dx, h_prev: dh_prev, c_prev: dc_prev })
    }
}
