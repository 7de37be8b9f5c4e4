//! Row-major dense matrices and the three products backprop needs.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self { rows: rows.len(), cols, data }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Columns `[from, to)` as a new matrix.
    pub fn cols_range(&self, from: usize, to: usize) -> Matrix {
        let mut out = Matrix::zeros(self.rows, to - from);
        for i in 0..self.rows {
            out.row_mut(i).copy_from_slice(&self.row(i)[from..to]);
        }
        out
    }

    /// Horizontal concatenation.
    pub fn hcat(a: &Matrix, b: &Matrix) -> Matrix {
        assert_eq!(a.rows, b.rows, "hcat rows");
        let mut out = Matrix::zeros(a.rows, a.cols + b.cols);
        for i in 0..a.rows {
            let r = out.row_mut(i);
            r[..a.cols].copy_from_slice(a.row(i));
            r[a.cols..].copy_from_slice(b.row(i));
        }
        out
    }
}

/// `C = alpha * A B + beta * C` for row-major `A` (m x k), `B` (k x n), `C` (m x n),
/// with `A` and/or `B` optionally read transposed from their stored layout.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n, "gemm operand sizes");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for x in &mut c[..m * n] {
            *x *= beta;
        }
        return;
    }
    // stored A is m x k, or k x m when read transposed
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the strides can reach.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut c = Matrix::zeros(a.rows, b.cols);
        for i in 0..a.rows {
            for j in 0..b.cols {
                c.data[i * b.cols + j] = (0..a.cols).map(|t| a.get(i, t) * b.get(t, j)).sum();
            }
        }
        c
    }

    fn transpose(a: &Matrix) -> Matrix {
        let mut t = Matrix::zeros(a.cols, a.rows);
        for i in 0..a.rows {
            for j in 0..a.cols {
                t.data[j * a.rows + i] = a.get(i, j);
            }
        }
        t
    }

    #[test]
    fn gemm_all_layouts() {
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Matrix::from_vec(3, 2, vec![0.5, -1.0, 2.0, 0.0, 1.0, 3.0]);
        let want = naive(&a, &b);
        let mut c = vec![0.0; 4];
        gemm(2, 3, 2, &a.data, false, &b.data, false, 0.0, &mut c);
        assert_eq!(c, want.data);
        gemm(2, 3, 2, &transpose(&a).data, true, &transpose(&b).data, true, 0.0, &mut c);
        assert_eq!(c, want.data);
        gemm(2, 3, 2, &a.data, false, &b.data, false, 1.0, &mut c);
        assert_eq!(c, want.data.iter().map(|x| 2.0 * x).collect::<Vec<_>>());
    }

    #[test]
    fn slicing_and_concat() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let b = Matrix::from_rows(&[[5.0], [6.0]]);
        let c = Matrix::hcat(&a, &b);
        assert_eq!(c.row(1), &[3.0, 4.0, 6.0]);
        assert_eq!(c.cols_range(1, 3), Matrix::from_rows(&[[2.0, 5.0], [4.0, 6.0]]));
    }
}
