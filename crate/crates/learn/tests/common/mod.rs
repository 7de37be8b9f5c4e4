#![allow(dead_code)]

pub const H: f64 = 1e-5;

/// Central finite differences of `f` at `p`.
pub fn numeric_grad(f: impl Fn(&[f64]) -> f64, p: &[f64]) -> Vec<f64> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|i| {
            q[i] = p[i] + H;
            let up = f(&q);
            q[i] = p[i] - H;
            let down = f(&q);
            q[i] = p[i];
            (up - down) / (2.0 * H)
        })
        .collect()
}

/// `|a - n| / max(|a| + |n|, 1e-5)`, maximized over entries.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-5))
        .fold(0.0, f64::max)
}
