use rand::Rng;
use rand_distr::StandardNormal;

pub const LOGVAR_MIN: f64 = -20.0;
pub const LOGVAR_MAX: f64 = 5.0;

pub fn clamp_logvar(lv: f64) -> f64 {
    lv.clamp(LOGVAR_MIN, LOGVAR_MAX)
}

/// Draws standard-normal noise of length `n`.
pub fn standard_normal(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `mean + exp(logvar / 2) * eps` with `logvar` clamped.
pub fn reparam_with_noise(mean: &[f64], logvar: &[f64], eps: &[f64]) -> Vec<f64> {
    assert_eq!(mean.len(), logvar.len(), "mean/logvar shapes");
    assert_eq!(mean.len(), eps.len(), "noise shape");
    mean.iter().zip(logvar).zip(eps).map(|((m, lv), e)| m + (0.5 * clamp_logvar(*lv)).exp() * e).collect()
}

pub fn gaussian_reparam(mean: &[f64], logvar: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    let eps = standard_normal(mean.len(), rng);
    reparam_with_noise(mean, logvar, &eps)
}

/// `KL(N(mean, exp(logvar)) || N(0, I))`.
pub fn kl_standard_normal(mean: &[f64], logvar: &[f64]) -> f64 {
    -0.5 * mean
        .iter()
        .zip(logvar)
        .map(|(m, lv)| {
            let lv = clamp_logvar(*lv);
            1.0 + lv - m * m - lv.exp()
        })
        .sum::<f64>()
}
