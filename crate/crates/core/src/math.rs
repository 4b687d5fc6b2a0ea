//! Scalar densities and log-space helpers shared by the targets.

use rand::Rng;
use statrs::function::gamma::ln_gamma;

/// `log(sum(exp(xs)))` in a fixed left-to-right order. Returns `-inf` for an
/// empty slice or when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// Laplace log-density of `x` with location `loc` and scale `scale`.
pub fn laplace_log_pdf(x: f64, loc: f64, scale: f64) -> f64 {
    -(2.0 * scale).ln() - (x - loc).abs() / scale
}

/// Draws Laplace(0, scale) noise by inverting the CDF. Scales below `1e-300`
/// (including an infinite privacy budget) produce exactly zero.
pub fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    if !(scale >= 1e-300) || !scale.is_finite() {
        return 0.0;
    }
    // u in (-1/2, 1/2]
    let u: f64 = 0.5 - rng.random::<f64>();
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Beta(a, b) log-density; `-inf` outside the open unit interval.
pub fn beta_log_pdf(x: f64, a: f64, b: f64) -> f64 {
    if !(x > 0.0 && x < 1.0) {
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Exp(1) log-density; `-inf` for negative arguments.
pub fn exp1_log_pdf(x: f64) -> f64 {
    if x >= 0.0 {
        -x
    } else {
        f64::NEG_INFINITY
    }
}

pub fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * d * d / var
}
