use rand::Rng;

use crate::error::{Result, SomaError};
use crate::samplers::inverse_cdf;

fn check_simplex(p: &[f64], name: &str) -> Result<()> {
    if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(SomaError::Domain(format!("{name} has negative or non-finite entries")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(SomaError::Domain(format!("{name} sums to {s}, not 1")));
    }
    Ok(())
}

/// Draws `(I, I~)` with `I ~ p`, `I~ ~ p_tilde` and the largest possible
/// probability `sum_i min(p_i, p_tilde_i)` of `I == I~`, from one uniform.
///
/// ```
/// use soma::coupling::maximal_coupling_index;
/// use soma::rng::chain_rng;
///
/// let mut rng = chain_rng(5);
/// let (i, j) = maximal_coupling_index(&mut rng, &[0.5, 0.5], &[0.5, 0.5]).unwrap();
/// assert_eq!(i, j);
/// ```
pub fn maximal_coupling_index<R: Rng + ?Sized>(rng: &mut R, p: &[f64], p_tilde: &[f64]) -> Result<(usize, usize)> {
    if p.len() != p_tilde.len() || p.is_empty() {
        return Err(SomaError::Domain("distributions must have the same non-zero length".into()));
    }
    check_simplex(p, "p")?;
    check_simplex(p_tilde, "p_tilde")?;
    let u: f64 = rng.random();
    Ok(maximal_coupling_with(u, p, p_tilde))
}

/// The construction behind [`maximal_coupling_index`] for a given uniform.
///
/// `[0, 1)` is laid out as the overlap block `u_i = min(p_i, p~_i)`
/// followed by the residual block. A uniform in the overlap block picks the
/// same index for both chains. Otherwise the leftover `U' = U - sum(u)` is
/// located in the residuals `v = p - u` and `v~ = p~ - u` separately.
pub(crate) fn maximal_coupling_with(u: f64, p: &[f64], p_tilde: &[f64]) -> (usize, usize) {
    let overlap: Vec<f64> = p.iter().zip(p_tilde).map(|(a, b)| a.min(*b)).collect();
    let total: f64 = overlap.iter().sum();
    if u < total {
        let i = inverse_cdf(u, &overlap).expect("positive overlap mass");
        return (i, i);
    }
    let rest = u - total;
    let v: Vec<f64> = p.iter().zip(&overlap).map(|(a, m)| a - m).collect();
    let vt: Vec<f64> = p_tilde.iter().zip(&overlap).map(|(a, m)| a - m).collect();
    match (inverse_cdf(rest, &v), inverse_cdf(rest, &vt)) {
        (Some(i), Some(j)) => (i, j),
        // Residuals vanish up to rounding: the distributions agree, so
        // fall back to the overlap block.
        _ => {
            let i = inverse_cdf(u.min(total * (1.0 - f64::EPSILON)), &overlap)
                .or_else(|| overlap.iter().rposition(|&m| m > 0.0))
                .unwrap_or(0);
            (i, i)
        }
    }
}

/// `sum_i min(p_i, p~_i)`, the meeting probability of the maximal coupling.
pub fn overlap_mass(p: &[f64], p_tilde: &[f64]) -> f64 {
    p.iter().zip(p_tilde).map(|(a, b)| a.min(*b)).sum()
}
