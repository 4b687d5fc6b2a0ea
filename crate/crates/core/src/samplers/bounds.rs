//! Closed-form acceptance and convergence-rate bounds under a weight-ratio
//! bound `M >= 1`.

use crate::error::{Result, SomaError};

fn check_m(m: f64) -> Result<()> {
    if m >= 1.0 && m.is_finite() {
        Ok(())
    } else {
        Err(SomaError::Domain(format!("ratio bound M must be finite and >= 1, got {m}")))
    }
}

/// Lower bound `n / (n + M - 1)` on the SOMA acceptance rate.
pub fn accept_bound_soma(n: usize, m: f64) -> Result<f64> {
    check_m(m)?;
    if n == 0 {
        return Err(SomaError::Domain("n must be at least 1".into()));
    }
    let n = n as f64;
    Ok(n / (n + m - 1.0))
}

/// Lower bound `1 / M` on the independence Metropolis acceptance rate.
pub fn accept_bound_imwg(m: f64) -> Result<f64> {
    check_m(m)?;
    Ok(1.0 / m)
}

/// Upper bound on the two-component SOMA convergence rate.
pub fn rate_bound_soma(m: f64) -> Result<f64> {
    check_m(m)?;
    let m2 = m * m;
    let disc = m2 * m2 + 2.0 * m2 * m + 9.0 * m2 - 8.0 * m;
    Ok((m2 + 3.0 * m - 2.0 + disc.sqrt()) / (2.0 * (1.0 + m) * (1.0 + m)))
}

/// Upper bound on the two-component random-scan convergence rate.
pub fn rate_bound_ran(m: f64) -> Result<f64> {
    check_m(m)?;
    Ok((3.0 * m - 2.0 + (m * m + 4.0 * m - 4.0).sqrt()) / (4.0 * m))
}

/// Upper bound on the two-component systematic-scan convergence rate.
pub fn rate_bound_sys(m: f64) -> Result<f64> {
    check_m(m)?;
    Ok(((m + 1.0) * (m - 1.0)).sqrt() / m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_proposal() {
        assert_eq!(accept_bound_soma(2, 1.0).unwrap(), 1.0);
        assert_eq!(accept_bound_imwg(1.0).unwrap(), 1.0);
        assert_eq!(rate_bound_soma(1.0).unwrap(), 0.5);
        assert_eq!(rate_bound_ran(1.0).unwrap(), 0.5);
        assert_eq!(rate_bound_sys(1.0).unwrap(), 0.0);
    }

    #[test]
    fn m_equals_two() {
        assert!((rate_bound_soma(2.0).unwrap() - (8.0 + 52f64.sqrt()) / 18.0).abs() < 1e-15);
        assert!((rate_bound_soma(2.0).unwrap() - 0.84506).abs() < 1e-5);
        assert!((rate_bound_ran(2.0).unwrap() - (4.0 + 8f64.sqrt()) / 8.0).abs() < 1e-15);
        assert!((rate_bound_sys(2.0).unwrap() - 3f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn acceptance_example_and_monotonicity() {
        let v = accept_bound_soma(10, 3f64.exp()).unwrap();
        assert!((v - 10.0 / (9.0 + 3f64.exp())).abs() < 1e-15);
        assert!((v - 0.3438).abs() < 1e-4);
        let m = 5.0;
        let mut prev = 0.0;
        for n in 1..=1000 {
            let b = accept_bound_soma(n, m).unwrap();
            assert!(b > prev);
            prev = b;
        }
        assert!(prev > 0.99);
    }

    #[test]
    fn rates_stay_below_one_and_approach_it() {
        let mut m = 1.0;
        while m <= 1e6 {
            for f in [rate_bound_soma, rate_bound_ran, rate_bound_sys] {
                let r = f(m).unwrap();
                // Far out the gap to 1 drops below double precision.
                if m <= 1e4 {
                    assert!(r < 1.0);
                } else {
                    assert!(r <= 1.0);
                }
            }
            m *= 1.5;
        }
        assert!(rate_bound_soma(1e6).unwrap() > 0.999);
        assert!(rate_bound_ran(1e6).unwrap() > 0.999);
    }

    #[test]
    fn m_below_one_is_rejected() {
        assert!(rate_bound_soma(0.5).is_err());
        assert!(accept_bound_imwg(0.99).is_err());
        assert!(accept_bound_soma(3, f64::NAN).is_err());
    }
}
