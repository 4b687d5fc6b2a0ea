use rand::{Rng, RngCore};
use rand_distr::{Beta, Distribution, Exp1};

use crate::error::{Result, SomaError};
use crate::math::{beta_log_pdf, exp1_log_pdf};

/// An independent proposal on the component space.
pub trait Proposal: Send + Sync {
    fn width(&self) -> usize;

    /// Draws one point into `out`.
    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]);

    fn log_q(&self, point: &[f64]) -> f64;

    /// Support points and their probabilities, for finite proposals.
    fn support(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        None
    }
}

impl<P: Proposal + ?Sized> Proposal for Box<P> {
    fn width(&self) -> usize {
        (**self).width()
    }
    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        (**self).sample(rng, out)
    }
    fn log_q(&self, point: &[f64]) -> f64 {
        (**self).log_q(point)
    }
    fn support(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        (**self).support()
    }
}

/// Bernoulli(p) on `{0, 1}`.
#[derive(Debug, Clone)]
pub struct BernoulliProposal {
    p: f64,
}

impl BernoulliProposal {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(SomaError::Config(format!("Bernoulli probability {p} not in (0,1)")));
        }
        Ok(BernoulliProposal { p })
    }
}

impl Proposal for BernoulliProposal {
    fn width(&self) -> usize {
        1
    }
    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        out[0] = if rng.random::<f64>() < self.p { 1.0 } else { 0.0 };
    }
    fn log_q(&self, point: &[f64]) -> f64 {
        if point[0] == 1.0 {
            self.p.ln()
        } else if point[0] == 0.0 {
            (1.0 - self.p).ln()
        } else {
            f64::NEG_INFINITY
        }
    }
    fn support(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        Some(vec![(vec![0.0], 1.0 - self.p), (vec![1.0], self.p)])
    }
}

/// Beta(a, b) on `(0, 1)`.
#[derive(Debug, Clone)]
pub struct BetaProposal {
    a: f64,
    b: f64,
    dist: Beta<f64>,
}

impl BetaProposal {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let dist = Beta::new(a, b)
            .map_err(|e| SomaError::Config(format!("Beta({a}, {b}): {e}")))?;
        Ok(BetaProposal { a, b, dist })
    }
}

impl Proposal for BetaProposal {
    fn width(&self) -> usize {
        1
    }
    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        // Beta draws can round to exactly 0 or 1 for extreme shapes.
        let mut v = self.dist.sample(rng);
        while !(v > 0.0 && v < 1.0) {
            v = self.dist.sample(rng);
        }
        out[0] = v;
    }
    fn log_q(&self, point: &[f64]) -> f64 {
        beta_log_pdf(point[0], self.a, self.b)
    }
}

/// Exp(1) on `[0, inf)`.
#[derive(Debug, Clone, Default)]
pub struct ExponentialProposal;

impl Proposal for ExponentialProposal {
    fn width(&self) -> usize {
        1
    }
    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        out[0] = Exp1.sample(rng);
    }
    fn log_q(&self, point: &[f64]) -> f64 {
        exp1_log_pdf(point[0])
    }
}

/// Uniform on `(0, 1)`.
#[derive(Debug, Clone, Default)]
pub struct UniformProposal;

impl Proposal for UniformProposal {
    fn width(&self) -> usize {
        1
    }
    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let mut v = rng.random::<f64>();
        while v == 0.0 {
            v = rng.random::<f64>();
        }
        out[0] = v;
    }
    fn log_q(&self, point: &[f64]) -> f64 {
        if point[0] > 0.0 && point[0] < 1.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson rule on [lo, hi] with `m` (even) panels.
    fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, m: usize) -> f64 {
        let h = (hi - lo) / m as f64;
        let mut s = f(lo) + f(hi);
        for k in 1..m {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(lo + k as f64 * h);
        }
        s * h / 3.0
    }

    fn density(p: &dyn Proposal) -> impl Fn(f64) -> f64 + '_ {
        move |x| {
            let l = p.log_q(&[x]);
            if l == f64::NEG_INFINITY {
                0.0
            } else {
                l.exp()
            }
        }
    }

    #[test]
    fn closed_form_proposals_integrate_to_one() {
        let beta = BetaProposal::new(10.0, 10.0).unwrap();
        assert!((simpson(density(&beta), 0.0, 1.0, 20_000) - 1.0).abs() < 1e-6);
        let beta2 = BetaProposal::new(2.0, 5.0).unwrap();
        assert!((simpson(density(&beta2), 0.0, 1.0, 20_000) - 1.0).abs() < 1e-6);
        let exp = ExponentialProposal;
        assert!((simpson(density(&exp), 0.0, 60.0, 200_000) - 1.0).abs() < 1e-6);
        // The uniform density has jumps at the endpoints; integrate inside.
        let uni = UniformProposal;
        assert!((simpson(density(&uni), 1e-12, 1.0 - 1e-12, 1000) - 1.0).abs() < 1e-6);
        let bern = BernoulliProposal::new(0.3).unwrap();
        let total: f64 = bern.support().unwrap().iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn samples_land_in_support() {
        let mut rng = crate::rng::chain_rng(3);
        let beta = BetaProposal::new(0.5, 0.5).unwrap();
        let mut out = [0.0];
        for _ in 0..10_000 {
            beta.sample(&mut rng, &mut out);
            assert!(beta.log_q(&out).is_finite());
        }
    }

    #[test]
    fn bad_parameters_are_config_errors() {
        assert!(BernoulliProposal::new(1.0).is_err());
        assert!(BetaProposal::new(-1.0, 2.0).is_err());
    }
}
