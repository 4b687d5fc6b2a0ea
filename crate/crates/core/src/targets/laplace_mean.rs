use serde::{Deserialize, Serialize};

use super::{AdditiveStructure, BetaProposal, ExponentialProposal, Proposal, Target};
use crate::error::{Result, SomaError};
use crate::math::{beta_log_pdf, exp1_log_pdf, laplace_log_pdf};
use crate::state::{ComponentSpace, State};

/// Prior on each component of a [`LaplaceMean`] target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MeanPrior {
    Beta { a: f64, b: f64 },
    Exponential,
}

impl MeanPrior {
    fn log_pdf(&self, x: f64) -> f64 {
        match *self {
            MeanPrior::Beta { a, b } => beta_log_pdf(x, a, b),
            MeanPrior::Exponential => exp1_log_pdf(x),
        }
    }
}

/// Posterior of `n` private values given one noisy release of their mean,
/// `y_obs ~ Laplace(mean(x), 1/eps)`.
#[derive(Debug, Clone)]
pub struct LaplaceMean {
    prior: MeanPrior,
    eps: f64,
    y_obs: f64,
    n: usize,
}

/// Beta(a0, b0) prior on `(0, 1)`. Paired with the prior as proposal, swap
/// weights differ by at most a factor `exp(eps)`.
pub fn beta_laplace_target(a0: f64, b0: f64, eps: f64, y_obs: f64, n: usize) -> Result<LaplaceMean> {
    if !(a0 > 0.0 && b0 > 0.0) || !a0.is_finite() || !b0.is_finite() {
        return Err(SomaError::Config(format!("Beta shapes must be positive, got ({a0}, {b0})")));
    }
    build(MeanPrior::Beta { a: a0, b: b0 }, eps, y_obs, n)
}

/// Exp(1) prior on `[0, inf)`. There is no finite weight-ratio bound here
/// because the mean is unbounded.
pub fn exp_laplace_target(eps: f64, y_obs: f64, n: usize) -> Result<LaplaceMean> {
    build(MeanPrior::Exponential, eps, y_obs, n)
}

fn build(prior: MeanPrior, eps: f64, y_obs: f64, n: usize) -> Result<LaplaceMean> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(SomaError::Config(format!("privacy budget must be positive and finite, got {eps}")));
    }
    if !y_obs.is_finite() {
        return Err(SomaError::Config("observation must be finite".into()));
    }
    if n == 0 {
        return Err(SomaError::Config("need at least one component".into()));
    }
    Ok(LaplaceMean { prior, eps, y_obs, n })
}

impl LaplaceMean {
    pub fn prior(&self) -> MeanPrior {
        self.prior
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn y_obs(&self) -> f64 {
        self.y_obs
    }

    /// The component prior, as a proposal.
    pub fn prior_proposal(&self) -> Box<dyn Proposal> {
        match self.prior {
            MeanPrior::Beta { a, b } => Box::new(BetaProposal::new(a, b).expect("validated")),
            MeanPrior::Exponential => Box::new(ExponentialProposal),
        }
    }
}

impl Target for LaplaceMean {
    fn n(&self) -> usize {
        self.n
    }

    fn space(&self) -> ComponentSpace {
        ComponentSpace::Real
    }

    fn log_density(&self, state: &State) -> f64 {
        super::additive_log_density(self, state)
    }

    fn additive(&self) -> Option<&dyn AdditiveStructure> {
        Some(self)
    }

    fn ratio_bound(&self) -> Option<f64> {
        match self.prior {
            MeanPrior::Beta { .. } => Some(self.eps.exp()),
            MeanPrior::Exponential => None,
        }
    }
}

impl AdditiveStructure for LaplaceMean {
    fn summary_dim(&self) -> usize {
        1
    }

    fn stat(&self, point: &[f64], out: &mut [f64]) {
        out[0] = point[0] / self.n as f64;
    }

    fn log_observation(&self, total: &[f64]) -> f64 {
        laplace_log_pdf(self.y_obs, total[0], 1.0 / self.eps)
    }

    fn log_prior(&self, point: &[f64]) -> f64 {
        self.prior.log_pdf(point[0])
    }
}
