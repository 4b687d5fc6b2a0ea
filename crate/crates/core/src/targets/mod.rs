//! Permutation-invariant targets, independent proposals and the swap weights
//! that every sampler in this crate is built on.
//!
//! A [`Target`] is a density on `X^n` that does not change when its
//! components are reordered. A [`Proposal`] is a density on `X` from which a
//! single offer is drawn each iteration. [`compute_weights`] scores the offer
//! against every slot of the current state.

mod bernoulli;
mod histogram;
mod laplace_mean;
mod proposal;
mod weights;

pub use bernoulli::{bernoulli_laplace_target, BernoulliLaplace};
pub use histogram::{perturbed_histogram_target, privatize_histogram, uniform_edges, PerturbedHistogram};
pub use laplace_mean::{beta_laplace_target, exp_laplace_target, LaplaceMean, MeanPrior};
pub use proposal::{BernoulliProposal, BetaProposal, ExponentialProposal, Proposal, UniformProposal};
pub use weights::{
    compute_weights, compute_weights_generic, log_swap_ratio, WeightVector,
};

use crate::state::{ComponentSpace, State};

/// A density on `X^n` that is invariant under permutations of its components.
///
/// Log-densities may be `-inf`; that marks a zero-probability state and is
/// never treated as an error.
pub trait Target: Send + Sync {
    /// Number of components.
    fn n(&self) -> usize;

    fn space(&self) -> ComponentSpace;

    fn log_density(&self, state: &State) -> f64;

    /// Record-additive decomposition of the density, when the target has one.
    fn additive(&self) -> Option<&dyn AdditiveStructure> {
        None
    }

    /// Every positive-probability state, for finite targets.
    fn support_states(&self) -> Option<Vec<State>> {
        None
    }

    /// Bound `M` on the ratio of any two swap weights when the target is
    /// paired with its prior as the proposal.
    fn ratio_bound(&self) -> Option<f64> {
        None
    }
}

/// Targets of the form `log pi(x) = g(sum_j t(x_j)) + sum_j log f(x_j)`.
///
/// Swapping out one component only changes the summary by
/// `t(y) - t(x_i)`, so all `n` swap weights cost `O(n)` evaluations of `g`
/// instead of `O(n)` evaluations of the full density.
pub trait AdditiveStructure: Send + Sync {
    /// Length of `t(x)`.
    fn summary_dim(&self) -> usize;

    /// Writes `t(point)` into `out`.
    fn stat(&self, point: &[f64], out: &mut [f64]);

    /// `g` evaluated at the summed statistic.
    fn log_observation(&self, total: &[f64]) -> f64;

    /// Per-component prior `log f`.
    fn log_prior(&self, point: &[f64]) -> f64;
}

impl<T: Target + ?Sized> Target for Box<T> {
    fn n(&self) -> usize {
        (**self).n()
    }
    fn space(&self) -> ComponentSpace {
        (**self).space()
    }
    fn log_density(&self, state: &State) -> f64 {
        (**self).log_density(state)
    }
    fn additive(&self) -> Option<&dyn AdditiveStructure> {
        (**self).additive()
    }
    fn support_states(&self) -> Option<Vec<State>> {
        (**self).support_states()
    }
    fn ratio_bound(&self) -> Option<f64> {
        (**self).ratio_bound()
    }
}

/// Density of an additive target evaluated by summing the statistic.
pub fn additive_log_density(add: &dyn AdditiveStructure, state: &State) -> f64 {
    let mut total = vec![0.0; add.summary_dim()];
    let mut buf = vec![0.0; add.summary_dim()];
    let mut prior = 0.0;
    for c in state.components() {
        let lp = add.log_prior(c);
        if lp == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        prior += lp;
        add.stat(c, &mut buf);
        for (t, b) in total.iter_mut().zip(&buf) {
            *t += b;
        }
    }
    add.log_observation(&total) + prior
}
