//! Coupled kernels, meeting times and rate estimation.
//!
//! Two chains share the offer, the index randomness and the accept uniform.
//! For SOMA the two slot choices are maximally coupled; for the baselines
//! both chains update the same slot. Once the chains agree they take
//! identical steps forever after.

mod distance;
mod maximal;
mod rate;
mod run;

pub use distance::min_permutation_distance;
pub use maximal::{maximal_coupling_index, overlap_mass};
pub use rate::{estimate_rate, RateEstimate};
pub use run::{run_coupled, run_coupled_from, run_coupled_replicates, warm_start, CoupledRunConfig, CouplingOutcome};

use rand::Rng;

use crate::error::Result;
use crate::samplers::{imwg_log_acceptance, select_index_with, soma_acceptance, SamplerKind};
use crate::state::State;
use crate::targets::{compute_weights, log_swap_ratio, Proposal, Target};
use maximal::maximal_coupling_with;

/// Two aligned chains.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair {
    pub a: State,
    pub b: State,
    /// Iterations taken so far.
    pub t: usize,
    /// Shared sweep cursor for systematic scan.
    pub cursor: usize,
}

impl CoupledPair {
    pub fn new(a: State, b: State) -> Self {
        CoupledPair { a, b, t: 0, cursor: 0 }
    }

    /// Positions whose components differ.
    pub fn distance(&self) -> usize {
        self.a.hamming(&self.b)
    }

    pub fn met(&self) -> bool {
        self.a == self.b
    }

    /// Reorders `b` so that components it shares with `a` sit in the same
    /// slots. Only `b`'s order changes, which leaves the law of its
    /// multiset of components untouched for permutation-invariant targets.
    /// Returns the number of slots moved.
    pub fn align(&mut self) -> usize {
        let n = self.a.n();
        let mut moved = 0;
        for i in 0..n {
            if self.a.component(i) == self.b.component(i) {
                continue;
            }
            let found = (0..n).find(|&j| {
                j != i && self.b.component(j) == self.a.component(i) && self.a.component(j) != self.b.component(j)
            });
            if let Some(j) = found {
                let bi = self.b.component(i).to_vec();
                let bj = self.b.component(j).to_vec();
                self.b.set_component(i, &bj);
                self.b.set_component(j, &bi);
                moved += 1;
            }
        }
        moved
    }
}

/// Per-chain outcome of a coupled step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoupledStepInfo {
    pub index_a: Option<usize>,
    pub index_b: Option<usize>,
    pub accepted_a: bool,
    pub accepted_b: bool,
}

/// One coupled iteration where both chains target the same distribution
/// with the same proposal. The shared offer is drawn first.
pub fn coupled_step<R, T, P>(rng: &mut R, kind: SamplerKind, target: &T, proposal: &P, pair: &mut CoupledPair) -> Result<CoupledStepInfo>
where
    R: Rng,
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    let mut y = vec![0.0; proposal.width()];
    proposal.sample(rng, &mut y);
    let sides = Sides {
        target_a: target,
        target_b: target,
        proposal_a: proposal,
        proposal_b: proposal,
    };
    coupled_step_with_offers(rng, kind, &sides, pair, &y, &y)
}

pub fn coupled_soma_step<R, T, P>(rng: &mut R, target: &T, proposal: &P, pair: &mut CoupledPair) -> Result<CoupledStepInfo>
where
    R: Rng,
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    coupled_step(rng, SamplerKind::Soma, target, proposal, pair)
}

pub fn coupled_ran_step<R, T, P>(rng: &mut R, target: &T, proposal: &P, pair: &mut CoupledPair) -> Result<CoupledStepInfo>
where
    R: Rng,
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    coupled_step(rng, SamplerKind::RanImwg, target, proposal, pair)
}

pub fn coupled_sys_step<R, T, P>(rng: &mut R, target: &T, proposal: &P, pair: &mut CoupledPair) -> Result<CoupledStepInfo>
where
    R: Rng,
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    coupled_step(rng, SamplerKind::SysImwg, target, proposal, pair)
}

/// Targets and proposals for the two sides of a coupled step. They differ
/// when each chain carries its own parameters, as in data augmentation.
pub struct Sides<'a, TA: ?Sized, TB: ?Sized, PA: ?Sized, PB: ?Sized> {
    pub target_a: &'a TA,
    pub target_b: &'a TB,
    pub proposal_a: &'a PA,
    pub proposal_b: &'a PB,
}

/// Coupled iteration with offers already drawn. Uses the generator for the
/// slot choice and then a single accept uniform shared by both chains.
pub fn coupled_step_with_offers<R, TA, TB, PA, PB>(
    rng: &mut R,
    kind: SamplerKind,
    sides: &Sides<'_, TA, TB, PA, PB>,
    pair: &mut CoupledPair,
    y_a: &[f64],
    y_b: &[f64],
) -> Result<CoupledStepInfo>
where
    R: Rng,
    TA: Target + ?Sized,
    TB: Target + ?Sized,
    PA: Proposal + ?Sized,
    PB: Proposal + ?Sized,
{
    let n = pair.a.n();
    let (index_a, index_b, alpha_a, alpha_b) = match kind {
        SamplerKind::Soma => {
            let wa = compute_weights(sides.target_a, sides.proposal_a, &pair.a, y_a)?;
            let wb = compute_weights(sides.target_b, sides.proposal_b, &pair.b, y_b)?;
            let u: f64 = rng.random();
            let (ia, ib) = match (wa.is_dead(), wb.is_dead()) {
                (false, false) => {
                    let (i, j) = maximal_coupling_with(u, &wa.selection_probs(), &wb.selection_probs());
                    (Some(i), Some(j))
                }
                _ => (select_index_with(u, &wa), select_index_with(u, &wb)),
            };
            let aa = ia.map_or(0.0, |i| soma_acceptance(&wa, i));
            let ab = ib.map_or(0.0, |i| soma_acceptance(&wb, i));
            (ia, ib, aa, ab)
        }
        SamplerKind::RanImwg | SamplerKind::SysImwg => {
            let i = if kind == SamplerKind::RanImwg {
                rng.random_range(0..n)
            } else {
                let i = pair.cursor;
                pair.cursor = (i + 1) % n;
                i
            };
            let (a0, ai) = log_swap_ratio(sides.target_a, sides.proposal_a, &pair.a, i, y_a)?;
            let (b0, bi) = log_swap_ratio(sides.target_b, sides.proposal_b, &pair.b, i, y_b)?;
            (
                Some(i),
                Some(i),
                imwg_log_acceptance(a0, ai).exp(),
                imwg_log_acceptance(b0, bi).exp(),
            )
        }
    };
    let xi: f64 = rng.random();
    let accepted_a = index_a.is_some() && xi < alpha_a;
    let accepted_b = index_b.is_some() && xi < alpha_b;
    if accepted_a {
        pair.a.set_component(index_a.unwrap(), y_a);
    }
    if accepted_b {
        pair.b.set_component(index_b.unwrap(), y_b);
    }
    pair.t += 1;
    Ok(CoupledStepInfo {
        index_a,
        index_b,
        accepted_a,
        accepted_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;
    use crate::samplers::soma_step;
    use crate::targets::{beta_laplace_target, BetaProposal};

    #[test]
    fn equal_states_stay_equal() {
        let t = beta_laplace_target(10.0, 10.0, 2.0, 0.5, 4).unwrap();
        let q = BetaProposal::new(10.0, 10.0).unwrap();
        let x = State::scalar(vec![0.2, 0.4, 0.6, 0.8]).unwrap();
        for kind in SamplerKind::ALL {
            let mut pair = CoupledPair::new(x.clone(), x.clone());
            let mut rng = chain_rng(4);
            for _ in 0..2000 {
                coupled_step(&mut rng, kind, &t, &q, &mut pair).unwrap();
                assert!(pair.met());
            }
        }
    }

    #[test]
    fn coupled_soma_on_equal_states_replays_the_single_chain() {
        let t = beta_laplace_target(10.0, 10.0, 2.0, 0.5, 3).unwrap();
        let q = BetaProposal::new(10.0, 10.0).unwrap();
        let x = State::scalar(vec![0.3, 0.5, 0.7]).unwrap();
        let mut pair = CoupledPair::new(x.clone(), x.clone());
        let mut single = x.clone();
        let (mut r1, mut r2) = (chain_rng(8), chain_rng(8));
        for _ in 0..500 {
            coupled_soma_step(&mut r1, &t, &q, &mut pair).unwrap();
            soma_step(&mut r2, &t, &q, &mut single).unwrap();
        }
        assert_eq!(pair.a, single);
    }

    #[test]
    fn align_moves_shared_components_only() {
        let a = State::scalar(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = State::scalar(vec![2.0, 9.0, 1.0, 4.0]).unwrap();
        let mut pair = CoupledPair::new(a, b);
        assert_eq!(pair.distance(), 3);
        assert!(pair.align() > 0);
        assert_eq!(pair.b.as_slice(), &[1.0, 2.0, 9.0, 4.0]);
        assert_eq!(pair.distance(), 1);
        assert_eq!(pair.align(), 0);
    }

    #[test]
    fn distance_changes_are_local() {
        let t = beta_laplace_target(10.0, 10.0, 1.0, 0.5, 5).unwrap();
        let q = BetaProposal::new(10.0, 10.0).unwrap();
        let a = State::scalar(vec![0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        let b = State::scalar(vec![0.6, 0.7, 0.8, 0.9, 0.55]).unwrap();
        for kind in [SamplerKind::Soma, SamplerKind::RanImwg, SamplerKind::SysImwg] {
            let mut pair = CoupledPair::new(a.clone(), b.clone());
            let mut rng = chain_rng(6);
            let mut d = pair.distance();
            for _ in 0..5000 {
                coupled_step(&mut rng, kind, &t, &q, &mut pair).unwrap();
                let d2 = pair.distance();
                // SOMA may write the offer into different slots of the two
                // chains, touching two positions.
                let limit = if kind == SamplerKind::Soma { 2 } else { 1 };
                assert!(d.abs_diff(d2) <= limit);
                d = d2;
            }
        }
    }
}
