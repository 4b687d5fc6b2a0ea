//! The SOMA kernel, the two Metropolis-within-Gibbs baselines, chain drivers,
//! exact kernels for finite targets and the theoretical bounds.
//!
//! All three kernels draw a single offer `y ~ q` per iteration. SOMA scores
//! `y` against every slot and picks one with probability `w_i / W`; the
//! baselines pick a slot first (uniformly for random scan, cyclically for
//! systematic scan) and run an independence Metropolis update on it.

mod bounds;
mod chain;
mod exact;

pub use bounds::{accept_bound_imwg, accept_bound_soma, rate_bound_ran, rate_bound_soma, rate_bound_sys};
pub use chain::{run_chain, run_chain_from, ChainRecord};
pub use exact::{sys_update_matrix, transition_matrix, TransitionMatrix};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SomaError};
use crate::math::log_sum_exp;
use crate::state::State;
use crate::targets::{compute_weights, log_swap_ratio, Proposal, Target, WeightVector};

/// Which kernel drives a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SamplerKind {
    #[serde(rename = "soma")]
    Soma,
    #[serde(rename = "ran")]
    RanImwg,
    #[serde(rename = "sys")]
    SysImwg,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 3] = [SamplerKind::Soma, SamplerKind::RanImwg, SamplerKind::SysImwg];

    /// Short label used in CSV output.
    pub fn label(self) -> &'static str {
        match self {
            SamplerKind::Soma => "soma",
            SamplerKind::RanImwg => "ran",
            SamplerKind::SysImwg => "sys",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "soma" => Ok(SamplerKind::Soma),
            "ran" | "ran-imwg" | "ranimwg" => Ok(SamplerKind::RanImwg),
            "sys" | "sys-imwg" | "sysimwg" => Ok(SamplerKind::SysImwg),
            other => Err(SomaError::Config(format!("unknown sampler kind `{other}` (expected soma, ran or sys)"))),
        }
    }
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// What happened in one kernel step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub offer: Vec<f64>,
    /// Slot the offer was tried in (zero-based). `None` for a dead SOMA
    /// offer, where every swap weight is zero.
    pub chosen_index: Option<usize>,
    pub acceptance_prob: f64,
    pub accepted: bool,
    /// Full weight vector; SOMA only.
    pub log_weights: Option<WeightVector>,
}

/// `log min{1, W / (W + w_0 - w_i)}`, with the denominator formed as a sum
/// over `w_0` and the `w_j, j != i`, so nothing is subtracted.
pub fn soma_log_acceptance(weights: &WeightVector, i: usize) -> f64 {
    if weights.is_dead() {
        return f64::NEG_INFINITY;
    }
    let mut rest = Vec::with_capacity(weights.n());
    rest.push(weights.log_w0());
    rest.extend(
        weights
            .log_swaps()
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &l)| l),
    );
    let denom = log_sum_exp(&rest);
    (weights.log_total() - denom).min(0.0)
}

/// SOMA acceptance probability for slot `i` (zero-based). Zero for a dead
/// offer.
pub fn soma_acceptance(weights: &WeightVector, i: usize) -> f64 {
    soma_log_acceptance(weights, i).exp()
}

/// `log min{1, w_i / w_0}`. A zero `w_0` with positive `w_i` accepts; both
/// zero rejects.
pub fn imwg_log_acceptance(log_w0: f64, log_wi: f64) -> f64 {
    if log_wi == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if log_w0 == f64::NEG_INFINITY {
        0.0
    } else {
        (log_wi - log_w0).min(0.0)
    }
}

/// Independence Metropolis acceptance for slot `i` (zero-based).
pub fn imwg_acceptance(weights: &WeightVector, i: usize) -> f64 {
    imwg_log_acceptance(weights.log_w0(), weights.log_swap(i)).exp()
}

/// Picks slot `i` with probability `w_i / W` from one uniform draw. Returns
/// `None` when `W = 0`.
pub fn select_index<R: Rng + ?Sized>(rng: &mut R, weights: &WeightVector) -> Option<usize> {
    let u: f64 = rng.random();
    select_index_with(u, weights)
}

pub(crate) fn select_index_with(u: f64, weights: &WeightVector) -> Option<usize> {
    if weights.is_dead() {
        return None;
    }
    let probs = weights.selection_probs();
    inverse_cdf(u, &probs)
}

/// Smallest `i` with `u < p_0 + .. + p_i`, falling back to the last
/// positive entry when rounding leaves `u` above the running total.
pub(crate) fn inverse_cdf(u: f64, probs: &[f64]) -> Option<usize> {
    let mut cum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cum += p;
        if p > 0.0 && u < cum {
            return Some(i);
        }
    }
    probs.iter().rposition(|&p| p > 0.0)
}

fn draw_offer<R: Rng, P: Proposal + ?Sized>(rng: &mut R, proposal: &P) -> Vec<f64> {
    let mut y = vec![0.0; proposal.width()];
    proposal.sample(rng, &mut y);
    y
}

/// One SOMA iteration, updating `state` in place.
///
/// Random numbers are consumed in the order offer, index uniform, accept
/// uniform. A dead offer still consumes both uniforms so streams stay
/// aligned across kinds of runs.
pub fn soma_step<R, T, P>(rng: &mut R, target: &T, proposal: &P, state: &mut State) -> Result<StepInfo>
where
    R: Rng,
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    let y = draw_offer(rng, proposal);
    let weights = compute_weights(target, proposal, state, &y)?;
    let u: f64 = rng.random();
    let xi: f64 = rng.random();
    let Some(i) = select_index_with(u, &weights) else {
        return Ok(StepInfo {
            offer: y,
            chosen_index: None,
            acceptance_prob: 0.0,
            accepted: false,
            log_weights: Some(weights),
        });
    };
    let alpha = soma_acceptance(&weights, i);
    let accepted = xi < alpha;
    if accepted {
        state.set_component(i, &y);
    }
    Ok(StepInfo {
        offer: y,
        chosen_index: Some(i),
        acceptance_prob: alpha,
        accepted,
        log_weights: Some(weights),
    })
}

fn imwg_update<R, T, P>(rng: &mut R, target: &T, proposal: &P, state: &mut State, i: usize, y: Vec<f64>) -> Result<StepInfo>
where
    R: Rng,
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    let (l0, li) = log_swap_ratio(target, proposal, state, i, &y)?;
    let alpha = imwg_log_acceptance(l0, li).exp();
    let xi: f64 = rng.random();
    let accepted = xi < alpha;
    if accepted {
        state.set_component(i, &y);
    }
    Ok(StepInfo {
        offer: y,
        chosen_index: Some(i),
        acceptance_prob: alpha,
        accepted,
        log_weights: None,
    })
}

/// Random-scan update: offer, uniform slot, accept uniform.
pub fn ran_imwg_step<R, T, P>(rng: &mut R, target: &T, proposal: &P, state: &mut State) -> Result<StepInfo>
where
    R: Rng,
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    let y = draw_offer(rng, proposal);
    let i = rng.random_range(0..state.n());
    imwg_update(rng, target, proposal, state, i, y)
}

/// Systematic-scan update of slot `*cursor`, after which the cursor moves
/// to the next slot cyclically.
pub fn sys_imwg_step<R, T, P>(
    rng: &mut R,
    target: &T,
    proposal: &P,
    state: &mut State,
    cursor: &mut usize,
) -> Result<StepInfo>
where
    R: Rng,
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    if *cursor >= state.n() {
        return Err(SomaError::Precondition(format!("cursor {} out of range for n = {}", cursor, state.n())));
    }
    let y = draw_offer(rng, proposal);
    let i = *cursor;
    *cursor = (i + 1) % state.n();
    imwg_update(rng, target, proposal, state, i, y)
}

/// A kernel of a given kind, carrying the sweep cursor for systematic scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Kernel {
    pub kind: SamplerKind,
    pub cursor: usize,
}

impl Kernel {
    pub fn new(kind: SamplerKind) -> Self {
        Kernel { kind, cursor: 0 }
    }

    pub fn step<R, T, P>(&mut self, rng: &mut R, target: &T, proposal: &P, state: &mut State) -> Result<StepInfo>
    where
        R: Rng,
        T: Target + ?Sized,
        P: Proposal + ?Sized,
    {
        match self.kind {
            SamplerKind::Soma => soma_step(rng, target, proposal, state),
            SamplerKind::RanImwg => ran_imwg_step(rng, target, proposal, state),
            SamplerKind::SysImwg => sys_imwg_step(rng, target, proposal, state, &mut self.cursor),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;
    use crate::targets::{beta_laplace_target, BetaProposal};

    fn wv(w0: f64, w: &[f64]) -> WeightVector {
        let mut v = vec![w0.ln()];
        v.extend(w.iter().map(|x| x.ln()));
        WeightVector::from_log_weights(v).unwrap()
    }

    #[test]
    fn soma_acceptance_examples() {
        assert_eq!(soma_acceptance(&wv(1.0, &[1.0, 1.0]), 0), 1.0);
        assert!((soma_acceptance(&wv(2.0, &[1.0, 1.0]), 0) - 2.0 / 3.0).abs() < 1e-15);
        let w = wv(5.0, &[3.0, 1.0]);
        assert!((soma_acceptance(&w, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((soma_acceptance(&w, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn imwg_acceptance_examples() {
        assert_eq!(imwg_acceptance(&wv(1.5, &[1.5]), 0), 1.0);
        assert!((imwg_acceptance(&wv(2.0, &[1.0]), 0) - 0.5).abs() < 1e-15);
        assert_eq!(imwg_acceptance(&wv(2.0, &[0.0]), 0), 0.0);
        assert_eq!(imwg_log_acceptance(f64::NEG_INFINITY, 0.3), 0.0);
        assert_eq!(imwg_log_acceptance(f64::NEG_INFINITY, f64::NEG_INFINITY), f64::NEG_INFINITY);
    }

    #[test]
    fn dead_offer_has_zero_acceptance() {
        let w = WeightVector::from_log_weights(vec![0.0, f64::NEG_INFINITY, f64::NEG_INFINITY]).unwrap();
        assert_eq!(soma_acceptance(&w, 0), 0.0);
        assert_eq!(select_index(&mut chain_rng(0), &w), None);
    }

    #[test]
    fn index_selection_frequencies() {
        let mut rng = chain_rng(11);
        let w = wv(1.0, &[1.0, 3.0]);
        let hits = (0..100_000).filter(|_| select_index(&mut rng, &w) == Some(1)).count();
        let p = hits as f64 / 1e5;
        assert!((p - 0.75).abs() < 3.0 * (0.75f64 * 0.25 / 1e5).sqrt());
        let w = wv(1.0, &[0.0, 5.0]);
        assert!((0..1000).all(|_| select_index(&mut rng, &w) == Some(1)));
    }

    #[test]
    fn constant_state_with_matching_offer_always_accepts() {
        struct Fixed;
        impl Proposal for Fixed {
            fn width(&self) -> usize {
                1
            }
            fn sample(&self, _: &mut dyn rand::RngCore, out: &mut [f64]) {
                out[0] = 0.4;
            }
            fn log_q(&self, _: &[f64]) -> f64 {
                0.0
            }
        }
        let t = beta_laplace_target(3.0, 3.0, 1.0, 0.5, 4).unwrap();
        let mut x = State::scalar(vec![0.4; 4]).unwrap();
        let info = soma_step(&mut chain_rng(1), &t, &Fixed, &mut x).unwrap();
        assert_eq!(info.acceptance_prob, 1.0);
        assert!(info.accepted);
        assert_eq!(x.as_slice(), &[0.4; 4]);
    }

    #[test]
    fn sys_cursor_cycles() {
        let t = beta_laplace_target(3.0, 3.0, 1.0, 0.5, 3).unwrap();
        let q = BetaProposal::new(3.0, 3.0).unwrap();
        let mut x = State::scalar(vec![0.4, 0.5, 0.6]).unwrap();
        let mut rng = chain_rng(2);
        let mut cursor = 0;
        let seen: Vec<usize> = (0..4)
            .map(|_| sys_imwg_step(&mut rng, &t, &q, &mut x, &mut cursor).unwrap().chosen_index.unwrap())
            .collect();
        assert_eq!(seen, vec![0, 1, 2, 0]);
    }

    #[test]
    fn same_seed_same_steps() {
        let t = beta_laplace_target(10.0, 10.0, 1.0, 0.5, 5).unwrap();
        let q = BetaProposal::new(10.0, 10.0).unwrap();
        let run = || {
            let mut rng = chain_rng(42);
            let mut x = State::scalar(vec![0.5; 5]).unwrap();
            (0..200).map(|_| soma_step(&mut rng, &t, &q, &mut x).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
