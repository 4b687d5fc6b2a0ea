use serde::{Deserialize, Serialize};

use super::{AdditiveStructure, Proposal, Target};
use crate::error::{Result, SomaError};
use crate::math::log_sum_exp;
use crate::state::State;

/// Log swap weights for one (state, offer) pair.
///
/// Entry `0` is `log w_0`, the score of keeping the current state. Entry
/// `i + 1` is the score of replacing component `i` (zero-based) by the offer:
///
/// ```text
/// w_0 = pi(x) / prod_j q(x_j)
/// w_i = pi(x with x_i <- y) / (q(y) prod_{j != i} q(x_j))
/// ```
///
/// `-inf` encodes a zero weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    log_w: Vec<f64>,
    log_total: f64,
}

impl WeightVector {
    /// Wraps raw log-weights `[log w_0, log w_1, .., log w_n]`.
    pub fn from_log_weights(log_w: Vec<f64>) -> Result<Self> {
        if log_w.len() < 2 {
            return Err(SomaError::Domain("need w_0 and at least one swap weight".into()));
        }
        if let Some((index, &value)) = log_w
            .iter()
            .enumerate()
            .find(|(_, v)| v.is_nan() || **v == f64::INFINITY)
        {
            return Err(SomaError::Numerical { index, value });
        }
        let log_total = log_sum_exp(&log_w[1..]);
        Ok(WeightVector { log_w, log_total })
    }

    /// Number of swap weights.
    pub fn n(&self) -> usize {
        self.log_w.len() - 1
    }

    pub fn log_w0(&self) -> f64 {
        self.log_w[0]
    }

    /// `log w` for swapping out component `i` (zero-based).
    pub fn log_swap(&self, i: usize) -> f64 {
        self.log_w[i + 1]
    }

    pub fn log_swaps(&self) -> &[f64] {
        &self.log_w[1..]
    }

    /// The full array, `log w_0` first.
    pub fn as_slice(&self) -> &[f64] {
        &self.log_w
    }

    /// `log W`, the log of the summed swap weights.
    pub fn log_total(&self) -> f64 {
        self.log_total
    }

    /// True when every swap weight is zero, so the offer fits no slot.
    pub fn is_dead(&self) -> bool {
        self.log_total == f64::NEG_INFINITY
    }

    /// Index-selection probabilities `w_i / W`; all zeros for a dead offer.
    pub fn selection_probs(&self) -> Vec<f64> {
        if self.is_dead() {
            return vec![0.0; self.n()];
        }
        self.log_swaps()
            .iter()
            .map(|&l| (l - self.log_total).exp())
            .collect()
    }
}

fn finite_check(log_w: &[f64]) -> Result<()> {
    for (index, &value) in log_w.iter().enumerate() {
        if value.is_nan() || value == f64::INFINITY {
            return Err(SomaError::Numerical { index, value });
        }
    }
    Ok(())
}

fn check_inputs<T: Target + ?Sized>(target: &T, state: &State, offer: &[f64]) -> Result<()> {
    let space = target.space();
    if state.width() != space.width() || state.n() != target.n() {
        return Err(SomaError::Domain(format!(
            "state has {} components of width {}, target expects {} of width {}",
            state.n(),
            state.width(),
            target.n(),
            space.width()
        )));
    }
    space.check(offer)
}

/// Swap weights for `offer` against every slot of `state`.
///
/// Uses the record-additive path when the target declares one, which costs
/// `O(n)` evaluations of the observation term instead of `O(n)` full
/// densities. Both paths return `log w_i = log w_0` exactly when the offer
/// equals `x_i`.
pub fn compute_weights<T, P>(target: &T, proposal: &P, state: &State, offer: &[f64]) -> Result<WeightVector>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    check_inputs(target, state, offer)?;
    let log_w = match target.additive() {
        Some(add) => additive_weights(add, proposal, state, offer),
        None => generic_weights(target, proposal, state, offer),
    };
    finite_check(&log_w)?;
    WeightVector::from_log_weights(log_w)
}

/// Swap weights from full density evaluations, ignoring any additive
/// structure. Mainly useful as a cross-check of the fast path.
pub fn compute_weights_generic<T, P>(
    target: &T,
    proposal: &P,
    state: &State,
    offer: &[f64],
) -> Result<WeightVector>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    check_inputs(target, state, offer)?;
    let log_w = generic_weights(target, proposal, state, offer);
    finite_check(&log_w)?;
    WeightVector::from_log_weights(log_w)
}

/// `(log w_0, log w_i)` for a single slot, as used by the component-wise
/// samplers. Costs two density evaluations on the generic path.
pub fn log_swap_ratio<T, P>(target: &T, proposal: &P, state: &State, i: usize, offer: &[f64]) -> Result<(f64, f64)>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    check_inputs(target, state, offer)?;
    let lq: Vec<f64> = state.components().map(|c| proposal.log_q(c)).collect();
    let q_sum: f64 = lq.iter().sum();
    let xi = state.component(i);

    let pair = match target.additive() {
        Some(add) => {
            let k = add.summary_dim();
            let mut total = vec![0.0; k];
            let mut buf = vec![0.0; k];
            let mut h_sum = 0.0;
            let mut h_i = 0.0;
            for (j, c) in state.components().enumerate() {
                add.stat(c, &mut buf);
                for (t, b) in total.iter_mut().zip(&buf) {
                    *t += b;
                }
                let h = add.log_prior(c) - lq[j];
                if j == i {
                    h_i = h;
                }
                h_sum += h;
            }
            let g0 = add.log_observation(&total);
            let log_w0 = g0 + h_sum;
            if xi == offer {
                (log_w0, log_w0)
            } else {
                let lf_y = add.log_prior(offer);
                if lf_y == f64::NEG_INFINITY {
                    (log_w0, f64::NEG_INFINITY)
                } else {
                    let h_y = lf_y - proposal.log_q(offer);
                    let mut ti = vec![0.0; k];
                    add.stat(xi, &mut ti);
                    add.stat(offer, &mut buf);
                    for ((t, a), b) in total.iter_mut().zip(&ti).zip(&buf) {
                        *t = *t - a + b;
                    }
                    let g = add.log_observation(&total);
                    if log_w0.is_finite() {
                        (log_w0, log_w0 + (g - g0) + (h_y - h_i))
                    } else {
                        (log_w0, g + (h_sum - h_i) + h_y)
                    }
                }
            }
        }
        None => {
            let lp_x = target.log_density(state);
            let log_w0 = lp_x - q_sum;
            if xi == offer {
                (log_w0, log_w0)
            } else {
                let lp_i = target.log_density(&state.with_component(i, offer));
                (log_w0, swap_weight(lp_x, lp_i, log_w0, lq[i], proposal.log_q(offer), q_sum))
            }
        }
    };
    finite_check(&[pair.0, pair.1])?;
    Ok(pair)
}

fn swap_weight(lp_x: f64, lp_i: f64, log_w0: f64, lq_i: f64, lq_y: f64, q_sum: f64) -> f64 {
    if lp_i == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if lp_x.is_finite() && log_w0.is_finite() {
        log_w0 + (lp_i - lp_x) + (lq_i - lq_y)
    } else {
        lp_i - lq_y - (q_sum - lq_i)
    }
}

fn generic_weights<T, P>(target: &T, proposal: &P, state: &State, offer: &[f64]) -> Vec<f64>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    let n = state.n();
    let lq: Vec<f64> = state.components().map(|c| proposal.log_q(c)).collect();
    let q_sum: f64 = lq.iter().sum();
    let lq_y = proposal.log_q(offer);
    let lp_x = target.log_density(state);
    let log_w0 = lp_x - q_sum;

    let mut log_w = Vec::with_capacity(n + 1);
    log_w.push(log_w0);
    let mut scratch = state.clone();
    for i in 0..n {
        let xi = state.component(i);
        if xi == offer {
            log_w.push(log_w0);
            continue;
        }
        scratch.set_component(i, offer);
        let lp_i = target.log_density(&scratch);
        scratch.set_component(i, xi);
        log_w.push(swap_weight(lp_x, lp_i, log_w0, lq[i], lq_y, q_sum));
    }
    log_w
}

fn additive_weights<P>(add: &dyn AdditiveStructure, proposal: &P, state: &State, offer: &[f64]) -> Vec<f64>
where
    P: Proposal + ?Sized,
{
    let n = state.n();
    let k = add.summary_dim();

    // Per-component statistics, stored row-major.
    let mut stats = vec![0.0; n * k];
    let mut total = vec![0.0; k];
    let mut h = Vec::with_capacity(n);
    for (j, c) in state.components().enumerate() {
        let row = &mut stats[j * k..(j + 1) * k];
        add.stat(c, row);
        for (t, b) in total.iter_mut().zip(row.iter()) {
            *t += b;
        }
        h.push(add.log_prior(c) - proposal.log_q(c));
    }
    let h_sum: f64 = h.iter().sum();
    let g0 = add.log_observation(&total);
    let log_w0 = g0 + h_sum;

    let mut log_w = Vec::with_capacity(n + 1);
    log_w.push(log_w0);

    let lf_y = add.log_prior(offer);
    if lf_y == f64::NEG_INFINITY {
        for c in state.components() {
            log_w.push(if c == offer { log_w0 } else { f64::NEG_INFINITY });
        }
        return log_w;
    }
    let h_y = lf_y - proposal.log_q(offer);
    let mut t_y = vec![0.0; k];
    add.stat(offer, &mut t_y);

    let mut swapped = vec![0.0; k];
    for (i, c) in state.components().enumerate() {
        if c == offer {
            log_w.push(log_w0);
            continue;
        }
        let row = &stats[i * k..(i + 1) * k];
        for m in 0..k {
            swapped[m] = total[m] - row[m] + t_y[m];
        }
        let g = add.log_observation(&swapped);
        let lw = if g == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else if log_w0.is_finite() {
            log_w0 + (g - g0) + (h_y - h[i])
        } else {
            g + (h_sum - h[i]) + h_y
        };
        log_w.push(lw);
    }
    log_w
}
