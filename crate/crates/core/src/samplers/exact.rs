use std::collections::HashMap;

use super::{imwg_log_acceptance, soma_acceptance, SamplerKind};
use crate::error::{Result, SomaError};
use crate::math::log_sum_exp;
use crate::state::State;
use crate::targets::{compute_weights, Proposal, Target};

const MAX_STATES: usize = 10_000;

/// Exact kernel of a sampler over the enumerated support of a finite target.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    pub states: Vec<State>,
    /// Normalized target probabilities, aligned with `states`.
    pub pi: Vec<f64>,
    /// Row-stochastic: `p[a][b]` is the probability of moving from
    /// `states[a]` to `states[b]`.
    pub p: Vec<Vec<f64>>,
}

impl TransitionMatrix {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: &State) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }

    /// `max_a |sum_b p[a][b] - 1|`.
    pub fn row_sum_error(&self) -> f64 {
        self.p
            .iter()
            .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `|pi P - pi|_inf`.
    pub fn stationarity_error(&self) -> f64 {
        let k = self.len();
        (0..k)
            .map(|b| {
                let mass: f64 = (0..k).map(|a| self.pi[a] * self.p[a][b]).sum();
                (mass - self.pi[b]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `max |pi(a) P(a, b) - pi(b) P(b, a)|`.
    pub fn detailed_balance_error(&self) -> f64 {
        let k = self.len();
        let mut worst: f64 = 0.0;
        for a in 0..k {
            for b in 0..k {
                worst = worst.max((self.pi[a] * self.p[a][b] - self.pi[b] * self.p[b][a]).abs());
            }
        }
        worst
    }

    /// Kernel of `self` followed by `other` over the same states.
    pub fn then(&self, other: &TransitionMatrix) -> TransitionMatrix {
        let k = self.len();
        let mut p = vec![vec![0.0; k]; k];
        for a in 0..k {
            for m in 0..k {
                let pam = self.p[a][m];
                if pam == 0.0 {
                    continue;
                }
                for b in 0..k {
                    p[a][b] += pam * other.p[m][b];
                }
            }
        }
        TransitionMatrix {
            states: self.states.clone(),
            pi: self.pi.clone(),
            p,
        }
    }
}

struct Enumerated {
    states: Vec<State>,
    pi: Vec<f64>,
    index: HashMap<Vec<u64>, usize>,
    offers: Vec<(Vec<f64>, f64)>,
}

fn enumerate<T, P>(target: &T, proposal: &P) -> Result<Enumerated>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    let states = target
        .support_states()
        .ok_or_else(|| SomaError::Precondition("target support is not enumerable".into()))?;
    if states.len() > MAX_STATES {
        return Err(SomaError::Resource(format!(
            "support has {} states, limit is {MAX_STATES}",
            states.len()
        )));
    }
    let offers = proposal
        .support()
        .ok_or_else(|| SomaError::Precondition("proposal support is not enumerable".into()))?;
    let logs: Vec<f64> = states.iter().map(|s| target.log_density(s)).collect();
    let z = log_sum_exp(&logs);
    let pi = logs.iter().map(|l| (l - z).exp()).collect();
    let index = states.iter().enumerate().map(|(k, s)| (s.key(), k)).collect();
    Ok(Enumerated { states, pi, index, offers })
}

impl Enumerated {
    fn locate(&self, s: &State) -> Result<usize> {
        self.index
            .get(&s.key())
            .copied()
            .ok_or_else(|| SomaError::Precondition(format!("reachable state {:?} missing from support", s.as_slice())))
    }

    fn finish(self, p: Vec<Vec<f64>>) -> TransitionMatrix {
        TransitionMatrix {
            states: self.states,
            pi: self.pi,
            p,
        }
    }
}

/// Adds the probability of updating slot `i` of `states[a]` with offer `y`
/// under an independence Metropolis step, scaled by `mass`.
fn imwg_row<T, P>(
    target: &T,
    proposal: &P,
    e: &Enumerated,
    a: usize,
    i: usize,
    mass: f64,
    row: &mut [f64],
) -> Result<()>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    let x = &e.states[a];
    for (y, qy) in &e.offers {
        let w = compute_weights(target, proposal, x, y)?;
        let alpha = imwg_log_acceptance(w.log_w0(), w.log_swap(i)).exp();
        let m = mass * qy;
        if alpha > 0.0 {
            let dest = e.locate(&x.with_component(i, y))?;
            row[dest] += m * alpha;
        }
        row[a] += m * (1.0 - alpha);
    }
    Ok(())
}

/// Exact one-iteration kernel of `kind`.
///
/// For systematic scan this is the full sweep (slot 0, then 1, .., then
/// `n - 1`), which leaves the target invariant but is not reversible in
/// general. Each single-slot update is reversible; see
/// [`sys_update_matrix`].
pub fn transition_matrix<T, P>(kind: SamplerKind, target: &T, proposal: &P) -> Result<TransitionMatrix>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    let e = enumerate(target, proposal)?;
    let k = e.states.len();
    let n = target.n();
    match kind {
        SamplerKind::Soma => {
            let mut p = vec![vec![0.0; k]; k];
            for a in 0..k {
                let x = &e.states[a];
                for (y, qy) in &e.offers {
                    let w = compute_weights(target, proposal, x, y)?;
                    if w.is_dead() {
                        p[a][a] += qy;
                        continue;
                    }
                    for (i, sel) in w.selection_probs().into_iter().enumerate() {
                        if sel == 0.0 {
                            continue;
                        }
                        let alpha = soma_acceptance(&w, i);
                        let m = qy * sel;
                        if alpha > 0.0 {
                            let dest = e.locate(&x.with_component(i, y))?;
                            p[a][dest] += m * alpha;
                        }
                        p[a][a] += m * (1.0 - alpha);
                    }
                }
            }
            Ok(e.finish(p))
        }
        SamplerKind::RanImwg => {
            let mut p = vec![vec![0.0; k]; k];
            for a in 0..k {
                for i in 0..n {
                    imwg_row(target, proposal, &e, a, i, 1.0 / n as f64, &mut p[a])?;
                }
            }
            Ok(e.finish(p))
        }
        SamplerKind::SysImwg => {
            let mut sweep = update_matrix(target, proposal, &e, 0)?;
            for i in 1..n {
                sweep = sweep.then(&update_matrix(target, proposal, &e, i)?);
            }
            Ok(sweep)
        }
    }
}

fn update_matrix<T, P>(target: &T, proposal: &P, e: &Enumerated, i: usize) -> Result<TransitionMatrix>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    let k = e.states.len();
    let mut p = vec![vec![0.0; k]; k];
    for (a, row) in p.iter_mut().enumerate() {
        imwg_row(target, proposal, e, a, i, 1.0, row)?;
    }
    Ok(TransitionMatrix {
        states: e.states.clone(),
        pi: e.pi.clone(),
        p,
    })
}

/// Exact kernel of a single systematic-scan update of slot `i`.
pub fn sys_update_matrix<T, P>(target: &T, proposal: &P, i: usize) -> Result<TransitionMatrix>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    if i >= target.n() {
        return Err(SomaError::Domain(format!("slot {i} out of range for n = {}", target.n())));
    }
    let e = enumerate(target, proposal)?;
    update_matrix(target, proposal, &e, i)
}
