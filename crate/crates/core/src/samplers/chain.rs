use serde::{Deserialize, Serialize};

use super::{Kernel, SamplerKind};
use crate::error::{Result, SomaError};
use crate::rng::{chain_rng, ChainRng};
use crate::state::State;
use crate::targets::{Proposal, Target};

/// Output of [`run_chain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub kind: SamplerKind,
    pub seed: u64,
    pub thin: usize,
    /// State after iterations `thin, 2 * thin, ..`.
    pub trace: Vec<State>,
    pub accept_count: u64,
    pub step_count: u64,
    /// Dead SOMA offers (no slot could take the offer).
    pub dead_offers: u64,
    /// Per-slot attempts and acceptances.
    pub index_attempts: Vec<u64>,
    pub index_accepts: Vec<u64>,
}

impl ChainRecord {
    pub fn acceptance_rate(&self) -> f64 {
        if self.step_count == 0 {
            0.0
        } else {
            self.accept_count as f64 / self.step_count as f64
        }
    }

    /// Iteration number of each trace entry.
    pub fn trace_iterations(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.trace.len()).map(|k| k * self.thin)
    }
}

/// Runs `iters` iterations of `kind` from `init` with a fresh generator
/// seeded from `seed`.
///
/// A systematic-scan iteration updates one component, so all three kinds
/// spend the same number of offers per iteration.
pub fn run_chain<T, P>(
    kind: SamplerKind,
    target: &T,
    proposal: &P,
    init: &State,
    iters: usize,
    seed: u64,
    thin: usize,
) -> Result<ChainRecord>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    let mut rng = chain_rng(seed);
    let mut record = run_chain_from(kind, target, proposal, init, iters, thin, &mut rng)?;
    record.seed = seed;
    Ok(record)
}

/// As [`run_chain`] but driven by a caller-owned generator. The recorded
/// seed is zero.
pub fn run_chain_from<T, P>(
    kind: SamplerKind,
    target: &T,
    proposal: &P,
    init: &State,
    iters: usize,
    thin: usize,
    rng: &mut ChainRng,
) -> Result<ChainRecord>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    if iters == 0 {
        return Err(SomaError::Precondition("need at least one iteration".into()));
    }
    if thin == 0 {
        return Err(SomaError::Precondition("thinning interval must be at least 1".into()));
    }
    if init.n() != target.n() {
        return Err(SomaError::Precondition(format!(
            "initial state has {} components, target has {}",
            init.n(),
            target.n()
        )));
    }
    if target.log_density(init) == f64::NEG_INFINITY {
        return Err(SomaError::Precondition("initial state has zero target density".into()));
    }
    let n = init.n();
    let mut record = ChainRecord {
        kind,
        seed: 0,
        thin,
        trace: Vec::with_capacity(iters / thin),
        accept_count: 0,
        step_count: 0,
        dead_offers: 0,
        index_attempts: vec![0; n],
        index_accepts: vec![0; n],
    };
    let mut kernel = Kernel::new(kind);
    let mut state = init.clone();
    for t in 1..=iters {
        let info = kernel.step(rng, target, proposal, &mut state)?;
        record.step_count += 1;
        match info.chosen_index {
            Some(i) => {
                record.index_attempts[i] += 1;
                if info.accepted {
                    record.index_accepts[i] += 1;
                    record.accept_count += 1;
                }
            }
            None => record.dead_offers += 1,
        }
        if t % thin == 0 {
            record.trace.push(state.clone());
        }
    }
    Ok(record)
}
