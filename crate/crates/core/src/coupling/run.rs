use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{coupled_step, CoupledPair};
use crate::diagnostics::wasserstein2_1d;
use crate::error::{Result, SomaError};
use crate::rng::{chain_rng, replicate_rng, ChainRng};
use crate::samplers::{Kernel, SamplerKind};
use crate::state::State;
use crate::targets::{Proposal, Target};

/// Settings shared by every replicate of a coupled experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledRunConfig {
    /// Runs still apart after this many iterations are censored.
    pub t_max: usize,
    /// SOMA iterations used to move the second chain towards the target
    /// before coupling starts.
    pub burn_in: usize,
    pub record_distance: bool,
    /// Record `W2` between the two states each iteration (scalar
    /// components only).
    pub record_w2: bool,
    /// After every coupled step, move components of the second chain that
    /// also occur in the first chain into the matching slots (see
    /// [`CoupledPair::align`]). Off means the plain slot-aligned kernel.
    #[serde(default)]
    pub align: bool,
}

impl Default for CoupledRunConfig {
    fn default() -> Self {
        CoupledRunConfig {
            t_max: 100_000,
            burn_in: 10_000,
            record_distance: true,
            record_w2: false,
            align: false,
        }
    }
}

/// Result of one coupled run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingOutcome {
    pub kind: SamplerKind,
    /// First iteration at which the chains agree; `None` when censored.
    pub meeting_time: Option<usize>,
    pub t_max: usize,
    /// Hamming distance at iterations `0, 1, ..` up to meeting or `t_max`.
    pub distance_trace: Vec<u32>,
    pub w2_trace: Option<Vec<f64>>,
}

impl CouplingOutcome {
    pub fn censored(&self) -> bool {
        self.meeting_time.is_none()
    }

    /// Meeting time, counting censored runs at `t_max`.
    pub fn tau_or_t_max(&self) -> usize {
        self.meeting_time.unwrap_or(self.t_max)
    }

    /// `W2` at iteration `t`; zero after the chains met.
    pub fn w2_at(&self, t: usize) -> Option<f64> {
        let trace = self.w2_trace.as_ref()?;
        match trace.get(t) {
            Some(&v) => Some(v),
            None if self.meeting_time.is_some() => Some(0.0),
            None => None,
        }
    }
}

/// Advances `init` by `iters` SOMA iterations.
pub fn warm_start<T, P>(target: &T, proposal: &P, init: &State, iters: usize, rng: &mut ChainRng) -> Result<State>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    let mut kernel = Kernel::new(SamplerKind::Soma);
    let mut state = init.clone();
    for _ in 0..iters {
        kernel.step(rng, target, proposal, &mut state)?;
    }
    Ok(state)
}

fn w2_of(a: &State, b: &State) -> Result<f64> {
    wasserstein2_1d(a.as_slice(), b.as_slice())
}

/// Runs the coupled kernel from `(init_a, init_b)` until the chains meet or
/// `t_max` iterations pass, recording the distance trace.
pub fn run_coupled<T, P>(
    kind: SamplerKind,
    target: &T,
    proposal: &P,
    init_a: &State,
    init_b: &State,
    t_max: usize,
    seed: u64,
) -> Result<CouplingOutcome>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    let config = CoupledRunConfig {
        t_max,
        burn_in: 0,
        record_distance: true,
        record_w2: false,
        align: false,
    };
    run_coupled_from(kind, target, proposal, init_a, init_b, &config, &mut chain_rng(seed))
}

pub fn run_coupled_from<T, P>(
    kind: SamplerKind,
    target: &T,
    proposal: &P,
    init_a: &State,
    init_b: &State,
    config: &CoupledRunConfig,
    rng: &mut ChainRng,
) -> Result<CouplingOutcome>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    for (name, s) in [("first", init_a), ("second", init_b)] {
        if s.n() != target.n() || target.log_density(s) == f64::NEG_INFINITY {
            return Err(SomaError::Precondition(format!("{name} initial state is not in the support")));
        }
    }
    if config.record_w2 && init_a.width() != 1 {
        return Err(SomaError::Config("W2 traces need scalar components".into()));
    }
    let mut pair = CoupledPair::new(init_a.clone(), init_b.clone());
    let mut distance_trace = Vec::new();
    let mut w2_trace = config.record_w2.then(Vec::new);
    let mut record = |pair: &CoupledPair, d: usize| -> Result<()> {
        if config.record_distance {
            distance_trace.push(d as u32);
        }
        if let Some(w) = w2_trace.as_mut() {
            w.push(w2_of(&pair.a, &pair.b)?);
        }
        Ok(())
    };
    let mut d = pair.distance();
    record(&pair, d)?;
    let mut meeting_time = (d == 0).then_some(0);
    while meeting_time.is_none() && pair.t < config.t_max {
        coupled_step(rng, kind, target, proposal, &mut pair)?;
        if config.align {
            pair.align();
        }
        d = pair.distance();
        record(&pair, d)?;
        if d == 0 {
            meeting_time = Some(pair.t);
        }
    }
    Ok(CouplingOutcome {
        kind,
        meeting_time,
        t_max: config.t_max,
        distance_trace,
        w2_trace,
    })
}

/// Runs `replicates` independent coupled runs in parallel.
///
/// Replicate `r` warms the second chain up on stream `2r` of `seed` and
/// drives the coupled kernel with stream `2r + 1`. Neither depends on
/// `kind`, so runs of different kinds with the same seed start from the
/// same pairs. Results do not depend on the size of the thread pool.
pub fn run_coupled_replicates<T, P>(
    kind: SamplerKind,
    target: &T,
    proposal: &P,
    init_a: &State,
    config: &CoupledRunConfig,
    seed: u64,
    replicates: usize,
) -> Result<Vec<CouplingOutcome>>
where
    T: Target + ?Sized,
    P: Proposal + ?Sized,
{
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut warm = replicate_rng(seed, 2 * r);
            let init_b = warm_start(target, proposal, init_a, config.burn_in, &mut warm)?;
            let mut rng = replicate_rng(seed, 2 * r + 1);
            run_coupled_from(kind, target, proposal, init_a, &init_b, config, &mut rng)
        })
        .collect()
}
