use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nig::{nig_posterior, sample_theta, sample_theta_with, theta_noise, NigParams, RegressionTheta};
use super::{imputation_target, CovariatePrior, PrivateSummary, RecordModel};
use crate::coupling::{coupled_step_with_offers, CoupledPair, CouplingOutcome, Sides};
use crate::error::{Result, SomaError};
use crate::math::normal_log_pdf;
use crate::rng::{replicate_rng, ChainRng};
use crate::samplers::{Kernel, SamplerKind};
use crate::state::State;
use crate::targets::Proposal;

/// Model and schedule of a DAMCMC run.
#[derive(Debug, Clone)]
pub struct DamcmcConfig {
    pub kind: SamplerKind,
    pub prior: NigParams,
    pub covariates: CovariatePrior,
    /// Number of theta draws.
    pub iters: usize,
    /// Imputation updates after each theta draw; `None` means one per
    /// record. Zero freezes the records.
    pub imputation_steps: Option<usize>,
}

impl DamcmcConfig {
    fn steps(&self, n: usize) -> usize {
        self.imputation_steps.unwrap_or(n)
    }

    fn check(&self, summary: &PrivateSummary) -> Result<()> {
        let p = summary.mechanism.p();
        if self.prior.dim() != p + 1 || self.covariates.p() != p {
            return Err(SomaError::Config(format!(
                "prior has dimension {} and covariate law {}, release has {p} covariates",
                self.prior.dim(),
                self.covariates.p()
            )));
        }
        Ok(())
    }
}

/// Output of a single DAMCMC run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamcmcRecord {
    pub kind: SamplerKind,
    pub seed: u64,
    /// Theta after each iteration.
    pub thetas: Vec<RegressionTheta>,
    /// Imputed records at the end of the run.
    pub data: State,
    pub accept_count: u64,
    pub step_count: u64,
}

impl DamcmcRecord {
    /// Acceptance rate of the imputation updates; `None` when frozen.
    pub fn acceptance_rate(&self) -> Option<f64> {
        (self.step_count > 0).then(|| self.accept_count as f64 / self.step_count as f64)
    }

    /// One coefficient (0 is the intercept) across iterations.
    pub fn beta_trace(&self, k: usize) -> Vec<f64> {
        self.thetas.iter().map(|t| t.beta[k]).collect()
    }
}

fn split_rows(data: &State) -> (Vec<Vec<f64>>, Vec<f64>) {
    let p = data.width() - 1;
    data.components().map(|r| (r[..p].to_vec(), r[p])).unzip()
}

/// Posterior given the records, accumulated in a canonical record order so
/// that equal multisets give bit-identical results.
fn posterior_of(prior: &NigParams, data: &State) -> Result<NigParams> {
    let mut rows: Vec<&[f64]> = data.components().collect();
    rows.sort_by(|a, b| a.iter().zip(*b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    let sorted = State::new(rows.concat(), data.width())?;
    let (x, y) = split_rows(&sorted);
    nig_posterior(prior, &x, &y)
}

fn draw_records<R: Rng>(rng: &mut R, model: &RecordModel<'_>, n: usize) -> Result<State> {
    let w = model.width();
    let mut buf = vec![0.0; n * w];
    for c in buf.chunks_mut(w) {
        model.sample(rng, c);
    }
    State::new(buf, w)
}

/// Theta from the prior and records from the model under that theta.
fn initial_state<R: Rng>(rng: &mut R, config: &DamcmcConfig, n: usize) -> Result<(RegressionTheta, State)> {
    let theta = sample_theta(rng, &config.prior)?;
    let data = draw_records(
        rng,
        &RecordModel {
            covariates: &config.covariates,
            theta: &theta,
        },
        n,
    )?;
    Ok((theta, data))
}

struct Progress {
    accepts: u64,
    steps: u64,
}

/// One DAMCMC iteration: theta given the records, then imputation updates.
fn iterate<R: Rng>(
    rng: &mut R,
    config: &DamcmcConfig,
    summary: &PrivateSummary,
    kernel: &mut Kernel,
    data: &mut State,
    progress: &mut Progress,
) -> Result<RegressionTheta> {
    let theta = sample_theta(rng, &posterior_of(&config.prior, data)?)?;
    let k = config.steps(data.n());
    if k > 0 {
        let target = imputation_target(&theta, summary, &config.covariates)?;
        for _ in 0..k {
            let info = kernel.step(rng, &target, target.proposal(), data)?;
            progress.accepts += info.accepted as u64;
            progress.steps += 1;
        }
    }
    Ok(theta)
}

/// Runs DAMCMC for `config.iters` iterations. With `init = None` the
/// records start from the model under a prior draw of theta.
pub fn damcmc_run(config: &DamcmcConfig, summary: &PrivateSummary, init: Option<&State>, seed: u64) -> Result<DamcmcRecord> {
    config.check(summary)?;
    let mut rng = crate::rng::chain_rng(seed);
    let n = summary.mechanism.n;
    let mut data = match init {
        Some(s) if s.n() == n && s.width() == summary.mechanism.width() => s.clone(),
        Some(_) => return Err(SomaError::Precondition("initial records do not match the release".into())),
        None => initial_state(&mut rng, config, n)?.1,
    };
    let mut kernel = Kernel::new(config.kind);
    let mut progress = Progress { accepts: 0, steps: 0 };
    let mut thetas = Vec::with_capacity(config.iters);
    for _ in 0..config.iters {
        thetas.push(iterate(&mut rng, config, summary, &mut kernel, &mut data, &mut progress)?);
    }
    Ok(DamcmcRecord {
        kind: config.kind,
        seed,
        thetas,
        data,
        accept_count: progress.accepts,
        step_count: progress.steps,
    })
}

/// Settings of a coupled DAMCMC experiment. Times count DAMCMC iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamcmcCoupling {
    pub t_max: usize,
    /// SOMA-imputation iterations run on the second chain before coupling.
    pub burn_in: usize,
    /// Realign the second chain's records onto the first chain's slots
    /// after every imputation update.
    pub align: bool,
}

/// Maximal coupling of `N(m1, v1)` and `N(m2, v2)` by rejection.
pub(crate) fn coupled_normals<R: Rng>(rng: &mut R, m1: f64, v1: f64, m2: f64, v2: f64) -> (f64, f64) {
    let (s1, s2) = (v1.sqrt(), v2.sqrt());
    let z: f64 = StandardNormal.sample(rng);
    let x = m1 + s1 * z;
    let u: f64 = rng.random();
    if u.ln() + normal_log_pdf(x, m1, v1) <= normal_log_pdf(x, m2, v2) {
        return (x, x);
    }
    loop {
        let z: f64 = StandardNormal.sample(rng);
        let y = m2 + s2 * z;
        let u: f64 = rng.random();
        if u.ln() + normal_log_pdf(y, m2, v2) > normal_log_pdf(y, m1, v1) {
            return (x, y);
        }
    }
}

/// One coupled run on streams `2 * replicate` (initial states and warm-up)
/// and `2 * replicate + 1` (coupled kernel) of `seed`.
///
/// Theta draws share their gamma and normal inputs, so the two thetas agree
/// whenever the records do. Imputation offers share the covariates, draw
/// maximally coupled responses, and go through the coupled kernel of
/// `config.kind`. The pair has met once records and theta agree.
pub fn coupled_damcmc_run(
    config: &DamcmcConfig,
    summary: &PrivateSummary,
    coupling: &DamcmcCoupling,
    seed: u64,
    replicate: u64,
) -> Result<CouplingOutcome> {
    config.check(summary)?;
    let n = summary.mechanism.n;
    let k = config.steps(n);
    if k == 0 {
        return Err(SomaError::Config("coupling needs at least one imputation update per iteration".into()));
    }
    let mut warm = replicate_rng(seed, 2 * replicate);
    let (_, data_a) = initial_state(&mut warm, config, n)?;
    let (_, mut data_b) = initial_state(&mut warm, config, n)?;
    let warm_config = DamcmcConfig {
        kind: SamplerKind::Soma,
        ..config.clone()
    };
    let mut kernel = Kernel::new(SamplerKind::Soma);
    let mut progress = Progress { accepts: 0, steps: 0 };
    for _ in 0..coupling.burn_in {
        iterate(&mut warm, &warm_config, summary, &mut kernel, &mut data_b, &mut progress)?;
    }

    let mut rng = replicate_rng(seed, 2 * replicate + 1);
    let mut pair = CoupledPair::new(data_a, data_b);
    let mut distance_trace = vec![pair.distance() as u32];
    let mut meeting_time = None;
    let mut t = 0;
    while t < coupling.t_max {
        let (ta, tb) = coupled_thetas(&mut rng, &config.prior, &pair)?;
        if pair.met() && ta != tb {
            return Err(SomaError::Numerical {
                index: t,
                value: f64::NAN,
            });
        }
        impute_coupled(&mut rng, config, summary, &ta, &tb, &mut pair, k, coupling.align)?;
        t += 1;
        distance_trace.push(pair.distance() as u32);
        if pair.met() && ta == tb {
            meeting_time = Some(t);
            break;
        }
    }
    Ok(CouplingOutcome {
        kind: config.kind,
        meeting_time,
        t_max: coupling.t_max,
        distance_trace,
        w2_trace: None,
    })
}

fn coupled_thetas(rng: &mut ChainRng, prior: &NigParams, pair: &CoupledPair) -> Result<(RegressionTheta, RegressionTheta)> {
    let post_a = posterior_of(prior, &pair.a)?;
    let post_b = posterior_of(prior, &pair.b)?;
    let (g, z) = theta_noise(rng, post_a.a, post_a.dim())?;
    Ok((sample_theta_with(&post_a, g, &z)?, sample_theta_with(&post_b, g, &z)?))
}

fn impute_coupled(
    rng: &mut ChainRng,
    config: &DamcmcConfig,
    summary: &PrivateSummary,
    theta_a: &RegressionTheta,
    theta_b: &RegressionTheta,
    pair: &mut CoupledPair,
    steps: usize,
    align: bool,
) -> Result<()> {
    let target_a = imputation_target(theta_a, summary, &config.covariates)?;
    let target_b = imputation_target(theta_b, summary, &config.covariates)?;
    let sides = Sides {
        target_a: &target_a,
        target_b: &target_b,
        proposal_a: target_a.proposal(),
        proposal_b: target_b.proposal(),
    };
    let p = config.covariates.p();
    let mut y_a = vec![0.0; p + 1];
    let mut y_b = vec![0.0; p + 1];
    for _ in 0..steps {
        config.covariates.sample(rng, &mut y_a[..p]);
        y_b[..p].copy_from_slice(&y_a[..p]);
        let m_a = target_a.proposal().response_mean(&y_a[..p]);
        let m_b = target_b.proposal().response_mean(&y_a[..p]);
        let (ra, rb) = coupled_normals(rng, m_a, theta_a.sigma2, m_b, theta_b.sigma2);
        y_a[p] = ra;
        y_b[p] = rb;
        coupled_step_with_offers(rng, config.kind, &sides, pair, &y_a, &y_b)?;
        if align {
            pair.align();
        }
    }
    Ok(())
}

/// Runs `replicates` coupled runs in parallel; replicate `r` is
/// `coupled_damcmc_run(.., seed, r)`.
pub fn coupled_damcmc_replicates(
    config: &DamcmcConfig,
    summary: &PrivateSummary,
    coupling: &DamcmcCoupling,
    seed: u64,
    replicates: usize,
) -> Result<Vec<CouplingOutcome>> {
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| coupled_damcmc_run(config, summary, coupling, seed, r))
        .collect()
}

/// Writes theta traces as CSV: `iteration, beta_0.., sigma2, replicate, kind`.
pub fn write_theta_csv<W: Write>(out: W, records: &[(usize, &DamcmcRecord)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dim = records.first().map_or(0, |(_, r)| r.thetas.first().map_or(0, |t| t.beta.len()));
    let mut header: Vec<String> = vec!["iteration".into()];
    header.extend((0..dim).map(|k| format!("beta_{k}")));
    header.extend(["sigma2".into(), "replicate".into(), "kind".into()]);
    w.write_record(&header)?;
    for (rep, rec) in records {
        for (it, th) in rec.thetas.iter().enumerate() {
            let mut row = vec![(it + 1).to_string()];
            row.extend(th.beta.iter().map(|b| b.to_string()));
            row.extend([th.sigma2.to_string(), rep.to_string(), rec.kind.label().to_string()]);
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
