//! The `sample`, `couple`, `bounds` and `damcmc` subcommands.

use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use soma::coupling::{estimate_rate, run_coupled_replicates, CoupledRunConfig, CouplingOutcome};
use soma::damcmc::{coupled_damcmc_replicates, damcmc_run, write_theta_csv, DamcmcConfig, DamcmcCoupling, DamcmcRecord};
use soma::rng::replicate_rng;
use soma::samplers::{
    accept_bound_imwg, accept_bound_soma, rate_bound_ran, rate_bound_soma, rate_bound_sys, run_chain_from, ChainRecord,
    SamplerKind,
};
use soma::State;

use crate::config::{check_grid, BuiltTarget, ExperimentConfig, ExperimentKind, TargetSpec, INIT_STREAM};
use crate::error::{CliError, Result};
use crate::io::{num, Clock, Outputs, Summary};

/// What a command wrote and whether any coupled run was censored.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub censored: usize,
    pub allow_censored: bool,
}

impl RunReport {
    /// Success means every coupled run met, or censoring was allowed.
    pub fn success(&self) -> bool {
        self.censored == 0 || self.allow_censored
    }
}

fn require(cfg: &ExperimentConfig, command: &str, allowed: &[ExperimentKind]) -> Result<()> {
    if allowed.contains(&cfg.experiment) {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "the {command} command cannot run a {:?} experiment",
            cfg.experiment
        )))
    }
}

fn target_of(cfg: &ExperimentConfig) -> Result<&TargetSpec> {
    cfg.target.as_ref().ok_or_else(|| CliError::Config("missing `target` block".into()))
}

/// Configured starting state, or a default one from the reserved stream.
fn initial_state(cfg: &ExperimentConfig, spec: &TargetSpec, built: &BuiltTarget) -> Result<State> {
    match &cfg.init {
        Some(v) => Ok(State::scalar(v.clone())?),
        None => spec.initial_state(built, &mut replicate_rng(cfg.seed, INIT_STREAM)),
    }
}

#[derive(Debug, Serialize)]
pub struct ChainSummary {
    pub kind: SamplerKind,
    pub replicate: usize,
    pub iters: usize,
    pub accept_count: u64,
    pub step_count: u64,
    pub acceptance_rate: f64,
    pub dead_offers: u64,
    pub wall_clock_s: f64,
}

#[derive(Debug, Serialize)]
struct SampleBody<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    release: Option<&'a [f64]>,
    init: &'a [f64],
    runs: Vec<ChainSummary>,
}

/// Independent chains per kind and replicate. Replicate `r` runs on stream
/// `r` of the seed for every kind.
pub fn cmd_sample(cfg: &ExperimentConfig) -> Result<RunReport> {
    use ExperimentKind::*;
    require(cfg, "sample", &[Sample, Couple, Synthetic, Histogram])?;
    let clock = Clock::start();
    let spec = target_of(cfg)?;
    let built = spec.build(cfg.seed)?;
    let init = initial_state(cfg, spec, &built)?;

    let jobs: Vec<(SamplerKind, usize)> = cfg
        .samplers
        .iter()
        .flat_map(|&k| (0..cfg.replicates).map(move |r| (k, r)))
        .collect();
    let runs: Vec<(SamplerKind, usize, ChainRecord, f64)> = jobs
        .par_iter()
        .map(|&(kind, r)| {
            let c = Clock::start();
            let mut rng = replicate_rng(cfg.seed, r as u64);
            let rec = run_chain_from(kind, built.target.as_ref(), built.proposal.as_ref(), &init, cfg.iters, cfg.thin, &mut rng)?;
            Ok((kind, r, rec, c.seconds()))
        })
        .collect::<Result<_>>()?;

    let mut out = Outputs::new(&cfg.out)?;
    let mut header = vec!["kind".to_string(), "replicate".into(), "iteration".into()];
    let w = init.width();
    for j in 0..init.n() {
        if w == 1 {
            header.push(format!("x{j}"));
        } else {
            header.extend((0..w).map(|k| format!("x{j}_{k}")));
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("trace.csv", &header, |w| {
        for (kind, r, rec, _) in &runs {
            for (it, s) in rec.trace_iterations().zip(&rec.trace) {
                let mut row = vec![kind.label().to_string(), r.to_string(), it.to_string()];
                row.extend(s.as_slice().iter().map(|&v| num(v)));
                w.write_record(&row)?;
            }
        }
        Ok(())
    })?;
    let body = SampleBody {
        release: built.release.as_deref(),
        init: init.as_slice(),
        runs: runs
            .iter()
            .map(|(kind, r, rec, secs)| ChainSummary {
                kind: *kind,
                replicate: *r,
                iters: cfg.iters,
                accept_count: rec.accept_count,
                step_count: rec.step_count,
                acceptance_rate: rec.acceptance_rate(),
                dead_offers: rec.dead_offers,
                wall_clock_s: *secs,
            })
            .collect(),
    };
    out.json(
        "summary.json",
        &Summary {
            schema_version: crate::config::SCHEMA_VERSION,
            command: "sample",
            seed: cfg.seed,
            config: cfg,
            wall_clock_s: clock.seconds(),
            body,
        },
    )?;
    Ok(RunReport {
        files: out.commit()?,
        censored: 0,
        allow_censored: cfg.allow_censored,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    pub kind: SamplerKind,
    pub r_hat: Option<f64>,
    pub n_replicates: usize,
    pub censored_count: usize,
    pub mean_tau: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub wall_clock_s: f64,
}

/// Rate fit for one kind; a failed fit leaves `r_hat` empty with the reason.
pub fn rate_row(kind: SamplerKind, outcomes: &[CouplingOutcome], t_max: usize, secs: f64) -> RateRow {
    let taus: Vec<Option<usize>> = outcomes.iter().map(|o| o.meeting_time).collect();
    let mean_tau = outcomes.iter().map(|o| o.tau_or_t_max() as f64).sum::<f64>() / outcomes.len().max(1) as f64;
    let censored_count = taus.iter().filter(|t| t.is_none()).count();
    match estimate_rate(&taus, t_max) {
        Ok(est) => RateRow {
            kind,
            r_hat: Some(est.r_hat),
            n_replicates: est.n_replicates,
            censored_count: est.censored_count,
            mean_tau,
            note: None,
            wall_clock_s: secs,
        },
        Err(e) => RateRow {
            kind,
            r_hat: None,
            n_replicates: taus.len(),
            censored_count,
            mean_tau,
            note: Some(e.to_string()),
            wall_clock_s: secs,
        },
    }
}

pub const MEETING_HEADER: [&str; 4] = ["replicate", "kind", "tau", "censored"];

pub fn meeting_row(replicate: usize, o: &CouplingOutcome) -> [String; 4] {
    [
        replicate.to_string(),
        o.kind.label().to_string(),
        o.tau_or_t_max().to_string(),
        o.censored().to_string(),
    ]
}

#[derive(Debug, Serialize)]
struct CoupleBody<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    release: Option<&'a [f64]>,
    init: &'a [f64],
    rates: Vec<RateRow>,
}

/// Coupled replicates per kind. Replicate `r` warms the second chain on
/// stream `2r` and couples on stream `2r + 1`, shared across kinds.
pub fn cmd_couple(cfg: &ExperimentConfig) -> Result<RunReport> {
    use ExperimentKind::*;
    require(cfg, "couple", &[Couple, Sample, Synthetic, Histogram])?;
    let clock = Clock::start();
    let spec = target_of(cfg)?;
    let built = spec.build(cfg.seed)?;
    let init = initial_state(cfg, spec, &built)?;
    let cc = CoupledRunConfig {
        t_max: cfg.coupling.t_max,
        burn_in: cfg.coupling.burn_in,
        record_distance: false,
        record_w2: cfg.coupling.record_w2,
        align: cfg.coupling.align,
    };
    let mut all = Vec::new();
    let mut rates = Vec::new();
    for &kind in &cfg.samplers {
        let c = Clock::start();
        let outcomes = run_coupled_replicates(
            kind,
            built.target.as_ref(),
            built.proposal.as_ref(),
            &init,
            &cc,
            cfg.seed,
            cfg.replicates,
        )?;
        rates.push(rate_row(kind, &outcomes, cc.t_max, c.seconds()));
        all.push(outcomes);
    }

    let mut out = Outputs::new(&cfg.out)?;
    out.csv("meetings.csv", &MEETING_HEADER, |w| {
        for outcomes in &all {
            for (r, o) in outcomes.iter().enumerate() {
                w.write_record(meeting_row(r, o))?;
            }
        }
        Ok(())
    })?;
    if cc.record_w2 {
        out.csv("w2.csv", &["kind", "replicate", "iteration", "w2"], |w| {
            for outcomes in &all {
                for (r, o) in outcomes.iter().enumerate() {
                    for t in (0..=cc.t_max).step_by(cfg.thin) {
                        if let Some(v) = o.w2_at(t) {
                            w.write_record([o.kind.label().to_string(), r.to_string(), t.to_string(), num(v)])?;
                        }
                    }
                }
            }
            Ok(())
        })?;
    }
    let censored = rates.iter().map(|r| r.censored_count).sum();
    out.json(
        "rates.json",
        &Summary {
            schema_version: crate::config::SCHEMA_VERSION,
            command: "couple",
            seed: cfg.seed,
            config: cfg,
            wall_clock_s: clock.seconds(),
            body: CoupleBody {
                release: built.release.as_deref(),
                init: init.as_slice(),
                rates,
            },
        },
    )?;
    Ok(RunReport {
        files: out.commit()?,
        censored,
        allow_censored: cfg.allow_censored,
    })
}

pub const BOUNDS_HEADER: [&str; 7] = ["n", "M", "accept_soma", "accept_imwg", "rate_soma", "rate_ran", "rate_sys"];

/// One row of the bounds table. Rate bounds are two-component results and
/// are left empty for other `n`.
pub fn bounds_row(n: usize, m: f64) -> Result<[String; 7]> {
    let rate = |f: fn(f64) -> soma::Result<f64>| -> Result<String> {
        Ok(if n == 2 { num(f(m)?) } else { String::new() })
    };
    Ok([
        n.to_string(),
        num(m),
        num(accept_bound_soma(n, m)?),
        num(accept_bound_imwg(m)?),
        rate(rate_bound_soma)?,
        rate(rate_bound_ran)?,
        rate(rate_bound_sys)?,
    ])
}

pub fn cmd_bounds(n: &[usize], m: &[f64], dir: &Path) -> Result<RunReport> {
    check_grid(n, m)?;
    let mut rows = Vec::with_capacity(n.len() * m.len());
    for &ni in n {
        for &mi in m {
            rows.push(bounds_row(ni, mi)?);
        }
    }
    let mut out = Outputs::new(dir)?;
    out.csv("bounds.csv", &BOUNDS_HEADER, |w| {
        for row in &rows {
            w.write_record(row)?;
        }
        Ok(())
    })?;
    Ok(RunReport {
        files: out.commit()?,
        ..Default::default()
    })
}

#[derive(Debug, Serialize)]
struct DamcmcRunSummary {
    kind: SamplerKind,
    replicate: usize,
    chain_seed: u64,
    acceptance_rate: Option<f64>,
    wall_clock_s: f64,
}

#[derive(Debug, Serialize)]
struct DamcmcBody<'a> {
    s_dp: &'a [f64],
    runs: Vec<DamcmcRunSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rates: Option<Vec<RateRow>>,
}

/// Seed of replicate chain `r`, derived so that different master seeds
/// never share chains.
pub fn chain_seed(seed: u64, r: usize) -> u64 {
    replicate_rng(seed, r as u64).random()
}

pub fn cmd_damcmc(cfg: &ExperimentConfig) -> Result<RunReport> {
    require(cfg, "damcmc", &[ExperimentKind::Linreg])?;
    let clock = Clock::start();
    let spec = cfg.linreg.as_ref().ok_or_else(|| CliError::Config("missing `linreg` block".into()))?;
    let setup = spec.setup(cfg.seed)?;
    let config_for = |kind| DamcmcConfig {
        kind,
        prior: setup.prior.clone(),
        covariates: setup.covariates.clone(),
        iters: cfg.iters,
        imputation_steps: spec.imputation_steps,
    };
    let jobs: Vec<(SamplerKind, usize)> = cfg
        .samplers
        .iter()
        .flat_map(|&k| (0..cfg.replicates).map(move |r| (k, r)))
        .collect();
    let runs: Vec<(usize, DamcmcRecord, f64)> = jobs
        .par_iter()
        .map(|&(kind, r)| {
            let c = Clock::start();
            let rec = damcmc_run(&config_for(kind), &setup.summary, None, chain_seed(cfg.seed, r))?;
            Ok((r, rec, c.seconds()))
        })
        .collect::<Result<_>>()?;

    let mut censored = 0;
    let mut coupled = Vec::new();
    let rates = if spec.couple {
        let coupling = DamcmcCoupling {
            t_max: cfg.coupling.t_max,
            burn_in: cfg.coupling.burn_in,
            align: cfg.coupling.align,
        };
        let mut rates = Vec::new();
        for &kind in &cfg.samplers {
            let c = Clock::start();
            let outcomes = coupled_damcmc_replicates(&config_for(kind), &setup.summary, &coupling, cfg.seed, cfg.replicates)?;
            let row = rate_row(kind, &outcomes, coupling.t_max, c.seconds());
            censored += row.censored_count;
            rates.push(row);
            coupled.push(outcomes);
        }
        Some(rates)
    } else {
        None
    };

    let mut out = Outputs::new(&cfg.out)?;
    let refs: Vec<(usize, &DamcmcRecord)> = runs.iter().map(|(r, rec, _)| (*r, rec)).collect();
    out.raw("theta.csv", |w| Ok(write_theta_csv(w, &refs)?))?;
    if spec.couple {
        out.csv("meetings.csv", &MEETING_HEADER, |w| {
            for outcomes in &coupled {
                for (r, o) in outcomes.iter().enumerate() {
                    w.write_record(meeting_row(r, o))?;
                }
            }
            Ok(())
        })?;
    }
    let body = DamcmcBody {
        s_dp: &setup.summary.s_dp,
        runs: runs
            .iter()
            .map(|(r, rec, secs)| DamcmcRunSummary {
                kind: rec.kind,
                replicate: *r,
                chain_seed: rec.seed,
                acceptance_rate: rec.acceptance_rate(),
                wall_clock_s: *secs,
            })
            .collect(),
        rates,
    };
    out.json(
        "summary.json",
        &Summary {
            schema_version: crate::config::SCHEMA_VERSION,
            command: "damcmc",
            seed: cfg.seed,
            config: cfg,
            wall_clock_s: clock.seconds(),
            body,
        },
    )?;
    Ok(RunReport {
        files: out.commit()?,
        censored,
        allow_censored: cfg.allow_censored,
    })
}
