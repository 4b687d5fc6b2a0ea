//! Named experiment recipes at desk scale.
//!
//! Each recipe has a parameter struct whose fields are the only keys
//! `--set key=value` may change. Defaults shrink replicate counts and run
//! lengths (see [`RECIPES`] for the full-scale settings they stand in for)
//! so that every recipe finishes within about two minutes on a single core.
//! Outputs land in `<out>/<id>/` together with a `summary.json` that
//! records the resolved parameters.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use soma::coupling::{run_coupled_replicates, CoupledRunConfig, CouplingOutcome};
use soma::damcmc::{coupled_damcmc_replicates, damcmc_run, DamcmcConfig, DamcmcCoupling, DamcmcRecord};
use soma::diagnostics::{ess, mmd_rbf, quantile_sorted, quantile_trace, split_rhat, write_tidy_csv, TidyRow};
use soma::rng::replicate_rng;
use soma::samplers::{accept_bound_imwg, accept_bound_soma, run_chain, run_chain_from, SamplerKind};
use soma::targets::{
    beta_laplace_target, exp_laplace_target, perturbed_histogram_target, privatize_histogram, uniform_edges, LaplaceMean,
    PerturbedHistogram, Target, UniformProposal,
};
use soma::State;

use crate::commands::{chain_seed, meeting_row, rate_row, RateRow, RunReport, MEETING_HEADER};
use crate::config::{open_unit, LinregSetup, LinregSpec, Release, DATA_STREAM, INIT_STREAM};
use crate::error::{CliError, Result};
use crate::io::{num, Clock, Outputs, Summary};

pub struct RecipeInfo {
    pub id: &'static str,
    pub about: &'static str,
    /// Full-scale settings the defaults are reduced from.
    pub full_scale: &'static str,
    /// Acceptance criterion (numbered as in the core acceptance suite) the
    /// recipe's data relates to.
    pub feeds: &'static str,
}

pub const RECIPES: &[RecipeInfo] = &[
    RecipeInfo {
        id: "fig2",
        about: "two-component beta-Laplace traces from (0.3, 0.3), eps = 20",
        full_scale: "500 iterations (unchanged)",
        feeds: "4 (visual check of the acceptance gap)",
    },
    RecipeInfo {
        id: "fig3A",
        about: "acceptance rate over an eps grid, Beta(10, 10) prior",
        full_scale: "longer chains and more replicates",
        feeds: "4",
    },
    RecipeInfo {
        id: "fig3B",
        about: "acceptance rate over an eps grid, Exp(1) prior (no ratio bound)",
        full_scale: "longer chains and more replicates",
        feeds: "3 (dominance without a bound)",
    },
    RecipeInfo {
        id: "fig4A",
        about: "coupling rate against posterior correlation, Beta(10, 10) prior",
        full_scale: "100 coupled replicates per point",
        feeds: "6",
    },
    RecipeInfo {
        id: "fig4B",
        about: "coupling rate against posterior correlation, Exp(1) prior",
        full_scale: "100 coupled replicates per point",
        feeds: "6",
    },
    RecipeInfo {
        id: "fig5A",
        about: "quartile traces of histogram imputations, n = 20",
        full_scale: "100 replicates",
        feeds: "8",
    },
    RecipeInfo {
        id: "fig5B",
        about: "quartile traces of histogram imputations, n = 50",
        full_scale: "100 replicates",
        feeds: "8",
    },
    RecipeInfo {
        id: "fig6A",
        about: "histogram acceptance rate against n",
        full_scale: "n = 2..60, 50 000 iterations, 100 replicates",
        feeds: "8",
    },
    RecipeInfo {
        id: "fig6B",
        about: "histogram meeting times against n (relabeling coupling)",
        full_scale: "n = 2..60, 100 replicates",
        feeds: "8",
    },
    RecipeInfo {
        id: "fig7A",
        about: "W2 between coupled histogram chains, n = 10",
        full_scale: "100 replicates",
        feeds: "9",
    },
    RecipeInfo {
        id: "fig7B",
        about: "W2 between coupled histogram chains, n = 20",
        full_scale: "100 replicates",
        feeds: "9",
    },
    RecipeInfo {
        id: "table1",
        about: "linreg coupling time, rate and acceptance at n = 10, eps in {3, 30}",
        full_scale: "100 coupled replicates",
        feeds: "10",
    },
    RecipeInfo {
        id: "fig8",
        about: "intercept quantiles across independent linreg chains, n = 100, eps = 30",
        full_scale: "1000 chains of 300 iterations",
        feeds: "11",
    },
    RecipeInfo {
        id: "fig9",
        about: "split-R-hat and ESS of the intercept across iterations, n = 100, eps = 30",
        full_scale: "more chains, 2000+ iterations",
        feeds: "11",
    },
    RecipeInfo {
        id: "fig10",
        about: "log survival of two-component coupling times, eps = 20",
        full_scale: "100 coupled replicates (unchanged)",
        feeds: "6",
    },
    RecipeInfo {
        id: "fig11",
        about: "MMD between independent linreg chains and a reference posterior sample",
        full_scale: "1000 chains",
        feeds: "11",
    },
];

pub fn valid_ids() -> String {
    RECIPES.iter().map(|r| r.id).collect::<Vec<_>>().join(", ")
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(CliError::Config(format!("override `{s}` is not of the form key=value"))),
    }
}

/// Applies overrides to a recipe's defaults. Values are read as JSON and
/// fall back to plain strings.
pub fn resolve<P>(recipe: &str, overrides: &[(String, String)]) -> Result<P>
where
    P: Default + Serialize + DeserializeOwned,
{
    resolve_with(recipe, overrides, P::default())
}

/// Runs recipe `id`. A global seed, when given, overrides the recipe's.
pub fn run_experiment(id: &str, overrides: &[(String, String)], seed: Option<u64>, out: &Path) -> Result<RunReport> {
    let mut ov = overrides.to_vec();
    if let Some(s) = seed {
        ov.push(("seed".into(), s.to_string()));
    }
    let dir = out.join(id);
    let ctx = Ctx { id, dir: &dir };
    match id {
        "fig2" => fig2(ctx, resolve(id, &ov)?),
        "fig3A" => acceptance_vs_eps(ctx, resolve::<EpsAcceptance>(id, &ov)?, Prior::Beta),
        "fig3B" => acceptance_vs_eps(ctx, resolve::<EpsAcceptance>(id, &ov)?, Prior::Exp),
        "fig4A" => rate_vs_correlation(ctx, resolve::<RateParams>(id, &ov)?, Prior::Beta),
        "fig4B" => rate_vs_correlation(ctx, resolve::<RateParams>(id, &ov)?, Prior::Exp),
        "fig5A" => histogram_quantiles(ctx, resolve_with(id, &ov, QuantileParams::with_n(20))?),
        "fig5B" => histogram_quantiles(ctx, resolve_with(id, &ov, QuantileParams::with_n(50))?),
        "fig6A" => histogram_acceptance(ctx, resolve(id, &ov)?),
        "fig6B" => histogram_meetings(ctx, resolve(id, &ov)?),
        "fig7A" => histogram_w2(ctx, resolve_with(id, &ov, W2Params::with_n(10))?),
        "fig7B" => histogram_w2(ctx, resolve_with(id, &ov, W2Params::with_n(20))?),
        "table1" => table1(ctx, resolve(id, &ov)?),
        "fig8" => ridge(ctx, resolve(id, &ov)?),
        "fig9" => mixing(ctx, resolve(id, &ov)?),
        "fig10" => survival(ctx, resolve(id, &ov)?),
        "fig11" => mmd_trace(ctx, resolve(id, &ov)?),
        _ => Err(CliError::UnknownRecipe {
            id: id.to_string(),
            valid: valid_ids(),
        }),
    }
}

/// As [`resolve`], starting from explicit defaults.
fn resolve_with<P>(recipe: &str, overrides: &[(String, String)], defaults: P) -> Result<P>
where
    P: Serialize + DeserializeOwned,
{
    let mut value = serde_json::to_value(defaults)?;
    let map = value
        .as_object_mut()
        .ok_or_else(|| CliError::Config(format!("{recipe} has no parameters")))?;
    for (key, raw) in overrides {
        if !map.contains_key(key) {
            let allowed: Vec<&str> = map.keys().map(String::as_str).collect();
            return Err(CliError::Override {
                recipe: recipe.to_string(),
                key: key.clone(),
                allowed: allowed.join(", "),
            });
        }
        let v = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
        map.insert(key.clone(), v);
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("{recipe}: {e}")))
}

struct Ctx<'a> {
    id: &'a str,
    dir: &'a Path,
}

#[derive(Serialize)]
struct RecipeConfig<'a, P: Serialize> {
    recipe: &'a str,
    params: &'a P,
}

fn finish<P: Serialize, B: Serialize>(
    ctx: &Ctx<'_>,
    mut out: Outputs,
    params: &P,
    seed: u64,
    clock: &Clock,
    body: B,
    (censored, allow_censored): (usize, bool),
) -> Result<RunReport> {
    out.json(
        "summary.json",
        &Summary {
            schema_version: crate::config::SCHEMA_VERSION,
            command: "experiment",
            seed,
            config: &RecipeConfig { recipe: ctx.id, params },
            wall_clock_s: clock.seconds(),
            body,
        },
    )?;
    Ok(RunReport {
        files: out.commit()?,
        censored,
        allow_censored,
    })
}

#[derive(Debug, Clone, Copy)]
enum Prior {
    Beta,
    Exp,
}

fn laplace(prior: Prior, eps: f64, y_obs: f64, n: usize) -> Result<LaplaceMean> {
    Ok(match prior {
        Prior::Beta => beta_laplace_target(10.0, 10.0, eps, y_obs, n)?,
        Prior::Exp => exp_laplace_target(eps, y_obs, n)?,
    })
}

// ---------------------------------------------------------------- synthetic

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceParams {
    pub seed: u64,
    pub eps: f64,
    pub y_obs: f64,
    pub init: Vec<f64>,
    pub iters: usize,
}

impl Default for TraceParams {
    fn default() -> Self {
        TraceParams {
            seed: 1,
            eps: 20.0,
            y_obs: 0.5,
            init: vec![0.3, 0.3],
            iters: 500,
        }
    }
}

#[derive(Serialize)]
struct KindAcceptance {
    kind: SamplerKind,
    acceptance_rate: f64,
}

fn fig2(ctx: Ctx<'_>, p: TraceParams) -> Result<RunReport> {
    let clock = Clock::start();
    let t = laplace(Prior::Beta, p.eps, p.y_obs, p.init.len())?;
    let q = t.prior_proposal();
    let init = State::scalar(p.init.clone())?;
    let runs = SamplerKind::ALL
        .par_iter()
        .map(|&k| Ok(run_chain(k, &t, q.as_ref(), &init, p.iters, p.seed, 1)?))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Outputs::new(ctx.dir)?;
    let mut header = vec!["kind".to_string(), "iteration".into()];
    header.extend((0..init.n()).map(|j| format!("x{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("trace.csv", &header, |w| {
        for rec in &runs {
            let mut row = vec![rec.kind.label().to_string(), "0".into()];
            row.extend(init.as_slice().iter().map(|&v| num(v)));
            w.write_record(&row)?;
            for (it, s) in rec.trace_iterations().zip(&rec.trace) {
                let mut row = vec![rec.kind.label().to_string(), it.to_string()];
                row.extend(s.as_slice().iter().map(|&v| num(v)));
                w.write_record(&row)?;
            }
        }
        Ok(())
    })?;
    let body: Vec<KindAcceptance> = runs
        .iter()
        .map(|r| KindAcceptance {
            kind: r.kind,
            acceptance_rate: r.acceptance_rate(),
        })
        .collect();
    finish(&ctx, out, &p, p.seed, &clock, serde_json::json!({ "acceptance": body }), (0, true))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsAcceptance {
    pub seed: u64,
    pub n: usize,
    pub y_obs: f64,
    pub eps: Vec<f64>,
    pub iters: usize,
    pub replicates: usize,
}

impl Default for EpsAcceptance {
    fn default() -> Self {
        EpsAcceptance {
            seed: 3,
            n: 2,
            y_obs: 0.5,
            eps: vec![0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 20.0],
            iters: 20_000,
            replicates: 5,
        }
    }
}

fn acceptance_vs_eps(ctx: Ctx<'_>, p: EpsAcceptance, prior: Prior) -> Result<RunReport> {
    let clock = Clock::start();
    let mut jobs = Vec::new();
    for &eps in &p.eps {
        for kind in SamplerKind::ALL {
            for r in 0..p.replicates {
                jobs.push((eps, kind, r));
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(eps, kind, r)| {
            let t = laplace(prior, eps, p.y_obs, p.n)?;
            let q = t.prior_proposal();
            let init = State::scalar(vec![0.5; p.n])?;
            let rec = run_chain(kind, &t, q.as_ref(), &init, p.iters, chain_seed(p.seed, r), p.iters)?;
            let bound = match t.ratio_bound() {
                Some(m) if kind == SamplerKind::Soma => Some(accept_bound_soma(p.n, m)?),
                Some(m) => Some(accept_bound_imwg(m)?),
                None => None,
            };
            Ok((eps, kind, r, rec.acceptance_rate(), bound))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Outputs::new(ctx.dir)?;
    out.csv("acceptance.csv", &["eps", "kind", "replicate", "acceptance", "bound"], |w| {
        for (eps, kind, r, a, b) in &rows {
            w.write_record([num(*eps), kind.label().into(), r.to_string(), num(*a), b.map(num).unwrap_or_default()])?;
        }
        Ok(())
    })?;
    finish(&ctx, out, &p, p.seed, &clock, serde_json::json!({}), (0, true))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateParams {
    pub seed: u64,
    pub y_obs: f64,
    pub eps: Vec<f64>,
    pub replicates: usize,
    pub t_max: usize,
    pub burn_in: usize,
    /// Length of the SOMA chain used to estimate the posterior correlation.
    pub rho_iters: usize,
    pub allow_censored: bool,
}

impl Default for RateParams {
    fn default() -> Self {
        RateParams {
            seed: 4,
            y_obs: 0.5,
            eps: vec![0.5, 1.0, 2.0, 5.0, 10.0, 20.0],
            replicates: 50,
            t_max: 20_000,
            burn_in: 5_000,
            rho_iters: 50_000,
            allow_censored: false,
        }
    }
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

fn rate_vs_correlation(ctx: Ctx<'_>, p: RateParams, prior: Prior) -> Result<RunReport> {
    let clock = Clock::start();
    let cc = CoupledRunConfig {
        t_max: p.t_max,
        burn_in: p.burn_in,
        record_distance: false,
        record_w2: false,
        align: false,
    };
    let mut points = Vec::new();
    for &eps in &p.eps {
        let t = laplace(prior, eps, p.y_obs, 2)?;
        let q = t.prior_proposal();
        let init = State::scalar(vec![0.5, 0.5])?;
        let long = run_chain(SamplerKind::Soma, &t, q.as_ref(), &init, p.rho_iters, p.seed, 1)?;
        let keep = &long.trace[long.trace.len() / 10..];
        let x0: Vec<f64> = keep.iter().map(|s| s.as_slice()[0]).collect();
        let x1: Vec<f64> = keep.iter().map(|s| s.as_slice()[1]).collect();
        let rho = correlation(&x0, &x1);
        for kind in SamplerKind::ALL {
            let c = Clock::start();
            let outcomes = run_coupled_replicates(kind, &t, q.as_ref(), &init, &cc, p.seed, p.replicates)?;
            let rate = rate_row(kind, &outcomes, p.t_max, c.seconds());
            points.push((eps, rho, rate, outcomes));
        }
    }
    let mut out = Outputs::new(ctx.dir)?;
    out.csv("rates.csv", &["eps", "rho", "kind", "r_hat", "mean_tau", "censored_count"], |w| {
        for (eps, rho, r, _) in &points {
            w.write_record(rate_record(&[num(*eps), num(*rho)], r))?;
        }
        Ok(())
    })?;
    out.csv("meetings.csv", &prefixed(&["eps"], &MEETING_HEADER), |w| {
        for (eps, _, _, outcomes) in &points {
            write_meetings(w, &[num(*eps)], outcomes)?;
        }
        Ok(())
    })?;
    let censored = points.iter().map(|(_, _, r, _)| r.censored_count).sum();
    finish(&ctx, out, &p, p.seed, &clock, serde_json::json!({}), (censored, p.allow_censored))
}

fn rate_record(prefix: &[String], r: &RateRow) -> Vec<String> {
    let mut row = prefix.to_vec();
    row.extend([
        r.kind.label().to_string(),
        r.r_hat.map(num).unwrap_or_default(),
        num(r.mean_tau),
        r.censored_count.to_string(),
    ]);
    row
}

fn prefixed<'a>(prefix: &[&'a str], rest: &[&'a str]) -> Vec<&'a str> {
    prefix.iter().chain(rest).copied().collect()
}

fn write_meetings<W: std::io::Write>(w: &mut csv::Writer<W>, prefix: &[String], outcomes: &[CouplingOutcome]) -> Result<()> {
    for (r, o) in outcomes.iter().enumerate() {
        let mut row = prefix.to_vec();
        row.extend(meeting_row(r, o));
        w.write_record(&row)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurvivalParams {
    pub seed: u64,
    pub eps: f64,
    pub y_obs: f64,
    pub replicates: usize,
    pub t_max: usize,
    pub burn_in: usize,
    pub allow_censored: bool,
}

impl Default for SurvivalParams {
    fn default() -> Self {
        SurvivalParams {
            seed: 12,
            eps: 20.0,
            y_obs: 0.5,
            replicates: 100,
            t_max: 20_000,
            burn_in: 5_000,
            allow_censored: false,
        }
    }
}

fn survival(ctx: Ctx<'_>, p: SurvivalParams) -> Result<RunReport> {
    let clock = Clock::start();
    let t = laplace(Prior::Beta, p.eps, p.y_obs, 2)?;
    let q = t.prior_proposal();
    let init = State::scalar(vec![0.5, 0.5])?;
    let cc = CoupledRunConfig {
        t_max: p.t_max,
        burn_in: p.burn_in,
        record_distance: false,
        record_w2: false,
        align: false,
    };
    let mut results = Vec::new();
    for kind in SamplerKind::ALL {
        let c = Clock::start();
        let outcomes = run_coupled_replicates(kind, &t, q.as_ref(), &init, &cc, p.seed, p.replicates)?;
        results.push((rate_row(kind, &outcomes, p.t_max, c.seconds()), outcomes));
    }
    let mut out = Outputs::new(ctx.dir)?;
    out.csv("survival.csv", &["kind", "t", "log_survival"], |w| {
        for (_, outcomes) in &results {
            let n = outcomes.len() as f64;
            let mut taus: Vec<usize> = outcomes.iter().map(|o| o.tau_or_t_max()).collect();
            taus.sort_unstable();
            let last = taus.last().copied().unwrap_or(0);
            let mut k = 0;
            for step in 0..last.min(p.t_max) {
                while k < taus.len() && taus[k] <= step {
                    k += 1;
                }
                let s = (taus.len() - k) as f64 / n;
                if s > 0.0 {
                    w.write_record([outcomes[0].kind.label().to_string(), step.to_string(), num(s.ln())])?;
                }
            }
        }
        Ok(())
    })?;
    out.csv("meetings.csv", &MEETING_HEADER, |w| {
        for (_, outcomes) in &results {
            write_meetings(w, &[], outcomes)?;
        }
        Ok(())
    })?;
    let rates: Vec<&RateRow> = results.iter().map(|(r, _)| r).collect();
    let censored = rates.iter().map(|r| r.censored_count).sum();
    finish(&ctx, out, &p, p.seed, &clock, serde_json::json!({ "rates": rates }), (censored, p.allow_censored))
}

// ---------------------------------------------------------------- histogram

/// The released histogram and a uniform draw of `n` points from `rng`.
fn histogram(n: usize, eps: f64, bins: usize, seed: u64) -> Result<PerturbedHistogram> {
    let edges = uniform_edges(bins);
    let mut rng = replicate_rng(seed, DATA_STREAM);
    let data: Vec<f64> = (0..n).map(|_| open_unit(&mut rng)).collect();
    let noisy = privatize_histogram(&data, &edges, eps, &mut rng)?;
    Ok(perturbed_histogram_target(&edges, &noisy, eps, n)?)
}

fn uniform_state<R: Rng>(rng: &mut R, n: usize) -> Result<State> {
    Ok(State::scalar((0..n).map(|_| open_unit(rng)).collect())?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantileParams {
    pub seed: u64,
    pub n: usize,
    pub eps: f64,
    pub bins: usize,
    pub iters: usize,
    pub thin: usize,
    pub replicates: usize,
}

impl QuantileParams {
    fn with_n(n: usize) -> Self {
        QuantileParams {
            seed: 5,
            n,
            eps: 5.0,
            bins: 10,
            iters: 10_000,
            thin: 50,
            replicates: 20,
        }
    }
}

fn histogram_quantiles(ctx: Ctx<'_>, p: QuantileParams) -> Result<RunReport> {
    let clock = Clock::start();
    let t = histogram(p.n, p.eps, p.bins, p.seed)?;
    let jobs: Vec<(SamplerKind, usize)> = SamplerKind::ALL
        .iter()
        .flat_map(|&k| (0..p.replicates).map(move |r| (k, r)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(kind, r)| {
            let mut rng = replicate_rng(p.seed, r as u64);
            let init = uniform_state(&mut rng, p.n)?;
            let rec = run_chain_from(kind, &t, &UniformProposal, &init, p.iters, p.thin, &mut rng)?;
            let qs = quantile_trace(&rec, &[0.25, 0.5, 0.75])?;
            Ok((kind, r, rec.trace_iterations().collect::<Vec<_>>(), qs))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Outputs::new(ctx.dir)?;
    out.csv("quantiles.csv", &["kind", "replicate", "iteration", "q25", "q50", "q75"], |w| {
        for (kind, r, its, qs) in &rows {
            for (k, it) in its.iter().enumerate() {
                w.write_record([
                    kind.label().to_string(),
                    r.to_string(),
                    it.to_string(),
                    num(qs[0][k]),
                    num(qs[1][k]),
                    num(qs[2][k]),
                ])?;
            }
        }
        Ok(())
    })?;
    let release = t.noisy_counts().to_vec();
    finish(&ctx, out, &p, p.seed, &clock, serde_json::json!({ "release": release }), (0, true))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistAcceptance {
    pub seed: u64,
    pub n: Vec<usize>,
    pub eps: f64,
    pub bins: usize,
    pub iters: usize,
    pub replicates: usize,
}

impl Default for HistAcceptance {
    fn default() -> Self {
        HistAcceptance {
            seed: 6,
            n: vec![2, 5, 10, 20, 40, 60],
            eps: 5.0,
            bins: 10,
            iters: 10_000,
            replicates: 5,
        }
    }
}

fn histogram_acceptance(ctx: Ctx<'_>, p: HistAcceptance) -> Result<RunReport> {
    let clock = Clock::start();
    let mut jobs = Vec::new();
    for &n in &p.n {
        for kind in SamplerKind::ALL {
            for r in 0..p.replicates {
                jobs.push((n, kind, r));
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(n, kind, r)| {
            let t = histogram(n, p.eps, p.bins, p.seed)?;
            let mut rng = replicate_rng(p.seed, r as u64);
            let init = uniform_state(&mut rng, n)?;
            let rec = run_chain_from(kind, &t, &UniformProposal, &init, p.iters, p.iters, &mut rng)?;
            Ok((n, kind, r, rec.acceptance_rate()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Outputs::new(ctx.dir)?;
    out.csv("acceptance.csv", &["n", "kind", "replicate", "acceptance"], |w| {
        for (n, kind, r, a) in &rows {
            w.write_record([n.to_string(), kind.label().into(), r.to_string(), num(*a)])?;
        }
        Ok(())
    })?;
    finish(&ctx, out, &p, p.seed, &clock, serde_json::json!({}), (0, true))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistMeetings {
    pub seed: u64,
    pub n: Vec<usize>,
    pub eps: f64,
    pub bins: usize,
    pub replicates: usize,
    pub t_max: usize,
    pub burn_in: usize,
    /// Relabel the second chain onto matching slots after every step.
    pub align: bool,
    pub allow_censored: bool,
}

impl Default for HistMeetings {
    fn default() -> Self {
        HistMeetings {
            seed: 6,
            n: vec![2, 5, 10, 20],
            eps: 5.0,
            bins: 10,
            replicates: 20,
            t_max: 20_000,
            burn_in: 1_000,
            align: true,
            // The baselines routinely outlast the desk-scale horizon at n = 20.
            allow_censored: true,
        }
    }
}

fn histogram_meetings(ctx: Ctx<'_>, p: HistMeetings) -> Result<RunReport> {
    let clock = Clock::start();
    let cc = CoupledRunConfig {
        t_max: p.t_max,
        burn_in: p.burn_in,
        record_distance: false,
        record_w2: false,
        align: p.align,
    };
    let mut points = Vec::new();
    for &n in &p.n {
        let t = histogram(n, p.eps, p.bins, p.seed)?;
        let init = uniform_state(&mut replicate_rng(p.seed, INIT_STREAM), n)?;
        for kind in SamplerKind::ALL {
            let c = Clock::start();
            let outcomes = run_coupled_replicates(kind, &t, &UniformProposal, &init, &cc, p.seed, p.replicates)?;
            points.push((n, rate_row(kind, &outcomes, p.t_max, c.seconds()), outcomes));
        }
    }
    let mut out = Outputs::new(ctx.dir)?;
    out.csv("meetings.csv", &prefixed(&["n"], &MEETING_HEADER), |w| {
        for (n, _, outcomes) in &points {
            write_meetings(w, &[n.to_string()], outcomes)?;
        }
        Ok(())
    })?;
    out.csv("rates.csv", &["n", "kind", "r_hat", "mean_tau", "censored_count"], |w| {
        for (n, r, _) in &points {
            w.write_record(rate_record(&[n.to_string()], r))?;
        }
        Ok(())
    })?;
    let censored = points.iter().map(|(_, r, _)| r.censored_count).sum();
    finish(&ctx, out, &p, p.seed, &clock, serde_json::json!({}), (censored, p.allow_censored))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct W2Params {
    pub seed: u64,
    pub n: usize,
    pub eps: f64,
    pub bins: usize,
    pub replicates: usize,
    pub t_max: usize,
    pub burn_in: usize,
    /// Write every `every`-th iteration.
    pub every: usize,
    pub align: bool,
    pub allow_censored: bool,
}

impl W2Params {
    fn with_n(n: usize) -> Self {
        W2Params {
            seed: 7,
            n,
            eps: 5.0,
            bins: 10,
            replicates: 20,
            t_max: 2_000,
            burn_in: 1_000,
            every: 10,
            align: false,
            // Runs are cut at t_max by design; the distance is the output.
            allow_censored: true,
        }
    }
}

fn histogram_w2(ctx: Ctx<'_>, p: W2Params) -> Result<RunReport> {
    let clock = Clock::start();
    if p.every == 0 {
        return Err(CliError::Config("`every` must be positive".into()));
    }
    let t = histogram(p.n, p.eps, p.bins, p.seed)?;
    let init = uniform_state(&mut replicate_rng(p.seed, INIT_STREAM), p.n)?;
    let cc = CoupledRunConfig {
        t_max: p.t_max,
        burn_in: p.burn_in,
        record_distance: false,
        record_w2: true,
        align: p.align,
    };
    let mut all = Vec::new();
    for kind in SamplerKind::ALL {
        all.push(run_coupled_replicates(kind, &t, &UniformProposal, &init, &cc, p.seed, p.replicates)?);
    }
    let mut out = Outputs::new(ctx.dir)?;
    out.csv("w2.csv", &["kind", "replicate", "iteration", "w2"], |w| {
        for outcomes in &all {
            for (r, o) in outcomes.iter().enumerate() {
                for it in (0..=p.t_max).step_by(p.every) {
                    if let Some(v) = o.w2_at(it) {
                        w.write_record([o.kind.label().to_string(), r.to_string(), it.to_string(), num(v)])?;
                    }
                }
            }
        }
        Ok(())
    })?;
    let medians: Vec<Value> = all
        .iter()
        .map(|outcomes| {
            let mut last: Vec<f64> = outcomes.iter().filter_map(|o| o.w2_at(p.t_max)).collect();
            last.sort_by(f64::total_cmp);
            let median = (!last.is_empty()).then(|| quantile_sorted(&last, 0.5));
            serde_json::json!({ "kind": outcomes[0].kind, "median_final_w2": median })
        })
        .collect();
    let censored = all.iter().flatten().filter(|o| o.censored()).count();
    finish(&ctx, out, &p, p.seed, &clock, serde_json::json!({ "final": medians }), (censored, p.allow_censored))
}

// ---------------------------------------------------------------- linreg

fn linreg(n: usize, eps: f64, release: Release, seed: u64) -> Result<LinregSetup> {
    LinregSpec {
        n,
        eps,
        release,
        ..LinregSpec::default()
    }
    .setup(seed)
}

fn damcmc_config(setup: &LinregSetup, kind: SamplerKind, iters: usize) -> DamcmcConfig {
    DamcmcConfig {
        kind,
        prior: setup.prior.clone(),
        covariates: setup.covariates.clone(),
        iters,
        imputation_steps: None,
    }
}

/// Independent chains per kind; chain `c` uses the same seed for every kind.
fn independent_chains(setup: &LinregSetup, iters: usize, chains: usize, seed: u64) -> Result<Vec<(SamplerKind, Vec<DamcmcRecord>)>> {
    SamplerKind::ALL
        .iter()
        .map(|&kind| {
            let recs = (0..chains)
                .into_par_iter()
                .map(|c| Ok(damcmc_run(&damcmc_config(setup, kind, iters), &setup.summary, None, chain_seed(seed, c))?))
                .collect::<Result<Vec<_>>>()?;
            Ok((kind, recs))
        })
        .collect()
}

/// Long SOMA chain after burn-in, standing in for exact posterior draws.
fn reference_chain(setup: &LinregSetup, iters: usize, burn_in: usize, seed: u64) -> Result<Vec<soma::damcmc::RegressionTheta>> {
    if burn_in >= iters {
        return Err(CliError::Config("reference burn-in must be shorter than the reference chain".into()));
    }
    let rec = damcmc_run(&damcmc_config(setup, SamplerKind::Soma, iters), &setup.summary, None, chain_seed(seed, u32::MAX as usize))?;
    Ok(rec.thetas[burn_in..].to_vec())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableParams {
    pub seed: u64,
    pub n: usize,
    pub eps: Vec<f64>,
    pub replicates: usize,
    pub t_max: usize,
    pub burn_in: usize,
    pub align: bool,
    pub acceptance_chains: usize,
    pub acceptance_iters: usize,
    pub allow_censored: bool,
}

impl Default for TableParams {
    fn default() -> Self {
        TableParams {
            seed: 10,
            n: 10,
            eps: vec![3.0, 30.0],
            replicates: 40,
            t_max: 20_000,
            burn_in: 200,
            align: true,
            acceptance_chains: 20,
            acceptance_iters: 200,
            allow_censored: false,
        }
    }
}

fn quartiles(mut v: Vec<f64>) -> (f64, f64, f64) {
    v.sort_by(f64::total_cmp);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (mean, quantile_sorted(&v, 0.25), quantile_sorted(&v, 0.75))
}

fn table1(ctx: Ctx<'_>, p: TableParams) -> Result<RunReport> {
    let clock = Clock::start();
    let coupling = DamcmcCoupling {
        t_max: p.t_max,
        burn_in: p.burn_in,
        align: p.align,
    };
    let mut rows = Vec::new();
    let mut censored = 0;
    for &eps in &p.eps {
        let setup = linreg(p.n, eps, Release::Fixture, p.seed)?;
        for kind in SamplerKind::ALL {
            let c = Clock::start();
            let outcomes = coupled_damcmc_replicates(&damcmc_config(&setup, kind, 0), &setup.summary, &coupling, p.seed, p.replicates)?;
            let rate = rate_row(kind, &outcomes, p.t_max, c.seconds());
            censored += rate.censored_count;
            let acc = (0..p.acceptance_chains)
                .into_par_iter()
                .map(|ch| {
                    let rec = damcmc_run(&damcmc_config(&setup, kind, p.acceptance_iters), &setup.summary, None, chain_seed(p.seed, ch))?;
                    Ok(rec.acceptance_rate().unwrap_or(f64::NAN))
                })
                .collect::<Result<Vec<f64>>>()?;
            let tau = quartiles(outcomes.iter().map(|o| o.tau_or_t_max() as f64).collect());
            rows.push((eps, kind, tau, rate, quartiles(acc)));
        }
    }
    let mut out = Outputs::new(ctx.dir)?;
    let header = [
        "eps",
        "kind",
        "tau_mean",
        "tau_q25",
        "tau_q75",
        "r_hat",
        "acceptance_mean",
        "acceptance_q25",
        "acceptance_q75",
        "censored_count",
    ];
    out.csv("table1.csv", &header, |w| {
        for (eps, kind, tau, rate, acc) in &rows {
            w.write_record([
                num(*eps),
                kind.label().to_string(),
                num(tau.0),
                num(tau.1),
                num(tau.2),
                rate.r_hat.map(num).unwrap_or_default(),
                num(acc.0),
                num(acc.1),
                num(acc.2),
                rate.censored_count.to_string(),
            ])?;
        }
        Ok(())
    })?;
    let rates: Vec<Value> = rows
        .iter()
        .map(|(eps, _, _, rate, _)| serde_json::json!({ "eps": eps, "rate": rate }))
        .collect();
    finish(&ctx, out, &p, p.seed, &clock, serde_json::json!({ "rates": rates }), (censored, p.allow_censored))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RidgeParams {
    pub seed: u64,
    pub n: usize,
    pub eps: f64,
    pub chains: usize,
    pub iters: usize,
    pub reference_iters: usize,
    pub reference_burn_in: usize,
}

impl Default for RidgeParams {
    fn default() -> Self {
        RidgeParams {
            seed: 8,
            n: 100,
            eps: 30.0,
            chains: 20,
            iters: 300,
            reference_iters: 3_000,
            reference_burn_in: 1_000,
        }
    }
}

fn ridge(ctx: Ctx<'_>, p: RidgeParams) -> Result<RunReport> {
    let clock = Clock::start();
    let setup = linreg(p.n, p.eps, Release::Simulate, p.seed)?;
    let runs = independent_chains(&setup, p.iters, p.chains, p.seed)?;
    let reference = reference_chain(&setup, p.reference_iters, p.reference_burn_in, p.seed)?;
    let mut out = Outputs::new(ctx.dir)?;
    out.csv("ridge.csv", &["kind", "iteration", "q25", "median", "q75", "mean"], |w| {
        for (kind, recs) in &runs {
            for it in 0..p.iters {
                let mut v: Vec<f64> = recs.iter().map(|r| r.thetas[it].beta[0]).collect();
                v.sort_by(f64::total_cmp);
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                w.write_record([
                    kind.label().to_string(),
                    (it + 1).to_string(),
                    num(quantile_sorted(&v, 0.25)),
                    num(quantile_sorted(&v, 0.5)),
                    num(quantile_sorted(&v, 0.75)),
                    num(mean),
                ])?;
            }
        }
        Ok(())
    })?;
    let mut b0: Vec<f64> = reference.iter().map(|t| t.beta[0]).collect();
    b0.sort_by(f64::total_cmp);
    let body = serde_json::json!({
        "s_dp": setup.summary.s_dp,
        "reference": {
            "q25": quantile_sorted(&b0, 0.25),
            "median": quantile_sorted(&b0, 0.5),
            "q75": quantile_sorted(&b0, 0.75),
            "mean": b0.iter().sum::<f64>() / b0.len() as f64,
        },
        "acceptance": acceptance_by_kind(&runs),
    });
    finish(&ctx, out, &p, p.seed, &clock, body, (0, true))
}

fn acceptance_by_kind(runs: &[(SamplerKind, Vec<DamcmcRecord>)]) -> Vec<Value> {
    runs.iter()
        .map(|(kind, recs)| {
            let rates: Vec<f64> = recs.iter().filter_map(|r| r.acceptance_rate()).collect();
            let mean = rates.iter().sum::<f64>() / rates.len().max(1) as f64;
            serde_json::json!({ "kind": kind, "acceptance_rate": mean })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingParams {
    pub seed: u64,
    pub n: usize,
    pub eps: f64,
    pub chains: usize,
    pub iters: usize,
    pub every: usize,
}

impl Default for MixingParams {
    fn default() -> Self {
        MixingParams {
            seed: 9,
            n: 100,
            eps: 30.0,
            chains: 4,
            iters: 1_000,
            every: 50,
        }
    }
}

fn mixing(ctx: Ctx<'_>, p: MixingParams) -> Result<RunReport> {
    let clock = Clock::start();
    if p.every < 8 {
        return Err(CliError::Config("`every` must be at least 8 (the shortest prefix ESS accepts)".into()));
    }
    let setup = linreg(p.n, p.eps, Release::Simulate, p.seed)?;
    let runs = independent_chains(&setup, p.iters, p.chains, p.seed)?;
    let mut rows = Vec::new();
    for (kind, recs) in &runs {
        let traces: Vec<Vec<f64>> = recs.iter().map(|r| r.beta_trace(0)).collect();
        for len in (p.every..=p.iters).step_by(p.every) {
            let views: Vec<&[f64]> = traces.iter().map(|t| &t[..len]).collect();
            let rhat = split_rhat(&views)?;
            let total_ess = views.iter().map(|v| ess(v)).sum::<soma::Result<f64>>()?;
            for (metric, value) in [("rhat", rhat.value), ("ess", total_ess)] {
                rows.push(TidyRow {
                    metric: metric.into(),
                    kind: kind.label().into(),
                    iteration: len,
                    value,
                    replicate: 0,
                });
            }
        }
    }
    let mut out = Outputs::new(ctx.dir)?;
    out.raw("diagnostics.csv", |w| Ok(write_tidy_csv(w, &rows)?))?;
    let body = serde_json::json!({ "s_dp": setup.summary.s_dp, "acceptance": acceptance_by_kind(&runs) });
    finish(&ctx, out, &p, p.seed, &clock, body, (0, true))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmdParams {
    pub seed: u64,
    pub n: usize,
    pub eps: f64,
    pub chains: usize,
    pub iters: usize,
    pub every: usize,
    pub reference_iters: usize,
    pub reference_burn_in: usize,
    /// Keep every `reference_thin`-th reference draw.
    pub reference_thin: usize,
}

impl Default for MmdParams {
    fn default() -> Self {
        MmdParams {
            seed: 11,
            n: 100,
            eps: 30.0,
            chains: 30,
            iters: 200,
            every: 10,
            reference_iters: 3_000,
            reference_burn_in: 1_000,
            reference_thin: 4,
        }
    }
}

fn theta_points<'a, I: Iterator<Item = &'a soma::damcmc::RegressionTheta>>(thetas: I) -> Result<State> {
    let mut v = Vec::new();
    let mut width = 0;
    for t in thetas {
        v.extend(&t.beta);
        v.push(t.sigma2);
        width = t.beta.len() + 1;
    }
    Ok(State::new(v, width.max(1))?)
}

fn mmd_trace(ctx: Ctx<'_>, p: MmdParams) -> Result<RunReport> {
    let clock = Clock::start();
    if p.every == 0 || p.reference_thin == 0 {
        return Err(CliError::Config("`every` and `reference_thin` must be positive".into()));
    }
    let setup = linreg(p.n, p.eps, Release::Simulate, p.seed)?;
    let runs = independent_chains(&setup, p.iters, p.chains, p.seed)?;
    let reference = reference_chain(&setup, p.reference_iters, p.reference_burn_in, p.seed)?;
    let reference = theta_points(reference.iter().step_by(p.reference_thin))?;
    let mut rows = Vec::new();
    for (kind, recs) in &runs {
        for it in (p.every..=p.iters).step_by(p.every) {
            let cloud = theta_points(recs.iter().map(|r| &r.thetas[it - 1]))?;
            rows.push((*kind, it, mmd_rbf(&cloud, &reference, None)?));
        }
    }
    let mut out = Outputs::new(ctx.dir)?;
    out.csv("mmd.csv", &["kind", "iteration", "mmd"], |w| {
        for (kind, it, v) in &rows {
            w.write_record([kind.label().to_string(), it.to_string(), num(*v)])?;
        }
        Ok(())
    })?;
    let body = serde_json::json!({ "s_dp": setup.summary.s_dp, "acceptance": acceptance_by_kind(&runs) });
    finish(&ctx, out, &p, p.seed, &clock, body, (0, true))
}
