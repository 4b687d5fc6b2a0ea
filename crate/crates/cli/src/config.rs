//! Versioned JSON experiment configs.
//!
//! A config is parsed with unknown fields rejected, then checked by
//! [`ExperimentConfig::validate`] before anything runs. Target blocks are
//! tagged by `kind`:
//!
//! | kind                | fields                                          |
//! |---------------------|-------------------------------------------------|
//! | `beta_laplace`      | `n`, `eps`, `y_obs`, `a0` (10), `b0` (10)       |
//! | `exp_laplace`       | `n`, `eps`, `y_obs`                             |
//! | `bernoulli_laplace` | `n`, `s`, `p`                                   |
//! | `histogram`         | `n`, `eps`, `bins` (10), `noisy`?, `data`?      |
//!
//! A histogram without `noisy` counts privatizes `data`, or uniform data
//! drawn from the run seed when `data` is absent too.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use soma::damcmc::{fixture, CovariatePrior, Mechanism, NigParams};
use soma::rng::{replicate_rng, ChainRng};
use soma::samplers::SamplerKind;
use soma::targets::{
    bernoulli_laplace_target, beta_laplace_target, exp_laplace_target, perturbed_histogram_target,
    privatize_histogram, uniform_edges, Proposal, Target, UniformProposal,
};
use soma::State;

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Streams reserved for draws that are not part of any chain.
pub const DATA_STREAM: u64 = u64::MAX;
pub const INIT_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Synthetic,
    Histogram,
    Linreg,
    Bounds,
    Couple,
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSpec>,
    #[serde(default = "all_kinds")]
    pub samplers: Vec<SamplerKind>,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "one")]
    pub thin: usize,
    /// Starting state; drawn from the proposal when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<Vec<f64>>,
    #[serde(default)]
    pub coupling: CouplingSpec,
    #[serde(default)]
    pub allow_censored: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linreg: Option<LinregSpec>,
}

fn all_kinds() -> Vec<SamplerKind> {
    SamplerKind::ALL.to_vec()
}

fn default_iters() -> usize {
    10_000
}

fn one() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    BetaLaplace {
        n: usize,
        eps: f64,
        y_obs: f64,
        #[serde(default = "ten")]
        a0: f64,
        #[serde(default = "ten")]
        b0: f64,
    },
    ExpLaplace {
        n: usize,
        eps: f64,
        y_obs: f64,
    },
    BernoulliLaplace {
        n: usize,
        s: usize,
        p: f64,
    },
    Histogram {
        n: usize,
        eps: f64,
        #[serde(default = "ten_bins")]
        bins: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        noisy: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data: Option<Vec<f64>>,
    },
}

fn ten() -> f64 {
    10.0
}

fn ten_bins() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub align: bool,
    #[serde(default)]
    pub record_w2: bool,
}

fn default_t_max() -> usize {
    10_000
}

fn default_burn_in() -> usize {
    10_000
}

impl Default for CouplingSpec {
    fn default() -> Self {
        CouplingSpec {
            t_max: default_t_max(),
            burn_in: default_burn_in(),
            align: false,
            record_w2: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub n: Vec<usize>,
    #[serde(rename = "M")]
    pub m: Vec<f64>,
}

/// Where the released summaries of a linreg run come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Release {
    /// The shipped vector for `eps` (3 or 30).
    Fixture,
    /// Records drawn from the model under the true parameters, clamped and
    /// privatized with the run seed.
    Simulate,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinregSpec {
    pub n: usize,
    pub eps: f64,
    pub release: Release,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub covariate_mean: Vec<f64>,
    pub prior_scale: f64,
    pub prior_a: f64,
    pub prior_b: f64,
    pub true_beta: Vec<f64>,
    pub true_sigma2: f64,
    /// Imputation updates per theta draw; one per record when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub imputation_steps: Option<usize>,
    /// Also run coupled replicates with the top-level coupling block.
    pub couple: bool,
}

impl Default for LinregSpec {
    fn default() -> Self {
        LinregSpec {
            n: 10,
            eps: 30.0,
            release: Release::Fixture,
            lower: vec![-6.0, -6.0, -7.0],
            upper: vec![6.0, 6.0, 7.0],
            covariate_mean: vec![0.9, -1.17],
            prior_scale: 0.5,
            prior_a: 10.0,
            prior_b: 10.0,
            true_beta: vec![-1.79, -2.89, -0.66],
            true_sigma2: 1.13,
            imputation_steps: None,
            couple: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::File {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.version != SCHEMA_VERSION {
            return bad(format!("schema version {} is not supported (expected {SCHEMA_VERSION})", self.version));
        }
        if self.samplers.is_empty() {
            return bad("`samplers` is empty".into());
        }
        for (k, kind) in self.samplers.iter().enumerate() {
            if self.samplers[..k].contains(kind) {
                return bad(format!("sampler `{kind}` listed twice"));
            }
        }
        if self.iters == 0 || self.replicates == 0 || self.thin == 0 {
            return bad("`iters`, `replicates` and `thin` must be positive".into());
        }
        if self.coupling.t_max == 0 {
            return bad("`coupling.t_max` must be positive".into());
        }
        match self.experiment {
            ExperimentKind::Bounds => {
                let b = self.bounds.as_ref().ok_or_else(|| CliError::Config("bounds experiment needs a `bounds` block".into()))?;
                check_grid(&b.n, &b.m)?;
            }
            ExperimentKind::Linreg => {
                if self.linreg.is_none() {
                    return bad("linreg experiment needs a `linreg` block".into());
                }
            }
            _ => {
                let target = self.target.as_ref().ok_or_else(|| CliError::Config("missing `target` block".into()))?;
                let (fits, expected) = match self.experiment {
                    ExperimentKind::Synthetic => (
                        matches!(target, TargetSpec::BetaLaplace { .. } | TargetSpec::ExpLaplace { .. }),
                        "beta_laplace or exp_laplace",
                    ),
                    ExperimentKind::Histogram => (matches!(target, TargetSpec::Histogram { .. }), "histogram"),
                    _ => (true, ""),
                };
                if !fits {
                    return bad(format!("this experiment takes a {expected} target"));
                }
                if let Some(init) = &self.init {
                    if init.len() != target.n() {
                        return bad(format!("`init` has {} entries, target has n = {}", init.len(), target.n()));
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn check_grid(n: &[usize], m: &[f64]) -> Result<()> {
    if n.is_empty() || m.is_empty() {
        return Err(CliError::Config("bounds grid needs at least one n and one M".into()));
    }
    if n.contains(&0) {
        return Err(CliError::Config("n must be positive".into()));
    }
    if let Some(bad) = m.iter().find(|m| m.is_nan() || **m < 1.0 || !m.is_finite()) {
        return Err(CliError::Config(format!("M must be finite and at least 1, got {bad}")));
    }
    Ok(())
}

/// A target with its proposal, ready to run.
pub struct BuiltTarget {
    pub target: Box<dyn Target>,
    pub proposal: Box<dyn Proposal>,
    /// Noisy histogram counts actually used.
    pub release: Option<Vec<f64>>,
}

/// Uniform draw from the open interval (0, 1).
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

impl TargetSpec {
    pub fn n(&self) -> usize {
        match *self {
            TargetSpec::BetaLaplace { n, .. }
            | TargetSpec::ExpLaplace { n, .. }
            | TargetSpec::BernoulliLaplace { n, .. }
            | TargetSpec::Histogram { n, .. } => n,
        }
    }

    pub fn build(&self, seed: u64) -> Result<BuiltTarget> {
        Ok(match self {
            &TargetSpec::BetaLaplace { n, eps, y_obs, a0, b0 } => {
                let t = beta_laplace_target(a0, b0, eps, y_obs, n)?;
                let proposal = t.prior_proposal();
                BuiltTarget {
                    target: Box::new(t),
                    proposal,
                    release: None,
                }
            }
            &TargetSpec::ExpLaplace { n, eps, y_obs } => {
                let t = exp_laplace_target(eps, y_obs, n)?;
                let proposal = t.prior_proposal();
                BuiltTarget {
                    target: Box::new(t),
                    proposal,
                    release: None,
                }
            }
            &TargetSpec::BernoulliLaplace { n, s, p } => {
                let t = bernoulli_laplace_target(n, s, p)?;
                let proposal = Box::new(t.proposal());
                BuiltTarget {
                    target: Box::new(t),
                    proposal,
                    release: None,
                }
            }
            TargetSpec::Histogram { n, eps, bins, noisy, data } => {
                let edges = uniform_edges(*bins);
                let noisy = match (noisy, data) {
                    (Some(noisy), _) => noisy.clone(),
                    (None, Some(data)) => privatize_histogram(data, &edges, *eps, &mut replicate_rng(seed, DATA_STREAM))?,
                    (None, None) => {
                        let mut rng = replicate_rng(seed, DATA_STREAM);
                        let data: Vec<f64> = (0..*n).map(|_| open_unit(&mut rng)).collect();
                        privatize_histogram(&data, &edges, *eps, &mut rng)?
                    }
                };
                BuiltTarget {
                    target: Box::new(perturbed_histogram_target(&edges, &noisy, *eps, *n)?),
                    proposal: Box::new(UniformProposal),
                    release: Some(noisy),
                }
            }
        })
    }

    /// Default starting state: the first `s` components set for
    /// Bernoulli-Laplace, otherwise independent proposal draws redrawn until
    /// the density is positive.
    pub fn initial_state(&self, built: &BuiltTarget, rng: &mut ChainRng) -> Result<State> {
        if let &TargetSpec::BernoulliLaplace { n, s, .. } = self {
            return Ok(State::scalar((0..n).map(|j| if j < s { 1.0 } else { 0.0 }).collect())?);
        }
        let n = self.n();
        let w = built.proposal.width();
        let mut buf = vec![0.0; n * w];
        for _ in 0..10_000 {
            for c in buf.chunks_mut(w) {
                built.proposal.sample(rng, c);
            }
            let state = State::new(buf.clone(), w)?;
            if built.target.log_density(&state) > f64::NEG_INFINITY {
                return Ok(state);
            }
        }
        Err(CliError::Config("could not draw a starting state with positive density; set `init`".into()))
    }
}

/// Model pieces and release of a linreg run.
pub struct LinregSetup {
    pub prior: NigParams,
    pub covariates: CovariatePrior,
    pub summary: soma::damcmc::PrivateSummary,
}

impl LinregSpec {
    pub fn setup(&self, seed: u64) -> Result<LinregSetup> {
        let p = self.covariate_mean.len();
        if self.lower.len() != p + 1 || self.upper.len() != p + 1 || self.true_beta.len() != p + 1 {
            return Err(CliError::Config(format!(
                "{p} covariates need {} clamp bounds and coefficients",
                p + 1
            )));
        }
        let mechanism = Mechanism::new(self.lower.clone(), self.upper.clone(), self.eps, self.n)?;
        let s_dp = match &self.release {
            Release::Fixture => fixture(self.eps)?.s_dp,
            Release::Given(v) => v.clone(),
            Release::Simulate => {
                let mut rng = replicate_rng(seed, DATA_STREAM);
                let records = simulate_records(&mut rng, self.n, &self.covariate_mean, &self.true_beta, self.true_sigma2)?;
                let clamped = soma::damcmc::clamp_data(&records, &mechanism)?;
                soma::damcmc::privatize_summaries(&clamped, &mechanism, &mut rng)?.s_dp
            }
        };
        if s_dp.len() != mechanism.summary_len() {
            return Err(CliError::Config(format!(
                "release has {} entries, expected {}",
                s_dp.len(),
                mechanism.summary_len()
            )));
        }
        Ok(LinregSetup {
            prior: NigParams::isotropic(p + 1, self.prior_scale, self.prior_a, self.prior_b)?,
            covariates: CovariatePrior::standard(self.covariate_mean.clone())?,
            summary: soma::damcmc::PrivateSummary { s_dp, mechanism },
        })
    }
}

/// Records `(x, y)` with `x ~ N(mean, I)` and `y ~ N(beta_0 + x'beta, sigma2)`.
pub fn simulate_records<R: Rng + ?Sized>(rng: &mut R, n: usize, mean: &[f64], beta: &[f64], sigma2: f64) -> Result<State> {
    use rand_distr::{Distribution, StandardNormal};
    let p = mean.len();
    let mut v = Vec::with_capacity(n * (p + 1));
    for _ in 0..n {
        let mut y = beta[0];
        for (k, m) in mean.iter().enumerate() {
            let z: f64 = StandardNormal.sample(rng);
            v.push(m + z);
            y += beta[k + 1] * (m + z);
        }
        let e: f64 = StandardNormal.sample(rng);
        v.push(y + sigma2.sqrt() * e);
    }
    Ok(State::new(v, p + 1)?)
}
