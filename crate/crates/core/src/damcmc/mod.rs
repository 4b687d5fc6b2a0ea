//! Data augmentation for Bayesian linear regression from privatized
//! summaries.
//!
//! A record is `(x_1, .., x_p, y)`. The release mechanism clamps every
//! coordinate to a box, rescales it into `[-1, 1]`, and publishes the
//! averaged cross-moments of `z = (1, x, y)` with Laplace noise. The sampler
//! alternates a conjugate draw of `theta = (beta, sigma2)` given imputed
//! records with imputation moves on the records given `theta` and the
//! release.

mod nig;
mod run;

pub use nig::{nig_posterior, sample_theta, sample_theta_with, theta_noise, NigParams, RegressionTheta};
pub use run::{coupled_damcmc_replicates, coupled_damcmc_run, damcmc_run, write_theta_csv, DamcmcConfig, DamcmcCoupling, DamcmcRecord};

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SomaError};
use crate::math::{laplace_log_pdf, normal_log_pdf, sample_laplace};
use crate::state::{ComponentSpace, State};
use crate::targets::{AdditiveStructure, Proposal, Target};

/// Clamping box and privacy budget of the summary release.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    /// Per-coordinate lower bounds, covariates first, response last.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub eps: f64,
    /// Number of records the summaries average over.
    pub n: usize,
}

impl Mechanism {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, eps: f64, n: usize) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() < 2 {
            return Err(SomaError::Config("need matching bounds for at least one covariate and the response".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(SomaError::Config("each clamp interval must be finite with lower < upper".into()));
        }
        if !(eps > 0.0) {
            return Err(SomaError::Config(format!("privacy budget must be positive, got {eps}")));
        }
        if n == 0 {
            return Err(SomaError::Config("need at least one record".into()));
        }
        Ok(Mechanism { lower, upper, eps, n })
    }

    /// `[-1, 1]` on every coordinate.
    pub fn unit_box(p: usize, eps: f64, n: usize) -> Result<Self> {
        Mechanism::new(vec![-1.0; p + 1], vec![1.0; p + 1], eps, n)
    }

    /// Number of covariates.
    pub fn p(&self) -> usize {
        self.lower.len() - 1
    }

    /// Record width `p + 1`.
    pub fn width(&self) -> usize {
        self.lower.len()
    }

    /// Length of the released vector, `(p + 2)(p + 3) / 2 - 1`.
    pub fn summary_len(&self) -> usize {
        let p = self.p();
        (p + 2) * (p + 3) / 2 - 1
    }

    fn scale(&self, k: usize) -> f64 {
        self.lower[k].abs().max(self.upper[k].abs())
    }

    /// Clamped and rescaled `z = (1, x, y)`.
    fn z(&self, record: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(record.len() + 1);
        z.push(1.0);
        for (k, &v) in record.iter().enumerate() {
            z.push(v.clamp(self.lower[k], self.upper[k]) / self.scale(k));
        }
        z
    }

    /// Range of `z_j` over the clamp box.
    fn z_range(&self, j: usize) -> (f64, f64) {
        if j == 0 {
            (1.0, 1.0)
        } else {
            let s = self.scale(j - 1);
            (self.lower[j - 1] / s, self.upper[j - 1] / s)
        }
    }

    /// Index pairs `(j, k)` of `z z^T` in release order: the response
    /// column `(j, p+1)` for `j = 0..=p`, then `(p+1, p+1)`, then the upper
    /// triangle of the design block row by row without `(0, 0)`.
    fn entries(&self) -> Vec<(usize, usize)> {
        let r = self.p() + 1;
        let mut e: Vec<(usize, usize)> = (0..r).map(|j| (j, r)).collect();
        e.push((r, r));
        for j in 0..r {
            for k in j..r {
                if (j, k) != (0, 0) {
                    e.push((j, k));
                }
            }
        }
        e
    }

    /// Per-record contribution `t(record)` to the released vector.
    pub fn record_stat(&self, record: &[f64], out: &mut [f64]) {
        let z = self.z(record);
        let n = self.n as f64;
        for (slot, (j, k)) in out.iter_mut().zip(self.entries()) {
            *slot = z[j] * z[k] / n;
        }
    }

    /// Exact (noise-free) summaries of a set of records.
    pub fn summaries(&self, records: &State) -> Vec<f64> {
        let mut total = vec![0.0; self.summary_len()];
        let mut buf = vec![0.0; self.summary_len()];
        for r in records.components() {
            self.record_stat(r, &mut buf);
            for (t, b) in total.iter_mut().zip(&buf) {
                *t += b;
            }
        }
        total
    }

    /// L1 sensitivity: the sum over released entries of the largest change
    /// one record can cause, `(max z_j z_k - min z_j z_k) / n` over the box.
    pub fn sensitivity(&self) -> f64 {
        let n = self.n as f64;
        self.entries()
            .into_iter()
            .map(|(j, k)| {
                let (a_lo, a_hi) = self.z_range(j);
                let (b_lo, b_hi) = self.z_range(k);
                let (lo, hi) = if j == k {
                    let m = a_lo.abs().max(a_hi.abs());
                    let lo = if a_lo <= 0.0 && a_hi >= 0.0 { 0.0 } else { a_lo.abs().min(a_hi.abs()).powi(2) };
                    (lo, m * m)
                } else {
                    let c = [a_lo * b_lo, a_lo * b_hi, a_hi * b_lo, a_hi * b_hi];
                    (
                        c.iter().copied().fold(f64::INFINITY, f64::min),
                        c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    )
                };
                (hi - lo) / n
            })
            .sum()
    }

    /// Laplace scale `sensitivity / eps`; zero for an infinite budget.
    pub fn noise_scale(&self) -> f64 {
        if self.eps.is_infinite() {
            0.0
        } else {
            self.sensitivity() / self.eps
        }
    }
}

/// Clamps every coordinate of every record into the mechanism's box.
pub fn clamp_data(records: &State, mech: &Mechanism) -> Result<State> {
    if records.width() != mech.width() {
        return Err(SomaError::Domain(format!("records have width {}, expected {}", records.width(), mech.width())));
    }
    let mut out = records.clone();
    for i in 0..out.n() {
        let c: Vec<f64> = out
            .component(i)
            .iter()
            .enumerate()
            .map(|(k, v)| v.clamp(mech.lower[k], mech.upper[k]))
            .collect();
        out.set_component(i, &c);
    }
    Ok(out)
}

/// A privatized release.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivateSummary {
    pub s_dp: Vec<f64>,
    pub mechanism: Mechanism,
}

/// Releases the summaries of already-clamped records with independent
/// Laplace(0, sensitivity / eps) noise per entry.
pub fn privatize_summaries<R: Rng + ?Sized>(records: &State, mech: &Mechanism, rng: &mut R) -> Result<PrivateSummary> {
    if records.width() != mech.width() || records.n() != mech.n {
        return Err(SomaError::Domain(format!(
            "expected {} records of width {}, got {} of width {}",
            mech.n,
            mech.width(),
            records.n(),
            records.width()
        )));
    }
    for r in records.components() {
        for (k, &v) in r.iter().enumerate() {
            if !(v >= mech.lower[k] && v <= mech.upper[k]) {
                return Err(SomaError::Precondition(format!("value {v} in column {k} lies outside the clamp box")));
            }
        }
    }
    let scale = mech.noise_scale();
    let s_dp = mech.summaries(records).into_iter().map(|s| s + sample_laplace(rng, scale)).collect();
    Ok(PrivateSummary {
        s_dp,
        mechanism: mech.clone(),
    })
}

/// Covariate law `x ~ N(mean, cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariatePrior {
    mean: DVector<f64>,
    chol_l: DMatrix<f64>,
    log_norm: f64,
}

impl CovariatePrior {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let p = mean.len();
        if cov.nrows() != p || cov.ncols() != p {
            return Err(SomaError::Config(format!("covariance must be {p}x{p}")));
        }
        let chol = Cholesky::new(cov).ok_or_else(|| SomaError::LinearAlgebra("covariate covariance is not positive definite".into()))?;
        let l = chol.l();
        let log_det: f64 = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let log_norm = -0.5 * (p as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(CovariatePrior {
            mean: DVector::from_vec(mean),
            chol_l: l,
            log_norm,
        })
    }

    pub fn standard(mean: Vec<f64>) -> Result<Self> {
        let p = mean.len();
        CovariatePrior::new(mean, DMatrix::identity(p, p))
    }

    pub fn p(&self) -> usize {
        self.mean.len()
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let d = DVector::from_column_slice(x) - &self.mean;
        let w = self
            .chol_l
            .solve_lower_triangular(&d)
            .expect("positive diagonal");
        self.log_norm - 0.5 * w.norm_squared()
    }

    pub fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let z = DVector::from_iterator(self.p(), (0..self.p()).map(|_| StandardNormal.sample(rng)));
        let x = &self.mean + &self.chol_l * z;
        out.copy_from_slice(x.as_slice());
    }
}

/// Record law under `theta`: `x ~ N(m, S)` and `y | x ~ N(beta_0 + x'beta,
/// sigma2)`. Serves as both the per-record prior and the proposal, so swap
/// weights reduce to ratios of the release density.
#[derive(Debug, Clone)]
pub struct RecordModel<'a> {
    pub covariates: &'a CovariatePrior,
    pub theta: &'a RegressionTheta,
}

impl RecordModel<'_> {
    pub fn response_mean(&self, x: &[f64]) -> f64 {
        self.theta.beta[0] + x.iter().zip(&self.theta.beta[1..]).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn log_pdf(&self, record: &[f64]) -> f64 {
        let p = self.covariates.p();
        let (x, y) = (&record[..p], record[p]);
        self.covariates.log_pdf(x) + normal_log_pdf(y, self.response_mean(x), self.theta.sigma2)
    }
}

impl Proposal for RecordModel<'_> {
    fn width(&self) -> usize {
        self.covariates.p() + 1
    }

    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let p = self.covariates.p();
        self.covariates.sample(rng, &mut out[..p]);
        let z: f64 = StandardNormal.sample(rng);
        out[p] = self.response_mean(&out[..p]) + self.theta.sigma2.sqrt() * z;
    }

    fn log_q(&self, point: &[f64]) -> f64 {
        self.log_pdf(point)
    }
}

/// Conditional law of the records given `theta` and the release.
pub struct ImputationTarget<'a> {
    model: RecordModel<'a>,
    summary: &'a PrivateSummary,
    noise_scale: f64,
}

/// Builds the imputation target. The release must carry finite noise.
pub fn imputation_target<'a>(
    theta: &'a RegressionTheta,
    summary: &'a PrivateSummary,
    covariates: &'a CovariatePrior,
) -> Result<ImputationTarget<'a>> {
    let mech = &summary.mechanism;
    if covariates.p() != mech.p() || theta.beta.len() != mech.p() + 1 {
        return Err(SomaError::Config("covariate prior, theta and mechanism disagree on p".into()));
    }
    if summary.s_dp.len() != mech.summary_len() {
        return Err(SomaError::Config(format!(
            "release has {} entries, expected {}",
            summary.s_dp.len(),
            mech.summary_len()
        )));
    }
    if !(theta.sigma2 > 0.0) {
        return Err(SomaError::Domain("sigma2 must be positive".into()));
    }
    let noise_scale = mech.noise_scale();
    if !(noise_scale > 0.0) {
        return Err(SomaError::Config("imputation needs a release with positive noise".into()));
    }
    Ok(ImputationTarget {
        model: RecordModel { covariates, theta },
        summary,
        noise_scale,
    })
}

impl<'a> ImputationTarget<'a> {
    /// The record law, which is also the proposal.
    pub fn proposal(&self) -> &RecordModel<'a> {
        &self.model
    }
}

impl Target for ImputationTarget<'_> {
    fn n(&self) -> usize {
        self.summary.mechanism.n
    }

    fn space(&self) -> ComponentSpace {
        ComponentSpace::RealVector(self.summary.mechanism.width())
    }

    fn log_density(&self, state: &State) -> f64 {
        crate::targets::additive_log_density(self, state)
    }

    fn additive(&self) -> Option<&dyn AdditiveStructure> {
        Some(self)
    }

    fn ratio_bound(&self) -> Option<f64> {
        Some(self.summary.mechanism.eps.exp())
    }
}

impl AdditiveStructure for ImputationTarget<'_> {
    fn summary_dim(&self) -> usize {
        self.summary.mechanism.summary_len()
    }

    fn stat(&self, point: &[f64], out: &mut [f64]) {
        self.summary.mechanism.record_stat(point, out);
    }

    fn log_observation(&self, total: &[f64]) -> f64 {
        self.summary
            .s_dp
            .iter()
            .zip(total)
            .map(|(&s, &t)| laplace_log_pdf(s, t, self.noise_scale))
            .sum()
    }

    fn log_prior(&self, point: &[f64]) -> f64 {
        self.model.log_pdf(point)
    }
}

/// Released vectors shipped with the crate, keyed by privacy budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub eps: f64,
    pub s_dp: Vec<f64>,
}

const FIXTURES: &str = include_str!("../../data/linreg_fixtures.json");

/// The shipped release for budget `eps` (3 or 30).
pub fn fixture(eps: f64) -> Result<Fixture> {
    let all: Vec<Fixture> = serde_json::from_str(FIXTURES)?;
    all.into_iter()
        .find(|f| f.eps == eps)
        .ok_or_else(|| SomaError::Config(format!("no shipped release for eps = {eps}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;
    use crate::targets::{compute_weights, compute_weights_generic};

    fn theta() -> RegressionTheta {
        RegressionTheta {
            beta: vec![-1.79, -2.89, -0.66],
            sigma2: 1.13,
        }
    }

    #[test]
    fn release_layout_for_two_covariates() {
        let mech = Mechanism::unit_box(2, 1.0, 1).unwrap();
        assert_eq!(mech.summary_len(), 9);
        assert_eq!(
            mech.entries(),
            vec![(0, 3), (1, 3), (2, 3), (3, 3), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
        );
        let mut t = vec![0.0; 9];
        mech.record_stat(&[0.5, -0.5, 0.25], &mut t);
        assert_eq!(t, vec![0.25, 0.125, -0.125, 0.0625, 0.5, -0.5, 0.25, -0.25, 0.25]);
    }

    #[test]
    fn unit_box_sensitivity() {
        // Six entries range over [-1, 1], three squares over [0, 1].
        let mech = Mechanism::unit_box(2, 1.0, 10).unwrap();
        assert!((mech.sensitivity() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn clamping_is_idempotent() {
        let mech = Mechanism::unit_box(2, 1.0, 2).unwrap();
        let r = State::new(vec![0.5, 2.0, -0.3, -4.0, 0.1, 0.9], 3).unwrap();
        let c = clamp_data(&r, &mech).unwrap();
        assert_eq!(c.as_slice(), &[0.5, 1.0, -0.3, -1.0, 0.1, 0.9]);
        assert_eq!(clamp_data(&c, &mech).unwrap(), c);
    }

    #[test]
    fn privatize_requires_clamped_input_and_is_exact_without_noise() {
        let mech = Mechanism::unit_box(2, f64::INFINITY, 2).unwrap();
        let r = State::new(vec![0.5, 2.0, -0.3, -0.4, 0.1, 0.9], 3).unwrap();
        let mut rng = chain_rng(1);
        assert!(matches!(privatize_summaries(&r, &mech, &mut rng), Err(SomaError::Precondition(_))));
        let c = clamp_data(&r, &mech).unwrap();
        let s = privatize_summaries(&c, &mech, &mut rng).unwrap();
        assert_eq!(s.s_dp, mech.summaries(&c));
    }

    #[test]
    fn weights_respect_the_budget_and_both_paths_agree() {
        let cov = CovariatePrior::standard(vec![0.9, -1.17]).unwrap();
        let th = theta();
        let mech = Mechanism::new(vec![-6.0, -6.0, -7.0], vec![6.0, 6.0, 7.0], 3.0, 10).unwrap();
        let summary = PrivateSummary {
            s_dp: fixture(3.0).unwrap().s_dp,
            mechanism: mech,
        };
        let target = imputation_target(&th, &summary, &cov).unwrap();
        let q = target.proposal().clone();
        let mut rng = chain_rng(2);
        let mut buf = vec![0.0; 30];
        for c in buf.chunks_mut(3) {
            q.sample(&mut rng, c);
        }
        let state = State::new(buf, 3).unwrap();
        for _ in 0..200 {
            let mut y = [0.0; 3];
            q.sample(&mut rng, &mut y);
            let fast = compute_weights(&target, &q, &state, &y).unwrap();
            let slow = compute_weights_generic(&target, &q, &state, &y).unwrap();
            for (a, b) in fast.as_slice().iter().zip(slow.as_slice()) {
                assert!((a - b).abs() < 1e-10);
            }
            let hi = fast.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = fast.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
            assert!(hi - lo <= 3.0 + 1e-9);
        }
    }

    #[test]
    fn fixtures_are_shipped() {
        assert_eq!(fixture(30.0).unwrap().s_dp[0], -0.5359);
        assert_eq!(fixture(3.0).unwrap().s_dp.len(), 9);
        assert!(fixture(5.0).is_err());
    }
}
