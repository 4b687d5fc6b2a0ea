use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SomaError};

/// Normal-inverse-gamma law: `sigma2 ~ InvGamma(a, b)` and
/// `beta | sigma2 ~ N(mu, sigma2 * lambda^-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NigParams {
    pub mu: DVector<f64>,
    pub lambda: DMatrix<f64>,
    pub a: f64,
    pub b: f64,
}

/// Regression coefficients (intercept first) and noise variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTheta {
    pub beta: Vec<f64>,
    pub sigma2: f64,
}

impl NigParams {
    pub fn new(mu: Vec<f64>, lambda: DMatrix<f64>, a: f64, b: f64) -> Result<Self> {
        let d = mu.len();
        if lambda.nrows() != d || lambda.ncols() != d {
            return Err(SomaError::Config(format!("precision must be {d}x{d}")));
        }
        if !(a > 0.0 && b > 0.0) {
            return Err(SomaError::Config(format!("shape and scale must be positive, got ({a}, {b})")));
        }
        let p = NigParams {
            mu: DVector::from_vec(mu),
            lambda,
            a,
            b,
        };
        p.cholesky()?;
        Ok(p)
    }

    /// Zero mean, precision `scale * I` on `dim` coefficients.
    pub fn isotropic(dim: usize, scale: f64, a: f64, b: f64) -> Result<Self> {
        NigParams::new(vec![0.0; dim], DMatrix::identity(dim, dim) * scale, a, b)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    fn cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        let sym = (&self.lambda + self.lambda.transpose()) * 0.5;
        if (&sym - &self.lambda).amax() > 1e-10 * (1.0 + self.lambda.amax()) {
            return Err(SomaError::LinearAlgebra("precision matrix is not symmetric".into()));
        }
        Cholesky::new(sym).ok_or_else(|| SomaError::LinearAlgebra("precision matrix is not positive definite".into()))
    }
}

fn design_row(x: &[f64]) -> DVector<f64> {
    let mut z = DVector::zeros(x.len() + 1);
    z[0] = 1.0;
    for (k, v) in x.iter().enumerate() {
        z[k + 1] = *v;
    }
    z
}

/// Conjugate update from covariate rows `x_rows` (no intercept column; one
/// is prepended) and responses `y`.
pub fn nig_posterior(prior: &NigParams, x_rows: &[Vec<f64>], y: &[f64]) -> Result<NigParams> {
    if x_rows.len() != y.len() {
        return Err(SomaError::Domain(format!("{} rows but {} responses", x_rows.len(), y.len())));
    }
    let d = prior.dim();
    let mut xtx = DMatrix::zeros(d, d);
    let mut xty = DVector::zeros(d);
    let mut yty = 0.0;
    for (row, &yi) in x_rows.iter().zip(y) {
        if row.len() + 1 != d {
            return Err(SomaError::Domain(format!("row has {} covariates, expected {}", row.len(), d - 1)));
        }
        let z = design_row(row);
        xtx += &z * z.transpose();
        xty += &z * yi;
        yty += yi * yi;
    }
    let lambda_n = xtx + &prior.lambda;
    let rhs = xty + &prior.lambda * &prior.mu;
    let chol = Cholesky::new(lambda_n.clone())
        .ok_or_else(|| SomaError::LinearAlgebra("posterior precision is not positive definite".into()))?;
    let mu_n = chol.solve(&rhs);
    let a_n = prior.a + 0.5 * y.len() as f64;
    let quad0 = prior.mu.dot(&(&prior.lambda * &prior.mu));
    let quad_n = mu_n.dot(&(&lambda_n * &mu_n));
    let b_n = prior.b + 0.5 * (yty + quad0 - quad_n);
    if !(b_n > 0.0) {
        return Err(SomaError::LinearAlgebra(format!("posterior scale {b_n} is not positive")));
    }
    Ok(NigParams {
        mu: mu_n,
        lambda: lambda_n,
        a: a_n,
        b: b_n,
    })
}

/// Draws `(beta, sigma2)` given a Gamma(a, 1) variate `g` and standard
/// normals `z`: `sigma2 = b / g`, `beta = mu + sqrt(sigma2) L^-T z` with
/// `lambda = L L^T`. Feeding two chains the same `g` and `z` couples them.
pub fn sample_theta_with(nig: &NigParams, g: f64, z: &[f64]) -> Result<RegressionTheta> {
    let chol = nig.cholesky()?;
    let sigma2 = nig.b / g;
    let l_t = chol.l().transpose();
    let w = l_t
        .solve_upper_triangular(&DVector::from_column_slice(z))
        .ok_or_else(|| SomaError::LinearAlgebra("singular Cholesky factor".into()))?;
    let beta = &nig.mu + w * sigma2.sqrt();
    Ok(RegressionTheta {
        beta: beta.iter().copied().collect(),
        sigma2,
    })
}

/// The random inputs of one draw from [`sample_theta_with`].
pub fn theta_noise<R: Rng + ?Sized>(rng: &mut R, a: f64, dim: usize) -> Result<(f64, Vec<f64>)> {
    let gamma = Gamma::new(a, 1.0).map_err(|e| SomaError::Domain(format!("Gamma({a}, 1): {e}")))?;
    let g = gamma.sample(rng);
    let z = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    Ok((g, z))
}

/// One draw from the NIG law.
pub fn sample_theta<R: Rng + ?Sized>(rng: &mut R, nig: &NigParams) -> Result<RegressionTheta> {
    let (g, z) = theta_noise(rng, nig.a, nig.dim())?;
    sample_theta_with(nig, g, &z)
}
