#![allow(dead_code)]

use soma::targets::Target;
use soma::{ComponentSpace, State};

/// Binary components with `log pi(x) = h * sum(x) - lambda * (sum(x) - c)^2`.
///
/// Permutation invariant, not a product measure, and every single-slot
/// replacement stays in the support, so the enumerated kernels are far from
/// the identity.
#[derive(Debug, Clone)]
pub struct Clustered {
    pub n: usize,
    pub h: f64,
    pub lambda: f64,
    pub c: f64,
}

impl Clustered {
    pub fn new(n: usize) -> Self {
        Clustered {
            n,
            h: 0.4,
            lambda: 0.7,
            c: n as f64 / 3.0,
        }
    }
}

impl Target for Clustered {
    fn n(&self) -> usize {
        self.n
    }

    fn space(&self) -> ComponentSpace {
        ComponentSpace::Binary
    }

    fn log_density(&self, state: &State) -> f64 {
        let s: f64 = state.as_slice().iter().sum();
        self.h * s - self.lambda * (s - self.c).powi(2)
    }

    fn support_states(&self) -> Option<Vec<State>> {
        Some(
            (0..1u32 << self.n)
                .map(|bits| State::scalar((0..self.n).map(|j| ((bits >> j) & 1) as f64).collect()).unwrap())
                .collect(),
        )
    }
}

/// Normalized target probabilities over `support_states`.
pub fn probabilities<T: Target>(target: &T) -> Vec<f64> {
    let states = target.support_states().unwrap();
    let w: Vec<f64> = states.iter().map(|s| target.log_density(s).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

/// Random point of the simplex of the given dimension (flat Dirichlet).
pub fn random_simplex<R: rand::Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..dim).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Conjugate NIG update with an explicit Gauss-Jordan inverse on plain
/// arrays. Returns `(mu_n, lambda_n, a_n, b_n)`.
pub fn dense_nig(mu0: &[f64], l0: &[Vec<f64>], a0: f64, b0: f64, x: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>, f64, f64) {
    let d = mu0.len();
    let rows: Vec<Vec<f64>> = x.iter().map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect()).collect();
    let mut ln = l0.to_vec();
    let mut rhs: Vec<f64> = (0..d).map(|j| (0..d).map(|k| l0[j][k] * mu0[k]).sum()).collect();
    for (r, yi) in rows.iter().zip(y) {
        for j in 0..d {
            rhs[j] += r[j] * yi;
            for k in 0..d {
                ln[j][k] += r[j] * r[k];
            }
        }
    }
    let mut aug: Vec<Vec<f64>> = (0..d)
        .map(|j| ln[j].iter().copied().chain((0..d).map(|k| (j == k) as u8 as f64)).collect())
        .collect();
    for col in 0..d {
        let piv = (col..d).max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs())).unwrap();
        aug.swap(col, piv);
        let p = aug[col][col];
        aug[col].iter_mut().for_each(|v| *v /= p);
        for r in (0..d).filter(|&r| r != col) {
            let f = aug[r][col];
            let pivot_row = aug[col].clone();
            aug[r].iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
        }
    }
    let inv: Vec<Vec<f64>> = aug.iter().map(|r| r[d..].to_vec()).collect();
    let mu: Vec<f64> = (0..d).map(|j| (0..d).map(|k| inv[j][k] * rhs[k]).sum()).collect();
    let quad = |m: &[f64], l: &[Vec<f64>]| -> f64 { (0..d).map(|j| (0..d).map(|k| m[j] * l[j][k] * m[k]).sum::<f64>()).sum() };
    let yty: f64 = y.iter().map(|v| v * v).sum();
    let a = a0 + y.len() as f64 / 2.0;
    let b = b0 + 0.5 * (yty + quad(mu0, l0) - quad(&mu, &ln));
    (mu, ln, a, b)
}
