use rand::Rng;

use super::{AdditiveStructure, Target};
use crate::error::{Result, SomaError};
use crate::math::{laplace_log_pdf, sample_laplace};
use crate::state::{ComponentSpace, State};

/// Posterior of `n` points in `(0, 1)` under a uniform prior, given a
/// histogram whose bin counts were released with Laplace(0, 2/eps) noise.
#[derive(Debug, Clone)]
pub struct PerturbedHistogram {
    edges: Vec<f64>,
    noisy_counts: Vec<f64>,
    eps: f64,
    n: usize,
}

/// `m` equal-width bins on `[0, 1]`.
pub fn uniform_edges(m: usize) -> Vec<f64> {
    (0..=m).map(|j| j as f64 / m as f64).collect()
}

fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 {
        return Err(SomaError::Config("need at least one bin".into()));
    }
    if edges[0] != 0.0 || edges[edges.len() - 1] != 1.0 {
        return Err(SomaError::Config(format!(
            "bin edges must run from 0 to 1, got {} .. {}",
            edges[0],
            edges[edges.len() - 1]
        )));
    }
    if edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(SomaError::Config("bin edges must be strictly increasing".into()));
    }
    Ok(())
}

/// Index of the bin `[e_j, e_{j+1})` holding `x`, for `x` in `(0, 1)`.
fn bin_of(edges: &[f64], x: f64) -> usize {
    let k = edges.partition_point(|&e| e <= x);
    (k - 1).min(edges.len() - 2)
}

pub fn perturbed_histogram_target(
    bin_edges: &[f64],
    noisy_counts: &[f64],
    eps: f64,
    n: usize,
) -> Result<PerturbedHistogram> {
    check_edges(bin_edges)?;
    if noisy_counts.len() != bin_edges.len() - 1 {
        return Err(SomaError::Config(format!(
            "{} bins but {} noisy counts",
            bin_edges.len() - 1,
            noisy_counts.len()
        )));
    }
    if noisy_counts.iter().any(|c| !c.is_finite()) {
        return Err(SomaError::Config("noisy counts must be finite".into()));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(SomaError::Config(format!("privacy budget must be positive and finite, got {eps}")));
    }
    if n == 0 {
        return Err(SomaError::Config("need at least one component".into()));
    }
    Ok(PerturbedHistogram {
        edges: bin_edges.to_vec(),
        noisy_counts: noisy_counts.to_vec(),
        eps,
        n,
    })
}

/// Releases bin counts of `data` with independent Laplace(0, 2/eps) noise.
/// An infinite budget returns the exact counts.
pub fn privatize_histogram<R: Rng + ?Sized>(
    data: &[f64],
    bin_edges: &[f64],
    eps: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_edges(bin_edges)?;
    let mut counts = vec![0.0; bin_edges.len() - 1];
    for &x in data {
        if !(x > 0.0 && x < 1.0) {
            return Err(SomaError::Domain(format!("data point {x} outside (0, 1)")));
        }
        counts[bin_of(bin_edges, x)] += 1.0;
    }
    let scale = 2.0 / eps;
    for c in counts.iter_mut() {
        *c += sample_laplace(rng, scale);
    }
    Ok(counts)
}

impl PerturbedHistogram {
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn noisy_counts(&self) -> &[f64] {
        &self.noisy_counts
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Bin counts of a state.
    pub fn counts(&self, state: &State) -> Vec<f64> {
        let mut c = vec![0.0; self.edges.len() - 1];
        for p in state.components() {
            c[bin_of(&self.edges, p[0])] += 1.0;
        }
        c
    }
}

impl Target for PerturbedHistogram {
    fn n(&self) -> usize {
        self.n
    }

    fn space(&self) -> ComponentSpace {
        ComponentSpace::Real
    }

    fn log_density(&self, state: &State) -> f64 {
        super::additive_log_density(self, state)
    }

    fn additive(&self) -> Option<&dyn AdditiveStructure> {
        Some(self)
    }

    /// One record moving between bins shifts two counts by one each.
    fn ratio_bound(&self) -> Option<f64> {
        Some(self.eps.exp())
    }
}

impl AdditiveStructure for PerturbedHistogram {
    fn summary_dim(&self) -> usize {
        self.edges.len() - 1
    }

    fn stat(&self, point: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let x = point[0];
        if x > 0.0 && x < 1.0 {
            out[bin_of(&self.edges, x)] = 1.0;
        }
    }

    fn log_observation(&self, total: &[f64]) -> f64 {
        let scale = 2.0 / self.eps;
        self.noisy_counts
            .iter()
            .zip(total)
            .map(|(&d, &c)| laplace_log_pdf(d, c, scale))
            .sum()
    }

    fn log_prior(&self, point: &[f64]) -> f64 {
        if point[0] > 0.0 && point[0] < 1.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }
}
