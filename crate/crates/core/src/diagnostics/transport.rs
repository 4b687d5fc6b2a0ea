use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SomaError};
use crate::math::log_sum_exp;
use crate::state::State;

/// `W2` between two equal-size empirical measures on the line: the root
/// mean squared difference of the sorted samples.
///
/// ```
/// use soma::diagnostics::wasserstein2_1d;
///
/// assert_eq!(wasserstein2_1d(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), 0.0);
/// assert_eq!(wasserstein2_1d(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
/// ```
pub fn wasserstein2_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(SomaError::Domain("measures must have the same non-zero size".into()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let ms = sa.iter().zip(&sb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64;
    Ok(ms.sqrt())
}

/// Over-relaxation factor for the dual updates; plain Sinkhorn is 1.
const OMEGA: f64 = 1.5;

/// Sinkhorn tolerance at which the final stage hands over to Newton steps.
const NEWTON_SWITCH: f64 = 1e-5;

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

struct Problem {
    cost: Vec<Vec<f64>>,
    log_a: f64,
    log_b: f64,
}

impl Problem {
    fn n(&self) -> usize {
        self.cost.len()
    }

    fn m(&self) -> usize {
        self.cost[0].len()
    }

    fn log_plan(&self, f: &[f64], g: &[f64], eps: f64, i: usize, j: usize) -> f64 {
        (f[i] + g[j] - self.cost[i][j]) / eps + self.log_a + self.log_b
    }

    /// Sets `f` so every row of the plan has its target mass.
    fn fit_rows(&self, f: &mut [f64], g: &[f64], eps: f64, buf: &mut [f64], omega: f64) {
        for i in 0..self.n() {
            for j in 0..self.m() {
                buf[j] = (g[j] - self.cost[i][j]) / eps + self.log_b;
            }
            f[i] = (1.0 - omega) * f[i] - omega * eps * log_sum_exp(&buf[..self.m()]);
        }
    }

    fn fit_cols(&self, f: &[f64], g: &mut [f64], eps: f64, buf: &mut [f64], omega: f64) {
        for j in 0..self.m() {
            for i in 0..self.n() {
                buf[i] = (f[i] - self.cost[i][j]) / eps + self.log_a;
            }
            g[j] = (1.0 - omega) * g[j] - omega * eps * log_sum_exp(&buf[..self.n()]);
        }
    }

    fn row_violation(&self, f: &[f64], g: &[f64], eps: f64) -> f64 {
        let target = self.log_a.exp();
        (0..self.n())
            .map(|i| {
                let row: f64 = (0..self.m()).map(|j| self.log_plan(f, g, eps, i, j).exp()).sum();
                (row - target).abs()
            })
            .sum()
    }

    fn col_sums(&self, f: &[f64], g: &[f64], eps: f64) -> Vec<f64> {
        (0..self.m())
            .map(|j| (0..self.n()).map(|i| self.log_plan(f, g, eps, i, j).exp()).sum())
            .collect()
    }

    /// Dual objective with `f` fitted to the rows, which is concave in `g`.
    fn dual(&self, f: &[f64], g: &[f64]) -> f64 {
        let (a, b) = (self.log_a.exp(), self.log_b.exp());
        a * f.iter().sum::<f64>() + b * g.iter().sum::<f64>()
    }
}

/// Damped Newton ascent on the dual in `g` (with `f` refitted to the rows
/// after each move) until the column marginals are within `tol`.
fn newton_polish(
    pb: &Problem,
    f: &mut [f64],
    g: &mut [f64],
    eps: f64,
    tol: f64,
    iterations: &mut usize,
    max_iter: usize,
) -> Result<()> {
    let (n, m) = (pb.n(), pb.m());
    let a = pb.log_a.exp();
    let b = pb.log_b.exp();
    let mut buf = vec![0.0; n.max(m)];
    pb.fit_rows(f, g, eps, &mut buf, 1.0);
    loop {
        let cols = pb.col_sums(f, g, eps);
        let violation: f64 = cols.iter().map(|c| (c - b).abs()).sum();
        if violation < tol {
            // Report the same marginal as the Sinkhorn loop.
            pb.fit_cols(f, g, eps, &mut buf, 1.0);
            return Ok(());
        }
        if *iterations >= max_iter {
            return Err(SomaError::NonConvergence {
                iterations: *iterations,
                violation,
            });
        }
        *iterations += 1;
        if m == 1 {
            continue;
        }
        // Negative Hessian (times eps) on g[1..]; g[0] fixes the gauge.
        let k = m - 1;
        let mut h = DMatrix::<f64>::zeros(k, k);
        let mut row = vec![0.0; m];
        for i in 0..n {
            for (j, r) in row.iter_mut().enumerate() {
                *r = pb.log_plan(f, g, eps, i, j).exp();
            }
            for p in 1..m {
                for q in 1..m {
                    h[(p - 1, q - 1)] -= row[p] * row[q] / a;
                }
            }
        }
        for p in 1..m {
            h[(p - 1, p - 1)] += cols[p];
        }
        let rhs = DVector::from_iterator(k, (1..m).map(|j| eps * (b - cols[j])));
        let Some(step) = h.clone().cholesky().map(|c| c.solve(&rhs)).or_else(|| h.lu().solve(&rhs)) else {
            return Err(SomaError::NonConvergence {
                iterations: *iterations,
                violation,
            });
        };
        let base = pb.dual(f, g);
        let g0 = g.to_vec();
        let f0 = f.to_vec();
        let mut t = 1.0;
        loop {
            for j in 1..m {
                g[j] = g0[j] + t * step[j - 1];
            }
            pb.fit_rows(f, g, eps, &mut buf, 1.0);
            if pb.dual(f, g) >= base || t < 1e-10 {
                break;
            }
            t *= 0.5;
            f.copy_from_slice(&f0);
        }
    }
}

/// Entropic optimal transport between uniform empirical measures with
/// squared Euclidean cost. Returns the square root of the transport cost
/// of the regularized plan.
///
/// Runs over-relaxed log-domain Sinkhorn, starting from a large
/// regularization and halving it down to `reg`. At `reg` the iterations
/// switch to Newton steps on the dual once the marginals are close, since
/// plain Sinkhorn slows down badly for small `reg`. Converged when the
/// marginals of the plan are within `1e-8` (L1) of uniform. Every Sinkhorn
/// sweep and every Newton step counts towards `max_iter`.
pub fn sinkhorn_w2(a: &State, b: &State, reg: f64, max_iter: usize) -> Result<f64> {
    if a.width() != b.width() {
        return Err(SomaError::Domain("measures live in different dimensions".into()));
    }
    if !(reg > 0.0) || !reg.is_finite() {
        return Err(SomaError::Domain(format!("regularization must be positive, got {reg}")));
    }
    let (n, m) = (a.n(), b.n());
    let pb = Problem {
        cost: a
            .components()
            .map(|x| b.components().map(|y| sq_dist(x, y)).collect())
            .collect(),
        log_a: -(n as f64).ln(),
        log_b: -(m as f64).ln(),
    };
    let c_max = pb.cost.iter().flatten().copied().fold(0.0, f64::max);

    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut buf = vec![0.0; n.max(m)];
    let mut eps = c_max.max(reg);
    let mut iterations = 0;
    loop {
        let last_stage = eps <= reg;
        let tol = if last_stage { NEWTON_SWITCH } else { 1e-4 };
        loop {
            pb.fit_rows(&mut f, &g, eps, &mut buf, OMEGA);
            pb.fit_cols(&f, &mut g, eps, &mut buf, OMEGA);
            iterations += 1;
            let violation = pb.row_violation(&f, &g, eps);
            if violation < tol {
                break;
            }
            if iterations >= max_iter {
                return Err(SomaError::NonConvergence { iterations, violation });
            }
        }
        if last_stage {
            break;
        }
        eps = (eps * 0.5).max(reg);
    }
    if pb.row_violation(&f, &g, eps) >= 1e-8 {
        newton_polish(&pb, &mut f, &mut g, eps, 1e-8, &mut iterations, max_iter)?;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..m {
            total += pb.log_plan(&f, &g, eps, i, j).exp() * pb.cost[i][j];
        }
    }
    Ok(total.sqrt())
}

fn lex_cmp(a: &State, b: &State) -> Ordering {
    a.n()
        .cmp(&b.n())
        .then_with(|| {
            a.as_slice()
                .iter()
                .zip(b.as_slice())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

fn mean_kernel(x: &State, y: &State, gamma: f64) -> f64 {
    let mut s = 0.0;
    for p in x.components() {
        for q in y.components() {
            s += (-gamma * sq_dist(p, q)).exp();
        }
    }
    s / (x.n() * y.n()) as f64
}

/// Median of all pairwise distances in the pooled sample; 1 when that is 0.
pub fn median_heuristic(a: &State, b: &State) -> f64 {
    let pts: Vec<&[f64]> = a.components().chain(b.components()).collect();
    let mut d = Vec::with_capacity(pts.len() * (pts.len() - 1) / 2);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d.push(sq_dist(pts[i], pts[j]).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let k = d.len();
    let med = if k % 2 == 1 { d[k / 2] } else { 0.5 * (d[k / 2 - 1] + d[k / 2]) };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

/// Squared maximum mean discrepancy with kernel `exp(-|x - y|^2 / (2 h^2))`,
/// as the biased V-statistic, so identical samples score exactly 0. With
/// `bandwidth = None` the median heuristic picks `h`.
///
/// The two arguments are put in a canonical order first, which makes the
/// statistic exactly symmetric.
pub fn mmd_rbf(a: &State, b: &State, bandwidth: Option<f64>) -> Result<f64> {
    if a.width() != b.width() {
        return Err(SomaError::Domain("samples live in different dimensions".into()));
    }
    if a.n() < 2 || b.n() < 2 {
        return Err(SomaError::Domain("need at least two points per sample".into()));
    }
    let (x, y) = if lex_cmp(a, b) == Ordering::Greater { (b, a) } else { (a, b) };
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(SomaError::Domain(format!("bandwidth must be positive, got {h}"))),
        None => median_heuristic(x, y),
    };
    let gamma = 1.0 / (2.0 * h * h);
    let kxx = mean_kernel(x, x, gamma);
    let kyy = mean_kernel(y, y, gamma);
    let kxy = mean_kernel(x, y, gamma);
    Ok(kxx + kyy - 2.0 * kxy)
}
