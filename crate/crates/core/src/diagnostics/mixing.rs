use statrs::function::erf::erfc_inv;

use crate::error::{Result, SomaError};

/// Standard normal quantile.
pub(crate) fn normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Split-R̂ with its degeneracy flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rhat {
    pub value: f64,
    /// Set when the draws have no spread, in which case `value` is 1.
    pub degenerate: bool,
}

/// Fractional ranks (ties averaged), mapped to normal scores with the
/// `(r - 3/8) / (S + 1/4)` offset.
fn rank_normalize(values: &[f64]) -> Vec<f64> {
    let s = values.len();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; s];
    let mut k = 0;
    while k < s {
        let mut end = k + 1;
        while end < s && values[order[end]] == values[order[k]] {
            end += 1;
        }
        // 1-based ranks k+1 ..= end share their average.
        let avg = (k + 1 + end) as f64 / 2.0;
        for &idx in &order[k..end] {
            ranks[idx] = avg;
        }
        k = end;
    }
    ranks
        .into_iter()
        .map(|r| normal_quantile((r - 0.375) / (s as f64 + 0.25)))
        .collect()
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Classic potential scale reduction on equal-length chains. `None` when
/// the within-chain variance vanishes.
fn basic_rhat(chains: &[&[f64]]) -> Option<f64> {
    let n = chains[0].len() as f64;
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(c)).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / stats.len() as f64;
    if !(w > 0.0) {
        return None;
    }
    let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let b_over_n = mean_var(&means).1;
    let var_plus = (n - 1.0) / n * w + b_over_n;
    Some((var_plus / w).sqrt())
}

/// Splits each chain in half (dropping a middle draw for odd lengths).
fn split(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let h = c.len() / 2;
        out.push(c[..h].to_vec());
        out.push(c[c.len() - h..].to_vec());
    }
    out
}

/// Rank-normalized split-R̂: the larger of the bulk statistic on
/// rank-normalized draws and the tail statistic on rank-normalized
/// distances from the pooled median. Never below 1.
pub fn split_rhat(chains: &[&[f64]]) -> Result<Rhat> {
    if chains.is_empty() {
        return Err(SomaError::Precondition("need at least one chain".into()));
    }
    let len = chains[0].len();
    if len < 4 || chains.iter().any(|c| c.len() != len) {
        return Err(SomaError::Precondition("chains must have equal length of at least 4".into()));
    }
    if chains.iter().flat_map(|c| c.iter()).any(|v| !v.is_finite()) {
        return Err(SomaError::Precondition("chains must be finite".into()));
    }
    let halves = split(chains);
    let h = halves[0].len();
    let pooled: Vec<f64> = halves.iter().flatten().copied().collect();
    let first = pooled[0];
    if pooled.iter().all(|&v| v == first) {
        return Ok(Rhat {
            value: 1.0,
            degenerate: true,
        });
    }

    let stat = |draws: &[f64]| -> Option<f64> {
        let z = rank_normalize(draws);
        let parts: Vec<&[f64]> = z.chunks(h).collect();
        basic_rhat(&parts)
    };
    let med = median(&pooled);
    let folded: Vec<f64> = pooled.iter().map(|v| (v - med).abs()).collect();
    let bulk = stat(&pooled);
    let tail = stat(&folded);
    let value = match (bulk, tail) {
        (None, None) => {
            return Ok(Rhat {
                value: 1.0,
                degenerate: true,
            })
        }
        (b, t) => b.unwrap_or(1.0).max(t.unwrap_or(1.0)),
    };
    Ok(Rhat {
        value: value.max(1.0),
        degenerate: false,
    })
}

/// Effective sample size `N / tau` of a single chain, with `tau` from
/// Geyer's initial monotone positive sequence of paired autocorrelations.
///
/// Strongly antithetic chains have `tau < 1` and report more effective
/// draws than actual draws; the value is capped at `N log10 N`.
pub fn ess(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 8 {
        return Err(SomaError::Precondition("need at least 8 draws".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SomaError::Precondition("draws must be finite".into()));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let acov = |lag: usize| -> f64 { centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum::<f64>() / nf };
    let c0 = acov(0);
    if !(c0 > 0.0) {
        return Ok(nf);
    }
    let rho = |lag: usize| acov(lag) / c0;

    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let (r0, r1) = (rho(2 * k), rho(2 * k + 1));
        let mut gamma = r0 + r1;
        if gamma <= 0.0 {
            break;
        }
        gamma = gamma.min(prev);
        prev = gamma;
        sum += gamma;
        k += 1;
    }
    let tau = (-1.0 + 2.0 * sum).max(1.0 / nf.log10());
    Ok((nf / tau).min(nf * nf.log10()))
}
