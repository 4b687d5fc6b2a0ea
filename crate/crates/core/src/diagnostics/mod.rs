//! Chain-quality metrics: acceptance, split-R̂, ESS, quantile traces,
//! Wasserstein distances, MMD and two-sample Kolmogorov-Smirnov.

mod mixing;
mod transport;

pub use mixing::{ess, split_rhat, Rhat};
pub use transport::{median_heuristic, mmd_rbf, sinkhorn_w2, wasserstein2_1d};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SomaError};
use crate::samplers::ChainRecord;

/// Fraction of accepted steps.
pub fn acceptance_rate(record: &ChainRecord) -> Result<f64> {
    if record.step_count == 0 {
        return Err(SomaError::Precondition("record has no steps".into()));
    }
    Ok(record.accept_count as f64 / record.step_count as f64)
}

/// Type-7 sample quantile (linear interpolation between order statistics).
/// `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-recorded-iteration quantiles of the state's components. Returns one
/// series per entry of `qs`.
pub fn quantile_trace(record: &ChainRecord, qs: &[f64]) -> Result<Vec<Vec<f64>>> {
    if qs.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(SomaError::Domain("quantile levels must lie in [0, 1]".into()));
    }
    if record.trace.first().is_some_and(|s| s.width() != 1) {
        return Err(SomaError::Domain("quantile traces need scalar components".into()));
    }
    let mut out = vec![Vec::with_capacity(record.trace.len()); qs.len()];
    for state in &record.trace {
        let mut v = state.as_slice().to_vec();
        v.sort_by(f64::total_cmp);
        for (series, &q) in out.iter_mut().zip(qs) {
            series.push(quantile_sorted(&v, q));
        }
    }
    Ok(out)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(SomaError::Domain("samples must be non-empty".into()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic 1% critical value of the two-sample statistic.
pub fn ks_critical_1pct(n: usize, m: usize) -> f64 {
    1.628 * ((n + m) as f64 / (n * m) as f64).sqrt()
}

/// One row of the tidy diagnostics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TidyRow {
    pub metric: String,
    pub kind: String,
    pub iteration: usize,
    pub value: f64,
    pub replicate: usize,
}

/// Writes rows as CSV with a header.
pub fn write_tidy_csv<W: Write>(out: W, rows: &[TidyRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["metric", "kind", "iteration", "value", "replicate"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
