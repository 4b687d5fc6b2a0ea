use serde::{Deserialize, Serialize};

use crate::error::{Result, SomaError};

/// Geometric rate fitted to meeting times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub r_hat: f64,
    pub n_replicates: usize,
    pub censored_count: usize,
}

const MIN_UNCENSORED: usize = 30;

/// Fits `P(tau > t) ~ C r^t` by least squares of `ln S(t)` on `t`.
///
/// `None` entries are runs censored at `censor_t`; they count as
/// `tau > t` for every `t < censor_t`, and the fit never looks past
/// `censor_t`. Only survival values in `[0.05, 0.95]` are used. When fewer
/// than two such points exist, every point with positive survival is used,
/// and when even that leaves fewer than two points the chains meet
/// immediately and `r_hat = 0`.
pub fn estimate_rate(meeting_times: &[Option<usize>], censor_t: usize) -> Result<RateEstimate> {
    let n = meeting_times.len();
    let censored = meeting_times.iter().filter(|t| t.is_none()).count();
    let uncensored = n - censored;
    if uncensored == 0 {
        return Err(SomaError::Estimation("every run was censored".into()));
    }
    if uncensored < MIN_UNCENSORED {
        return Err(SomaError::Estimation(format!(
            "need at least {MIN_UNCENSORED} uncensored meeting times, got {uncensored}"
        )));
    }
    let max_tau = meeting_times.iter().flatten().copied().max().unwrap_or(0);
    let horizon = if censored > 0 { censor_t } else { max_tau + 1 };

    // survival[t] = #(tau > t) / n for t < horizon.
    let mut met_at = vec![0usize; horizon + 1];
    for t in meeting_times.iter().flatten() {
        met_at[(*t).min(horizon)] += 1;
    }
    let mut alive = n;
    let mut survival = Vec::with_capacity(horizon);
    for count in met_at.iter().take(horizon) {
        alive -= count;
        survival.push(alive as f64 / n as f64);
    }

    let window: Vec<(f64, f64)> = survival
        .iter()
        .enumerate()
        .filter(|(_, &s)| (0.05..=0.95).contains(&s))
        .map(|(t, &s)| (t as f64, s.ln()))
        .collect();
    let points = if window.len() >= 2 {
        window
    } else {
        survival
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0.0)
            .map(|(t, &s)| (t as f64, s.ln()))
            .collect()
    };
    let r_hat = if points.len() < 2 { 0.0 } else { slope(&points).exp() };
    Ok(RateEstimate {
        r_hat,
        n_replicates: n,
        censored_count: censored,
    })
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
