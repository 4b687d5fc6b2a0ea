//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines always print.
//! Pass criterion numbers as arguments to run a subset:
//! `cargo test --test acceptance -- 3 8`.

#![allow(clippy::needless_range_loop)]

mod common;

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use common::{dense_nig, random_simplex, Clustered};
use soma::coupling::{
    coupled_step, estimate_rate, maximal_coupling_index, overlap_mass, run_coupled_replicates, CoupledPair,
    CoupledRunConfig, CouplingOutcome,
};
use soma::damcmc::{
    coupled_damcmc_replicates, damcmc_run, fixture, nig_posterior, sample_theta, CovariatePrior, DamcmcConfig,
    DamcmcCoupling, Mechanism, NigParams, PrivateSummary,
};
use soma::diagnostics::{ks_critical_1pct, ks_two_sample, quantile_sorted};
use soma::rng::chain_rng;
use soma::samplers::{
    imwg_acceptance, rate_bound_ran, rate_bound_soma, rate_bound_sys, run_chain, soma_acceptance, sys_update_matrix,
    transition_matrix, SamplerKind,
};
use soma::targets::{
    beta_laplace_target, bernoulli_laplace_target, perturbed_histogram_target, privatize_histogram, uniform_edges,
    BernoulliProposal, Proposal, Target, UniformProposal, WeightVector,
};
use soma::State;

type Outcome = Result<(bool, String), soma::SomaError>;

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria = [
        Criterion { id: 1, name: "exact stationarity and reversibility", budget: secs(1), run: c1_exact_kernels },
        Criterion { id: 2, name: "Peskun-type bound", budget: secs(1), run: c2_peskun },
        Criterion { id: 3, name: "pointwise acceptance dominance", budget: secs(10), run: c3_dominance },
        Criterion { id: 4, name: "acceptance lower bounds", budget: secs(60), run: c4_acceptance_bounds },
        Criterion { id: 5, name: "maximal coupling correctness", budget: secs(30), run: c5_maximal_coupling },
        Criterion { id: 6, name: "n=2 rate bounds", budget: secs(300), run: c6_rate_bounds },
        Criterion { id: 7, name: "contraction and expansion bounds", budget: secs(120), run: c7_contraction },
        Criterion { id: 8, name: "histogram meeting-time scaling", budget: secs(600), run: c8_histogram },
        Criterion { id: 9, name: "Wasserstein contraction", budget: secs(600), run: c9_wasserstein },
        Criterion { id: 10, name: "DAMCMC acceptance and coupling ordering", budget: secs(900), run: c10_damcmc },
        Criterion { id: 11, name: "conjugacy oracle", budget: secs(30), run: c11_conjugacy },
        Criterion { id: 12, name: "marginal equivalence", budget: secs(60), run: c12_marginals },
    ];

    let mut failed = Vec::new();
    let mut ran = 0;
    for c in criteria.iter().filter(|c| selected.is_empty() || selected.contains(&c.id)) {
        ran += 1;
        let start = Instant::now();
        let result = (c.run)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.budget;
        let (ok, detail) = match result {
            Ok((ok, detail)) => (ok, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let pass = ok && in_time;
        println!(
            "[{}] criterion {:>2} {}: {} ({:.1}s of {}s{})",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            detail,
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
        if !pass {
            failed.push(c.id);
        }
    }
    println!("acceptance: {} of {} criteria passed", ran - failed.len(), ran);
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn info(line: impl AsRef<str>) {
    println!("       info: {}", line.as_ref());
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, 0.5)
}

fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

const TOL_EXACT: f64 = 1e-12;

type Case = (String, Box<dyn Target>, Box<dyn Proposal>);

fn finite_targets() -> Vec<Case> {
    let mut out: Vec<Case> = Vec::new();
    for (n, s) in [(3, 1), (4, 2)] {
        let t = bernoulli_laplace_target(n, s, 0.5).unwrap();
        let q = t.proposal();
        out.push((format!("bernoulli-laplace({n},{s})"), Box::new(t), Box::new(q)));
    }
    for n in [4, 5] {
        out.push((format!("clustered({n})"), Box::new(Clustered::new(n)), Box::new(BernoulliProposal::new(0.3).unwrap())));
    }
    out
}

fn c1_exact_kernels() -> Outcome {
    let mut stat: f64 = 0.0;
    let mut balance: f64 = 0.0;
    let mut rows: f64 = 0.0;
    for (_, t, q) in finite_targets() {
        for kind in SamplerKind::ALL {
            let m = transition_matrix(kind, t.as_ref(), q.as_ref())?;
            stat = stat.max(m.stationarity_error());
            rows = rows.max(m.row_sum_error());
            if kind == SamplerKind::SysImwg {
                // The sweep is stationary; each slot update is reversible.
                for i in 0..t.n() {
                    let u = sys_update_matrix(t.as_ref(), q.as_ref(), i)?;
                    stat = stat.max(u.stationarity_error());
                    balance = balance.max(u.detailed_balance_error());
                }
            } else {
                balance = balance.max(m.detailed_balance_error());
            }
        }
    }
    let ok = stat <= TOL_EXACT && balance <= TOL_EXACT && rows <= TOL_EXACT;
    Ok((
        ok,
        format!("max |piP - pi| = {stat:.1e}, max detailed-balance gap = {balance:.1e}, max row-sum error = {rows:.1e} (tol 1e-12)"),
    ))
}

fn c2_peskun() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for (_, t, q) in finite_targets() {
        let soma = transition_matrix(SamplerKind::Soma, t.as_ref(), q.as_ref())?;
        let ran = transition_matrix(SamplerKind::RanImwg, t.as_ref(), q.as_ref())?;
        let n = t.n() as f64;
        for a in 0..soma.len() {
            for b in (0..soma.len()).filter(|&b| b != a) {
                worst = worst.max(soma.p[a][b] - n * ran.p[a][b]);
            }
        }
    }
    Ok((worst <= TOL_EXACT, format!("max off-diagonal P_soma - n P_ran = {worst:.1e} (tol 1e-12)")))
}

fn c3_dominance() -> Outcome {
    let mut rng = chain_rng(3);
    let draws = 1_000_000;
    let mut worst_point = f64::NEG_INFINITY;
    let mut worst_avg = f64::NEG_INFINITY;
    for _ in 0..draws {
        let n = rng.random_range(2..=10);
        let log_w: Vec<f64> = (0..=n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let w = WeightVector::from_log_weights(log_w)?;
        let sel = w.selection_probs();
        let mut soma_avg = 0.0;
        let mut imwg_avg = 0.0;
        for (i, p) in sel.iter().enumerate() {
            let (a_soma, a_imwg) = (soma_acceptance(&w, i), imwg_acceptance(&w, i));
            worst_point = worst_point.max(a_imwg - a_soma);
            soma_avg += p * a_soma;
            imwg_avg += a_imwg / n as f64;
        }
        worst_avg = worst_avg.max(imwg_avg - soma_avg);
    }
    let ok = worst_point <= TOL_EXACT && worst_avg <= TOL_EXACT;
    Ok((
        ok,
        format!("{draws} weight vectors: max (a_imwg - a_soma) = {worst_point:.2e}, max weighted-average gap = {worst_avg:.2e} (tol 1e-12)"),
    ))
}

fn c4_acceptance_bounds() -> Outcome {
    let iters = 50_000;
    let mut ok = true;
    let mut margins = Vec::new();
    for eps in [0.5, 1.0, 3.0] {
        for n in [2, 10] {
            let t = beta_laplace_target(10.0, 10.0, eps, 0.5, n)?;
            let q = t.prior_proposal();
            let init = State::scalar(vec![0.5; n])?;
            for kind in SamplerKind::ALL {
                let rec = run_chain(kind, &t, q.as_ref(), &init, iters, 40 + n as u64, iters)?;
                let rate = rec.acceptance_rate();
                let bound = match kind {
                    SamplerKind::Soma => n as f64 / (n as f64 + eps.exp() - 1.0),
                    _ => (-eps).exp(),
                };
                let floor = bound - 3.0 * binomial_se(rate, iters);
                ok &= rate >= floor;
                margins.push(rate - bound);
                info(format!("eps={eps} n={n} {kind}: acceptance {rate:.4} vs bound {bound:.4}"));
            }
        }
    }
    let least = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((ok, format!("18 runs of {iters} iterations, smallest margin over bound {least:+.4} (tol 3 s.e.)")))
}

fn chi_square_passes(counts: &[u64], probs: &[f64], draws: u64) -> bool {
    let mut stat = 0.0;
    let mut cells = 0;
    for (&c, &p) in counts.iter().zip(probs) {
        if p > 0.0 {
            let e = p * draws as f64;
            stat += (c as f64 - e).powi(2) / e;
            cells += 1;
        } else if c > 0 {
            return false;
        }
    }
    if cells < 2 {
        return true;
    }
    stat <= ChiSquared::new((cells - 1) as f64).unwrap().inverse_cdf(0.99)
}

fn c5_maximal_coupling() -> Outcome {
    let mut rng = chain_rng(5);
    let draws = 1_000_000u64;
    let mut chi_fail = 0;
    let mut worst_z: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(2..=10);
        let p = random_simplex(&mut rng, n);
        let pt = random_simplex(&mut rng, n);
        let mut ci = vec![0u64; n];
        let mut cj = vec![0u64; n];
        let mut met = 0u64;
        for _ in 0..draws {
            let (i, j) = maximal_coupling_index(&mut rng, &p, &pt)?;
            ci[i] += 1;
            cj[j] += 1;
            met += (i == j) as u64;
        }
        chi_fail += !chi_square_passes(&ci, &p, draws) as usize;
        chi_fail += !chi_square_passes(&cj, &pt, draws) as usize;
        let target = overlap_mass(&p, &pt);
        let freq = met as f64 / draws as f64;
        worst_z = worst_z.max((freq - target).abs() / binomial_se(target, draws as usize));
    }
    let ok = chi_fail == 0 && worst_z <= 3.0;
    Ok((
        ok,
        format!("20 pairs x {draws} draws: {chi_fail} of 40 marginal chi-square tests rejected at 1%, worst meeting-frequency deviation {worst_z:.2} s.e. (tol 3)"),
    ))
}

fn meeting_times(outcomes: &[CouplingOutcome]) -> Vec<Option<usize>> {
    outcomes.iter().map(|o| o.meeting_time).collect()
}

fn c6_rate_bounds() -> Outcome {
    let spots = (rate_bound_soma(1.0)?, rate_bound_ran(1.0)?, rate_bound_sys(1.0)?);
    let mut ok = spots == (0.5, 0.5, 0.0);
    let mut worst = f64::NEG_INFINITY;
    let config = CoupledRunConfig {
        t_max: 10_000,
        burn_in: 10_000,
        record_distance: false,
        record_w2: false,
        align: false,
    };
    for eps in [0.5, 1.0] {
        let m = f64::exp(eps);
        let t = beta_laplace_target(10.0, 10.0, eps, 0.5, 2)?;
        let q = t.prior_proposal();
        let init = State::scalar(vec![0.5, 0.5])?;
        for kind in SamplerKind::ALL {
            let out = run_coupled_replicates(kind, &t, q.as_ref(), &init, &config, 60, 200)?;
            let est = estimate_rate(&meeting_times(&out), config.t_max)?;
            let bound = match kind {
                SamplerKind::Soma => rate_bound_soma(m)?,
                SamplerKind::RanImwg => rate_bound_ran(m)?,
                SamplerKind::SysImwg => rate_bound_sys(m)?,
            };
            ok &= est.r_hat <= bound + 0.05;
            worst = worst.max(est.r_hat - bound);
            info(format!("eps={eps} {kind}: r_hat {:.4} vs bound {bound:.4} ({} censored)", est.r_hat, est.censored_count));
        }
    }
    Ok((
        ok,
        format!(
            "bounds at M=1 = ({}, {}, {}); max r_hat - bound = {worst:+.4} (tol +0.05)",
            spots.0, spots.1, spots.2
        ),
    ))
}

fn c7_contraction() -> Outcome {
    let trials = 200_000;
    let mut rng = chain_rng(7);
    let mut ok = true;
    let mut lines = Vec::new();
    for eps in [0.5, 1.0, 2.0] {
        let m = f64::exp(eps);
        let t = beta_laplace_target(10.0, 10.0, eps, 0.5, 2)?;
        let q = t.prior_proposal();
        for kind in [SamplerKind::Soma, SamplerKind::RanImwg] {
            let (mut to_zero, mut to_two) = (0usize, 0usize);
            let mut buf = [0.0; 3];
            for _ in 0..trials {
                for v in buf.iter_mut() {
                    q.sample(&mut rng, std::slice::from_mut(v));
                }
                // Shared component in a random slot; both chain orders occur.
                let slot = rng.random_range(0..2);
                let mut a = [0.0; 2];
                let mut b = [0.0; 2];
                a[slot] = buf[0];
                b[slot] = buf[0];
                a[1 - slot] = buf[1];
                b[1 - slot] = buf[2];
                let mut pair = CoupledPair::new(State::scalar(a.to_vec())?, State::scalar(b.to_vec())?);
                coupled_step(&mut rng, kind, &t, q.as_ref(), &mut pair)?;
                match pair.distance() {
                    0 => to_zero += 1,
                    2 => to_two += 1,
                    _ => {}
                }
            }
            let p0 = to_zero as f64 / trials as f64;
            let lower = match kind {
                SamplerKind::Soma => 2.0 / ((m + 1.0) * (m + 1.0)),
                _ => 0.5 / m,
            };
            ok &= p0 >= lower - 3.0 * binomial_se(p0, trials);
            lines.push(format!("M=e^{eps} {kind}: P(d'=0) {p0:.4} >= {lower:.4}"));
            if kind == SamplerKind::Soma {
                let p2 = to_two as f64 / trials as f64;
                let upper = m * (m - 1.0) / ((m + 1.0) * (m + 1.0));
                ok &= p2 <= upper + 3.0 * binomial_se(p2, trials);
                lines.push(format!("M=e^{eps} soma: P(d'=2) {p2:.4} <= {upper:.4}"));
            }
        }
    }
    for l in &lines {
        info(l);
    }
    Ok((ok, format!("{} one-step probabilities over {trials} trials each (tol 3 s.e.)", lines.len())))
}

struct HistogramSetup {
    target: soma::targets::PerturbedHistogram,
    init: State,
}

fn histogram_setup(n: usize, seed: u64) -> Result<HistogramSetup, soma::SomaError> {
    let mut rng = chain_rng(seed);
    let edges = uniform_edges(10);
    let data: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let noisy = privatize_histogram(&data, &edges, 5.0, &mut rng)?;
    let target = perturbed_histogram_target(&edges, &noisy, 5.0, n)?;
    let init = State::scalar((0..n).map(|_| rng.random::<f64>()).collect())?;
    Ok(HistogramSetup { target, init })
}

fn mean_tau(out: &[CouplingOutcome]) -> (f64, usize) {
    let taus: Vec<f64> = out.iter().map(|o| o.tau_or_t_max() as f64).collect();
    (mean(&taus), out.iter().filter(|o| o.censored()).count())
}

fn histogram_means(n: usize, t_max: usize, align: bool) -> Result<Vec<(SamplerKind, f64, usize)>, soma::SomaError> {
    let setup = histogram_setup(n, 80 + n as u64)?;
    let config = CoupledRunConfig {
        t_max,
        burn_in: 1_000,
        record_distance: false,
        record_w2: false,
        align,
    };
    SamplerKind::ALL
        .iter()
        .map(|&kind| {
            let out = run_coupled_replicates(kind, &setup.target, &UniformProposal, &setup.init, &config, 8, 50)?;
            let (m, c) = mean_tau(&out);
            Ok((kind, m, c))
        })
        .collect()
}

fn describe(rows: &[(SamplerKind, f64, usize)]) -> String {
    rows.iter()
        .map(|(k, m, c)| format!("{k} {m:.0} ({c} censored)"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn c8_histogram() -> Outcome {
    let t_max = 100_000;
    let n10 = histogram_means(10, t_max, true)?;
    info(format!("n=10 relabeled, mean tau: {}", describe(&n10)));
    let n20 = histogram_means(20, t_max, true)?;
    info(format!("n=20 relabeled, mean tau: {}", describe(&n20)));
    let strict = histogram_means(20, 20_000, false)?;
    info(format!("n=20 strict slot-wise coupling (t_max 20000), mean tau: {}", describe(&strict)));
    let soma = n20[0].1;
    let best_baseline = n20[1].1.min(n20[2].1);
    // Censored baseline runs count at t_max, which can only shrink their mean.
    let ratio = soma / best_baseline;
    Ok((
        ratio <= 0.1,
        format!("n=20, 50 replicates: SOMA mean tau {soma:.0}, best baseline {best_baseline:.0}, ratio {ratio:.4} (tol 0.1)"),
    ))
}

fn c9_wasserstein() -> Outcome {
    let horizon = 2_000;
    let setup = histogram_setup(10, 90)?;
    let config = CoupledRunConfig {
        t_max: horizon,
        burn_in: 1_000,
        record_distance: false,
        record_w2: true,
        align: false,
    };
    let mut medians = Vec::new();
    for kind in SamplerKind::ALL {
        let out = run_coupled_replicates(kind, &setup.target, &UniformProposal, &setup.init, &config, 9, 50)?;
        let w2: Vec<f64> = out.iter().map(|o| o.w2_at(horizon).expect("trace reaches the horizon")).collect();
        medians.push(median(&w2));
    }
    let ok = medians[0] < medians[1] && medians[0] < medians[2];
    Ok((
        ok,
        format!(
            "n=10, 50 replicates, median W2 at t={horizon}: soma {:.4}, ran {:.4}, sys {:.4}",
            medians[0], medians[1], medians[2]
        ),
    ))
}

fn linreg_setup(eps: f64, n: usize) -> Result<(PrivateSummary, NigParams, CovariatePrior), soma::SomaError> {
    let mechanism = Mechanism::new(vec![-6.0, -6.0, -7.0], vec![6.0, 6.0, 7.0], eps, n)?;
    let summary = PrivateSummary {
        s_dp: fixture(eps)?.s_dp,
        mechanism,
    };
    Ok((summary, NigParams::isotropic(3, 0.5, 10.0, 10.0)?, CovariatePrior::standard(vec![0.9, -1.17])?))
}

fn c10_damcmc() -> Outcome {
    let (summary, prior, covariates) = linreg_setup(30.0, 10)?;
    let config = |kind, iters| DamcmcConfig {
        kind,
        prior: prior.clone(),
        covariates: covariates.clone(),
        iters,
        imputation_steps: None,
    };
    let mut acceptance = Vec::new();
    for kind in SamplerKind::ALL {
        let rates: Vec<f64> = (0..50)
            .map(|r| damcmc_run(&config(kind, 200), &summary, None, 1000 + r).map(|rec| rec.acceptance_rate().unwrap()))
            .collect::<Result<_, _>>()?;
        acceptance.push(mean(&rates));
    }
    let mut taus = Vec::new();
    for align in [true, false] {
        let coupling = DamcmcCoupling {
            t_max: 5_000,
            burn_in: 200,
            align,
        };
        let mut rows = Vec::new();
        for kind in SamplerKind::ALL {
            let out = coupled_damcmc_replicates(&config(kind, 0), &summary, &coupling, 10, 50)?;
            let (m, c) = mean_tau(&out);
            rows.push((kind, m, c));
        }
        if align {
            taus = rows.iter().map(|r| r.1).collect();
            info(format!("relabeled coupling, mean tau: {}", describe(&rows)));
        } else {
            info(format!("strict slot-wise coupling, mean tau: {}", describe(&rows)));
        }
    }
    let ok = acceptance[0] >= 0.80
        && acceptance[1] <= 0.60
        && acceptance[2] <= 0.60
        && taus[0] < taus[1]
        && taus[0] < taus[2];
    Ok((
        ok,
        format!(
            "acceptance soma {:.4} (>= 0.80), ran {:.4}, sys {:.4} (<= 0.60); mean tau soma {:.1}, ran {:.1}, sys {:.1}",
            acceptance[0], acceptance[1], acceptance[2], taus[0], taus[1], taus[2]
        ),
    ))
}

fn c11_conjugacy() -> Outcome {
    let mut rng = chain_rng(11);
    let n = 30;
    let beta_true = [-1.79, 0.8, -0.4];
    let mut records = Vec::with_capacity(3 * n);
    for _ in 0..n {
        let (x1, x2): (f64, f64) = (rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0);
        let y = beta_true[0] + beta_true[1] * x1 + beta_true[2] * x2 + 0.5 * (rng.random::<f64>() - 0.5);
        records.extend([x1, x2, y]);
    }
    let data = State::new(records, 3)?;
    let x: Vec<Vec<f64>> = data.components().map(|r| r[..2].to_vec()).collect();
    let y: Vec<f64> = data.components().map(|r| r[2]).collect();

    // Oracle comparison under a non-trivial prior.
    let mu0 = vec![0.3, -0.2, 0.1];
    let l0 = vec![vec![2.0, 0.3, 0.1], vec![0.3, 1.5, -0.2], vec![0.1, -0.2, 1.0]];
    let prior = NigParams::new(mu0.clone(), DMatrix::from_fn(3, 3, |j, k| l0[j][k]), 3.0, 2.0)?;
    let post = nig_posterior(&prior, &x, &y)?;
    let (mu_o, l_o, a_o, b_o) = dense_nig(&mu0, &l0, 3.0, 2.0, &x, &y);
    let rel = |a: f64, b: f64| (a - b).abs() / (1.0 + b.abs());
    let mut gap = rel(post.a, a_o).max(rel(post.b, b_o));
    for j in 0..3 {
        gap = gap.max(rel(post.mu[j], mu_o[j]));
        for k in 0..3 {
            gap = gap.max(rel(post.lambda[(j, k)], l_o[j][k]));
        }
    }

    // Frozen records: every theta draw comes from the conjugate posterior.
    let mechanism = Mechanism::new(vec![-6.0, -6.0, -7.0], vec![6.0, 6.0, 7.0], f64::INFINITY, n)?;
    let summary = PrivateSummary {
        s_dp: mechanism.summaries(&data),
        mechanism,
    };
    let draws = 4_000;
    let config = DamcmcConfig {
        kind: SamplerKind::Soma,
        prior: prior.clone(),
        covariates: CovariatePrior::standard(vec![0.0, 0.0])?,
        iters: draws,
        imputation_steps: Some(0),
    };
    let rec = damcmc_run(&config, &summary, Some(&data), 12)?;
    let direct: Vec<_> = (0..draws).map(|_| sample_theta(&mut rng, &post)).collect::<Result<_, _>>()?;
    let crit = ks_critical_1pct(draws, draws);
    let mut ks_worst: f64 = 0.0;
    for k in 0..3 {
        let d: Vec<f64> = direct.iter().map(|t| t.beta[k]).collect();
        ks_worst = ks_worst.max(ks_two_sample(&rec.beta_trace(k), &d)?);
    }
    let s_chain: Vec<f64> = rec.thetas.iter().map(|t| t.sigma2).collect();
    let s_direct: Vec<f64> = direct.iter().map(|t| t.sigma2).collect();
    ks_worst = ks_worst.max(ks_two_sample(&s_chain, &s_direct)?);

    let ok = gap <= 1e-10 && ks_worst < crit;
    Ok((
        ok,
        format!("oracle gap {gap:.1e} (tol 1e-10); worst K-S over beta and sigma2 {ks_worst:.4} vs 1% critical {crit:.4}"),
    ))
}

fn c12_marginals() -> Outcome {
    let n = 5;
    let t = beta_laplace_target(10.0, 10.0, 1.0, 0.5, n)?;
    let q = t.prior_proposal();
    let init = State::scalar(vec![0.5; n])?;
    let thin = 20;
    let rec = run_chain(SamplerKind::Soma, &t, q.as_ref(), &init, 100_000, 120, thin)?;
    let first: Vec<f64> = rec.trace.iter().map(|s| s.component(0)[0]).collect();
    let second: Vec<f64> = rec.trace.iter().map(|s| s.component(1)[0]).collect();
    let d = ks_two_sample(&first, &second)?;
    let crit = ks_critical_1pct(first.len(), second.len());
    Ok((
        d < crit,
        format!("components 0 and 1 over 1e5 iterations (thinned by {thin}): K-S {d:.4} vs 1% critical {crit:.4}"),
    ))
}
