use super::{AdditiveStructure, BernoulliProposal, Target};
use crate::error::{Result, SomaError};
use crate::state::{ComponentSpace, State};

/// Uniform distribution over binary vectors of length `n` with exactly `s`
/// ones.
///
/// Every single-component replacement changes the number of ones, so any
/// proposed swap that is not an identity swap lands outside the support.
#[derive(Debug, Clone)]
pub struct BernoulliLaplace {
    n: usize,
    s: usize,
    p: f64,
    log_mass: f64,
}

/// Builds the Bernoulli-Laplace target. `p` is the success probability of
/// the paired Bernoulli proposal returned by [`BernoulliLaplace::proposal`].
pub fn bernoulli_laplace_target(n: usize, s: usize, p: f64) -> Result<BernoulliLaplace> {
    if n == 0 {
        return Err(SomaError::Config("need at least one component".into()));
    }
    if s > n {
        return Err(SomaError::Config(format!("s = {s} exceeds n = {n}")));
    }
    BernoulliProposal::new(p)?;
    Ok(BernoulliLaplace {
        n,
        s,
        p,
        log_mass: -ln_choose(n, s),
    })
}

fn ln_choose(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|j| ((n - j) as f64 / (j + 1) as f64).ln()).sum()
}

impl BernoulliLaplace {
    pub fn s(&self) -> usize {
        self.s
    }

    pub fn proposal(&self) -> BernoulliProposal {
        BernoulliProposal::new(self.p).expect("validated at construction")
    }
}

impl Target for BernoulliLaplace {
    fn n(&self) -> usize {
        self.n
    }

    fn space(&self) -> ComponentSpace {
        ComponentSpace::Binary
    }

    fn log_density(&self, state: &State) -> f64 {
        super::additive_log_density(self, state)
    }

    fn additive(&self) -> Option<&dyn AdditiveStructure> {
        Some(self)
    }

    fn support_states(&self) -> Option<Vec<State>> {
        // Lexicographic enumeration of all 0/1 vectors with s ones.
        let mut out = Vec::new();
        let mut buf = vec![0.0; self.n];
        fn rec(pos: usize, left: usize, buf: &mut Vec<f64>, out: &mut Vec<State>) {
            let n = buf.len();
            if left > n - pos {
                return;
            }
            if pos == n {
                out.push(State::scalar(buf.clone()).expect("non-empty"));
                return;
            }
            buf[pos] = 0.0;
            rec(pos + 1, left, buf, out);
            if left > 0 {
                buf[pos] = 1.0;
                rec(pos + 1, left - 1, buf, out);
                buf[pos] = 0.0;
            }
        }
        rec(0, self.s, &mut buf, &mut out);
        Some(out)
    }
}

impl AdditiveStructure for BernoulliLaplace {
    fn summary_dim(&self) -> usize {
        1
    }

    fn stat(&self, point: &[f64], out: &mut [f64]) {
        out[0] = point[0];
    }

    fn log_observation(&self, total: &[f64]) -> f64 {
        if (total[0] - self.s as f64).abs() < 0.5 {
            self.log_mass
        } else {
            f64::NEG_INFINITY
        }
    }

    fn log_prior(&self, point: &[f64]) -> f64 {
        if ComponentSpace::Binary.contains(point) {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }
}
