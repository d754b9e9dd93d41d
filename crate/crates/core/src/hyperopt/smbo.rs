//! Expected-improvement acquisition and the propose-evaluate-update loop.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::gp::{gp_fit, gp_posterior, GpSurrogate, Kernel, Observation};
use super::space::{ParamValue, SearchSpace};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};

pub const CANDIDATES: usize = 2048;
pub const REFINED: usize = 8;
const REFINE_STEPS: usize = 32;

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Closed-form improvement over `y_best` for a normal belief `N(mu, sigma^2)`,
/// maximization orientation.
pub fn expected_improvement_at(mu: f64, sigma: f64, y_best: f64) -> f64 {
    let gap = mu - y_best;
    if !(sigma > 0.0) {
        return gap.max(0.0);
    }
    let z = gap / sigma;
    (gap * std_normal_cdf(z) + sigma * std_normal_pdf(z)).max(0.0)
}

pub fn expected_improvement(s: &GpSurrogate, x: &[f64], y_best: f64) -> f64 {
    let (mu, sigma) = gp_posterior(s, x);
    expected_improvement_at(mu, sigma, y_best)
}

/// `i`-th element of the van der Corput sequence in `base`.
fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

fn nth_prime(k: usize) -> u64 {
    let mut found = 0;
    let mut n = 1u64;
    loop {
        n += 1;
        if (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0) {
            if found == k {
                return n;
            }
            found += 1;
        }
    }
}

/// `count` Halton points in `[0,1)^dim`, randomly shifted modulo 1
/// (Cranley-Patterson rotation) so different seeds give different sets.
pub fn shifted_halton(count: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let bases: Vec<u64> = (0..dim).map(nth_prime).collect();
    let shift: Vec<f64> = (0..dim).map(|_| rng.random()).collect();
    (1..=count as u64)
        .map(|i| {
            bases
                .iter()
                .zip(&shift)
                .map(|(&b, &s)| (radical_inverse(i, b) + s).fract())
                .collect()
        })
        .collect()
}

/// Maximizes EI over shifted Halton candidates, polishes the best few with
/// a shrinking random local search, then snaps discrete coordinates. If EI is
/// zero everywhere, returns a uniformly random (snapped) point instead.
pub fn propose_next(s: &GpSurrogate, space: &SearchSpace, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, 0);
    let dim = space.len();
    let y_best = s.best_value();
    let ei = |x: &[f64]| expected_improvement(s, x, y_best);

    let mut scored: Vec<(f64, Vec<f64>)> = shifted_halton(CANDIDATES, dim, &mut rng)
        .into_iter()
        .map(|x| (ei(&x), x))
        .collect();
    // stable sort: equal EI keeps candidate order
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(REFINED);

    let mut best: Option<(f64, Vec<f64>)> = None;
    for (mut value, mut x) in scored {
        let mut radius = 0.05;
        for step in 0..REFINE_STEPS {
            if step > 0 && step % 8 == 0 {
                radius /= 2.0;
            }
            let trial: Vec<f64> = x
                .iter()
                .map(|&c| {
                    let z: f64 = rng.sample(StandardNormal);
                    (c + radius * z).clamp(0.0, 1.0)
                })
                .collect();
            let v = ei(&trial);
            if v > value {
                value = v;
                x = trial;
            }
        }
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, x));
        }
    }
    match best {
        Some((value, x)) if value > 0.0 => space.snap(&x),
        _ => {
            let x: Vec<f64> = (0..dim).map(|_| rng.random()).collect();
            space.snap(&x)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    /// The objective returned a non-finite value; excluded from the surrogate.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub iter: usize,
    pub point: Vec<f64>,
    pub objective: f64,
    pub status: TrialStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub best: Trial,
    pub trace: Vec<Trial>,
}

impl TuneResult {
    /// `iter,<dimension names>,objective,status`, one row per evaluation,
    /// with decoded parameter values.
    pub fn trace_csv(&self, space: &SearchSpace) -> Result<String> {
        let mut s = String::from("iter");
        for d in &space.dims {
            s.push(',');
            s.push_str(&d.name);
        }
        s.push_str(",objective,status\n");
        for t in &self.trace {
            write!(s, "{}", t.iter).unwrap();
            for v in space.decode(&t.point)? {
                write!(s, ",{v}").unwrap();
            }
            let status = match t.status {
                TrialStatus::Ok => "ok",
                TrialStatus::Failed => "failed",
            };
            writeln!(s, ",{},{status}", t.objective).unwrap();
        }
        Ok(s)
    }

    pub fn best_params(&self, space: &SearchSpace) -> Result<BTreeMap<String, ParamValue>> {
        space.decode_named(&self.best.point)
    }
}

/// Sequential model-based optimization, maximizing `objective`.
///
/// The first `init` points come from a shifted Halton set; each later point
/// maximizes expected improvement under a GP fitted to every successful
/// trial so far. The best trial is the highest objective, earliest first on
/// ties. The trace for a smaller budget is a prefix of the trace for a larger
/// one under the same seed.
pub fn tune(
    mut objective: impl FnMut(&[f64]) -> f64,
    space: &SearchSpace,
    budget: usize,
    init: usize,
    seed: u64,
) -> Result<TuneResult> {
    space.validate()?;
    if init < 2 || budget < init {
        return Err(Error::invalid(format!(
            "tune needs budget >= init >= 2 (budget {budget}, init {init})"
        )));
    }
    let initial = shifted_halton(init, space.len(), &mut stream(seed, 0));
    let mut trace: Vec<Trial> = Vec::with_capacity(budget);
    for iter in 0..budget {
        let point = if iter < init {
            space.snap(&initial[iter])
        } else {
            let obs: Vec<Observation> = trace
                .iter()
                .filter(|t| t.status == TrialStatus::Ok)
                .map(|t| Observation {
                    point: t.point.clone(),
                    objective: t.objective,
                })
                .collect();
            let iter_seed = derive_seed(seed, iter as u64 + 1);
            if obs.is_empty() {
                let mut rng = stream(iter_seed, 1);
                space.snap(&(0..space.len()).map(|_| rng.random()).collect::<Vec<f64>>())
            } else {
                let gp = gp_fit(&obs, Kernel::for_observations(&obs))?;
                propose_next(&gp, space, iter_seed)
            }
        };
        let y = objective(&point);
        let status = if y.is_finite() {
            TrialStatus::Ok
        } else {
            TrialStatus::Failed
        };
        trace.push(Trial {
            iter,
            point,
            objective: y,
            status,
        });
    }
    let best = trace
        .iter()
        .filter(|t| t.status == TrialStatus::Ok)
        .fold(None::<&Trial>, |best, t| match best {
            Some(b) if b.objective >= t.objective => Some(b),
            _ => Some(t),
        })
        .cloned()
        .ok_or_else(|| Error::Numeric("every tuning trial failed".into()))?;
    Ok(TuneResult { best, trace })
}
