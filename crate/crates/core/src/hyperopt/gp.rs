//! Zero-mean Gaussian-process regression with a squared-exponential kernel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Coordinates in the unit box.
    pub point: Vec<f64>,
    pub objective: f64,
}

/// `k(a, b) = signal_variance * exp(-|a - b|^2 / (2 length_scale^2))`, plus
/// `noise_variance` on the diagonal of the training covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub length_scale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

pub const DEFAULT_LENGTH_SCALE: f64 = 0.2;
pub const DEFAULT_NOISE_VARIANCE: f64 = 1e-6;

impl Kernel {
    /// Length scale 0.2, noise variance 1e-6 and signal variance equal to
    /// the population variance of the observed objectives.
    pub fn for_observations(obs: &[Observation]) -> Self {
        let n = obs.len().max(1) as f64;
        let mean = obs.iter().map(|o| o.objective).sum::<f64>() / n;
        let var = obs.iter().map(|o| (o.objective - mean).powi(2)).sum::<f64>() / n;
        Kernel {
            length_scale: DEFAULT_LENGTH_SCALE,
            signal_variance: var,
            noise_variance: DEFAULT_NOISE_VARIANCE,
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        self.signal_variance * (-d2 / (2.0 * self.length_scale * self.length_scale)).exp()
    }

    fn validate(&self) -> Result<()> {
        let ok = self.length_scale > 0.0
            && self.length_scale.is_finite()
            && self.signal_variance >= 0.0
            && self.signal_variance.is_finite()
            && self.noise_variance >= 0.0
            && self.noise_variance.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("kernel {self:?}")))
        }
    }
}

/// Fitted surrogate: training points, the Cholesky factor of their
/// covariance and the weights `K^-1 y`.
#[derive(Debug, Clone, PartialEq)]
pub struct GpSurrogate {
    pub kernel: Kernel,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    /// Lower-triangular, row-major n x n.
    chol: Vec<f64>,
    weights: Vec<f64>,
    /// Diagonal jitter that made the factorization succeed (0 if none).
    pub jitter: f64,
}

/// Lower Cholesky factor of a symmetric n x n matrix, or `None` if it is
/// not numerically positive definite.
fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn forward_sub(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * x[k]).sum();
        x[i] = (b[i] - s) / l[i * n + i];
    }
    x
}

fn backward_sub_transposed(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (b[i] - s) / l[i * n + i];
    }
    x
}

/// Averages the objectives of observations that share a point, keeping the
/// first-seen order.
fn merge_duplicates(obs: &[Observation]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut sums: Vec<(f64, usize)> = Vec::new();
    for o in obs {
        match points.iter().position(|p| *p == o.point) {
            Some(i) => {
                sums[i].0 += o.objective;
                sums[i].1 += 1;
            }
            None => {
                points.push(o.point.clone());
                sums.push((o.objective, 1));
            }
        }
    }
    (points, sums.into_iter().map(|(s, c)| s / c as f64).collect())
}

pub fn gp_fit(obs: &[Observation], kernel: Kernel) -> Result<GpSurrogate> {
    kernel.validate()?;
    let Some(first) = obs.first() else {
        return Err(Error::invalid("gp_fit needs at least one observation"));
    };
    let dim = first.point.len();
    if obs.iter().any(|o| o.point.len() != dim) {
        return Err(Error::invalid("observations differ in dimension"));
    }
    if obs.iter().any(|o| !o.objective.is_finite() || o.point.iter().any(|x| !x.is_finite())) {
        return Err(Error::invalid("non-finite observation"));
    }
    let (points, values) = merge_duplicates(obs);
    let n = points.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            k[i * n + j] = kernel.eval(&points[i], &points[j]);
        }
        k[i * n + i] += kernel.noise_variance;
    }
    let mut jitter = 0.0;
    let chol = loop {
        let mut kj = k.clone();
        for i in 0..n {
            kj[i * n + i] += jitter;
        }
        if let Some(l) = cholesky(&kj, n) {
            break l;
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 10.0 };
        if jitter > 1e-4 * (1.0 + 1e-9) {
            return Err(Error::Numeric(
                "GP covariance is not positive definite even with 1e-4 jitter".into(),
            ));
        }
    };
    let weights = backward_sub_transposed(&chol, n, &forward_sub(&chol, n, &values));
    Ok(GpSurrogate {
        kernel,
        points,
        values,
        chol,
        weights,
        jitter,
    })
}

impl GpSurrogate {
    /// Distinct training points after merging duplicates.
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Objective per distinct point (duplicates averaged).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn best_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }
}

/// Posterior mean and standard deviation of the latent function at `x`.
pub fn gp_posterior(s: &GpSurrogate, x: &[f64]) -> (f64, f64) {
    let n = s.points.len();
    let kx: Vec<f64> = s.points.iter().map(|p| s.kernel.eval(p, x)).collect();
    let mean: f64 = kx.iter().zip(&s.weights).map(|(a, b)| a * b).sum();
    let v = forward_sub(&s.chol, n, &kx);
    let var = s.kernel.signal_variance - v.iter().map(|t| t * t).sum::<f64>();
    (mean, var.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn obs(point: &[f64], objective: f64) -> Observation {
        Observation {
            point: point.to_vec(),
            objective,
        }
    }

    fn exact(signal: f64) -> Kernel {
        Kernel {
            length_scale: 0.2,
            signal_variance: signal,
            noise_variance: 0.0,
        }
    }

    #[test]
    fn single_observation_is_interpolated() {
        let s = gp_fit(&[obs(&[0.3, 0.7], 0.8)], exact(1.0)).unwrap();
        let (m, sd) = gp_posterior(&s, &[0.3, 0.7]);
        assert!((m - 0.8).abs() < 1e-9);
        assert!(sd <= 1e-6);
    }

    #[test]
    fn duplicates_merge_to_one_point() {
        let k = exact(1.0);
        let one = gp_fit(&[obs(&[0.4], 0.6)], k).unwrap();
        let two = gp_fit(&[obs(&[0.4], 0.6), obs(&[0.4], 0.6)], k).unwrap();
        assert_eq!(one, two);
        let mixed = gp_fit(&[obs(&[0.4], 0.2), obs(&[0.4], 0.6)], k).unwrap();
        assert_eq!(mixed.values(), &[0.4]);
    }

    #[test]
    fn far_from_data_reverts_to_prior() {
        let k = Kernel {
            length_scale: 0.05,
            signal_variance: 2.0,
            noise_variance: 1e-6,
        };
        let s = gp_fit(&[obs(&[0.0], 0.9), obs(&[0.02], 0.7)], k).unwrap();
        let (m, sd) = gp_posterior(&s, &[0.52]);
        assert!(m.abs() < 1e-6);
        assert!((sd - 2f64.sqrt()).abs() < 1e-6);
    }

    /// Explicit inverse by Gauss-Jordan elimination, independent of the
    /// Cholesky path.
    fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut m: Vec<Vec<f64>> = a
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.clone();
                r.extend((0..n).map(|j| f64::from(u8::from(i == j))));
                r
            })
            .collect();
        for c in 0..n {
            let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
            m.swap(c, p);
            let d = m[c][c];
            m[c].iter_mut().for_each(|v| *v /= d);
            for r in 0..n {
                if r != c {
                    let f = m[r][c];
                    let pivot = m[c].clone();
                    m[r].iter_mut().zip(&pivot).for_each(|(v, p)| *v -= f * p);
                }
            }
        }
        m.into_iter().map(|r| r[n..].to_vec()).collect()
    }

    #[test]
    fn training_points_match_direct_inverse_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<Observation> = (0..5)
            .map(|_| obs(&[rng.random(), rng.random()], rng.random()))
            .collect();
        let k = Kernel::for_observations(&data);
        let s = gp_fit(&data, k).unwrap();
        let gram: Vec<Vec<f64>> = data
            .iter()
            .enumerate()
            .map(|(i, a)| {
                data.iter()
                    .enumerate()
                    .map(|(j, b)| k.eval(&a.point, &b.point) + if i == j { k.noise_variance } else { 0.0 })
                    .collect()
            })
            .collect();
        let inv = invert(&gram);
        let y: Vec<f64> = data.iter().map(|o| o.objective).collect();
        for o in &data {
            let kx: Vec<f64> = data.iter().map(|p| k.eval(&p.point, &o.point)).collect();
            let oracle: f64 = (0..5)
                .map(|i| kx[i] * (0..5).map(|j| inv[i][j] * y[j]).sum::<f64>())
                .sum();
            let (m, _) = gp_posterior(&s, &o.point);
            assert!((m - oracle).abs() < 1e-9);
            assert!((m - o.objective).abs() <= k.noise_variance.sqrt());
        }
    }

    #[test]
    fn two_point_closed_form() {
        let k = Kernel {
            length_scale: 0.3,
            signal_variance: 1.5,
            noise_variance: 1e-3,
        };
        let (x1, x2, y1, y2) = (0.2, 0.6, 0.9, 0.4);
        let s = gp_fit(&[obs(&[x1], y1), obs(&[x2], y2)], k).unwrap();
        let se = |a: f64, b: f64| 1.5 * (-(a - b) * (a - b) / (2.0 * 0.09)).exp();
        let (a, b, d) = (se(x1, x1) + 1e-3, se(x1, x2), se(x2, x2) + 1e-3);
        let det = a * d - b * b;
        for x in [0.0, 0.35, 0.6, 0.95] {
            let (k1, k2) = (se(x1, x), se(x2, x));
            // [k1 k2] * inv([[a b][b d]]) = [k1 d - k2 b, k2 a - k1 b] / det
            let w1 = (k1 * d - k2 * b) / det;
            let w2 = (k2 * a - k1 * b) / det;
            let mean = w1 * y1 + w2 * y2;
            let var = 1.5 - (w1 * k1 + w2 * k2);
            let (m, sd) = gp_posterior(&s, &[x]);
            assert!((m - mean).abs() < 1e-10, "mean at {x}");
            assert!((sd - var.sqrt()).abs() < 1e-10, "std at {x}");
        }
    }

    #[test]
    fn interpolates_without_noise() {
        let data: Vec<Observation> = (0..6).map(|i| obs(&[i as f64 / 5.0], (i as f64).sin())).collect();
        let s = gp_fit(&data, exact(1.0)).unwrap();
        for o in &data {
            assert!((gp_posterior(&s, &o.point).0 - o.objective).abs() <= 1e-6);
        }
    }

    #[test]
    fn near_duplicate_points_need_jitter() {
        let data = [obs(&[0.5], 1.0), obs(&[0.5 + 1e-12], 1.0)];
        let s = gp_fit(&data, exact(1.0)).unwrap();
        assert!(s.jitter >= 1e-10);
    }

    #[test]
    fn rejects_empty_and_bad_input() {
        assert!(gp_fit(&[], exact(1.0)).is_err());
        assert!(gp_fit(&[obs(&[0.1], f64::NAN)], exact(1.0)).is_err());
        assert!(gp_fit(&[obs(&[0.1], 1.0), obs(&[0.1, 0.2], 1.0)], exact(1.0)).is_err());
    }
}
