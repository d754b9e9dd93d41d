use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// Weight distribution for freshly built layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WeightInit {
    /// `Normal(0, 2 / fan_in)`
    #[default]
    He,
    /// `Normal(0, 2 / (fan_in + fan_out))`
    Glorot,
}

impl WeightInit {
    pub fn sample(
        self,
        rows: usize,
        cols: usize,
        fan_in: usize,
        fan_out: usize,
        seed: u64,
    ) -> Result<Matrix> {
        match self {
            WeightInit::He => he_init(rows, cols, fan_in, seed),
            WeightInit::Glorot => {
                let mut m = he_init(rows, cols, fan_in, seed)?;
                m.scale((fan_in as f64 / (fan_in + fan_out) as f64).sqrt());
                Ok(m)
            }
        }
    }
}

/// Initialization policy. Biases start at zero except the LSTM forget-gate
/// bias, which starts at `forget_bias`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitConfig {
    pub weights: WeightInit,
    pub forget_bias: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            weights: WeightInit::He,
            forget_bias: 1.0,
        }
    }
}

/// He-normal initialization: entries i.i.d. `Normal(0, 2 / fan_in)`.
pub fn he_init(rows: usize, cols: usize, fan_in: usize, seed: u64) -> Result<Matrix> {
    if fan_in == 0 {
        return Err(Error::invalid("he_init: fan_in must be at least 1"));
    }
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Matrix::from_fn(rows, cols, |_, _| normal.sample(&mut rng)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_fan_in_is_rejected() {
        assert!(matches!(
            he_init(2, 2, 0, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = he_init(4, 4, 2, 7).unwrap();
        let b = he_init(4, 4, 2, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, he_init(4, 4, 2, 8).unwrap());
    }

    #[test]
    fn sample_variance_matches_two_over_fan_in() {
        // 10^5 draws of Normal(0, 1). The sample variance has standard error
        // sqrt(2 / (n - 1)) ~ 0.00447; a 5-sigma band gives |s^2 - 1| < 0.0224.
        let n = 100_000;
        let m = he_init(1, n, 2, 7).unwrap();
        let xs = m.as_slice();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 1.0).abs() < 0.0224, "variance {var}");
        assert!(mean.abs() < 5.0 / (n as f64).sqrt(), "mean {mean}");
    }
}
