use serde::{Deserialize, Serialize};

use super::window::Dataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;

pub const SIGMA_FLOOR: f64 = 1e-8;

/// Per-feature affine rescale `x' = (x - mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub sigma_floor: f64,
}

impl Standardizer {
    pub fn identity(features: usize) -> Self {
        Standardizer {
            mean: vec![0.0; features],
            std: vec![1.0; features],
            sigma_floor: SIGMA_FLOOR,
        }
    }

    pub fn features(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_matrix(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x.rows())?;
        Ok(Matrix::from_fn(x.rows(), x.cols(), |f, t| {
            (x.get(f, t) - self.mean[f]) / self.std[f]
        }))
    }

    pub fn inverse_matrix(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x.rows())?;
        Ok(Matrix::from_fn(x.rows(), x.cols(), |f, t| {
            x.get(f, t) * self.std[f] + self.mean[f]
        }))
    }

    /// Standardizes one timestep's feature vector in place.
    pub fn transform_row(&self, row: &mut [f64]) -> Result<()> {
        self.check(row.len())?;
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
        Ok(())
    }

    fn check(&self, features: usize) -> Result<()> {
        if features != self.features() {
            return Err(Error::invalid(format!(
                "standardizer has {} features, data has {features}",
                self.features()
            )));
        }
        Ok(())
    }
}

/// Mean and population standard deviation of every feature over all
/// timesteps of all windows. Constant features get `std = SIGMA_FLOOR`.
pub fn fit_standardizer(train: &Dataset) -> Result<Standardizer> {
    let (features, _) = train
        .shape()
        .ok_or_else(|| Error::invalid("cannot fit a standardizer on an empty dataset"))?;
    let mut count = 0usize;
    let mut sum = vec![0.0; features];
    for s in &train.samples {
        if s.x.rows() != features {
            return Err(Error::invalid("samples disagree on feature count"));
        }
        for (f, acc) in sum.iter_mut().enumerate() {
            *acc += s.x.row(f).iter().sum::<f64>();
        }
        count += s.x.cols();
    }
    let n = count as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let mut sq = vec![0.0; features];
    for s in &train.samples {
        for (f, acc) in sq.iter_mut().enumerate() {
            *acc += s.x.row(f).iter().map(|v| (v - mean[f]).powi(2)).sum::<f64>();
        }
    }
    let std = sq
        .iter()
        .map(|q| {
            let sd = (q / n).sqrt();
            if sd > SIGMA_FLOOR {
                sd
            } else {
                SIGMA_FLOOR
            }
        })
        .collect();
    Ok(Standardizer {
        mean,
        std,
        sigma_floor: SIGMA_FLOOR,
    })
}

pub fn apply_standardizer(s: &Standardizer, ds: &Dataset) -> Result<Dataset> {
    let mut out = ds.clone();
    for sample in &mut out.samples {
        sample.x = s.transform_matrix(&sample.x)?;
    }
    Ok(out)
}
