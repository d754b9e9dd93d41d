use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Gradients, Matrix, Model};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub t: u64,
}

impl AdamState {
    pub fn for_model(model: &Model) -> Self {
        let zeros: Vec<Matrix> = model
            .tensors()
            .iter()
            .map(|t| Matrix::zeros(t.rows(), t.cols()))
            .collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    /// One bias-corrected update of `params` in place.
    ///
    /// All gradients are checked before anything is modified; a non-finite
    /// entry aborts the step and names its tensor.
    pub fn step(
        &mut self,
        params: Vec<&mut Matrix>,
        grads: &[&Matrix],
        names: &[String],
        cfg: &AdamConfig,
    ) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::invalid("adam: parameter, gradient and state counts differ"));
        }
        for (i, g) in grads.iter().enumerate() {
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient {
                    tensor: names.get(i).cloned().unwrap_or_else(|| format!("tensor{i}")),
                });
            }
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            let it = p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice());
            for (((p, &g), m), v) in it {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
        Ok(())
    }
}

/// Applies one Adam step to every tensor of `model`.
pub fn adam_step(state: &mut AdamState, model: &mut Model, grads: &Gradients, cfg: &AdamConfig) -> Result<()> {
    let names = model.tensor_names();
    let g = grads.tensors();
    state.step(model.tensors_mut(), &g, &names, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_vec(1, 1, vec![v]).unwrap()
    }

    fn state1() -> AdamState {
        AdamState {
            m: vec![scalar(0.0)],
            v: vec![scalar(0.0)],
            t: 0,
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = state1();
        let mut p = scalar(1.5);
        s.step(vec![&mut p], &[&scalar(0.0)], &[], &AdamConfig::default()).unwrap();
        assert_eq!(p.get(0, 0), 1.5);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = state1();
        let mut p = scalar(0.0);
        s.step(vec![&mut p], &[&scalar(0.3)], &[], &AdamConfig::default()).unwrap();
        assert!((p.get(0, 0) + 0.001).abs() < 1e-9);
        let exact = -0.001 * 0.3 / (0.3 + 1e-8);
        assert!((p.get(0, 0) - exact).abs() < 1e-15);
    }

    #[test]
    fn three_steps_match_scalar_transcription() {
        let cfg = AdamConfig {
            learning_rate: 0.01,
            ..AdamConfig::default()
        };
        let grads = [0.3, -1.2, 0.05];
        let mut s = state1();
        let mut p = scalar(0.7);
        for g in grads {
            s.step(vec![&mut p], &[&scalar(g)], &[], &cfg).unwrap();
        }
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 0.7f64);
        for (k, g) in grads.iter().enumerate() {
            let t = (k + 1) as f64;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powf(t));
            let vh = v / (1.0 - 0.999f64.powf(t));
            x -= 0.01 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((p.get(0, 0) - x).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_names_tensor_and_changes_nothing() {
        let mut s = state1();
        let mut p = scalar(2.0);
        let err = s
            .step(vec![&mut p], &[&scalar(f64::NAN)], &["layer0.lstm.u".into()], &AdamConfig::default())
            .unwrap_err();
        match err {
            Error::NonFiniteGradient { tensor } => assert_eq!(tensor, "layer0.lstm.u"),
            other => panic!("{other:?}"),
        }
        assert_eq!(p.get(0, 0), 2.0);
        assert_eq!(s.t, 0);
    }
}
