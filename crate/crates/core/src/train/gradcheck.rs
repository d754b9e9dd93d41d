//! Central-difference verification of the analytic gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::bce_loss;
use crate::data::WindowedSample;
use crate::error::{Error, Result};
use crate::nn::{model_backward, DropoutMasks, Gradients, Matrix, Model};

/// Largest relative error between backpropagated and central-difference
/// gradients over every parameter, for one sample.
///
/// Dropout layers use one fixed mask drawn from the model's seed, shared by
/// both routes.
pub fn grad_check(m: &Model, sample: &WindowedSample, eps: f64) -> Result<f64> {
    let masks = m.sample_masks(1, &mut ChaCha8Rng::seed_from_u64(m.rng_seed()));
    grad_check_with(m, &sample.x, sample.label, Some(&masks), eps, |model| {
        model_backward(model, &sample.x, sample.label, Some(&masks))
    })
}

/// Same check against an arbitrary analytic-gradient routine.
pub fn grad_check_with(
    m: &Model,
    window: &Matrix,
    label: u8,
    masks: Option<&DropoutMasks>,
    eps: f64,
    analytic: impl Fn(&Model) -> Result<Gradients>,
) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid("grad_check: eps must be positive"));
    }
    let grads = analytic(m)?.flatten();
    let loss = |model: &Model| -> Result<f64> {
        let tape = model.forward_tape(&[window], masks)?;
        bce_loss(&tape.probs, &[label])
    };
    let mut probe = m.clone();
    let sizes: Vec<usize> = probe.tensors().iter().map(|t| t.len()).collect();
    let mut worst: f64 = 0.0;
    let mut flat = 0;
    for (k, &size) in sizes.iter().enumerate() {
        for j in 0..size {
            let orig = probe.tensors()[k].as_slice()[j];
            probe.tensors_mut()[k].as_mut_slice()[j] = orig + eps;
            let plus = loss(&probe)?;
            probe.tensors_mut()[k].as_mut_slice()[j] = orig - eps;
            let minus = loss(&probe)?;
            probe.tensors_mut()[k].as_mut_slice()[j] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = grads[flat];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / denom);
            flat += 1;
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Provenance;
    use crate::nn::{Layer, LayerSpec, ModelSpec};
    use rand::Rng;

    fn sample(features: usize, steps: usize, label: u8, seed: u64) -> WindowedSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        WindowedSample {
            x: Matrix::from_fn(features, steps, |_, _| rng.random_range(-1.5..1.5)),
            label,
            warning_in_window: false,
            provenance: Provenance {
                source: "gc".into(),
                start: 0,
                end: steps - 1,
                label_index: steps,
            },
        }
    }

    /// Architecture A's layer pattern at 4 hidden units.
    fn micro_a() -> ModelSpec {
        ModelSpec::new(vec![
            LayerSpec::lstm(4),
            LayerSpec::lstm(4),
            LayerSpec::dense(4),
            LayerSpec::dense(4),
            LayerSpec::dropout(0.5),
            LayerSpec::OutputSigmoid,
        ])
        .with_input(3, 10)
    }

    /// A model whose fixed dropout mask and ReLU pattern let the loss reach
    /// layer 0, so the check below the dropout layer is not vacuous.
    fn live_micro_model(s: &WindowedSample) -> Model {
        (0..)
            .map(|seed| Model::new(micro_a(), seed).unwrap())
            .find(|m| {
                let masks = m.sample_masks(1, &mut ChaCha8Rng::seed_from_u64(m.rng_seed()));
                let g = model_backward(m, &s.x, s.label, Some(&masks)).unwrap();
                g.tensors()[1].as_slice().iter().any(|&v| v != 0.0)
            })
            .unwrap()
    }

    #[test]
    fn fresh_micro_model_passes() {
        let s = sample(3, 10, 1, 4);
        let m = live_micro_model(&s);
        assert!(m.param_count() < 500);
        let err = grad_check(&m, &s, 1e-5).unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn bidirectional_micro_model_passes() {
        let spec = ModelSpec::new(vec![
            LayerSpec::bilstm(3),
            LayerSpec::bilstm(2),
            LayerSpec::dense(3),
            LayerSpec::dropout(0.3),
            LayerSpec::OutputSigmoid,
        ])
        .with_input(3, 6);
        let m = Model::new(spec, 8).unwrap();
        let err = grad_check(&m, &sample(3, 6, 0, 9), 1e-5).unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn corrupted_recurrent_gradient_is_caught() {
        let s = sample(3, 10, 1, 4);
        let m = live_micro_model(&s);
        let masks = m.sample_masks(1, &mut ChaCha8Rng::seed_from_u64(m.rng_seed()));
        let err = grad_check_with(&m, &s.x, s.label, Some(&masks), 1e-5, |model| {
            let mut g = model_backward(model, &s.x, s.label, Some(&masks))?;
            // flip the sign of layer 0's recurrent-weight gradient
            g.tensors_mut()[1].scale(-1.0);
            Ok(g)
        })
        .unwrap();
        assert!(err > 1e-2, "mutation went unnoticed: {err}");
        assert!(matches!(m.layers()[0], Layer::Lstm { .. }));
    }

    #[test]
    fn zero_eps_is_rejected() {
        let m = Model::new(micro_a(), 3).unwrap();
        assert!(grad_check(&m, &sample(3, 10, 1, 4), 0.0).is_err());
    }
}
