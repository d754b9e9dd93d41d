//! Compares analytic BPTT gradients against central finite differences on a
//! small bidirectional model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stallcast::data::{Provenance, WindowedSample};
use stallcast::nn::{LayerSpec, Matrix, Model, ModelSpec};
use stallcast::train::grad_check;

fn main() -> stallcast::Result<()> {
    let spec = ModelSpec::new(vec![
        LayerSpec::bilstm(3),
        LayerSpec::lstm(2),
        LayerSpec::dense(4),
        LayerSpec::dropout(0.5),
        LayerSpec::OutputSigmoid,
    ])
    .with_input(3, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for label in [0, 1] {
        let sample = WindowedSample {
            x: Matrix::from_fn(3, 5, |_, _| rng.random_range(-2.0..2.0)),
            label,
            warning_in_window: false,
            provenance: Provenance {
                source: "random".into(),
                start: 0,
                end: 4,
                label_index: 5,
            },
        };
        let model = Model::new(spec.clone(), rng.random())?;
        let err = grad_check(&model, &sample, 1e-5)?;
        println!(
            "{} parameters, label {label}: max relative error {err:.2e}",
            model.param_count()
        );
    }
    Ok(())
}
