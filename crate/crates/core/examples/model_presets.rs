//! Builds the three reference architectures, prints their layer stacks and
//! parameter counts, and runs a forward pass on a random window.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stallcast::nn::{LayerSpec, Matrix, Model, ModelSpec};

fn describe(l: &LayerSpec) -> String {
    match l {
        LayerSpec::LstmUni { hidden_units } => format!("LSTM({hidden_units})"),
        LayerSpec::LstmBi { hidden_units } => format!("BiLSTM({hidden_units})"),
        LayerSpec::Dense { hidden_units, .. } => format!("Dense({hidden_units})"),
        LayerSpec::Dropout { drop_rate } => format!("Dropout({drop_rate})"),
        LayerSpec::OutputSigmoid => "Sigmoid(1)".into(),
    }
}

fn main() -> stallcast::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let window = Matrix::from_fn(16, 10, |_, _| rng.random_range(-1.0..1.0));
    for name in ["arch-a", "arch-b", "arch-c"] {
        let spec = ModelSpec::preset(name).expect("known preset");
        let stack: Vec<String> = spec.layers.iter().map(describe).collect();
        let model = Model::new(spec, 11)?;
        let p = model.predict_batch(&[&window])?[0];
        println!(
            "{name}: {} -> {} parameters, P(stall warning) = {p:.4}",
            stack.join(" -> "),
            model.param_count()
        );
    }
    Ok(())
}
