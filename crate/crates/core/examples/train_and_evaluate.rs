//! Trains the single-layer LSTM on a small synthetic corpus epoch by epoch,
//! then reports test metrics.
//!
//! cargo run --release --example train_and_evaluate [epochs]

use stallcast::data::{prepare, PrepareConfig, SplitCounts};
use stallcast::metrics::EvalReport;
use stallcast::nn::{Model, ModelSpec};
use stallcast::synth::{generate_corpus, CorpusConfig};
use stallcast::train::{predict_dataset, TrainConfig, Trainer};

fn main() -> stallcast::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(15);
    let flights = generate_corpus(&CorpusConfig::counts(10, 30, 0), 5)?;
    let cfg = PrepareConfig {
        counts: SplitCounts {
            train_pos: 300,
            train_neg: 300,
            val_each: 50,
            test_each: 50,
        },
        ..PrepareConfig::default()
    };
    let data = prepare(&flights, &cfg, 5)?;

    let model = Model::new(ModelSpec::arch_a(), 5)?;
    let train_cfg = TrainConfig {
        epochs,
        seed: 5,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(model, &data.train, &data.val, train_cfg)?;
    for _ in 0..epochs {
        let e = trainer.run_epoch()?;
        println!(
            "epoch {:>3}  train {:.4}  val {:.4}  val acc {:.3}",
            e.epoch, e.train_loss, e.val_loss, e.val_accuracy
        );
    }
    let scores = predict_dataset(trainer.model(), &data.test)?;
    let report = EvalReport::from_scores(&scores, &data.test.labels(), 0.5)?;
    print!("{}", report.to_json()?);
    Ok(())
}
