//! Trains briefly, then replays an unseen gradual-stall flight one row at a
//! time through a sliding window, reporting when the alarm first sounds
//! relative to the recorded stall warning.

use std::collections::VecDeque;

use stallcast::data::{prepare, PrepareConfig, SplitCounts};
use stallcast::nn::{Matrix, Model, ModelSpec};
use stallcast::synth::{generate_flight, generate_corpus, CorpusConfig, FlightKind, FlightProfile};
use stallcast::train::{fit, TrainConfig};

fn main() -> stallcast::Result<()> {
    let flights = generate_corpus(&CorpusConfig::counts(8, 24, 0), 12)?;
    let cfg = PrepareConfig {
        counts: SplitCounts {
            train_pos: 240,
            train_neg: 240,
            val_each: 40,
            test_each: 40,
        },
        ..PrepareConfig::default()
    };
    let data = prepare(&flights, &cfg, 12)?;
    let train_cfg = TrainConfig {
        epochs: 8,
        seed: 12,
        ..TrainConfig::default()
    };
    let (model, _) = fit(Model::new(ModelSpec::arch_a(), 12)?, &data.train, &data.val, &train_cfg)?;

    let flight = generate_flight(&FlightProfile::new(FlightKind::GradualStall, 9_999))?;
    let window = model.spec().window_len;
    let mut buf: VecDeque<Vec<f64>> = VecDeque::with_capacity(window);
    let mut first_alarm = None;
    for (t, raw) in flight.rows.iter().enumerate() {
        let mut row = raw.to_vec();
        data.standardizer.transform_row(&mut row)?;
        if buf.len() == window {
            buf.pop_front();
        }
        buf.push_back(row);
        if buf.len() < window {
            continue;
        }
        let x = Matrix::from_fn(16, window, |f, k| buf[k][f]);
        let p = model.predict_batch(&[&x])?[0];
        if t % 20 == 0 {
            println!("t={t:>3}  p={p:.3}  warning={}", flight.stall_warning[t]);
        }
        if p >= 0.5 && first_alarm.is_none() {
            first_alarm = Some(t);
        }
    }
    println!(
        "first alarm at t={first_alarm:?}; recorded warning starts at t={:?}",
        flight.first_warning()
    );
    Ok(())
}
