use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::loss::bce_loss;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::Model;
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 100,
            batch_size: 32,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(format!("train config: {m}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0)
            || !(self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0)
        {
            return bad("Adam betas must lie in (0, 1)");
        }
        if self.adam_eps <= 0.0 {
            return bad("adam_eps must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training-mode (dropout active) loss over the epoch's minibatches.
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Epoch with the lowest validation loss (earliest on ties).
    pub fn best_epoch(&self) -> Option<&EpochRecord> {
        self.epochs
            .iter()
            .fold(None, |best: Option<&EpochRecord>, e| match best {
                Some(b) if b.val_loss <= e.val_loss => Some(b),
                _ => Some(e),
            })
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "epoch,train_loss,val_loss,val_accuracy")?;
        for e in &self.epochs {
            writeln!(
                w,
                "{},{},{},{}",
                e.epoch, e.train_loss, e.val_loss, e.val_accuracy
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }
}

/// Inference-mode probabilities for a whole dataset, evaluated in chunks.
pub fn predict_dataset(model: &Model, ds: &Dataset) -> Result<Vec<f64>> {
    let windows = ds.windows();
    let mut out = Vec::with_capacity(windows.len());
    for chunk in windows.chunks(256) {
        out.extend(model.predict_batch(chunk)?);
    }
    Ok(out)
}

/// Loss and accuracy (threshold 0.5) in inference mode.
pub fn evaluate_loss(model: &Model, ds: &Dataset) -> Result<(f64, f64)> {
    let probs = predict_dataset(model, ds)?;
    let labels = ds.labels();
    let loss = bce_loss(&probs, &labels)?;
    let correct = probs
        .iter()
        .zip(&labels)
        .filter(|(p, y)| u8::from(**p >= 0.5) == **y)
        .count();
    Ok((loss, correct as f64 / labels.len() as f64))
}

/// Epoch-by-epoch training driver.
///
/// Each epoch draws its own random stream from the run seed; that stream
/// shuffles the training order and samples a fresh dropout mask per sample.
pub struct Trainer<'a> {
    model: Model,
    adam: AdamState,
    cfg: TrainConfig,
    train: &'a Dataset,
    val: &'a Dataset,
    history: TrainHistory,
}

impl<'a> Trainer<'a> {
    pub fn new(model: Model, train: &'a Dataset, val: &'a Dataset, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if train.is_empty() || val.is_empty() {
            return Err(Error::invalid("training and validation sets must be non-empty"));
        }
        let want = (model.spec().input_features, model.spec().window_len);
        for ds in [train, val] {
            if ds.shape() != Some(want) {
                return Err(Error::invalid(format!(
                    "dataset windows are {:?}, model expects {want:?}",
                    ds.shape()
                )));
            }
        }
        Ok(Trainer {
            adam: AdamState::for_model(&model),
            model,
            cfg,
            train,
            val,
            history: TrainHistory::default(),
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn history(&self) -> &TrainHistory {
        &self.history
    }

    pub fn adam_state(&self) -> &AdamState {
        &self.adam
    }

    pub fn epochs_done(&self) -> usize {
        self.history.len()
    }

    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let epoch = self.history.len() + 1;
        let mut rng = stream(self.cfg.seed, epoch as u64);
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        if self.cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let adam_cfg = self.cfg.adam();
        let mut loss_sum = 0.0;
        for batch in order.chunks(self.cfg.batch_size) {
            let windows: Vec<_> = batch.iter().map(|&i| &self.train.samples[i].x).collect();
            let labels: Vec<u8> = batch.iter().map(|&i| self.train.samples[i].label).collect();
            let masks = self.model.sample_masks(batch.len(), &mut rng);
            let tape = self.model.forward_tape(&windows, Some(&masks))?;
            let loss = bce_loss(&tape.probs, &labels)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            loss_sum += loss * batch.len() as f64;
            let grads = self.model.backward(&tape, &labels)?;
            adam_step(&mut self.adam, &mut self.model, &grads, &adam_cfg)?;
        }
        let train_loss = loss_sum / self.train.len() as f64;
        let (val_loss, val_accuracy) = evaluate_loss(&self.model, self.val)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: val_loss,
            });
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
        };
        self.history.epochs.push(record);
        Ok(record)
    }

    pub fn into_parts(self) -> (Model, TrainHistory) {
        (self.model, self.history)
    }
}

/// Trains for `cfg.epochs` epochs and returns the final-epoch model.
pub fn fit(model: Model, train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<(Model, TrainHistory)> {
    let mut trainer = Trainer::new(model, train, val, cfg.clone())?;
    for _ in 0..cfg.epochs {
        trainer.run_epoch()?;
    }
    Ok(trainer.into_parts())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Provenance, WindowedSample};
    use crate::nn::{LayerSpec, Matrix, ModelSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Dataset::new(
            (0..n)
                .map(|i| {
                    let label = (i % 2) as u8;
                    let trend = if label == 1 { 0.3 } else { -0.3 };
                    let x = Matrix::from_fn(3, 5, |f, t| {
                        trend * t as f64 * (f as f64 + 1.0) * 0.3 + rng.random_range(-0.5..0.5)
                    });
                    WindowedSample {
                        x,
                        label,
                        warning_in_window: false,
                        provenance: Provenance {
                            source: "toy".into(),
                            start: i,
                            end: i,
                            label_index: i,
                        },
                    }
                })
                .collect(),
        )
    }

    fn small_spec() -> ModelSpec {
        ModelSpec::new(vec![
            LayerSpec::lstm(6),
            LayerSpec::dense(4),
            LayerSpec::dropout(0.2),
            LayerSpec::OutputSigmoid,
        ])
        .with_input(3, 5)
    }

    #[test]
    fn zero_epochs_and_empty_sets_are_rejected() {
        let ds = toy(8, 1);
        let m = Model::new(small_spec(), 1).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(matches!(fit(m.clone(), &ds, &ds, &cfg), Err(Error::InvalidArgument(_))));
        assert!(fit(m, &Dataset::default(), &ds, &TrainConfig::default()).is_err());
    }

    #[test]
    fn same_seed_same_history() {
        let train = toy(40, 2);
        let val = toy(10, 3);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 8,
            seed: 11,
            ..Default::default()
        };
        let m = Model::new(small_spec(), 4).unwrap();
        let (ma, ha) = fit(m.clone(), &train, &val, &cfg).unwrap();
        let (mb, hb) = fit(m, &train, &val, &cfg).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(ma, mb);
        assert_eq!(ha.len(), 3);
        assert!(ha.epochs.iter().all(|e| e.train_loss >= 0.0 && e.val_loss >= 0.0));
    }

    #[test]
    fn optimizer_state_mirrors_parameters() {
        let train = toy(20, 5);
        let m = Model::new(small_spec(), 6).unwrap();
        let count = m.param_count();
        let mut tr = Trainer::new(m, &train, &train, TrainConfig::default()).unwrap();
        tr.run_epoch().unwrap();
        tr.run_epoch().unwrap();
        let st = tr.adam_state();
        let shapes: Vec<_> = tr.model().tensors().iter().map(|t| t.shape()).collect();
        assert_eq!(st.m.iter().map(|t| t.shape()).collect::<Vec<_>>(), shapes);
        assert_eq!(st.v.iter().map(|t| t.shape()).collect::<Vec<_>>(), shapes);
        assert!(st.v.iter().all(|v| v.as_slice().iter().all(|&x| x >= 0.0)));
        assert_eq!(st.m.iter().map(Matrix::len).sum::<usize>(), count);
        assert_eq!(tr.model().param_count(), count);
        assert_eq!(st.t as usize, 2); // 20 samples, batch 32: one step per epoch
    }

    #[test]
    fn learns_a_separable_toy_problem() {
        let train = toy(64, 7);
        let val = toy(32, 8);
        let cfg = TrainConfig {
            epochs: 40,
            learning_rate: 0.01,
            batch_size: 16,
            seed: 1,
            ..Default::default()
        };
        let (_, h) = fit(Model::new(small_spec(), 2).unwrap(), &train, &val, &cfg).unwrap();
        let last = h.epochs.last().unwrap();
        assert!(last.val_accuracy > 0.9, "{last:?}");
        assert!(last.train_loss < h.epochs[0].train_loss);
    }

    #[test]
    fn history_csv_layout() {
        let h = TrainHistory {
            epochs: vec![EpochRecord {
                epoch: 1,
                train_loss: 0.5,
                val_loss: 0.25,
                val_accuracy: 0.75,
            }],
        };
        assert_eq!(h.to_csv(), "epoch,train_loss,val_loss,val_accuracy\n1,0.5,0.25,0.75\n");
    }
}
