//! Architecture descriptions and the three built-in presets.

use serde::{Deserialize, Serialize};

use super::activation::Activation;
use crate::error::{Error, Result};

pub const DEFAULT_FEATURES: usize = 16;
pub const DEFAULT_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    LstmUni {
        hidden_units: usize,
    },
    /// `hidden_units` per direction; the layer emits `2 * hidden_units`.
    LstmBi {
        hidden_units: usize,
    },
    Dense {
        hidden_units: usize,
        #[serde(default)]
        activation: Activation,
    },
    Dropout {
        drop_rate: f64,
    },
    OutputSigmoid,
}

impl LayerSpec {
    pub fn lstm(hidden_units: usize) -> Self {
        LayerSpec::LstmUni { hidden_units }
    }

    pub fn bilstm(hidden_units: usize) -> Self {
        LayerSpec::LstmBi { hidden_units }
    }

    pub fn dense(hidden_units: usize) -> Self {
        LayerSpec::Dense {
            hidden_units,
            activation: Activation::Relu,
        }
    }

    pub fn dropout(drop_rate: f64) -> Self {
        LayerSpec::Dropout { drop_rate }
    }

    pub fn is_recurrent(&self) -> bool {
        matches!(self, LayerSpec::LstmUni { .. } | LayerSpec::LstmBi { .. })
    }

    /// Width of the vector this layer hands to the next one.
    pub fn output_width(&self, input_width: usize) -> usize {
        match *self {
            LayerSpec::LstmUni { hidden_units } | LayerSpec::Dense { hidden_units, .. } => {
                hidden_units
            }
            LayerSpec::LstmBi { hidden_units } => 2 * hidden_units,
            LayerSpec::Dropout { .. } => input_width,
            LayerSpec::OutputSigmoid => 1,
        }
    }

    /// Trainable scalars given the incoming width.
    pub fn param_count(&self, input_width: usize) -> usize {
        let lstm = |h: usize| 4 * (h * (input_width + h) + h);
        match *self {
            LayerSpec::LstmUni { hidden_units } => lstm(hidden_units),
            LayerSpec::LstmBi { hidden_units } => 2 * lstm(hidden_units),
            LayerSpec::Dense { hidden_units, .. } => hidden_units * (input_width + 1),
            LayerSpec::Dropout { .. } => 0,
            LayerSpec::OutputSigmoid => input_width + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_features: usize,
    pub window_len: usize,
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Self {
        ModelSpec {
            input_features: DEFAULT_FEATURES,
            window_len: DEFAULT_WINDOW,
            layers,
        }
    }

    pub fn with_input(mut self, input_features: usize, window_len: usize) -> Self {
        self.input_features = input_features;
        self.window_len = window_len;
        self
    }

    /// Two LSTM layers (32, 16), two dense layers of 16, dropout 0.5 after
    /// the second dense layer.
    pub fn arch_a() -> Self {
        ModelSpec::new(vec![
            LayerSpec::lstm(32),
            LayerSpec::lstm(16),
            LayerSpec::dense(16),
            LayerSpec::dense(16),
            LayerSpec::dropout(0.5),
            LayerSpec::OutputSigmoid,
        ])
    }

    /// Four LSTM layers (224, 128, 96, 80), dense 64 with dropout 0.5, dense 32.
    pub fn arch_b() -> Self {
        ModelSpec::new(vec![
            LayerSpec::lstm(224),
            LayerSpec::lstm(128),
            LayerSpec::lstm(96),
            LayerSpec::lstm(80),
            LayerSpec::dense(64),
            LayerSpec::dropout(0.5),
            LayerSpec::dense(32),
            LayerSpec::OutputSigmoid,
        ])
    }

    /// Five bidirectional LSTM layers (192, 160, 128, 32, 32 per direction),
    /// two dense layers of 16, dropout 0.5 after the second.
    pub fn arch_c() -> Self {
        ModelSpec::new(vec![
            LayerSpec::bilstm(192),
            LayerSpec::bilstm(160),
            LayerSpec::bilstm(128),
            LayerSpec::bilstm(32),
            LayerSpec::bilstm(32),
            LayerSpec::dense(16),
            LayerSpec::dense(16),
            LayerSpec::dropout(0.5),
            LayerSpec::OutputSigmoid,
        ])
    }

    /// Looks up `arch-a`, `arch-b` or `arch-c`.
    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "arch-a" | "a" => Some(Self::arch_a()),
            "arch-b" | "b" => Some(Self::arch_b()),
            "arch-c" | "c" => Some(Self::arch_c()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(format!("model spec: {msg}")));
        if self.input_features == 0 || self.window_len == 0 {
            return bad("input_features and window_len must be positive".into());
        }
        let n = self.layers.len();
        if n < 2 || !self.layers[0].is_recurrent() {
            return bad("the first layer must be an LSTM layer".into());
        }
        let outputs = self
            .layers
            .iter()
            .filter(|l| matches!(l, LayerSpec::OutputSigmoid))
            .count();
        if outputs != 1 || self.layers[n - 1] != LayerSpec::OutputSigmoid {
            return bad("exactly one OutputSigmoid, in last position".into());
        }
        let last_recurrent = self.layers.iter().rposition(LayerSpec::is_recurrent).unwrap();
        if self.layers[..=last_recurrent].iter().any(|l| !l.is_recurrent()) {
            return bad("LSTM layers must form one leading block; dropout or dense layers cannot sit between them".into());
        }
        for (i, layer) in self.layers.iter().enumerate() {
            match *layer {
                LayerSpec::LstmUni { hidden_units }
                | LayerSpec::LstmBi { hidden_units }
                | LayerSpec::Dense { hidden_units, .. } => {
                    if hidden_units == 0 {
                        return bad(format!("layer {i} has zero hidden units"));
                    }
                }
                LayerSpec::Dropout { drop_rate } => {
                    if !(0.0..1.0).contains(&drop_rate) {
                        return bad(format!("layer {i}: drop_rate {drop_rate} outside [0, 1)"));
                    }
                    let prev = &self.layers[i - 1];
                    if !matches!(prev, LayerSpec::Dense { .. }) && i - 1 != last_recurrent {
                        return bad(format!(
                            "layer {i}: dropout must follow a dense layer or the final LSTM layer"
                        ));
                    }
                }
                LayerSpec::OutputSigmoid => {}
            }
        }
        Ok(())
    }

    /// Exact number of trainable scalars.
    pub fn param_count(&self) -> usize {
        let mut width = self.input_features;
        let mut total = 0;
        for layer in &self.layers {
            total += layer.param_count(width);
            width = layer.output_width(width);
        }
        total
    }

    /// Input width seen by each layer.
    pub fn input_widths(&self) -> Vec<usize> {
        let mut width = self.input_features;
        self.layers
            .iter()
            .map(|l| {
                let w = width;
                width = l.output_width(width);
                w
            })
            .collect()
    }
}

/// Free-function form of [`ModelSpec::param_count`].
pub fn param_count(spec: &ModelSpec) -> usize {
    spec.param_count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arch_a_has_9969_parameters() {
        assert_eq!(param_count(&ModelSpec::arch_a()), 9969);
    }

    #[test]
    fn single_layer_counts() {
        assert_eq!(LayerSpec::OutputSigmoid.param_count(16), 17);
        assert_eq!(LayerSpec::dense(1).param_count(16), 17);
        assert_eq!(LayerSpec::lstm(32).param_count(16), 6272);
        let spec = ModelSpec::new(vec![LayerSpec::lstm(32), LayerSpec::OutputSigmoid]);
        assert_eq!(spec.param_count(), 6272 + 33);
    }

    #[test]
    fn presets_validate_and_match_described_widths() {
        for name in ["arch-a", "arch-b", "arch-c"] {
            ModelSpec::preset(name).unwrap().validate().unwrap();
        }
        let b = ModelSpec::arch_b();
        let widths: Vec<usize> = b
            .layers
            .iter()
            .filter_map(|l| match *l {
                LayerSpec::LstmUni { hidden_units } | LayerSpec::Dense { hidden_units, .. } => {
                    Some(hidden_units)
                }
                _ => None,
            })
            .collect();
        assert_eq!(widths, vec![224, 128, 96, 80, 64, 32]);
        let c = ModelSpec::arch_c();
        let bi: Vec<usize> = c
            .layers
            .iter()
            .filter_map(|l| match *l {
                LayerSpec::LstmBi { hidden_units } => Some(hidden_units),
                _ => None,
            })
            .collect();
        assert_eq!(bi, vec![192, 160, 128, 32, 32]);
    }

    #[test]
    fn validation_rejects_malformed_specs() {
        let dropout_between = ModelSpec::new(vec![
            LayerSpec::lstm(4),
            LayerSpec::dropout(0.5),
            LayerSpec::lstm(4),
            LayerSpec::OutputSigmoid,
        ]);
        assert!(dropout_between.validate().is_err());

        let after_final_lstm = ModelSpec::new(vec![
            LayerSpec::lstm(4),
            LayerSpec::lstm(4),
            LayerSpec::dropout(0.5),
            LayerSpec::OutputSigmoid,
        ]);
        after_final_lstm.validate().unwrap();

        let no_output = ModelSpec::new(vec![LayerSpec::lstm(4), LayerSpec::dense(2)]);
        assert!(no_output.validate().is_err());

        let dense_first = ModelSpec::new(vec![LayerSpec::dense(4), LayerSpec::OutputSigmoid]);
        assert!(dense_first.validate().is_err());

        let bad_rate = ModelSpec::new(vec![
            LayerSpec::lstm(4),
            LayerSpec::dropout(1.0),
            LayerSpec::OutputSigmoid,
        ]);
        assert!(bad_rate.validate().is_err());

        let two_outputs = ModelSpec::new(vec![
            LayerSpec::lstm(4),
            LayerSpec::OutputSigmoid,
            LayerSpec::OutputSigmoid,
        ]);
        assert!(two_outputs.validate().is_err());
    }

    #[test]
    fn spec_json_round_trips() {
        let spec = ModelSpec::arch_c();
        let json = serde_json::to_string(&spec).unwrap();
        let back: ModelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        let dense: LayerSpec =
            serde_json::from_str(r#"{"kind":"dense","hidden_units":8}"#).unwrap();
        assert_eq!(dense, LayerSpec::dense(8));
    }
}
