//! Concrete networks: parameter storage, batched forward pass with an
//! activation tape, and the matching backward pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::activation::{sigmoid, Activation};
use super::init::InitConfig;
use super::lstm::{bi_forward_batch, LstmCellParams, LstmTrace};
use super::matrix::{gemm, Matrix, Op};
use super::spec::{LayerSpec, ModelSpec};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Lstm {
        cell: LstmCellParams,
        return_sequence: bool,
    },
    BiLstm {
        fwd: LstmCellParams,
        bwd: LstmCellParams,
        return_sequence: bool,
    },
    Dense {
        /// `out x in`
        w: Matrix,
        /// `1 x out`
        b: Matrix,
        activation: Activation,
    },
    Dropout {
        rate: f64,
    },
    Output {
        /// `1 x in`
        w: Matrix,
        /// `1 x 1`
        b: Matrix,
    },
}

impl Layer {
    fn tensors(&self) -> Vec<&Matrix> {
        match self {
            Layer::Lstm { cell, .. } => vec![&cell.w, &cell.u, &cell.b],
            Layer::BiLstm { fwd, bwd, .. } => {
                vec![&fwd.w, &fwd.u, &fwd.b, &bwd.w, &bwd.u, &bwd.b]
            }
            Layer::Dense { w, b, .. } | Layer::Output { w, b } => vec![w, b],
            Layer::Dropout { .. } => vec![],
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        match self {
            Layer::Lstm { cell, .. } => vec![&mut cell.w, &mut cell.u, &mut cell.b],
            Layer::BiLstm { fwd, bwd, .. } => vec![
                &mut fwd.w,
                &mut fwd.u,
                &mut fwd.b,
                &mut bwd.w,
                &mut bwd.u,
                &mut bwd.b,
            ],
            Layer::Dense { w, b, .. } | Layer::Output { w, b } => vec![w, b],
            Layer::Dropout { .. } => vec![],
        }
    }

    fn tensor_names(&self, index: usize) -> Vec<String> {
        let names: &[&str] = match self {
            Layer::Lstm { .. } => &["lstm.w", "lstm.u", "lstm.b"],
            Layer::BiLstm { .. } => &[
                "bilstm.fwd.w",
                "bilstm.fwd.u",
                "bilstm.fwd.b",
                "bilstm.bwd.w",
                "bilstm.bwd.u",
                "bilstm.bwd.b",
            ],
            Layer::Dense { .. } => &["dense.w", "dense.b"],
            Layer::Output { .. } => &["output.w", "output.b"],
            Layer::Dropout { .. } => &[],
        };
        names.iter().map(|n| format!("layer{index}.{n}")).collect()
    }

    fn zeros_like(&self) -> Layer {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }
}

/// A network built from a [`ModelSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    layers: Vec<Layer>,
    rng_seed: u64,
}

impl Model {
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        Self::with_init(spec, seed, &InitConfig::default())
    }

    pub fn with_init(spec: ModelSpec, seed: u64, init: &InitConfig) -> Result<Self> {
        spec.validate()?;
        let widths = spec.input_widths();
        let last_recurrent = spec.layers.iter().rposition(LayerSpec::is_recurrent);
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (i, (ls, &inw)) in spec.layers.iter().zip(&widths).enumerate() {
            let s = derive_seed(seed, i as u64);
            let return_sequence = Some(i) != last_recurrent;
            let layer = match *ls {
                LayerSpec::LstmUni { hidden_units } => Layer::Lstm {
                    cell: LstmCellParams::init(inw, hidden_units, s, init)?,
                    return_sequence,
                },
                LayerSpec::LstmBi { hidden_units } => Layer::BiLstm {
                    fwd: LstmCellParams::init(inw, hidden_units, derive_seed(s, 10), init)?,
                    bwd: LstmCellParams::init(inw, hidden_units, derive_seed(s, 11), init)?,
                    return_sequence,
                },
                LayerSpec::Dense {
                    hidden_units,
                    activation,
                } => Layer::Dense {
                    w: init.weights.sample(hidden_units, inw, inw, hidden_units, s)?,
                    b: Matrix::zeros(1, hidden_units),
                    activation,
                },
                LayerSpec::Dropout { drop_rate } => Layer::Dropout { rate: drop_rate },
                LayerSpec::OutputSigmoid => Layer::Output {
                    w: init.weights.sample(1, inw, inw, 1, s)?,
                    b: Matrix::zeros(1, 1),
                },
            };
            layers.push(layer);
        }
        Ok(Model {
            spec,
            layers,
            rng_seed: seed,
        })
    }

    /// Rebuilds a model from stored tensors (in [`Model::tensors`] order).
    pub fn from_tensors(spec: ModelSpec, seed: u64, tensors: Vec<Matrix>) -> Result<Self> {
        let mut model = Self::with_init(
            spec,
            seed,
            &InitConfig {
                weights: super::init::WeightInit::He,
                forget_bias: 0.0,
            },
        )?;
        let slots = model.tensors_mut();
        if slots.len() != tensors.len() {
            return Err(Error::invalid(format!(
                "model expects {} tensors, got {}",
                slots.len(),
                tensors.len()
            )));
        }
        for (slot, t) in slots.into_iter().zip(tensors) {
            if slot.shape() != t.shape() {
                return Err(Error::invalid(format!(
                    "tensor shape {:?} does not match expected {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t;
        }
        Ok(model)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    /// Parameter tensors in their canonical order.
    pub fn tensors(&self) -> Vec<&Matrix> {
        self.layers.iter().flat_map(Layer::tensors).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers.iter_mut().flat_map(Layer::tensors_mut).collect()
    }

    pub fn tensor_names(&self) -> Vec<String> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.tensor_names(i))
            .collect()
    }

    /// Total scalar count of the stored tensors.
    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self.layers.iter().map(Layer::zeros_like).collect(),
        }
    }

    /// Draws inverted-dropout masks for a batch: each entry is 0 with
    /// probability `rate` and `1 / (1 - rate)` otherwise.
    pub fn sample_masks<R: Rng>(&self, batch: usize, rng: &mut R) -> DropoutMasks {
        let widths = self.spec.input_widths();
        let mut masks = Vec::new();
        for (layer, &width) in self.layers.iter().zip(&widths) {
            if let Layer::Dropout { rate } = *layer {
                let keep = 1.0 / (1.0 - rate);
                masks.push(Matrix::from_fn(batch, width, |_, _| {
                    if rng.random::<f64>() < rate {
                        0.0
                    } else {
                        keep
                    }
                }));
            }
        }
        DropoutMasks(masks)
    }

    fn check_window(&self, w: &Matrix) -> Result<()> {
        let expected = (self.spec.input_features, self.spec.window_len);
        if w.shape() != expected {
            return Err(Error::invalid(format!(
                "window shape {:?} does not match model input {:?}",
                w.shape(),
                expected
            )));
        }
        Ok(())
    }

    /// Forward pass over a batch of `features x time` windows.
    ///
    /// With `masks = None` dropout layers are the identity (inference). With
    /// masks, each dropout layer multiplies by its mask (training).
    pub fn forward_tape(&self, windows: &[&Matrix], masks: Option<&DropoutMasks>) -> Result<Tape> {
        if windows.is_empty() {
            return Err(Error::invalid("forward pass needs at least one window"));
        }
        for w in windows {
            self.check_window(w)?;
        }
        let batch = windows.len();
        if let Some(m) = masks {
            if m.0.len() != self.dropout_count() || m.0.iter().any(|x| x.rows() != batch) {
                return Err(Error::invalid("dropout masks do not match the batch"));
            }
        }
        let steps = self.spec.window_len;
        let features = self.spec.input_features;
        let input: Vec<Matrix> = (0..steps)
            .map(|t| Matrix::from_fn(batch, features, |b, f| windows[b].get(f, t)))
            .collect();

        let mut acts = vec![Act::Seq(input)];
        let mut traces = Vec::with_capacity(self.layers.len());
        let mut mask_iter = masks.map(|m| m.0.iter());
        for layer in &self.layers {
            let x = acts.last().unwrap();
            let (out, trace) = match layer {
                Layer::Lstm {
                    cell,
                    return_sequence,
                } => {
                    let tr = cell.forward_batch(x.seq())?;
                    let out = if *return_sequence {
                        Act::Seq(tr.h.clone())
                    } else {
                        Act::Flat(tr.h[steps - 1].clone())
                    };
                    (out, LayerTrace::Lstm(tr))
                }
                Layer::BiLstm {
                    fwd,
                    bwd,
                    return_sequence,
                } => {
                    let (f, b, reversed) = bi_forward_batch(fwd, bwd, x.seq())?;
                    let out = if *return_sequence {
                        Act::Seq(
                            (0..steps)
                                .map(|t| Matrix::hconcat(&f.h[t], &b.h[steps - 1 - t]))
                                .collect(),
                        )
                    } else {
                        Act::Flat(Matrix::hconcat(&f.h[steps - 1], &b.h[steps - 1]))
                    };
                    (out, LayerTrace::BiLstm { f, b, reversed })
                }
                Layer::Dense { w, b, activation } => {
                    let xin = x.flat();
                    let mut z = Matrix::zeros(batch, w.rows());
                    z.add_row_broadcast(b.as_slice());
                    gemm(1.0, xin, Op::N, w, Op::T, 1.0, &mut z);
                    let a = z.map(|v| activation.apply(v));
                    (Act::Flat(a), LayerTrace::None)
                }
                Layer::Dropout { .. } => match mask_iter.as_mut().and_then(|it| it.next()) {
                    Some(mask) => {
                        let xin = x.flat();
                        let mut out = xin.clone();
                        for (o, m) in out.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                            *o *= *m;
                        }
                        (Act::Flat(out), LayerTrace::Mask(mask.clone()))
                    }
                    None => (Act::Flat(x.flat().clone()), LayerTrace::None),
                },
                Layer::Output { w, b } => {
                    let xin = x.flat();
                    let mut z = Matrix::zeros(batch, 1);
                    z.add_row_broadcast(b.as_slice());
                    gemm(1.0, xin, Op::N, w, Op::T, 1.0, &mut z);
                    (Act::Flat(z.map(sigmoid)), LayerTrace::None)
                }
            };
            acts.push(out);
            traces.push(trace);
        }
        let probs = acts.last().unwrap().flat().as_slice().to_vec();
        Ok(Tape {
            acts,
            traces,
            probs,
        })
    }

    fn dropout_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l, Layer::Dropout { .. }))
            .count()
    }

    /// Inference-mode probabilities for a batch of windows.
    pub fn predict_batch(&self, windows: &[&Matrix]) -> Result<Vec<f64>> {
        Ok(self.forward_tape(windows, None)?.probs)
    }

    /// Gradient of the batch-mean binary cross-entropy with respect to every
    /// parameter, using the activations recorded in `tape`.
    pub fn backward(&self, tape: &Tape, labels: &[u8]) -> Result<Gradients> {
        let batch = tape.probs.len();
        if labels.len() != batch {
            return Err(Error::invalid(format!(
                "{} labels for a batch of {batch}",
                labels.len()
            )));
        }
        let steps = self.spec.window_len;
        let mut grads = self.zero_gradients();
        // d(mean BCE)/d(logit) = (p - y) / N
        let mut upstream = Grad::Flat(Matrix::from_fn(batch, 1, |r, _| {
            (tape.probs[r] - f64::from(labels[r])) / batch as f64
        }));

        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &tape.acts[i];
            let output = &tape.acts[i + 1];
            let g = &mut grads.layers[i];
            upstream = match (layer, g, &tape.traces[i]) {
                (Layer::Output { w, .. }, Layer::Output { w: gw, b: gb }, _) => {
                    let dz = upstream.into_flat(batch, 1);
                    Grad::Flat(dense_backward(input.flat(), &dz, w, gw, gb))
                }
                (
                    Layer::Dense { w, activation, .. },
                    Layer::Dense { w: gw, b: gb, .. },
                    _,
                ) => {
                    let mut dz = upstream.into_flat(batch, w.rows());
                    for (d, a) in dz.as_mut_slice().iter_mut().zip(output.flat().as_slice()) {
                        *d *= activation.derivative_from_output(*a);
                    }
                    Grad::Flat(dense_backward(input.flat(), &dz, w, gw, gb))
                }
                (Layer::Dropout { .. }, _, LayerTrace::Mask(mask)) => {
                    let mut d = upstream.into_flat(batch, mask.cols());
                    for (v, m) in d.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                        *v *= *m;
                    }
                    Grad::Flat(d)
                }
                (Layer::Dropout { .. }, _, _) => upstream,
                (
                    Layer::Lstm {
                        cell,
                        return_sequence,
                    },
                    Layer::Lstm { cell: gc, .. },
                    LayerTrace::Lstm(tr),
                ) => {
                    let d_h = upstream.into_steps(steps, *return_sequence);
                    Grad::Seq(cell.backward_batch(input.seq(), tr, &d_h, gc))
                }
                (
                    Layer::BiLstm {
                        fwd,
                        bwd,
                        return_sequence,
                    },
                    Layer::BiLstm {
                        fwd: gf, bwd: gb, ..
                    },
                    LayerTrace::BiLstm { f, b, reversed },
                ) => {
                    let h = fwd.hidden_size();
                    let d_out = upstream.into_steps(steps, *return_sequence);
                    let mut d_f: Vec<Option<Matrix>> = vec![None; steps];
                    let mut d_b: Vec<Option<Matrix>> = vec![None; steps];
                    for (t, d) in d_out.into_iter().enumerate() {
                        if let Some(d) = d {
                            d_f[t] = Some(d.columns(0, h));
                            // Backward-direction trace index of original timestep t;
                            // the final summary state is index steps-1 in both.
                            let bt = if *return_sequence { steps - 1 - t } else { t };
                            d_b[bt] = Some(d.columns(h, h));
                        }
                    }
                    let mut dx = fwd.backward_batch(input.seq(), f, &d_f, gf);
                    let dx_rev = bwd.backward_batch(reversed, b, &d_b, gb);
                    for (t, d) in dx.iter_mut().enumerate() {
                        d.add_assign(&dx_rev[steps - 1 - t]);
                    }
                    Grad::Seq(dx)
                }
                _ => unreachable!("gradient and trace layouts mirror the model"),
            };
        }
        Ok(grads)
    }
}

fn dense_backward(x: &Matrix, dz: &Matrix, w: &Matrix, gw: &mut Matrix, gb: &mut Matrix) -> Matrix {
    gemm(1.0, dz, Op::T, x, Op::N, 1.0, gw);
    dz.add_column_sums_to(gb.as_mut_slice());
    let mut dx = Matrix::zeros(x.rows(), x.cols());
    gemm(1.0, dz, Op::N, w, Op::N, 0.0, &mut dx);
    dx
}

/// Layer input/output in the forward tape.
#[derive(Debug, Clone)]
enum Act {
    Seq(Vec<Matrix>),
    Flat(Matrix),
}

impl Act {
    fn seq(&self) -> &[Matrix] {
        match self {
            Act::Seq(s) => s,
            Act::Flat(_) => unreachable!("validated specs feed sequences only to LSTM layers"),
        }
    }

    fn flat(&self) -> &Matrix {
        match self {
            Act::Flat(m) => m,
            Act::Seq(_) => unreachable!("validated specs end the LSTM block with a summary state"),
        }
    }
}

enum Grad {
    Seq(Vec<Matrix>),
    Flat(Matrix),
}

impl Grad {
    fn into_flat(self, _batch: usize, _width: usize) -> Matrix {
        match self {
            Grad::Flat(m) => m,
            Grad::Seq(_) => unreachable!(),
        }
    }

    /// Per-timestep upstream gradients; a summary-state gradient lands on the last step.
    fn into_steps(self, steps: usize, return_sequence: bool) -> Vec<Option<Matrix>> {
        match (self, return_sequence) {
            (Grad::Seq(v), true) => v.into_iter().map(Some).collect(),
            (Grad::Flat(m), false) => {
                let mut v = vec![None; steps];
                v[steps - 1] = Some(m);
                v
            }
            _ => unreachable!(),
        }
    }
}

#[derive(Debug, Clone)]
enum LayerTrace {
    None,
    Lstm(LstmTrace),
    BiLstm {
        f: LstmTrace,
        b: LstmTrace,
        reversed: Vec<Matrix>,
    },
    Mask(Matrix),
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    acts: Vec<Act>,
    traces: Vec<LayerTrace>,
    pub probs: Vec<f64>,
}

/// One mask per dropout layer, `batch x width`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks(pub Vec<Matrix>);

/// Parameter gradients laid out exactly like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layers: Vec<Layer>,
}

impl Gradients {
    pub fn tensors(&self) -> Vec<&Matrix> {
        self.layers.iter().flat_map(Layer::tensors).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers.iter_mut().flat_map(Layer::tensors_mut).collect()
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.scale(k);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors()
            .iter()
            .flat_map(|t| t.as_slice().iter().copied())
            .collect()
    }
}

/// Whether dropout is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Probability for one window. In train mode the dropout masks are drawn
/// from `seed`; in infer mode `seed` is ignored.
pub fn model_forward(m: &Model, window: &Matrix, mode: Mode, seed: u64) -> Result<f64> {
    let masks = match mode {
        Mode::Infer => None,
        Mode::Train => Some(m.sample_masks(1, &mut ChaCha8Rng::seed_from_u64(seed))),
    };
    Ok(m.forward_tape(&[window], masks.as_ref())?.probs[0])
}

/// Gradient of the single-sample loss under fixed dropout masks.
pub fn model_backward(
    m: &Model,
    window: &Matrix,
    label: u8,
    masks: Option<&DropoutMasks>,
) -> Result<Gradients> {
    let tape = m.forward_tape(&[window], masks)?;
    m.backward(&tape, &[label])
}
