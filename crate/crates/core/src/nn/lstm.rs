//! LSTM cells and layers.
//!
//! Gate pre-activations are computed for a whole batch at once:
//! `Z = X W^T + H_prev U^T + b`, with the four gates stacked along the
//! columns of `Z` in the order input, forget, output, candidate. The
//! per-vector functions at the bottom of the module are thin wrappers over
//! the batched kernels with a batch of one.

use serde::{Deserialize, Serialize};

use super::activation::sigmoid;
use super::init::InitConfig;
use super::matrix::{gemm, Matrix, Op};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// The four LSTM gates, in their stacking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Candidate];
}

/// Weights shared by every timestep of one LSTM direction.
///
/// `w` is `4h x input`, `u` is `4h x h` and `b` is `1 x 4h`; gate `k`
/// occupies rows (or columns of `b`) `k*h .. (k+1)*h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCellParams {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Matrix,
}

impl LstmCellParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        LstmCellParams {
            w: Matrix::zeros(4 * hidden_size, input_size),
            u: Matrix::zeros(4 * hidden_size, hidden_size),
            b: Matrix::zeros(1, 4 * hidden_size),
        }
    }

    pub fn init(input_size: usize, hidden_size: usize, seed: u64, init: &InitConfig) -> Result<Self> {
        let mut p = Self::zeros(input_size, hidden_size);
        let h = hidden_size;
        p.w = init.weights.sample(4 * h, input_size, input_size, h, derive_seed(seed, 0))?;
        p.u = init.weights.sample(4 * h, h, h, h, derive_seed(seed, 1))?;
        p.b.as_mut_slice()[h..2 * h].fill(init.forget_bias);
        Ok(p)
    }

    #[inline]
    pub fn input_size(&self) -> usize {
        self.w.cols()
    }

    #[inline]
    pub fn hidden_size(&self) -> usize {
        self.u.cols()
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.u.len() + self.b.len()
    }

    /// Input weights of one gate as an `h x input` matrix.
    pub fn w_gate(&self, gate: Gate) -> Matrix {
        self.gate_rows(&self.w, gate)
    }

    /// Recurrent weights of one gate as an `h x h` matrix.
    pub fn u_gate(&self, gate: Gate) -> Matrix {
        self.gate_rows(&self.u, gate)
    }

    pub fn b_gate(&self, gate: Gate) -> &[f64] {
        let h = self.hidden_size();
        let k = gate as usize;
        &self.b.as_slice()[k * h..(k + 1) * h]
    }

    fn gate_rows(&self, m: &Matrix, gate: Gate) -> Matrix {
        let h = self.hidden_size();
        let k = gate as usize;
        Matrix::from_fn(h, m.cols(), |r, c| m.get(k * h + r, c))
    }

    pub fn set_gate(&mut self, gate: Gate, w: &Matrix, u: &Matrix, b: &[f64]) -> Result<()> {
        let h = self.hidden_size();
        if w.shape() != (h, self.input_size()) || u.shape() != (h, h) || b.len() != h {
            return Err(Error::invalid("set_gate: gate tensor shapes do not match the cell"));
        }
        let k = gate as usize;
        for r in 0..h {
            self.w.row_mut(k * h + r).copy_from_slice(w.row(r));
            self.u.row_mut(k * h + r).copy_from_slice(u.row(r));
        }
        self.b.as_mut_slice()[k * h..(k + 1) * h].copy_from_slice(b);
        Ok(())
    }

    fn check_input(&self, seq: &[Matrix]) -> Result<()> {
        let first = seq
            .first()
            .ok_or_else(|| Error::invalid("LSTM input sequence is empty"))?;
        let batch = first.rows();
        for x in seq {
            if x.cols() != self.input_size() || x.rows() != batch {
                return Err(Error::invalid(format!(
                    "LSTM expects {}-wide inputs, got {}x{}",
                    self.input_size(),
                    x.rows(),
                    x.cols()
                )));
            }
        }
        Ok(())
    }

    /// One timestep for a batch: returns the activated gates, new cell and new hidden state.
    fn step(&self, x: &Matrix, h_prev: Option<&Matrix>, c_prev: Option<&Matrix>) -> StepOut {
        let h = self.hidden_size();
        let batch = x.rows();
        let mut z = Matrix::zeros(batch, 4 * h);
        z.add_row_broadcast(self.b.as_slice());
        gemm(1.0, x, Op::N, &self.w, Op::T, 1.0, &mut z);
        if let Some(hp) = h_prev {
            gemm(1.0, hp, Op::N, &self.u, Op::T, 1.0, &mut z);
        }
        let mut c = Matrix::zeros(batch, h);
        let mut tanh_c = Matrix::zeros(batch, h);
        let mut h_out = Matrix::zeros(batch, h);
        for r in 0..batch {
            let zr = z.row_mut(r);
            for v in &mut zr[..3 * h] {
                *v = sigmoid(*v);
            }
            for v in &mut zr[3 * h..] {
                *v = v.tanh();
            }
            let zr = z.row(r);
            let (gi, rest) = zr.split_at(h);
            let (gf, rest) = rest.split_at(h);
            let (go, gg) = rest.split_at(h);
            let cr = c.row_mut(r);
            for j in 0..h {
                let carry = c_prev.map_or(0.0, |cp| gf[j] * cp.get(r, j));
                cr[j] = carry + gi[j] * gg[j];
            }
            let tr = tanh_c.row_mut(r);
            for j in 0..h {
                tr[j] = c.get(r, j).tanh();
            }
            let hr = h_out.row_mut(r);
            for j in 0..h {
                hr[j] = go[j] * tanh_c.get(r, j);
            }
        }
        StepOut {
            gates: z,
            c,
            tanh_c,
            h: h_out,
        }
    }

    /// Runs the layer over a batched sequence (`seq[t]` is `batch x input`)
    /// from zero initial state.
    pub fn forward_batch(&self, seq: &[Matrix]) -> Result<LstmTrace> {
        self.check_input(seq)?;
        let mut trace = LstmTrace {
            gates: Vec::with_capacity(seq.len()),
            c: Vec::with_capacity(seq.len()),
            tanh_c: Vec::with_capacity(seq.len()),
            h: Vec::with_capacity(seq.len()),
        };
        for x in seq {
            let out = self.step(x, trace.h.last(), trace.c.last());
            trace.gates.push(out.gates);
            trace.c.push(out.c);
            trace.tanh_c.push(out.tanh_c);
            trace.h.push(out.h);
        }
        Ok(trace)
    }

    /// Backpropagation through time.
    ///
    /// `d_h[t]` is the loss gradient arriving at the layer output for
    /// timestep `t` from above (`None` when nothing consumes that output).
    /// Parameter gradients are accumulated into `grads`; the returned vector
    /// holds the gradient with respect to each input `seq[t]`.
    pub fn backward_batch(
        &self,
        seq: &[Matrix],
        trace: &LstmTrace,
        d_h: &[Option<Matrix>],
        grads: &mut LstmCellParams,
    ) -> Vec<Matrix> {
        let h = self.hidden_size();
        let steps = seq.len();
        let batch = seq[0].rows();
        let mut d_x = vec![Matrix::zeros(batch, self.input_size()); steps];
        let mut dh_next = Matrix::zeros(batch, h);
        let mut dc_next = Matrix::zeros(batch, h);
        let mut dz = Matrix::zeros(batch, 4 * h);

        for t in (0..steps).rev() {
            let gates = &trace.gates[t];
            let tanh_c = &trace.tanh_c[t];
            let c_prev = if t > 0 { Some(&trace.c[t - 1]) } else { None };
            for r in 0..batch {
                let g = gates.row(r);
                let (gi, rest) = g.split_at(h);
                let (gf, rest) = rest.split_at(h);
                let (go, gg) = rest.split_at(h);
                let above = d_h[t].as_ref().map(|m| m.row(r));
                let dzr = dz.row_mut(r);
                for j in 0..h {
                    let dh = dh_next.get(r, j) + above.map_or(0.0, |a| a[j]);
                    let tc = tanh_c.get(r, j);
                    let dc = dh * go[j] * (1.0 - tc * tc) + dc_next.get(r, j);
                    let cp = c_prev.map_or(0.0, |m| m.get(r, j));
                    dzr[j] = dc * gg[j] * gi[j] * (1.0 - gi[j]);
                    dzr[h + j] = dc * cp * gf[j] * (1.0 - gf[j]);
                    dzr[2 * h + j] = dh * tc * go[j] * (1.0 - go[j]);
                    dzr[3 * h + j] = dc * gi[j] * (1.0 - gg[j] * gg[j]);
                    dc_next.set(r, j, dc * gf[j]);
                }
            }
            gemm(1.0, &dz, Op::T, &seq[t], Op::N, 1.0, &mut grads.w);
            dz.add_column_sums_to(grads.b.as_mut_slice());
            gemm(1.0, &dz, Op::N, &self.w, Op::N, 0.0, &mut d_x[t]);
            if t > 0 {
                gemm(1.0, &dz, Op::T, &trace.h[t - 1], Op::N, 1.0, &mut grads.u);
                gemm(1.0, &dz, Op::N, &self.u, Op::N, 0.0, &mut dh_next);
            }
        }
        d_x
    }
}

struct StepOut {
    gates: Matrix,
    c: Matrix,
    tanh_c: Matrix,
    h: Matrix,
}

/// Activations recorded by a batched forward pass, one entry per timestep.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    /// Activated gates `[i | f | o | g]`, `batch x 4h`.
    pub gates: Vec<Matrix>,
    pub c: Vec<Matrix>,
    pub tanh_c: Vec<Matrix>,
    pub h: Vec<Matrix>,
}

/// Bidirectional pass over a batched sequence. The backward direction reads
/// the time-reversed sequence; its outputs are re-reversed so that index `t`
/// of both traces refers to the same original timestep.
pub(crate) fn bi_forward_batch(
    fwd: &LstmCellParams,
    bwd: &LstmCellParams,
    seq: &[Matrix],
) -> Result<(LstmTrace, LstmTrace, Vec<Matrix>)> {
    let f = fwd.forward_batch(seq)?;
    let reversed: Vec<Matrix> = seq.iter().rev().cloned().collect();
    let b = bwd.forward_batch(&reversed)?;
    Ok((f, b, reversed))
}

fn to_row(v: &[f64]) -> Matrix {
    Matrix::row_vector(v)
}

/// Single-sample LSTM cell update.
pub fn lstm_cell_forward(
    p: &LstmCellParams,
    x_t: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let hs = p.hidden_size();
    if x_t.len() != p.input_size() || h_prev.len() != hs || c_prev.len() != hs {
        return Err(Error::invalid(format!(
            "lstm_cell_forward: expected x {} / h {} / c {}, got {} / {} / {}",
            p.input_size(),
            hs,
            hs,
            x_t.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let hp = to_row(h_prev);
    let cp = to_row(c_prev);
    let out = p.step(&to_row(x_t), Some(&hp), Some(&cp));
    Ok((out.h.into_vec(), out.c.into_vec()))
}

/// Single-sample unidirectional layer; returns one hidden vector per timestep.
pub fn lstm_layer_forward(p: &LstmCellParams, seq: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let batched: Vec<Matrix> = seq.iter().map(|x| to_row(x)).collect();
    let trace = p.forward_batch(&batched)?;
    Ok(trace.h.into_iter().map(Matrix::into_vec).collect())
}

/// Single-sample bidirectional layer; output `t` is `[h_fwd(t); h_bwd(t)]`.
pub fn bilstm_layer_forward(
    fwd: &LstmCellParams,
    bwd: &LstmCellParams,
    seq: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let batched: Vec<Matrix> = seq.iter().map(|x| to_row(x)).collect();
    let (f, b, _) = bi_forward_batch(fwd, bwd, &batched)?;
    let steps = seq.len();
    Ok((0..steps)
        .map(|t| {
            let mut v = f.h[t].as_slice().to_vec();
            v.extend_from_slice(b.h[steps - 1 - t].as_slice());
            v
        })
        .collect())
}
