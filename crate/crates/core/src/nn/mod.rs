//! Numeric primitives and the stacked LSTM network.

pub mod activation;
pub mod init;
pub mod lstm;
pub mod matrix;
pub mod model;
pub mod spec;

pub use activation::{sigmoid, Activation};
pub use init::{he_init, InitConfig, WeightInit};
pub use lstm::{bilstm_layer_forward, lstm_cell_forward, lstm_layer_forward, Gate, LstmCellParams};
pub use matrix::{gemm, matmul, Matrix, Op};
pub use model::{model_backward, model_forward, DropoutMasks, Gradients, Layer, Mode, Model, Tape};
pub use spec::{param_count, LayerSpec, ModelSpec};
