//! Loss, optimizer, backpropagation-driven training loop and gradient checks.

pub mod adam;
pub mod fit;
pub mod gradcheck;
pub mod loss;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use fit::{evaluate_loss, fit, predict_dataset, EpochRecord, TrainConfig, TrainHistory, Trainer};
pub use gradcheck::{grad_check, grad_check_with};
pub use loss::bce_loss;
