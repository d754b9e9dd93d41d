pub mod data;
pub mod error;
pub mod experiment;
pub mod hyperopt;
pub mod metrics;
pub mod nn;
pub mod persist;
pub mod rng;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
