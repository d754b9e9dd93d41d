//! Bayesian hyperparameter search: GP surrogate plus expected improvement.

pub mod gp;
pub mod smbo;
pub mod space;

pub use gp::{gp_fit, gp_posterior, GpSurrogate, Kernel, Observation};
pub use smbo::{
    expected_improvement, expected_improvement_at, propose_next, tune, Trial, TrialStatus,
    TuneResult,
};
pub use space::{DimKind, Dimension, ParamValue, SearchSpace};
