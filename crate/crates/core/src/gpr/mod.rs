// SPDX-License-Identifier: Apache-2.0

//! Gaussian-process regression with sums of periodic kernels, as a baseline
//! forecaster.

mod compare;
mod hyperopt;
mod kernel;
mod process;

pub use compare::{baseline_comparison, BaselineComparison};
pub use hyperopt::{
    maximize_lml, optimize_hyperparameters, training_set, BoStep, GprFitReport, HyperoptConfig, SearchBounds,
};
pub use kernel::{PeriodicComponent, PeriodicKernelSum};
pub use process::{gpr_fit_predict, GpModel, Posterior, JITTER_LADDER};

use crate::series::SeriesError;
use crate::signal::SignalError;

#[derive(Debug, thiserror::Error)]
pub enum GprError {
    #[error("Gram matrix is not positive definite even with jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },
    #[error("invalid kernel: {0}")]
    BadKernel(String),
    #[error("invalid data: {0}")]
    BadData(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("optimizer: {0}")]
    Optimizer(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}
