// SPDX-License-Identifier: Apache-2.0

//! Hankel-stacked dynamic mode decomposition.
//!
//! A scalar series is folded into shifted snapshot matrices `X0`, `X1`; a
//! truncated SVD of `X0` projects the best-fit linear map `X1 ≈ A X0` onto
//! `R` dimensions, and the eigenpairs of that reduced operator give the
//! modes, eigenvalues and amplitudes used for forecasting.
//!
//! Real inputs run the decomposition in real arithmetic (roughly four times
//! cheaper than complex LAPACK); eigenvalues, modes and amplitudes are
//! always complex.

mod hankel;
mod model;
mod svd;

pub use hankel::{build_hankel, HankelPair};
pub use model::{
    fit, fit_randomized, forecast, forecast_with, is_stable, Decomposition, Divergence, DmdModel, Forecast,
    Readout, STABILITY_TOL,
};
pub use svd::{hankel_singular_values, randomized_truncated_svd, select_rank, truncated_svd, SvdTruncation, TruncatedSvd};

use ndarray::LinalgScalar;
use ndarray_linalg::{Lapack, Scalar};
use num_complex::Complex64 as C64;

/// Element types the pipeline runs on: `f64` and `Complex64`.
pub trait DmdScalar: Scalar<Real = f64, Complex = C64> + Lapack + LinalgScalar + Send + Sync {}
impl<T> DmdScalar for T where T: Scalar<Real = f64, Complex = C64> + Lapack + LinalgScalar + Send + Sync {}

#[derive(Debug, thiserror::Error)]
pub enum DmdError {
    #[error("snapshot length M = {m} is invalid for a series of length {n} (need 1 <= M < N)")]
    InvalidWindow { m: usize, n: usize },
    #[error("cutoff must lie in [0, 1], got {0}")]
    BadCutoff(f64),
    #[error("rank upper bound must be at least 1")]
    BadRankBound,
    #[error("snapshot matrix is identically zero")]
    ZeroMatrix,
    #[error("no singular value passes the cutoff")]
    RankZero,
    #[error("input contains non-finite samples")]
    NonFinite,
    #[error("eigendecomposition failed: {0}")]
    EigenFailure(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("imaginary residue {residue:e} exceeds {bound:e}")]
    ImaginaryResidue { residue: f64, bound: f64 },
    #[error("forecast range {from}..{to} is empty")]
    BadRange { from: usize, to: usize },
    #[error("model file: {0}")]
    Format(String),
}
