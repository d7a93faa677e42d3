// SPDX-License-Identifier: Apache-2.0

//! Analysis harness around the forecaster: spectra and peak tables, noise
//! injection and plateau-based noise estimation, envelope exponents, and the
//! shifted-origin error study.

mod envelope;
mod error_study;
mod noise;
mod plateau;
mod spectrum;

pub use envelope::{fit_envelope_exponent, EnvelopeFit, MAX_RELATIVE_CURVATURE, MIN_ENVELOPE_POINTS};
pub use error_study::{
    error_differences, error_study, running_envelope, ErrorStats, ErrorStudyConfig, OriginResult, TruthSource,
};
pub use noise::{add_noise, add_noise_stream, NoiseKind, NoiseSpec};
pub use plateau::{
    calibrate_kappa, estimate_noise_level, plateau_slope, NoiseEstimate, KAPPA_M1000_N2000, PLATEAU_FLOOR,
    PLATEAU_SLOPE,
};
pub use spectrum::{compare_spectra, dft, dft_values, match_peaks, peak_table, Peak, SpectrumComparison};

use crate::dmd::DmdError;
use crate::series::SeriesError;

#[derive(Debug, thiserror::Error)]
pub enum SignalError {
    #[error("series differ in shape: {0}")]
    LengthMismatch(String),
    #[error("threshold fraction must lie in (0, 1], got {0}")]
    BadThreshold(f64),
    #[error("no singular-value plateau: middle-third slope {slope:.3e} decades/index, height {height:.3e}")]
    NoPlateau { slope: f64, height: f64 },
    #[error("need at least {needed} singular values for M = {m}, got {got}")]
    TooFewSingularValues { needed: usize, got: usize, m: usize },
    #[error("only {found} envelope maxima in the window (need {MIN_ENVELOPE_POINTS})")]
    TooFewPeaks { found: usize },
    #[error("envelope is not a power law: slope drifts by {relative_curvature:.2} of itself across the window")]
    NotPowerLaw { relative_curvature: f64 },
    #[error("invalid window [{lo}, {hi}]")]
    BadWindow { lo: f64, hi: f64 },
    #[error("truth unavailable: {0}")]
    Truth(String),
    #[error("invalid noise spec: {0}")]
    BadNoise(String),
    #[error(transparent)]
    Dmd(#[from] DmdError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("io error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn write_rows(
    path: &std::path::Path,
    header: &str,
    rows: impl Iterator<Item = String>,
) -> Result<(), SignalError> {
    use std::io::Write;
    let io_err = |source| SignalError::Io { path: path.to_path_buf(), source };
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    writeln!(w, "{header}").map_err(io_err)?;
    for row in rows {
        writeln!(w, "{row}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}
