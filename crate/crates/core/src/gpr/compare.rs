// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::hyperopt::l2_per_point;
use super::GprError;
use crate::series::TimeSeries;
use crate::signal::{compare_spectra, match_peaks, peak_table, Peak};

/// DMD and GPR forecasts of the same truth, side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub threshold_fraction: f64,
    /// Peaks on bins `1..=N/2`.
    pub truth_peaks: Vec<Peak>,
    pub dmd_peaks: Vec<Peak>,
    pub gpr_peaks: Vec<Peak>,
    /// Truth peak positions reproduced exactly.
    pub dmd_matches: usize,
    pub gpr_matches: usize,
    pub dmd_spectral_max: f64,
    pub gpr_spectral_max: f64,
    /// `‖prediction − truth‖₂ / n`.
    pub dmd_time_error: f64,
    pub gpr_time_error: f64,
}

fn half_peaks(spectrum: &[f64], threshold: f64) -> Result<Vec<Peak>, GprError> {
    let half = spectrum.len() / 2;
    Ok(peak_table(spectrum, threshold)?.into_iter().filter(|p| p.omega <= half).collect())
}

pub fn baseline_comparison(
    truth: &TimeSeries,
    dmd: &TimeSeries,
    gpr: &TimeSeries,
    threshold_fraction: f64,
) -> Result<BaselineComparison, GprError> {
    let cd = compare_spectra(truth, dmd)?;
    let cg = compare_spectra(truth, gpr)?;
    let truth_peaks = half_peaks(&cd.truth_spectrum(), threshold_fraction)?;
    let dmd_dc = crate::signal::dft(dmd)[0].norm();
    let gpr_dc = crate::signal::dft(gpr)[0].norm();
    let dmd_peaks = half_peaks(&cd.prediction_spectrum(dmd_dc), threshold_fraction)?;
    let gpr_peaks = half_peaks(&cg.prediction_spectrum(gpr_dc), threshold_fraction)?;
    let (t, d, g) = (truth.real_parts(), dmd.real_parts(), gpr.real_parts());
    Ok(BaselineComparison {
        threshold_fraction,
        dmd_matches: match_peaks(&truth_peaks, &dmd_peaks),
        gpr_matches: match_peaks(&truth_peaks, &gpr_peaks),
        truth_peaks,
        dmd_peaks,
        gpr_peaks,
        dmd_spectral_max: cd.max_difference(),
        gpr_spectral_max: cg.max_difference(),
        dmd_time_error: l2_per_point(&d, &t),
        gpr_time_error: l2_per_point(&g, &t),
    })
}
