// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{write_rows, SignalError};
use crate::series::TimeSeries;

/// `f̃(ω) = Σ_n f_n exp(−2πiωn/N)` for `ω = 0..N`.
pub fn dft_values(values: &[C64]) -> Vec<C64> {
    let mut buf = values.to_vec();
    if buf.is_empty() {
        return buf;
    }
    FftPlanner::<f64>::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

pub fn dft(series: &TimeSeries) -> Vec<C64> {
    dft_values(series.values())
}

/// Truth and prediction spectra on integer bins `1..N`; the `ω = 0` bin is
/// dropped. Differences are normalised by the largest nonzero-frequency
/// truth modulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumComparison {
    pub omega_bins: Vec<usize>,
    pub truth: Vec<f64>,
    pub prediction: Vec<f64>,
    pub relative_difference: Vec<f64>,
    pub normalization: f64,
    /// `|f̃(0)|` of the truth, reported but never compared.
    pub removed_dc: f64,
}

impl SpectrumComparison {
    pub fn max_difference(&self) -> f64 {
        self.relative_difference.iter().copied().fold(0.0, f64::max)
    }

    /// Median over bins `1..=N/2`: for real signals the upper half mirrors
    /// the lower.
    pub fn median_difference(&self) -> f64 {
        let half = (self.omega_bins.len() + 1) / 2;
        let mut d = self.relative_difference[..half.max(1).min(self.relative_difference.len())].to_vec();
        if d.is_empty() {
            return 0.0;
        }
        d.sort_by(f64::total_cmp);
        let k = d.len();
        if k % 2 == 1 {
            d[k / 2]
        } else {
            0.5 * (d[k / 2 - 1] + d[k / 2])
        }
    }

    /// Spectra including the dc bin, as fed to [`peak_table`].
    pub fn truth_spectrum(&self) -> Vec<f64> {
        std::iter::once(self.removed_dc).chain(self.truth.iter().copied()).collect()
    }

    pub fn prediction_spectrum(&self, dc: f64) -> Vec<f64> {
        std::iter::once(dc).chain(self.prediction.iter().copied()).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), SignalError> {
        let rows = (0..self.omega_bins.len()).map(|i| {
            format!("{},{},{},{}", self.omega_bins[i], self.truth[i], self.prediction[i], self.relative_difference[i])
        });
        write_rows(path, "omega,truth,pred,reldiff", rows)
    }
}

pub fn compare_spectra(truth: &TimeSeries, prediction: &TimeSeries) -> Result<SpectrumComparison, SignalError> {
    if truth.len() != prediction.len() {
        return Err(SignalError::LengthMismatch(format!("{} vs {} samples", truth.len(), prediction.len())));
    }
    if (truth.dt() - prediction.dt()).abs() > 1e-12 * truth.dt() {
        return Err(SignalError::LengthMismatch(format!("dt {} vs {}", truth.dt(), prediction.dt())));
    }
    let ft: Vec<f64> = dft(truth).iter().map(|v| v.norm()).collect();
    let fp: Vec<f64> = dft(prediction).iter().map(|v| v.norm()).collect();
    let normalization = ft[1..].iter().copied().fold(0.0, f64::max);
    let relative_difference = ft[1..]
        .iter()
        .zip(&fp[1..])
        .map(|(t, p)| if normalization > 0.0 { (p - t).abs() / normalization } else { (p - t).abs() })
        .collect();
    Ok(SpectrumComparison {
        omega_bins: (1..ft.len()).collect(),
        truth: ft[1..].to_vec(),
        prediction: fp[1..].to_vec(),
        relative_difference,
        normalization,
        removed_dc: ft[0],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub omega: usize,
    pub intensity: f64,
}

/// Local maxima of `spectrum` (indexed by ω, bin 0 included) above
/// `threshold_fraction · max_{ω>0}`, strongest first.
///
/// A peak is strictly greater than both neighbours; a flat top counts once,
/// at its lowest ω. Neighbours wrap around, so bin 0 borders both ends but is
/// never reported itself.
pub fn peak_table(spectrum: &[f64], threshold_fraction: f64) -> Result<Vec<Peak>, SignalError> {
    if !(threshold_fraction > 0.0 && threshold_fraction <= 1.0) {
        return Err(SignalError::BadThreshold(threshold_fraction));
    }
    let n = spectrum.len();
    if n < 2 {
        return Ok(Vec::new());
    }
    let max = spectrum[1..].iter().copied().fold(0.0, f64::max);
    let floor = threshold_fraction * max;
    let mut peaks = Vec::new();
    let mut w = 1;
    while w < n {
        let v = spectrum[w];
        let mut end = w;
        while end + 1 < n && spectrum[end + 1] == v {
            end += 1;
        }
        let left = spectrum[w - 1];
        let right = spectrum[(end + 1) % n];
        if v > left && v > right && v >= floor && v > 0.0 {
            peaks.push(Peak { omega: w, intensity: v });
        }
        w = end + 1;
    }
    peaks.sort_by(|a, b| b.intensity.total_cmp(&a.intensity).then(a.omega.cmp(&b.omega)));
    Ok(peaks)
}

/// How many of `reference` peak positions also appear in `candidate`.
pub fn match_peaks(reference: &[Peak], candidate: &[Peak]) -> usize {
    reference.iter().filter(|p| candidate.iter().any(|q| q.omega == p.omega)).count()
}
