// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{add_noise_stream, write_rows, NoiseSpec, SignalError};
use crate::dmd::{fit, forecast_with, Readout};
use crate::series::TimeSeries;

/// Real-valued ground truth on arbitrary uniform windows.
pub trait TruthSource: Sync {
    fn samples(&self, t0: f64, dt: f64, n: usize) -> Result<Vec<f64>, SignalError>;
}

/// A stored series serves any window aligned with its grid.
impl TruthSource for TimeSeries {
    fn samples(&self, t0: f64, dt: f64, n: usize) -> Result<Vec<f64>, SignalError> {
        if (dt - self.dt()).abs() > 1e-12 * dt {
            return Err(SignalError::Truth(format!("dt {dt} does not match stored dt {}", self.dt())));
        }
        let offset = (t0 - self.t0()) / dt;
        let start = offset.round();
        if start < 0.0 || (offset - start).abs() > 1e-6 {
            return Err(SignalError::Truth(format!("origin {t0} is off the stored grid")));
        }
        let start = start as usize;
        if start + n > self.len() {
            return Err(SignalError::Truth(format!(
                "window [{t0}, {}) runs past the stored series end {}",
                t0 + n as f64 * dt,
                self.time(self.len())
            )));
        }
        Ok(self.values()[start..start + n].iter().map(|v| v.re).collect())
    }
}

impl<F> TruthSource for F
where
    F: Fn(f64) -> f64 + Sync,
{
    fn samples(&self, t0: f64, dt: f64, n: usize) -> Result<Vec<f64>, SignalError> {
        Ok((0..n).map(|k| self(t0 + k as f64 * dt)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStudyConfig {
    pub dt: f64,
    /// Snapshot length M.
    pub snapshot_length: usize,
    /// Training samples N, starting at each origin.
    pub input_length: usize,
    pub cutoff: f64,
    #[serde(default)]
    pub rank_upper_bound: Option<usize>,
    #[serde(default)]
    pub readout: Readout,
    /// Forecast runs to `origin + horizon` (time units).
    pub horizon: f64,
    /// Optional noise on the training window; origin `k` uses stream `k`.
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
}

impl ErrorStudyConfig {
    fn horizon_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OriginResult {
    pub origin: f64,
    pub rank: usize,
    pub max_modulus: f64,
    /// Prediction minus truth for forecast samples `N..horizon`.
    pub differences: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub offsets: Vec<f64>,
    pub systematic: Vec<f64>,
    pub statistical: Vec<f64>,
    pub n_samples: usize,
}

impl ErrorStats {
    /// Mean and population standard deviation per offset. One sample gives a
    /// statistical error of exactly zero.
    pub fn from_results(results: &[OriginResult], offsets: Vec<f64>) -> Self {
        let n = results.len();
        let len = offsets.len();
        let mut systematic = vec![0.0; len];
        let mut statistical = vec![0.0; len];
        if n > 0 {
            for j in 0..len {
                let mean = results.iter().map(|r| r.differences[j]).sum::<f64>() / n as f64;
                let var = results.iter().map(|r| (r.differences[j] - mean).powi(2)).sum::<f64>() / n as f64;
                systematic[j] = mean;
                statistical[j] = var.sqrt();
            }
        }
        Self { offsets, systematic, statistical, n_samples: n }
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), SignalError> {
        let rows = (0..self.offsets.len())
            .map(|i| format!("{},{},{}", self.offsets[i], self.systematic[i], self.statistical[i]));
        write_rows(path, "offset,systematic,statistical", rows)
    }
}

/// Running `(max, min)` over a centred window of `width` points.
pub fn running_envelope(values: &[f64], width: usize) -> (Vec<f64>, Vec<f64>) {
    let half = width / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let w = &values[i.saturating_sub(half)..(i + half + 1).min(n)];
            (w.iter().copied().fold(f64::NEG_INFINITY, f64::max), w.iter().copied().fold(f64::INFINITY, f64::min))
        })
        .unzip()
}

/// Fits one model per origin on `[t₀, t₀ + N·dt)` and records the forecast
/// error out to `t₀ + horizon`. Origins run in parallel; results keep input
/// order.
pub fn error_differences<S: TruthSource + ?Sized>(
    truth: &S,
    config: &ErrorStudyConfig,
    origins: &[f64],
) -> Result<(Vec<f64>, Vec<OriginResult>), SignalError> {
    let n_in = config.input_length;
    let steps = config.horizon_steps();
    if steps <= n_in {
        return Err(SignalError::BadWindow { lo: n_in as f64 * config.dt, hi: config.horizon });
    }
    let offsets: Vec<f64> = (n_in..steps).map(|k| k as f64 * config.dt).collect();
    let results = origins
        .par_iter()
        .enumerate()
        .map(|(idx, &t0)| {
            let exact = truth.samples(t0, config.dt, steps)?;
            let mut train = TimeSeries::from_real(t0, config.dt, &exact[..n_in], "train")?;
            if let Some(noise) = &config.noise {
                train = add_noise_stream(&train, noise, idx as u64)?;
            }
            let model = fit(&train, config.snapshot_length, config.cutoff, config.rank_upper_bound)?;
            let pred = forecast_with(&model, n_in, steps, config.readout)?.real_values()?;
            let differences = pred.iter().zip(&exact[n_in..]).map(|(p, t)| p - t).collect();
            Ok(OriginResult { origin: t0, rank: model.rank(), max_modulus: model.max_modulus(), differences })
        })
        .collect::<Result<Vec<_>, SignalError>>()?;
    Ok((offsets, results))
}

pub fn error_study<S: TruthSource + ?Sized>(
    truth: &S,
    config: &ErrorStudyConfig,
    origins: &[f64],
) -> Result<ErrorStats, SignalError> {
    let (offsets, results) = error_differences(truth, config, origins)?;
    Ok(ErrorStats::from_results(&results, offsets))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(horizon: f64) -> ErrorStudyConfig {
        ErrorStudyConfig {
            dt: 0.1,
            snapshot_length: 20,
            input_length: 60,
            cutoff: 1e-10,
            rank_upper_bound: None,
            readout: Readout::FirstRow,
            horizon,
            noise: None,
        }
    }

    #[test]
    fn representable_signal_has_no_error() {
        let f = |t: f64| 0.5 + (-0.01 * t).exp() * (1.3 * t).cos();
        let origins: Vec<f64> = (0..6).map(|k| 40.0 * k as f64).collect();
        let stats = error_study(&f, &config(30.0), &origins).unwrap();
        assert_eq!(stats.n_samples, 6);
        assert_eq!(stats.offsets.len(), 240);
        assert!((stats.offsets[0] - 6.0).abs() < 1e-12);
        assert!(stats.systematic.iter().all(|e| e.abs() < 1e-6));
        assert!(stats.statistical.iter().all(|e| *e < 1e-6 && *e >= 0.0));
    }

    #[test]
    fn single_origin_is_the_raw_difference() {
        let f = |t: f64| (1.0 + t).powf(-1.5) + 0.1 * (0.7 * t).sin();
        let (offsets, res) = error_differences(&f, &config(20.0), &[3.0]).unwrap();
        let stats = ErrorStats::from_results(&res, offsets);
        assert_eq!(stats.systematic, res[0].differences);
        assert!(stats.statistical.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn stored_series_matches_closure_truth() {
        let f = |t: f64| (1.0 + t).powf(-1.5) + 0.1 * (0.7 * t).sin();
        let dt = 0.1;
        let stored: Vec<f64> = (0..2000).map(|k| f(k as f64 * dt)).collect();
        let s = TimeSeries::from_real(0.0, dt, &stored, "").unwrap();
        let origins = [0.0, 50.0, 100.0];
        let a = error_study(&f, &config(20.0), &origins).unwrap();
        let b = error_study(&s, &config(20.0), &origins).unwrap();
        for (x, y) in a.systematic.iter().zip(&b.systematic) {
            assert!((x - y).abs() < 1e-9);
        }
        assert!(matches!(s.samples(0.05, dt, 10), Err(SignalError::Truth(_))));
        assert!(matches!(s.samples(190.0, dt, 200), Err(SignalError::Truth(_))));
    }

    #[test]
    fn noisy_study_is_order_independent() {
        let f = |t: f64| (0.4 * t).cos();
        let mut cfg = config(12.0);
        cfg.noise = Some(NoiseSpec::additive(0.01, 77));
        cfg.cutoff = 1e-2;
        let origins = [0.0, 10.0, 20.0, 30.0];
        let (_, fwd) = error_differences(&f, &cfg, &origins).unwrap();
        let (_, one) = error_differences(&f, &cfg, &origins[2..3]).unwrap();
        // Origin 20 is stream 2 in the full run but stream 0 alone.
        assert_ne!(fwd[2].differences, one[0].differences);
        let (_, again) = error_differences(&f, &cfg, &origins).unwrap();
        assert_eq!(fwd, again);
    }

    #[test]
    fn running_envelope_brackets_values() {
        let v = [0.0, 3.0, -1.0, 2.0, 5.0, -4.0];
        let (hi, lo) = running_envelope(&v, 2);
        assert_eq!(hi, vec![3.0, 3.0, 3.0, 5.0, 5.0, 5.0]);
        assert_eq!(lo, vec![0.0, -1.0, -1.0, -1.0, -4.0, -4.0]);
    }

    #[test]
    fn horizon_must_exceed_training() {
        assert!(error_study(&|t: f64| t, &config(5.0), &[0.0]).is_err());
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        let stats = ErrorStats { offsets: vec![1.0], systematic: vec![0.5], statistical: vec![0.0], n_samples: 1 };
        stats.write_csv(&p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "offset,systematic,statistical\n1,0.5,0\n");
    }
}
