// SPDX-License-Identifier: Apache-2.0

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::SignalError;
use crate::series::TimeSeries;

pub const MIN_ENVELOPE_POINTS: usize = 5;
/// A power law has a constant log-log slope; larger relative drift of the
/// fitted slope across the window marks the envelope as something else.
pub const MAX_RELATIVE_CURVATURE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub n_points: usize,
    /// `|Δ(d ln y / d ln t)| / |slope|` across the window, from a quadratic fit.
    pub relative_curvature: f64,
    pub power_law: bool,
    pub points: Vec<(f64, f64)>,
}

impl EnvelopeFit {
    pub fn require_power_law(self) -> Result<Self, SignalError> {
        if self.power_law {
            Ok(self)
        } else {
            Err(SignalError::NotPowerLaw { relative_curvature: self.relative_curvature })
        }
    }
}

/// Log-log slope of the envelope of `|f(t) − asymptote|` on `[t_lo, t_hi]`.
/// The envelope is the set of interior local maxima, so oscillation about
/// the asymptote does not bias the exponent.
pub fn fit_envelope_exponent(
    series: &TimeSeries,
    asymptote: f64,
    window: (f64, f64),
) -> Result<EnvelopeFit, SignalError> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(SignalError::BadWindow { lo, hi });
    }
    let c = C64::new(asymptote, 0.0);
    let d: Vec<f64> = series.values().iter().map(|&v| (v - c).norm()).collect();
    let mut points = Vec::new();
    for i in 1..d.len().saturating_sub(1) {
        let t = series.time(i);
        if t < lo || t > hi {
            continue;
        }
        if d[i] > d[i - 1] && d[i] >= d[i + 1] && d[i] > 0.0 {
            points.push((t, d[i]));
        }
    }
    if points.len() < MIN_ENVELOPE_POINTS {
        return Err(SignalError::TooFewPeaks { found: points.len() });
    }
    let u: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = u.len() as f64;
    let mu = u.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let x: Vec<f64> = u.iter().map(|v| v - mu).collect();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mu;
    let rss: f64 = u.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let stderr = if points.len() > 2 { (rss / (k - 2.0) / sxx).sqrt() } else { f64::NAN };

    // Quadratic term from the residual of x² after projecting out {1, x}.
    let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
    let m2 = x2.iter().sum::<f64>() / k;
    let b2 = x.iter().zip(&x2).map(|(a, q)| a * (q - m2)).sum::<f64>() / sxx;
    let z: Vec<f64> = x.iter().zip(&x2).map(|(a, q)| q - m2 - b2 * a).collect();
    let szz: f64 = z.iter().map(|v| v * v).sum();
    let quad = if szz > 0.0 { z.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / szz } else { 0.0 };
    let span = u.last().unwrap() - u[0];
    let relative_curvature = (2.0 * quad * span).abs() / slope.abs().max(f64::MIN_POSITIVE);

    Ok(EnvelopeFit {
        slope,
        stderr,
        intercept,
        n_points: points.len(),
        relative_curvature,
        power_law: relative_curvature <= MAX_RELATIVE_CURVATURE,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sampled(f: impl Fn(f64) -> f64, dt: f64, n: usize) -> TimeSeries {
        let v: Vec<f64> = (0..n).map(|i| f(i as f64 * dt)).collect();
        TimeSeries::from_real(0.0, dt, &v, "").unwrap()
    }

    #[test]
    fn recovers_constructed_power_law() {
        let s = sampled(|t| 0.3 + 2.0 * t.max(1e-3).powf(-1.5) * t.cos(), 0.01, 80_000);
        let fit = fit_envelope_exponent(&s, 0.3, (20.0, 790.0)).unwrap().require_power_law().unwrap();
        assert!((fit.slope + 1.5).abs() < 0.05, "{}", fit.slope);
        assert!(fit.stderr < 0.01);
        assert!(fit.n_points > 200);
    }

    #[test]
    fn exponential_decay_fails_curvature_check() {
        let s = sampled(|t| (-0.02 * t).exp() * (2.0 * t).cos(), 0.05, 8_000);
        let fit = fit_envelope_exponent(&s, 0.0, (10.0, 390.0)).unwrap();
        assert!(!fit.power_law, "curvature {}", fit.relative_curvature);
        assert!(matches!(fit.require_power_law(), Err(SignalError::NotPowerLaw { .. })));
    }

    #[test]
    fn needs_enough_maxima() {
        let s = sampled(|t| (0.5 * t).cos() / (1.0 + t), 0.1, 200);
        assert!(matches!(fit_envelope_exponent(&s, 0.0, (1.0, 20.0)), Err(SignalError::TooFewPeaks { .. })));
        assert!(matches!(fit_envelope_exponent(&s, 0.0, (0.0, 20.0)), Err(SignalError::BadWindow { .. })));
    }
}
