// SPDX-License-Identifier: Apache-2.0

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SignalError;
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    /// `σ = ε · max_n |f_n|`, constant in time.
    AdditiveWhite,
    /// `σ(t) = ε · |f(t₀)| · t^exponent`; samples with `t < dt` use `σ(dt)`.
    RelativePowerLaw { exponent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub kind: NoiseKind,
    pub epsilon_noise: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn additive(epsilon_noise: f64, seed: u64) -> Self {
        Self { kind: NoiseKind::AdditiveWhite, epsilon_noise, seed }
    }

    pub fn relative_power_law(epsilon_noise: f64, seed: u64) -> Self {
        Self { kind: NoiseKind::RelativePowerLaw { exponent: -1.5 }, epsilon_noise, seed }
    }

    fn validate(&self) -> Result<(), SignalError> {
        if !(self.epsilon_noise >= 0.0 && self.epsilon_noise.is_finite()) {
            return Err(SignalError::BadNoise(format!("epsilon_noise = {}", self.epsilon_noise)));
        }
        if let NoiseKind::RelativePowerLaw { exponent } = self.kind {
            if !exponent.is_finite() {
                return Err(SignalError::BadNoise(format!("exponent = {exponent}")));
            }
        }
        Ok(())
    }
}

pub fn add_noise(series: &TimeSeries, spec: &NoiseSpec) -> Result<TimeSeries, SignalError> {
    add_noise_stream(series, spec, 0)
}

/// Noise from ChaCha stream `stream` of `spec.seed`, so independent draws
/// (one per study origin, say) never depend on evaluation order.
///
/// Real series receive real noise. Complex series get independent noise of
/// variance `σ²/2` on each part, so `|η|²` still averages to `σ²`.
pub fn add_noise_stream(series: &TimeSeries, spec: &NoiseSpec, stream: u64) -> Result<TimeSeries, SignalError> {
    spec.validate()?;
    if spec.epsilon_noise == 0.0 {
        return Ok(series.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let dt = series.dt();
    let sigma_at: Box<dyn Fn(usize) -> f64> = match spec.kind {
        NoiseKind::AdditiveWhite => {
            let s = spec.epsilon_noise * series.max_abs();
            Box::new(move |_| s)
        }
        NoiseKind::RelativePowerLaw { exponent } => {
            let f0 = series.values()[0].norm();
            let t0 = series.t0();
            Box::new(move |n| {
                let t = (t0 + n as f64 * dt).max(dt);
                spec.epsilon_noise * f0 * t.powf(exponent)
            })
        }
    };
    let real = series.is_real();
    let values = series
        .values()
        .iter()
        .enumerate()
        .map(|(n, &v)| {
            let s = sigma_at(n);
            if real {
                let e: f64 = rng.sample(StandardNormal);
                v + C64::new(s * e, 0.0)
            } else {
                let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                v + C64::new(a, b) * (s * std::f64::consts::FRAC_1_SQRT_2)
            }
        })
        .collect();
    Ok(TimeSeries::new(series.t0(), dt, values, series.label.clone())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize, t0: f64) -> TimeSeries {
        let v: Vec<f64> = (0..n).map(|i| 1.0 + (0.01 * i as f64).sin()).collect();
        TimeSeries::from_real(t0, 0.1, &v, "ramp").unwrap()
    }

    #[test]
    fn zero_strength_is_identity() {
        let s = ramp(50, 0.0);
        assert_eq!(add_noise(&s, &NoiseSpec::additive(0.0, 3)).unwrap(), s);
        assert_eq!(add_noise(&s, &NoiseSpec::relative_power_law(0.0, 3)).unwrap(), s);
    }

    #[test]
    fn same_seed_same_bits_other_stream_differs() {
        let s = ramp(500, 0.0);
        let spec = NoiseSpec::additive(0.03, 11);
        let a = add_noise(&s, &spec).unwrap();
        let b = add_noise(&s, &spec).unwrap();
        assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.re.to_bits() == y.re.to_bits()));
        let c = add_noise_stream(&s, &spec, 1).unwrap();
        assert_ne!(a, c);
        assert!(a.is_real());
    }

    #[test]
    fn additive_noise_is_unbiased_with_the_right_width() {
        let n = 200_000;
        let s = ramp(n, 0.0);
        let spec = NoiseSpec::additive(0.05, 2024);
        let noisy = add_noise(&s, &spec).unwrap();
        let sigma = 0.05 * s.max_abs();
        let d: Vec<f64> = noisy.values().iter().zip(s.values()).map(|(a, b)| a.re - b.re).collect();
        let mean = d.iter().sum::<f64>() / n as f64;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 * sigma / (n as f64).sqrt(), "mean {mean}");
        assert!((var.sqrt() / sigma - 1.0).abs() < 0.01);
    }

    #[test]
    fn power_law_width_follows_time_and_caps_at_dt() {
        let n = 20_000;
        let v = vec![2.0; n];
        let s = TimeSeries::from_real(0.0, 0.5, &v, "").unwrap();
        let spec = NoiseSpec::relative_power_law(0.01, 5);
        // Many independent realisations at two fixed indices.
        let draws = |idx: usize| -> f64 {
            (0..4000u64)
                .map(|k| {
                    let x = add_noise_stream(&s.window(0, idx + 1).unwrap(), &spec, k).unwrap();
                    (x.values()[idx].re - 2.0).powi(2)
                })
                .sum::<f64>()
                / 4000.0
        };
        let expect0 = 0.01 * 2.0 * 0.5f64.powf(-1.5);
        assert!((draws(0).sqrt() / expect0 - 1.0).abs() < 0.05);
        let expect4 = 0.01 * 2.0 * 2.0f64.powf(-1.5);
        assert!((draws(4).sqrt() / expect4 - 1.0).abs() < 0.05);
    }

    #[test]
    fn complex_series_split_variance() {
        let v = vec![C64::new(1.0, 1.0); 100_000];
        let s = TimeSeries::new(0.0, 1.0, v, "").unwrap();
        let noisy = add_noise(&s, &NoiseSpec::additive(0.1, 9)).unwrap();
        let sigma = 0.1 * 2f64.sqrt();
        let ms = noisy.values().iter().map(|x| (x - C64::new(1.0, 1.0)).norm_sqr()).sum::<f64>() / 1e5;
        assert!((ms.sqrt() / sigma - 1.0).abs() < 0.01);
    }

    #[test]
    fn rejects_negative_strength() {
        assert!(add_noise(&ramp(3, 0.0), &NoiseSpec::additive(-1.0, 0)).is_err());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = NoiseSpec::relative_power_law(0.01, 42);
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("relative_power_law"));
        assert_eq!(serde_json::from_str::<NoiseSpec>(&text).unwrap(), spec);
    }
}
