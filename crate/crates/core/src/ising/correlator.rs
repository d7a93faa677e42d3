// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::special::bessel_weber;
use crate::series::{SeriesError, TimeSeries};

#[derive(Debug, thiserror::Error)]
pub enum IsingError {
    #[error("the closed form holds only at Γ/J = 0.5 (got Γ = {gamma}, J = {j})")]
    OffCritical { j: f64, gamma: f64 },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalChainSpec {
    pub j: f64,
    pub gamma: f64,
    /// Site separation.
    pub r: i64,
}

impl CriticalChainSpec {
    pub fn new(j: f64, gamma: f64, r: i64) -> Result<Self, IsingError> {
        if !(j > 0.0 && j.is_finite()) || (gamma / j - 0.5).abs() > 1e-12 {
            return Err(IsingError::OffCritical { j, gamma });
        }
        Ok(Self { j, gamma, r })
    }

    /// `J = 1`, `Γ = 1/2`.
    pub fn critical(r: i64) -> Self {
        Self { j: 1.0, gamma: 0.5, r }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatorSample {
    pub t: f64,
    pub value: C64,
    pub abs_value: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    Complex,
    /// `|C(r, t)|`, the real signal the forecasts are trained on.
    #[default]
    Modulus,
}

/// `⟨S^x_0(0) S^x_r(t)⟩` in the critical ground state (S = σ/2), at `x = 2Γt`:
/// `1/π² + ¼[J_{2r} + iE_{2r}]² − ¼[J_{2r−1} + iE_{2r−1}][J_{2r+1} + iE_{2r+1}]`.
pub fn correlator(spec: &CriticalChainSpec, t: f64) -> CorrelatorSample {
    let x = 2.0 * spec.gamma * t;
    let g = |n: i64| {
        let (j, e) = bessel_weber(n, x);
        C64::new(j, e)
    };
    let two_r = 2 * spec.r;
    let value = C64::new(1.0 / (PI * PI), 0.0) + 0.25 * g(two_r) * g(two_r) - 0.25 * g(two_r - 1) * g(two_r + 1);
    CorrelatorSample { t, value, abs_value: value.norm() }
}

/// Samples at `t0 + n·dt`, `n < n_samples`, evaluated in parallel.
pub fn generate_series(
    spec: &CriticalChainSpec,
    t0: f64,
    dt: f64,
    n_samples: usize,
    observable: Observable,
) -> Result<TimeSeries, IsingError> {
    let values: Vec<C64> = (0..n_samples)
        .into_par_iter()
        .map(|n| {
            let c = correlator(spec, t0 + n as f64 * dt);
            match observable {
                Observable::Complex => c.value,
                Observable::Modulus => C64::new(c.abs_value, 0.0),
            }
        })
        .collect();
    let label = format!("ising1d-critical r={}", spec.r);
    Ok(TimeSeries::new(t0, dt, values, label)?)
}

pub fn generator_meta(spec: &CriticalChainSpec, observable: Observable) -> serde_json::Value {
    serde_json::json!({
        "model": "ising1d-critical",
        "r": spec.r,
        "J": spec.j,
        "gamma_over_j": spec.gamma / spec.j,
        "observable": observable,
        "quadrature_accuracy": 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_value_is_quarter() {
        let c = correlator(&CriticalChainSpec::critical(0), 0.0);
        assert!((c.value - C64::new(0.25, 0.0)).norm() < 1e-14);
        let s = generate_series(&CriticalChainSpec::critical(0), 0.0, 0.01, 1, Observable::Modulus).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s.values()[0].re - 0.25).abs() < 1e-14);
    }

    #[test]
    fn rejects_off_critical_field() {
        assert!(CriticalChainSpec::new(1.0, 0.6, 0).is_err());
        assert!(CriticalChainSpec::new(2.0, 1.0, 3).is_ok());
    }

    #[test]
    fn long_time_limit() {
        let spec = CriticalChainSpec::critical(0);
        for &t in &[3000.0, 40_000.0] {
            let c = correlator(&spec, t);
            assert!((c.abs_value - 1.0 / (PI * PI)).abs() < 3.0 * t.powf(-1.5));
            assert!((c.abs_value - c.value.norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn parallel_generation_is_deterministic() {
        let spec = CriticalChainSpec::critical(1);
        let a = generate_series(&spec, 5.0, 0.37, 500, Observable::Complex).unwrap();
        let b: Vec<C64> = (0..500).map(|n| correlator(&spec, 5.0 + n as f64 * 0.37).value).collect();
        assert_eq!(a.values(), &b[..]);
    }
}
