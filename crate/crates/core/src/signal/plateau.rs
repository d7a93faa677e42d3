// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::{add_noise_stream, NoiseSpec, SignalError};
use crate::dmd::hankel_singular_values;
use crate::series::TimeSeries;

/// `σ_{M/2}/σ_0 ≈ κ ε_noise` for white noise on a constant, M = 1000, N = 2000.
pub const KAPPA_M1000_N2000: f64 = 0.025;
/// Plateau: fitted log₁₀ σ_i slope over the middle third below this, in
/// decades per index...
pub const PLATEAU_SLOPE: f64 = 1e-3;
/// ...at a height above this. Rounding alone leaves a flat floor near
/// `ε_mach·√(MN)` in exactly representable data; that is not a noise plateau.
pub const PLATEAU_FLOOR: f64 = 1e-10;

const CALIBRATION_SEED: u64 = 0x5eed_ca1b;
const CALIBRATION_EPS: f64 = 0.03;
const CALIBRATION_TRIALS: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    pub epsilon: f64,
    /// `σ_{M/2}/σ_0`.
    pub ratio: f64,
    pub kappa: f64,
    pub slope: f64,
    pub plateau: bool,
}

/// Least-squares slope of `log₁₀ σ_i` over the middle third of `sv`.
pub fn plateau_slope(sv: &[f64]) -> f64 {
    let (lo, hi) = (sv.len() / 3, 2 * sv.len() / 3);
    if hi < lo + 2 {
        return f64::NAN;
    }
    let pts: Vec<(f64, f64)> = (lo..hi).map(|i| (i as f64, sv[i].log10())).collect();
    if pts.iter().any(|p| !p.1.is_finite()) {
        return f64::NEG_INFINITY;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `κ(M, N)` for white noise on a constant signal, averaged over a few
/// seeded realisations. Results are memoised per shape and seed.
pub fn calibrate_kappa(m: usize, n: usize, seed: u64) -> Result<f64, SignalError> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize, u64), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&k) = cache.lock().unwrap().get(&(m, n, seed)) {
        return Ok(k);
    }
    let clean = TimeSeries::from_real(0.0, 1.0, &vec![1.0; n], "constant")?;
    let spec = NoiseSpec::additive(CALIBRATION_EPS, seed);
    let mut total = 0.0;
    for stream in 0..CALIBRATION_TRIALS {
        let sv = hankel_singular_values(&add_noise_stream(&clean, &spec, stream)?, m)?;
        total += mid_ratio(&sv, m)? / CALIBRATION_EPS;
    }
    let k = total / CALIBRATION_TRIALS as f64;
    cache.lock().unwrap().insert((m, n, seed), k);
    Ok(k)
}

fn mid_ratio(sv: &[f64], m: usize) -> Result<f64, SignalError> {
    if sv.len() <= m / 2 || sv[0] <= 0.0 {
        return Err(SignalError::TooFewSingularValues { needed: m / 2 + 1, got: sv.len(), m });
    }
    Ok(sv[m / 2] / sv[0])
}

/// Noise strength implied by the plateau height of a Hankel spectrum built
/// with snapshot length `m` from `n` samples.
pub fn estimate_noise_level(sv: &[f64], m: usize, n: usize) -> Result<NoiseEstimate, SignalError> {
    let ratio = mid_ratio(sv, m)?;
    let slope = plateau_slope(sv);
    let plateau = slope.abs() < PLATEAU_SLOPE && ratio > PLATEAU_FLOOR;
    if !plateau {
        return Err(SignalError::NoPlateau { slope, height: ratio });
    }
    let kappa = if (m, n) == (1000, 2000) { KAPPA_M1000_N2000 } else { calibrate_kappa(m, n, CALIBRATION_SEED)? };
    Ok(NoiseEstimate { epsilon: ratio / kappa, ratio, kappa, slope, plateau })
}
