// SPDX-License-Identifier: Apache-2.0

//! Finite-size extrapolation of the saturated entropy density by ordinary
//! least squares in inverse system sizes.

use ndarray::{Array1, Array2};
use ndarray_linalg::{JobSvd, SVDDC};
use serde::{Deserialize, Serialize};

use super::EdError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    /// `s + c1/L + c2/L_A + c11/L² + c12/(L·L_A) + c22/L_A²`
    Fit1d,
    /// Second order in `1/L`, `1/L_A`, `1/L_x`: ten coefficients.
    Fit2d,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeSample {
    pub l: f64,
    pub l_a: f64,
    /// Only used by [`FitModel::Fit2d`].
    pub lx: f64,
    /// `S_max / N_A`.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationFit {
    pub model: FitModel,
    /// Constant term first, then the inverse-size terms in the order above.
    pub coefficients: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub residual_sum_of_squares: f64,
}

impl ExtrapolationFit {
    pub fn s_inf(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn s_inf_stderr(&self) -> f64 {
        self.covariance[0][0].max(0.0).sqrt()
    }
}

pub fn basis(model: FitModel, s: &SizeSample) -> Vec<f64> {
    let (a, b) = (1.0 / s.l, 1.0 / s.l_a);
    match model {
        FitModel::Fit1d => vec![1.0, a, b, a * a, a * b, b * b],
        FitModel::Fit2d => {
            let c = 1.0 / s.lx;
            vec![1.0, a, b, c, a * a, a * b, a * c, b * b, b * c, c * c]
        }
    }
}

pub fn extrapolate(samples: &[SizeSample], model: FitModel) -> Result<ExtrapolationFit, EdError> {
    let rows: Vec<Vec<f64>> = samples.iter().map(|s| basis(model, s)).collect();
    let p = rows.first().map_or(0, |r| r.len()).max(basis(model, &SizeSample { l: 1.0, l_a: 1.0, lx: 1.0, value: 0.0 }).len());
    let n = samples.len();
    if n <= p {
        return Err(EdError::TooFewSamples { n, p });
    }
    let x = Array2::from_shape_fn((n, p), |(i, j)| rows[i][j]);
    let y = Array1::from_iter(samples.iter().map(|s| s.value));
    let (u, sv, vt) = x.svddc(JobSvd::Some).map_err(|e| EdError::Linalg(format!("svd: {e}")))?;
    let (u, vt) = (u.expect("requested"), vt.expect("requested"));
    if sv[p - 1] <= 1e-12 * sv[0] {
        return Err(EdError::RankDeficient { condition: sv[0] / sv[p - 1] });
    }
    // β = V Σ⁻¹ Uᵀ y, (XᵀX)⁻¹ = V Σ⁻² Vᵀ
    let uty = u.t().dot(&y);
    let beta: Array1<f64> = (0..p).map(|j| (0..p).map(|k| vt[[k, j]] * uty[k] / sv[k]).sum()).collect();
    let resid = &x.dot(&beta) - &y;
    let rss = resid.dot(&resid);
    let s2 = rss / (n - p) as f64;
    let covariance = (0..p)
        .map(|i| (0..p).map(|j| s2 * (0..p).map(|k| vt[[k, i]] * vt[[k, j]] / (sv[k] * sv[k])).sum::<f64>()).collect())
        .collect();
    if !rss.is_finite() {
        return Err(EdError::Linalg("non-finite residual".into()));
    }
    Ok(ExtrapolationFit { model, coefficients: beta.to_vec(), covariance, residual_sum_of_squares: rss })
}
