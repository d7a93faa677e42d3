// SPDX-License-Identifier: Apache-2.0

use ndarray::{Array1, Array2};
use ndarray_linalg::{Diag, FactorizeC, InverseC, SolveC, SolveTriangular, UPLO};
use serde::{Deserialize, Serialize};

use super::{GprError, PeriodicKernelSum};
use crate::series::TimeSeries;

/// Extra diagonal tried, in order, when the Gram matrix will not factor.
pub const JITTER_LADDER: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

fn gram(t: &[f64], kernel: &PeriodicKernelSum) -> Array2<f64> {
    let n = t.len();
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(t[i], t[j]);
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    k
}

/// Cholesky factor of `K + (σ_obs² + jitter) I`, escalating the jitter.
fn factor(k: &Array2<f64>, noise: f64) -> Result<(ndarray_linalg::CholeskyFactorized<ndarray::OwnedRepr<f64>>, f64), GprError> {
    for &jitter in &JITTER_LADDER {
        let mut a = k.clone();
        a.diag_mut().mapv_inplace(|d| d + noise + jitter);
        if let Ok(f) = a.factorizec(UPLO::Lower) {
            if f.factor.diag().iter().all(|d| d.is_finite() && *d > 0.0) {
                return Ok((f, jitter));
            }
        }
    }
    Err(GprError::NotPositiveDefinite { jitter: *JITTER_LADDER.last().unwrap() })
}

/// A conditioned process: constant mean (the training average) plus a
/// zero-mean GP under the kernel sum.
#[derive(Debug, Clone)]
pub struct GpModel {
    pub kernel: PeriodicKernelSum,
    pub jitter: f64,
    pub log_marginal_likelihood: f64,
    times: Vec<f64>,
    mean: f64,
    alpha: Array1<f64>,
    lower: Array2<f64>,
}

impl GpModel {
    pub fn fit(times: &[f64], values: &[f64], kernel: &PeriodicKernelSum) -> Result<Self, GprError> {
        kernel.validate()?;
        if times.is_empty() || times.len() != values.len() {
            return Err(GprError::BadData(format!("{} times for {} values", times.len(), values.len())));
        }
        if values.iter().chain(times).any(|v| !v.is_finite()) {
            return Err(GprError::BadData("non-finite training data".into()));
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let y = Array1::from_iter(values.iter().map(|v| v - mean));
        let (f, jitter) = factor(&gram(times, kernel), kernel.observation_noise)?;
        let alpha = f.solvec(&y).map_err(|e| GprError::Linalg(e.to_string()))?;
        let lower = f.into_lower();
        let n = times.len() as f64;
        let log_det: f64 = lower.diag().iter().map(|d| d.ln()).sum();
        let lml = -0.5 * y.dot(&alpha) - log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
        Ok(Self {
            kernel: kernel.clone(),
            jitter,
            log_marginal_likelihood: lml,
            times: times.to_vec(),
            mean,
            alpha,
            lower,
        })
    }

    pub fn predict(&self, query: &[f64]) -> Result<Posterior, GprError> {
        let n = self.times.len();
        let ks = Array2::from_shape_fn((n, query.len()), |(i, q)| self.kernel.eval(self.times[i], query[q]));
        let mean = query.iter().enumerate().map(|(q, _)| self.mean + ks.column(q).dot(&self.alpha)).collect();
        let v = self.lower.solve_triangular(UPLO::Lower, Diag::NonUnit, &ks).map_err(|e| GprError::Linalg(e.to_string()))?;
        let variance = query
            .iter()
            .enumerate()
            .map(|(q, &t)| {
                let prior = self.kernel.eval(t, t);
                (prior - v.column(q).dot(&v.column(q))).max(0.0)
            })
            .collect();
        Ok(Posterior { mean, variance })
    }
}

/// Posterior mean and variance at `query_times`, conditioned on the real
/// parts of `train`.
pub fn gpr_fit_predict(
    train: &TimeSeries,
    kernel: &PeriodicKernelSum,
    query_times: &[f64],
) -> Result<Posterior, GprError> {
    let t: Vec<f64> = train.times().collect();
    GpModel::fit(&t, &train.real_parts(), kernel)?.predict(query_times)
}

/// Log marginal likelihood and its gradient in the kernel's log-parameters.
pub(crate) fn lml_and_grad(times: &[f64], values: &[f64], kernel: &PeriodicKernelSum) -> Result<(f64, Vec<f64>), GprError> {
    let n = times.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let y = Array1::from_iter(values.iter().map(|v| v - mean));
    let (f, _) = factor(&gram(times, kernel), kernel.observation_noise)?;
    let alpha = f.solvec(&y).map_err(|e| GprError::Linalg(e.to_string()))?;
    let log_det: f64 = f.factor.diag().iter().map(|d| d.ln()).sum();
    let kinv = f.invc().map_err(|e| GprError::Linalg(e.to_string()))?;
    let lml = -0.5 * y.dot(&alpha) - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // ½ Σ_ij (α_i α_j − K⁻¹_ij) ∂K_ij, over the symmetric half.
    let mut grad = vec![0.0; 3 * kernel.len()];
    for i in 0..n {
        for j in 0..=i {
            let w = if i == j { 0.5 } else { 1.0 } * (alpha[i] * alpha[j] - kinv[[i, j]]);
            let tau = (times[i] - times[j]).abs();
            for (c, comp) in kernel.components.iter().enumerate() {
                let (_, d) = comp.eval_grad(tau);
                for p in 0..3 {
                    grad[3 * c + p] += w * d[p];
                }
            }
        }
    }
    Ok((lml, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn interpolates_training_points() {
        let t = grid(60, 0.25);
        let y: Vec<f64> = t.iter().map(|t| (1.1 * t).sin() + 0.3 * (2.9 * t).cos()).collect();
        let k = PeriodicKernelSum::single(0.5, 40.0, 0.05, 1e-10).unwrap();
        let gp = GpModel::fit(&t, &y, &k).unwrap();
        let post = gp.predict(&t).unwrap();
        for (m, v) in post.mean.iter().zip(&y) {
            assert!((m - v).abs() < 1e-6, "{m} vs {v}");
        }
        assert!(post.variance.iter().all(|v| *v >= 0.0 && *v <= 1e-6));
    }

    #[test]
    fn constant_signal_gives_constant_mean() {
        let t = grid(40, 0.5);
        let y = vec![0.37; 40];
        let k = PeriodicKernelSum::single(0.3, 5.0, 1.0, 1e-8).unwrap();
        let q: Vec<f64> = (0..500).map(|i| -10.0 + 0.37 * i as f64).collect();
        let post = GpModel::fit(&t, &y, &k).unwrap().predict(&q).unwrap();
        assert!(post.mean.iter().all(|m| (m - 0.37).abs() < 1e-8));
    }

    #[test]
    fn variance_is_nonnegative_and_reverts_far_away() {
        let t = grid(30, 0.1);
        let y: Vec<f64> = t.iter().map(|t| t.cos()).collect();
        let k = PeriodicKernelSum::single(0.4, 50.0, 0.5, 1e-6).unwrap();
        let q: Vec<f64> = (0..400).map(|i| -20.0 + 0.1 * i as f64).collect();
        let post = GpModel::fit(&t, &y, &k).unwrap().predict(&q).unwrap();
        assert!(post.variance.iter().all(|v| *v >= 0.0));
        let prior = k.eval(0.0, 0.0);
        let far = post.variance[0];
        assert!(far > 0.5 * prior && far <= prior + 1e-12);
    }

    #[test]
    fn sinusoid_period_is_kept_over_five_cycles() {
        let period = 2.0 * PI / 1.3;
        let t = grid(201, 0.25);
        let y: Vec<f64> = t.iter().map(|t| (1.3 * t).sin()).collect();
        let k = PeriodicKernelSum::single(0.5, period, 1.0, 1e-8).unwrap();
        let gp = GpModel::fit(&t, &y, &k).unwrap();
        let start = 50.0;
        let q: Vec<f64> = (0..2000).map(|i| start + 5.0 * period * i as f64 / 2000.0).collect();
        let post = gp.predict(&q).unwrap();
        let err = q.iter().zip(&post.mean).map(|(t, m)| (m - (1.3 * t).sin()).abs()).fold(0.0, f64::max);
        assert!(err < 0.01, "max error {err}");
    }

    #[test]
    fn lml_gradient_matches_finite_differences() {
        let t = grid(25, 0.4);
        let y: Vec<f64> = t.iter().map(|t| (0.9 * t).sin() + 0.2 * (2.3 * t).sin()).collect();
        let k = PeriodicKernelSum::new(
            vec![
                super::super::PeriodicComponent { variance: 0.4, period: 7.0, length_scale: 1.3 },
                super::super::PeriodicComponent { variance: 0.1, period: 2.7, length_scale: 0.8 },
            ],
            1e-4,
        )
        .unwrap();
        let (lml, g) = lml_and_grad(&t, &y, &k).unwrap();
        let direct = GpModel::fit(&t, &y, &k).unwrap().log_marginal_likelihood;
        assert!((lml - direct).abs() < 1e-9 * lml.abs().max(1.0));
        let theta = k.log_params();
        for i in 0..theta.len() {
            let h = 1e-5;
            let at = |d: f64| {
                let mut p = theta.clone();
                p[i] += d;
                lml_and_grad(&t, &y, &PeriodicKernelSum::from_log_params(&p, 1e-4)).unwrap().0
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-4 * (1.0 + fd.abs()), "param {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn jitter_rescues_duplicate_inputs() {
        let t = vec![0.0, 1.0, 1.0, 2.0];
        let y = vec![0.0, 1.0, 1.0, 0.5];
        let k = PeriodicKernelSum::single(1.0, 10.0, 2.0, 1e-300).unwrap();
        let gp = GpModel::fit(&t, &y, &k).unwrap();
        assert!(gp.jitter > 0.0);
    }

    #[test]
    fn rejects_mismatched_data() {
        let k = PeriodicKernelSum::single(1.0, 10.0, 2.0, 1e-6).unwrap();
        assert!(matches!(GpModel::fit(&[0.0, 1.0], &[1.0], &k), Err(GprError::BadData(_))));
        assert!(matches!(GpModel::fit(&[0.0], &[f64::NAN], &k), Err(GprError::BadData(_))));
    }
}
