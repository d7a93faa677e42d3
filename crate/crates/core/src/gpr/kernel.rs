// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::GprError;

/// `σ² exp[−2 sin²(π|t − t′|/T) / l²]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicComponent {
    pub variance: f64,
    pub period: f64,
    pub length_scale: f64,
}

impl PeriodicComponent {
    pub fn eval(&self, tau: f64) -> f64 {
        let s = (PI * tau / self.period).sin();
        self.variance * (-2.0 * s * s / (self.length_scale * self.length_scale)).exp()
    }

    /// Value and derivatives with respect to `(ln σ², ln T, ln l)`.
    pub(crate) fn eval_grad(&self, tau: f64) -> (f64, [f64; 3]) {
        let l2 = self.length_scale * self.length_scale;
        let phase = PI * tau / self.period;
        let s = phase.sin();
        let k = self.variance * (-2.0 * s * s / l2).exp();
        let d_period = k * 2.0 * phase * (2.0 * phase).sin() / l2;
        let d_length = k * 4.0 * s * s / l2;
        (k, [k, d_period, d_length])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicKernelSum {
    pub components: Vec<PeriodicComponent>,
    /// Observation variance added to the Gram diagonal.
    pub observation_noise: f64,
}

impl PeriodicKernelSum {
    pub fn new(components: Vec<PeriodicComponent>, observation_noise: f64) -> Result<Self, GprError> {
        let k = Self { components, observation_noise };
        k.validate()?;
        Ok(k)
    }

    pub fn single(variance: f64, period: f64, length_scale: f64, observation_noise: f64) -> Result<Self, GprError> {
        Self::new(vec![PeriodicComponent { variance, period, length_scale }], observation_noise)
    }

    pub fn validate(&self) -> Result<(), GprError> {
        if self.components.is_empty() {
            return Err(GprError::BadKernel("need at least one periodic component".into()));
        }
        for c in &self.components {
            let ok = [c.variance, c.period, c.length_scale].iter().all(|v| *v > 0.0 && v.is_finite());
            if !ok {
                return Err(GprError::BadKernel(format!("parameters must be positive and finite: {c:?}")));
            }
        }
        if !(self.observation_noise > 0.0 && self.observation_noise.is_finite()) {
            return Err(GprError::BadKernel(format!("observation noise {} must be positive", self.observation_noise)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn eval(&self, t: f64, u: f64) -> f64 {
        let tau = (t - u).abs();
        self.components.iter().map(|c| c.eval(tau)).sum()
    }

    /// `[ln σ², ln T, ln l]` per component.
    pub fn log_params(&self) -> Vec<f64> {
        self.components.iter().flat_map(|c| [c.variance.ln(), c.period.ln(), c.length_scale.ln()]).collect()
    }

    pub fn from_log_params(theta: &[f64], observation_noise: f64) -> Self {
        let components = theta
            .chunks_exact(3)
            .map(|p| PeriodicComponent { variance: p[0].exp(), period: p[1].exp(), length_scale: p[2].exp() })
            .collect();
        Self { components, observation_noise }
    }
}
