// SPDX-License-Identifier: Apache-2.0

//! Two-level kernel search: L-BFGS on the log marginal likelihood over the
//! training window, wrapped in Bayesian optimisation (expected improvement
//! under a Matérn-5/2 surrogate) of the validation error over the kernel
//! initialisation.

use std::sync::Mutex;

use argmin::core::{CostFunction, Executor, Gradient};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use ndarray::{Array1, Array2};
use ndarray_linalg::{FactorizeC, SolveC, UPLO};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::process::lml_and_grad;
use super::{GpModel, GprError, PeriodicKernelSum};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBounds {
    pub variance: (f64, f64),
    pub period: (f64, f64),
    pub length_scale: (f64, f64),
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self { variance: (1e-4, 1.0), period: (1.0, 50.0), length_scale: (0.1, 10.0) }
    }
}

impl SearchBounds {
    /// Per-parameter `(ln lo, ln hi)` in [`PeriodicKernelSum::log_params`] order.
    fn log_box(&self, n_kernels: usize) -> Vec<(f64, f64)> {
        let one = [self.variance, self.period, self.length_scale].map(|(a, b)| (a.ln(), b.ln()));
        (0..n_kernels).flat_map(|_| one).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperoptConfig {
    pub n_kernels: usize,
    pub initial_points: usize,
    pub iterations: usize,
    pub train_window: (f64, f64),
    pub validation_window: (f64, f64),
    /// Keep every `stride`-th training sample; the Gram matrix is dense.
    pub stride: usize,
    pub observation_noise: f64,
    pub inner_max_iters: u64,
    pub bounds: SearchBounds,
    pub seed: u64,
}

impl Default for HyperoptConfig {
    fn default() -> Self {
        Self {
            n_kernels: 1,
            initial_points: 20,
            iterations: 50,
            train_window: (0.0, 50.0),
            validation_window: (0.0, 100.0),
            stride: 5,
            observation_noise: 1e-6,
            inner_max_iters: 60,
            bounds: SearchBounds::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoStep {
    pub iteration: usize,
    pub cost: f64,
    pub best_cost: f64,
    /// False for the random initial design.
    pub acquired: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GprFitReport {
    pub kernel: PeriodicKernelSum,
    pub log_marginal_likelihood: f64,
    /// `‖prediction − truth‖₂ / n` over the validation window.
    pub validation_error: f64,
    pub bo_trace: Vec<BoStep>,
    pub acquisition: String,
    pub config: HyperoptConfig,
}

fn window(series: &TimeSeries, (lo, hi): (f64, f64), stride: usize) -> (Vec<f64>, Vec<f64>) {
    let eps = 1e-9 * series.dt();
    (0..series.len())
        .filter(|&n| {
            let t = series.time(n);
            t >= lo - eps && t <= hi + eps
        })
        .step_by(stride.max(1))
        .map(|n| (series.time(n), series.values()[n].re))
        .unzip()
}

/// The (subsampled) training points the search conditions on.
pub fn training_set(series: &TimeSeries, config: &HyperoptConfig) -> (Vec<f64>, Vec<f64>) {
    window(series, config.train_window, config.stride)
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

struct NegLml<'a> {
    times: &'a [f64],
    values: &'a [f64],
    noise: f64,
    bounds: &'a [(f64, f64)],
    best: Mutex<Option<(f64, Vec<f64>)>>,
}

impl NegLml<'_> {
    fn theta(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(self.bounds).map(|(z, (a, b))| a + (b - a) * sigmoid(*z)).collect()
    }

    fn eval(&self, z: &[f64]) -> Result<(f64, Vec<f64>), GprError> {
        let theta = self.theta(z);
        let (lml, g) = lml_and_grad(self.times, self.values, &PeriodicKernelSum::from_log_params(&theta, self.noise))?;
        let mut best = self.best.lock().unwrap();
        if best.as_ref().is_none_or(|(c, _)| -lml < *c) {
            *best = Some((-lml, theta));
        }
        let gz = z
            .iter()
            .zip(self.bounds)
            .zip(&g)
            .map(|((z, (a, b)), g)| {
                let s = sigmoid(*z);
                -g * (b - a) * s * (1.0 - s)
            })
            .collect();
        Ok((-lml, gz))
    }
}

impl CostFunction for NegLml<'_> {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, z: &Vec<f64>) -> Result<f64, argmin::core::Error> {
        Ok(self.eval(z)?.0)
    }
}

impl Gradient for NegLml<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;
    fn gradient(&self, z: &Vec<f64>) -> Result<Vec<f64>, argmin::core::Error> {
        Ok(self.eval(z)?.1)
    }
}

/// Maximises the log marginal likelihood from `init`, keeping every
/// parameter inside `bounds`. Returns the best kernel met and its LML.
pub fn maximize_lml(
    times: &[f64],
    values: &[f64],
    init: &PeriodicKernelSum,
    bounds: &SearchBounds,
    max_iters: u64,
) -> Result<(PeriodicKernelSum, f64), GprError> {
    let log_box = bounds.log_box(init.len());
    let z0: Vec<f64> = init
        .log_params()
        .iter()
        .zip(&log_box)
        .map(|(t, (a, b))| {
            let u = ((t - a) / (b - a)).clamp(1e-6, 1.0 - 1e-6);
            (u / (1.0 - u)).ln()
        })
        .collect();
    let problem = NegLml { times, values, noise: init.observation_noise, bounds: &log_box, best: Mutex::new(None) };
    problem.eval(&z0)?;
    let solver = LBFGS::new(MoreThuenteLineSearch::new(), 7)
        .with_tolerance_grad(1e-8)
        .and_then(|s| s.with_tolerance_cost(1e-12))
        .map_err(|e| GprError::Optimizer(e.to_string()))?;
    // A failed line search still leaves the best point visited.
    let _ = Executor::new(&problem, solver).configure(|s| s.param(z0).max_iters(max_iters)).run();
    let (cost, theta) = problem.best.into_inner().unwrap().expect("initial point was evaluated");
    Ok((PeriodicKernelSum::from_log_params(&theta, init.observation_noise), -cost))
}

impl CostFunction for &NegLml<'_> {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, z: &Vec<f64>) -> Result<f64, argmin::core::Error> {
        (*self).cost(z)
    }
}

impl Gradient for &NegLml<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;
    fn gradient(&self, z: &Vec<f64>) -> Result<Vec<f64>, argmin::core::Error> {
        (*self).gradient(z)
    }
}

struct Candidate {
    kernel: PeriodicKernelSum,
    lml: f64,
    cost: f64,
}

struct Objective<'a> {
    train: (Vec<f64>, Vec<f64>),
    valid: (Vec<f64>, Vec<f64>),
    log_box: Vec<(f64, f64)>,
    config: &'a HyperoptConfig,
    penalty: f64,
}

impl Objective<'_> {
    fn eval(&self, u: &[f64]) -> Candidate {
        let theta: Vec<f64> = u.iter().zip(&self.log_box).map(|(u, (a, b))| a + (b - a) * u).collect();
        let init = PeriodicKernelSum::from_log_params(&theta, self.config.observation_noise);
        let attempt = || -> Result<Candidate, GprError> {
            let (kernel, lml) =
                maximize_lml(&self.train.0, &self.train.1, &init, &self.config.bounds, self.config.inner_max_iters)?;
            let post = GpModel::fit(&self.train.0, &self.train.1, &kernel)?.predict(&self.valid.0)?;
            let cost = l2_per_point(&post.mean, &self.valid.1);
            Ok(Candidate { kernel, lml, cost: if cost.is_finite() { cost } else { self.penalty } })
        };
        attempt().unwrap_or(Candidate { kernel: init, lml: f64::NEG_INFINITY, cost: self.penalty })
    }
}

pub(crate) fn l2_per_point(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() / a.len() as f64
}

fn matern52(a: &[f64], b: &[f64], l: f64) -> f64 {
    let r = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() / l;
    let s = 5f64.sqrt() * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// Zero-mean surrogate on standardised log-costs; the length scale is the
/// best of a small grid by marginal likelihood.
struct Surrogate {
    xs: Vec<Vec<f64>>,
    alpha: Array1<f64>,
    factor: ndarray_linalg::CholeskyFactorized<ndarray::OwnedRepr<f64>>,
    length: f64,
    mean: f64,
    scale: f64,
}

impl Surrogate {
    const NOISE: f64 = 1e-6;

    fn fit(xs: &[Vec<f64>], costs: &[f64]) -> Option<Self> {
        let y: Vec<f64> = costs.iter().map(|c| c.ln()).collect();
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let scale = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt().max(1e-12);
        let y = Array1::from_iter(y.iter().map(|v| (v - mean) / scale));
        let d = xs[0].len() as f64;
        let mut best: Option<(f64, Self)> = None;
        for base in [0.05, 0.1, 0.2, 0.4, 0.8, 1.6] {
            let length = base * d.sqrt();
            let k = Array2::from_shape_fn((xs.len(), xs.len()), |(i, j)| {
                matern52(&xs[i], &xs[j], length) + if i == j { Self::NOISE } else { 0.0 }
            });
            let Ok(factor) = k.factorizec(UPLO::Lower) else { continue };
            let Ok(alpha) = factor.solvec(&y) else { continue };
            let lml = -0.5 * y.dot(&alpha) - factor.factor.diag().iter().map(|v| v.ln()).sum::<f64>();
            if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                best = Some((lml, Self { xs: xs.to_vec(), alpha, factor, length, mean, scale }));
            }
        }
        best.map(|b| b.1)
    }

    /// Expected improvement below `best` (standardised units).
    fn expected_improvement(&self, u: &[f64], best: f64) -> f64 {
        let ks = Array1::from_iter(self.xs.iter().map(|x| matern52(x, u, self.length)));
        let mu = ks.dot(&self.alpha);
        let v = self.factor.solvec(&ks).map(|w| ks.dot(&w)).unwrap_or(1.0);
        let sd = (1.0 + Self::NOISE - v).max(1e-18).sqrt();
        let imp = best - mu - 0.01;
        let z = imp / sd;
        let n = Normal::standard();
        imp * n.cdf(z) + sd * n.pdf(z)
    }

    fn standardise(&self, cost: f64) -> f64 {
        (cost.ln() - self.mean) / self.scale
    }
}

const EI_RANDOM_CANDIDATES: usize = 4000;
const EI_LOCAL_CANDIDATES: usize = 40;

fn propose(surrogate: &Surrogate, xs: &[Vec<f64>], costs: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = xs[0].len();
    let best = surrogate.standardise(costs.iter().copied().fold(f64::INFINITY, f64::min));
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
    let mut cands: Vec<Vec<f64>> = (0..EI_RANDOM_CANDIDATES).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
    for &i in order.iter().take(5) {
        for _ in 0..EI_LOCAL_CANDIDATES {
            cands.push(
                xs[i]
                    .iter()
                    .map(|x| (x + 0.05 * rng.sample::<f64, _>(StandardNormal)).clamp(0.0, 1.0))
                    .collect(),
            );
        }
    }
    cands
        .into_iter()
        .map(|u| (surrogate.expected_improvement(&u, best), u))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, u)| u)
        .expect("candidate set is non-empty")
}

/// Searches kernel sums of `config.n_kernels` periodic components for the
/// best validation error on `series`.
pub fn optimize_hyperparameters(series: &TimeSeries, config: &HyperoptConfig) -> Result<GprFitReport, GprError> {
    if config.n_kernels == 0 {
        return Err(GprError::BadKernel("n_kernels must be at least 1".into()));
    }
    if config.initial_points == 0 {
        return Err(GprError::BadData("budget needs at least one initial point".into()));
    }
    let train = training_set(series, config);
    let valid = window(series, config.validation_window, 1);
    if train.0.len() < 2 || valid.0.is_empty() {
        return Err(GprError::BadData("training or validation window holds too few samples".into()));
    }
    let mean = train.1.iter().sum::<f64>() / train.1.len() as f64;
    let baseline = l2_per_point(&vec![mean; valid.1.len()], &valid.1);
    let objective = Objective {
        train,
        valid,
        log_box: config.bounds.log_box(config.n_kernels),
        config,
        penalty: 10.0 * baseline.max(1e-12),
    };
    let d = 3 * config.n_kernels;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut xs: Vec<Vec<f64>> =
        (0..config.initial_points).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
    let mut evals: Vec<Candidate> = xs.par_iter().map(|u| objective.eval(u)).collect();
    for _ in 0..config.iterations {
        let costs: Vec<f64> = evals.iter().map(|c| c.cost).collect();
        let next = match Surrogate::fit(&xs, &costs) {
            Some(s) => propose(&s, &xs, &costs, &mut rng),
            None => (0..d).map(|_| rng.random()).collect(),
        };
        evals.push(objective.eval(&next));
        xs.push(next);
    }

    let mut best_cost = f64::INFINITY;
    let bo_trace = evals
        .iter()
        .enumerate()
        .map(|(i, c)| {
            best_cost = best_cost.min(c.cost);
            BoStep { iteration: i, cost: c.cost, best_cost, acquired: i >= config.initial_points }
        })
        .collect();
    let best = evals
        .into_iter()
        .enumerate()
        .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost).then(a.0.cmp(&b.0)))
        .map(|(_, c)| c)
        .expect("at least one evaluation");
    Ok(GprFitReport {
        kernel: best.kernel,
        log_marginal_likelihood: best.lml,
        validation_error: best.cost,
        bo_trace,
        acquisition: "expected-improvement (xi = 0.01), Matern-5/2 surrogate on log cost".into(),
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sinusoid(period: f64) -> TimeSeries {
        let dt = 0.05;
        let v: Vec<f64> = (0..2001).map(|i| (2.0 * PI * i as f64 * dt / period).sin()).collect();
        TimeSeries::from_real(0.0, dt, &v, "sin").unwrap()
    }

    #[test]
    fn inner_optimiser_improves_likelihood_within_bounds() {
        let s = sinusoid(6.0);
        let cfg = HyperoptConfig::default();
        let (t, y) = training_set(&s, &cfg);
        assert_eq!(t.len(), 201);
        let init = PeriodicKernelSum::single(0.1, 5.0, 2.0, 1e-6).unwrap();
        let before = GpModel::fit(&t, &y, &init).unwrap().log_marginal_likelihood;
        let (k, lml) = maximize_lml(&t, &y, &init, &cfg.bounds, 60).unwrap();
        assert!(lml > before);
        let c = k.components[0];
        assert!((1e-4..=1.0).contains(&c.variance));
        assert!((1.0..=50.0).contains(&c.period));
        assert!((0.1..=10.0).contains(&c.length_scale));
    }

    #[test]
    fn recovers_the_period_of_a_sinusoid() {
        let s = sinusoid(6.0);
        let cfg = HyperoptConfig { initial_points: 8, iterations: 6, seed: 3, ..Default::default() };
        let report = optimize_hyperparameters(&s, &cfg).unwrap();
        let period = report.kernel.components[0].period;
        // Any integer multiple of the true period fits equally well.
        let ratio = period / 6.0;
        assert!((ratio - ratio.round()).abs() < 0.02 * ratio.round(), "period {period}");
        assert!(report.validation_error < 1e-3);
        assert_eq!(report.bo_trace.len(), 14);
        assert!(report.bo_trace.windows(2).all(|w| w[1].best_cost <= w[0].best_cost));
        assert!(report.bo_trace[8].acquired && !report.bo_trace[7].acquired);
    }

    #[test]
    fn search_is_seeded() {
        let s = sinusoid(4.0);
        let cfg = HyperoptConfig { initial_points: 3, iterations: 2, seed: 9, ..Default::default() };
        let a = optimize_hyperparameters(&s, &cfg).unwrap();
        let b = optimize_hyperparameters(&s, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_empty_budget() {
        let cfg = HyperoptConfig { initial_points: 0, ..Default::default() };
        assert!(optimize_hyperparameters(&sinusoid(3.0), &cfg).is_err());
    }
}
