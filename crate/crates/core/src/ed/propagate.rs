// SPDX-License-Identifier: Apache-2.0

//! Time evolution `e^{−iHt}|ψ₀⟩`.
//!
//! Small systems diagonalise `H` once and expand `ψ₀` over its eigenspaces, so
//! any time costs one pass over the occupied eigenspaces. Larger systems take
//! short Lanczos steps with an a-posteriori error bound.

use ndarray::Array2;
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::hamiltonian::{build_hamiltonian, Hamiltonian};
use super::lattice::SpinSystem;
use super::EdError;

/// Largest lattice propagated through a dense eigendecomposition.
pub const DENSE_MAX_SITES: usize = 12;
/// Eigenvalues closer than this share an eigenspace.
const DEGENERACY_TOL: f64 = 1e-9;
const KRYLOV_MAX_DIM: usize = 30;
const KRYLOV_TOL: f64 = 1e-10;
const KRYLOV_MAX_SPLITS: u32 = 12;
const LANCZOS_TOL: f64 = 1e-12;
/// Ground states beyond this size come from Lanczos rather than dense `eigh`.
const GROUND_DENSE_MAX_SITES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// `⊗_i (|↑⟩ + |↓⟩)/√2`, the infinite-field ground state.
    XPolarized,
    /// Ground state of the system at its own (pre-quench) field.
    GroundState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuenchSpec {
    pub initial: InitialState,
    pub gamma_post: f64,
    pub dt: f64,
    /// Number of sampled times, `t_n = n·dt` for `n < n_steps`.
    pub n_steps: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Spectral up to [`DENSE_MAX_SITES`], Krylov beyond.
    #[default]
    Auto,
    Spectral,
    Krylov,
}

impl Method {
    pub(crate) fn resolve(self, n_sites: usize) -> Method {
        match self {
            Method::Auto if n_sites <= DENSE_MAX_SITES => Method::Spectral,
            Method::Auto => Method::Krylov,
            m => m,
        }
    }
}

pub fn x_polarized(n_sites: usize) -> Vec<C64> {
    let d = 1usize << n_sites;
    vec![C64::new(1.0 / (d as f64).sqrt(), 0.0); d]
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn dense_eigh(h: &Hamiltonian) -> Result<(Vec<f64>, Array2<f64>), EdError> {
    super::dense::symmetric_eigh(h.to_dense())
}

/// Lowest eigenpair. Deterministic: an exactly degenerate ground space is
/// represented by its projection of the lowest-index basis state with
/// nonzero weight; the returned vector has a positive largest component.
pub fn ground_state(h: &Hamiltonian) -> Result<(f64, Vec<f64>), EdError> {
    let (e0, mut v) = if h.n_sites() <= GROUND_DENSE_MAX_SITES {
        let (e, vecs) = dense_eigh(h)?;
        let deg = e.iter().take_while(|&&x| x - e[0] < DEGENERACY_TOL).count();
        let v = if deg == 1 {
            vecs.column(0).to_vec()
        } else {
            let d = h.dim();
            let mut proj = vec![0.0; d];
            for b in 0..d {
                for k in 0..deg {
                    let c = vecs[[b, k]];
                    for (p, &u) in proj.iter_mut().zip(vecs.column(k).iter()) {
                        *p += c * u;
                    }
                }
                if proj.iter().map(|x| x * x).sum::<f64>() > 1e-12 {
                    break;
                }
            }
            proj
        };
        (e[0], v)
    } else {
        lanczos_ground_state(h)?
    };
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let big = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    let sgn = if big < 0.0 { -1.0 } else { 1.0 };
    v.iter_mut().for_each(|x| *x *= sgn / nrm);
    Ok((e0, v))
}

/// Thick-restart-free Lanczos with full reorthogonalisation, restarted from
/// the current Ritz vector. The uniform start vector overlaps the
/// Perron–Frobenius ground state whenever `Γ ≠ 0`.
fn lanczos_ground_state(h: &Hamiltonian) -> Result<(f64, Vec<f64>), EdError> {
    let d = h.dim();
    let m_max = 120.min(d);
    let scale = h.norm_bound().max(1.0);
    let mut start = vec![1.0 / (d as f64).sqrt(); d];
    let mut last_res = f64::INFINITY;
    for _restart in 0..40 {
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        let mut w = vec![0.0; d];
        for j in 0..m_max {
            h.apply_real(&basis[j], &mut w);
            let a = dot(&basis[j], &w);
            alpha.push(a);
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b = dot(&w, &w).sqrt();
            if b < 1e-14 * scale || j + 1 == m_max {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let k = alpha.len();
        let t = Array2::from_shape_fn((k, k), |(i, j)| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let (e, y) = t.eigh(UPLO::Lower).map_err(|e| EdError::Linalg(format!("tridiagonal eigh: {e}")))?;
        let mut ritz = vec![0.0; d];
        for (i, v) in basis.iter().enumerate().take(k) {
            ritz.iter_mut().zip(v).for_each(|(r, x)| *r += y[[i, 0]] * x);
        }
        let nrm = dot(&ritz, &ritz).sqrt();
        ritz.iter_mut().for_each(|x| *x /= nrm);
        h.apply_real(&ritz, &mut w);
        let res = w.iter().zip(&ritz).map(|(hw, r)| (hw - e[0] * r).powi(2)).sum::<f64>().sqrt();
        if res <= LANCZOS_TOL * scale {
            return Ok((e[0], ritz));
        }
        last_res = res;
        start = ritz;
    }
    Err(EdError::ConvergenceFailure(format!("ground-state Lanczos residual stalled at {last_res:.3e}")))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ψ(t) = Σ_E e^{−iEt} P_E ψ₀` over the eigenspaces `P_E` that `ψ₀` occupies.
#[derive(Debug, Clone)]
pub struct SpectralPropagator {
    components: Vec<(f64, Vec<C64>)>,
}

impl SpectralPropagator {
    pub fn new(h: &Hamiltonian, psi0: &[C64]) -> Result<Self, EdError> {
        let (e, v) = dense_eigh(h)?;
        Ok(Self::from_eigh(&e, &v, psi0))
    }

    pub(crate) fn from_eigh(e: &[f64], v: &Array2<f64>, psi0: &[C64]) -> Self {
        let d = e.len();
        let overlaps: Vec<C64> =
            (0..d).map(|k| v.column(k).iter().zip(psi0).map(|(&u, &p)| p * u).sum()).collect();
        let mut components = Vec::new();
        let mut k = 0;
        while k < d {
            let mut end = k + 1;
            while end < d && e[end] - e[end - 1] < DEGENERACY_TOL {
                end += 1;
            }
            if overlaps[k..end].iter().any(|c| c.norm() > 1e-15) {
                let mut u = vec![C64::new(0.0, 0.0); d];
                for q in k..end {
                    let c = overlaps[q];
                    u.iter_mut().zip(v.column(q).iter()).for_each(|(x, &y)| *x += c * y);
                }
                let mean = e[k..end].iter().sum::<f64>() / (end - k) as f64;
                components.push((mean, u));
            }
            k = end;
        }
        Self { components }
    }

    /// Number of occupied eigenspaces.
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn state_at(&self, t: f64) -> Vec<C64> {
        let d = self.components.first().map_or(0, |c| c.1.len());
        let mut out = vec![C64::new(0.0, 0.0); d];
        for (e, u) in &self.components {
            let ph = C64::from_polar(1.0, -e * t);
            out.iter_mut().zip(u).for_each(|(o, &x)| *o += ph * x);
        }
        out
    }
}

/// Short-time Lanczos propagator.
#[derive(Debug, Clone)]
pub struct KrylovStepper {
    h: Hamiltonian,
}

impl KrylovStepper {
    pub fn new(h: Hamiltonian) -> Self {
        Self { h }
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.h
    }

    /// `e^{−iHτ} ψ`, splitting `τ` whenever the subspace bound misses the tolerance.
    pub fn step(&self, psi: &[C64], tau: f64) -> Result<Vec<C64>, EdError> {
        self.step_split(psi, tau, 0)
    }

    fn step_split(&self, psi: &[C64], tau: f64, depth: u32) -> Result<Vec<C64>, EdError> {
        match self.try_step(psi, tau)? {
            Ok(v) => Ok(v),
            Err(_) if depth < KRYLOV_MAX_SPLITS => {
                let half = self.step_split(psi, 0.5 * tau, depth + 1)?;
                self.step_split(&half, 0.5 * tau, depth + 1)
            }
            Err(est) => Err(EdError::ConvergenceFailure(format!(
                "Krylov step τ = {tau:.3e} error estimate {est:.3e} after {KRYLOV_MAX_DIM} vectors and {depth} splits"
            ))),
        }
    }

    /// `Ok(Err(estimate))` when the subspace was exhausted before converging.
    fn try_step(&self, psi: &[C64], tau: f64) -> Result<Result<Vec<C64>, f64>, EdError> {
        let d = psi.len();
        let beta0 = norm(psi);
        if beta0 == 0.0 || tau == 0.0 {
            return Ok(Ok(psi.to_vec()));
        }
        let mut basis: Vec<Vec<C64>> = vec![psi.iter().map(|x| x / beta0).collect()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![C64::new(0.0, 0.0); d];
        let mut est = f64::INFINITY;
        for j in 0..KRYLOV_MAX_DIM.min(d) {
            self.h.apply(&basis[j], &mut w);
            alpha.push(inner(&basis[j], &w).re);
            for v in &basis {
                let c = inner(v, &w);
                w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
            }
            let b = norm(&w);
            let invariant = b < 1e-13 * self.h.norm_bound().max(1.0);
            let y = exp_tridiagonal(&alpha, &beta, tau)?;
            est = if invariant { 0.0 } else { b * tau.abs() * y[j].norm() };
            if est < KRYLOV_TOL {
                let mut out = vec![C64::new(0.0, 0.0); d];
                for (v, &c) in basis.iter().zip(&y) {
                    out.iter_mut().zip(v).for_each(|(o, &x)| *o += c * x);
                }
                out.iter_mut().for_each(|o| *o *= beta0);
                return Ok(Ok(out));
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        Ok(Err(est))
    }
}

/// First column of `exp(−iτT)` for the symmetric tridiagonal `T(α, β)`.
fn exp_tridiagonal(alpha: &[f64], beta: &[f64], tau: f64) -> Result<Vec<C64>, EdError> {
    let k = alpha.len();
    let t = Array2::from_shape_fn((k, k), |(i, j)| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let (e, v) = t.eigh(UPLO::Lower).map_err(|e| EdError::Linalg(format!("tridiagonal eigh: {e}")))?;
    Ok((0..k)
        .map(|i| (0..k).map(|q| C64::from_polar(1.0, -e[q] * tau) * (v[[i, q]] * v[[0, q]])).sum())
        .collect())
}

#[derive(Debug, Clone)]
pub struct StatePoint {
    pub n: usize,
    pub t: f64,
    pub state: Vec<C64>,
}

enum Engine {
    Spectral(SpectralPropagator),
    Krylov { stepper: KrylovStepper, current: Vec<C64> },
}

/// Lazily evaluated `ψ(t_n)`, `t_n = n·dt`; only the current state is held.
pub struct Trajectory {
    system: SpinSystem,
    engine: Engine,
    dt: f64,
    n_steps: usize,
    next: usize,
}

impl Trajectory {
    /// The post-quench system driving the evolution.
    pub fn system(&self) -> &SpinSystem {
        &self.system
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }
}

impl Iterator for Trajectory {
    type Item = Result<StatePoint, EdError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.n_steps {
            return None;
        }
        let n = self.next;
        self.next += 1;
        let t = n as f64 * self.dt;
        let state = match &mut self.engine {
            Engine::Spectral(p) => p.state_at(t),
            Engine::Krylov { stepper, current } => {
                if n > 0 {
                    match stepper.step(current, self.dt) {
                        Ok(s) => *current = s,
                        Err(e) => {
                            self.next = self.n_steps;
                            return Some(Err(e));
                        }
                    }
                }
                current.clone()
            }
        };
        Some(Ok(StatePoint { n, t, state }))
    }
}

pub fn initial_state(system: &SpinSystem, initial: InitialState) -> Result<Vec<C64>, EdError> {
    match initial {
        InitialState::XPolarized => Ok(x_polarized(system.n_sites())),
        InitialState::GroundState => {
            let (_, v) = ground_state(&build_hamiltonian(system)?)?;
            Ok(v.into_iter().map(|x| C64::new(x, 0.0)).collect())
        }
    }
}

/// Quench `system` (pre-quench field `system.gamma`) to `quench.gamma_post`.
pub fn evolve(system: &SpinSystem, quench: &QuenchSpec, method: Method) -> Result<Trajectory, EdError> {
    let psi0 = initial_state(system, quench.initial)?;
    evolve_from(&system.with_gamma(quench.gamma_post), psi0, quench.dt, quench.n_steps, method)
}

/// Evolve an explicit state under `system`'s Hamiltonian.
pub fn evolve_from(
    system: &SpinSystem,
    psi0: Vec<C64>,
    dt: f64,
    n_steps: usize,
    method: Method,
) -> Result<Trajectory, EdError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(EdError::BadQuench(format!("time step must be positive, got {dt}")));
    }
    if psi0.len() != system.dim() {
        return Err(EdError::BadQuench(format!("state has length {}, expected {}", psi0.len(), system.dim())));
    }
    let nrm = norm(&psi0);
    if (nrm - 1.0).abs() > 1e-10 {
        return Err(EdError::NotNormalized(nrm));
    }
    let h = build_hamiltonian(system)?;
    let engine = match method.resolve(system.n_sites()) {
        Method::Krylov => Engine::Krylov { stepper: KrylovStepper::new(h), current: psi0 },
        _ => Engine::Spectral(SpectralPropagator::new(&h, &psi0)?),
    };
    Ok(Trajectory { system: system.clone(), engine, dt, n_steps, next: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quench(n: usize, dt: f64) -> QuenchSpec {
        QuenchSpec { initial: InitialState::XPolarized, gamma_post: 0.9, dt, n_steps: n }
    }

    #[test]
    fn unitarity_and_energy_conservation() {
        let sys = SpinSystem::rectangle(3, 2, 1.0, 0.9).unwrap();
        let h = build_hamiltonian(&sys).unwrap();
        let e0 = h.expectation(&x_polarized(6));
        for method in [Method::Spectral, Method::Krylov] {
            for p in evolve(&sys, &quench(400, 0.05), method).unwrap() {
                let p = p.unwrap();
                assert!((norm(&p.state) - 1.0).abs() < 1e-9, "{method:?} t={}", p.t);
                assert!((h.expectation(&p.state) - e0).abs() < 1e-8 * h.norm_bound(), "{method:?}");
            }
        }
    }

    #[test]
    fn eigenstate_only_acquires_phase() {
        let sys = SpinSystem::chain(8, 1.0, 0.7).unwrap();
        let (_, g) = ground_state(&build_hamiltonian(&sys).unwrap()).unwrap();
        let psi0: Vec<C64> = g.iter().map(|&x| C64::new(x, 0.0)).collect();
        for method in [Method::Spectral, Method::Krylov] {
            for p in evolve_from(&sys, psi0.clone(), 0.3, 50, method).unwrap() {
                let p = p.unwrap();
                assert!((inner(&psi0, &p.state).norm() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_field_keeps_zz_diagonal_weights() {
        let sys = SpinSystem::chain(6, 1.0, 0.0).unwrap();
        let psi0 = x_polarized(6);
        for p in evolve_from(&sys, psi0.clone(), 0.7, 20, Method::Spectral).unwrap() {
            let p = p.unwrap();
            for (a, b) in p.state.iter().zip(&psi0) {
                assert!((a.norm() - b.norm()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lanczos_matches_dense_ground_state() {
        let h = build_hamiltonian(&SpinSystem::chain(10, 1.0, 0.5).unwrap()).unwrap();
        let (e_dense, v_dense) = ground_state(&h).unwrap();
        let (e_lz, v_lz) = lanczos_ground_state(&h).unwrap();
        assert!((e_dense - e_lz).abs() < 1e-11);
        let ov: f64 = v_dense.iter().zip(&v_lz).map(|(a, b)| a * b).sum();
        assert!((ov.abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn degenerate_ground_state_is_deterministic() {
        // Γ = 0: all-up and all-down are degenerate; the lowest basis state is all-up
        let h = build_hamiltonian(&SpinSystem::chain(4, 1.0, 0.0).unwrap()).unwrap();
        let (_, v) = ground_state(&h).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-12);
        assert!(v[15].abs() < 1e-12);
    }

    #[test]
    fn rejects_unnormalised_state() {
        let sys = SpinSystem::chain(3, 1.0, 1.0).unwrap();
        let bad = vec![C64::new(1.0, 0.0); 8];
        assert!(matches!(evolve_from(&sys, bad, 0.1, 3, Method::Auto), Err(EdError::NotNormalized(_))));
    }
}
