// SPDX-License-Identifier: Apache-2.0

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::lattice::SpinSystem;
use super::EdError;

/// Below this dimension matrix-vector products stay on one thread.
const PAR_DIM: usize = 1 << 14;

/// Matrix-free transverse-field Ising Hamiltonian in the `S^z` basis:
/// a diagonal Ising part plus `field · Σ_i X_i`, `X_i` flipping bit `i`.
/// Bit value 0 is spin up.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    n_sites: usize,
    diag: Vec<f64>,
    field: f64,
}

pub fn build_hamiltonian(system: &SpinSystem) -> Result<Hamiltonian, EdError> {
    let n = system.n_sites();
    let s = system.convention.scale();
    let pairs = system.pairs();
    let zz = -system.j * s * s;
    let diag = (0..1usize << n)
        .map(|b| {
            let sum: i32 = pairs.iter().map(|&(i, j)| if ((b >> i) ^ (b >> j)) & 1 == 0 { 1 } else { -1 }).sum();
            zz * sum as f64
        })
        .collect();
    Ok(Hamiltonian { n_sites: n, diag, field: -system.gamma * s })
}

impl Hamiltonian {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    fn row<T>(&self, x: &[T], b: usize) -> T
    where
        T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        let mut flip = x[b ^ 1];
        for i in 1..self.n_sites {
            flip = flip + x[b ^ (1 << i)];
        }
        x[b] * self.diag[b] + flip * self.field
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        if self.dim() >= PAR_DIM {
            y.par_iter_mut().enumerate().for_each(|(b, yb)| *yb = self.row(x, b));
        } else {
            y.iter_mut().enumerate().for_each(|(b, yb)| *yb = self.row(x, b));
        }
    }

    pub fn apply_real(&self, x: &[f64], y: &mut [f64]) {
        if self.dim() >= PAR_DIM {
            y.par_iter_mut().enumerate().for_each(|(b, yb)| *yb = self.row(x, b));
        } else {
            y.iter_mut().enumerate().for_each(|(b, yb)| *yb = self.row(x, b));
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let d = self.dim();
        let mut h = Array2::zeros((d, d));
        for b in 0..d {
            h[[b, b]] = self.diag[b];
            for i in 0..self.n_sites {
                h[[b, b ^ (1 << i)]] += self.field;
            }
        }
        h
    }

    /// `⟨ψ|H|ψ⟩ / ⟨ψ|ψ⟩`.
    pub fn expectation(&self, psi: &[C64]) -> f64 {
        let mut hp = vec![C64::new(0.0, 0.0); psi.len()];
        self.apply(psi, &mut hp);
        let num: f64 = psi.iter().zip(&hp).map(|(a, b)| (a.conj() * b).re).sum();
        let den: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        num / den
    }

    /// Upper bound on the spectral norm, `max|diag| + N_s·|field|`.
    pub fn norm_bound(&self) -> f64 {
        self.diag.iter().fold(0.0f64, |m, d| m.max(d.abs())) + self.n_sites as f64 * self.field.abs()
    }
}
