// SPDX-License-Identifier: Apache-2.0

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::hamiltonian::build_hamiltonian;
use super::lattice::SpinSystem;
use super::propagate::{evolve_from, ground_state, inner, Method};
use super::EdError;
use crate::series::TimeSeries;

/// A lattice displacement, or every nearest-neighbour direction at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Displacement {
    Vector { dx: i64, dy: i64 },
    NearestNeighbour,
}

impl Displacement {
    pub fn vectors(&self, system: &SpinSystem) -> Vec<(i64, i64)> {
        match *self {
            Displacement::Vector { dx, dy } => vec![(dx, dy)],
            Displacement::NearestNeighbour => system.geometry.bond_displacements(),
        }
    }
}

/// Per basis state, `S^z_i S^z_{i+r}` averaged over sites `i` and the listed displacements.
pub fn zz_diagonal(system: &SpinSystem, displacement: Displacement) -> Vec<f64> {
    let n = system.n_sites();
    let s = system.convention.scale();
    let pairs: Vec<(usize, usize)> = displacement
        .vectors(system)
        .iter()
        .flat_map(|&(dx, dy)| (0..n).map(move |i| (i, system.geometry.translate(i, dx, dy))))
        .collect();
    let w = s * s / pairs.len() as f64;
    (0..1usize << n)
        .map(|b| {
            let sum: i32 = pairs.iter().map(|&(i, j)| if ((b >> i) ^ (b >> j)) & 1 == 0 { 1 } else { -1 }).sum();
            w * sum as f64
        })
        .collect()
}

/// Translation-averaged `⟨S^z_i(t) S^z_{i+r}(t)⟩` along a trajectory. The
/// operator is diagonal in the computational basis, so the series is real by
/// construction.
pub fn equal_time_corr<I>(trajectory: I, system: &SpinSystem, displacement: Displacement, dt: f64) -> Result<TimeSeries, EdError>
where
    I: IntoIterator<Item = Result<super::propagate::StatePoint, EdError>>,
{
    let diag = zz_diagonal(system, displacement);
    let mut values = Vec::new();
    for p in trajectory {
        let p = p?;
        let v: f64 = p.state.iter().zip(&diag).map(|(a, d)| a.norm_sqr() * d).sum();
        values.push(v);
    }
    Ok(TimeSeries::from_real(0.0, dt, &values, format!("ed C^zz {:?}", system.geometry))?)
}

/// `⟨ψ₀| S^x_0 e^{−i(H−E₀)t} S^x_r |ψ₀⟩` in the ground state of `system`, at `t = t0 + n·dt`.
pub fn unequal_time_corr(
    system: &SpinSystem,
    r: usize,
    t0: f64,
    dt: f64,
    n_samples: usize,
    method: Method,
) -> Result<TimeSeries, EdError> {
    let n = system.n_sites();
    if r >= n {
        return Err(EdError::BadDisplacement(format!("site {r} outside a {n}-site lattice")));
    }
    let h = build_hamiltonian(system)?;
    let (e0, g) = ground_state(&h)?;
    let s = system.convention.scale();
    let sx = |site: usize| -> Vec<C64> { (0..g.len()).map(|b| C64::new(s * g[b ^ (1 << site)], 0.0)).collect() };
    let bra = sx(0);
    let mut ket = sx(r);
    let method = method.resolve(n);
    if t0 != 0.0 {
        // advance to the first sample
        let mut it = evolve_from(system, normalised(&ket).0, t0, 2, method)?;
        it.next();
        let nr = super::propagate::norm(&ket);
        ket = it.next().expect("two steps")?.state.into_iter().map(|x| x * nr).collect();
    }
    let (unit, nr) = normalised(&ket);
    let mut values = Vec::with_capacity(n_samples);
    if nr == 0.0 {
        values.resize(n_samples, C64::new(0.0, 0.0));
    } else {
        for p in evolve_from(system, unit, dt, n_samples, method)? {
            let p = p?;
            let t = t0 + p.t;
            values.push(C64::from_polar(1.0, e0 * t) * inner(&bra, &p.state) * nr);
        }
    }
    Ok(TimeSeries::new(t0, dt, values, format!("ed C^xx r={r} {:?}", system.geometry))?)
}

fn normalised(v: &[C64]) -> (Vec<C64>, f64) {
    let nr = super::propagate::norm(v);
    if nr == 0.0 {
        return (v.to_vec(), 0.0);
    }
    (v.iter().map(|x| x / nr).collect(), nr)
}
