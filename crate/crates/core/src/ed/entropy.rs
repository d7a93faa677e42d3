// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;
use std::path::Path;

use ndarray::ArrayView2;
use ndarray_linalg::{JobSvd, SVDDC};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::propagate::StatePoint;
use super::EdError;
use crate::ising::special::integrate;

/// Reduced-density eigenvalues below this count as exactly zero.
const ZERO_WEIGHT: f64 = 1e-14;

/// Subsystem `A` = the first `n_a` sites (the low bits of the basis index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub n_a: usize,
    /// Sites per row for rectangle cuts, 1 for chains.
    pub lx: usize,
}

impl Partition {
    pub fn chain(l_a: usize) -> Self {
        Self { n_a: l_a, lx: 1 }
    }

    /// `l_a` complete rows of a column-major `lx`-wide rectangle.
    pub fn rectangle(lx: usize, l_a: usize) -> Self {
        Self { n_a: lx * l_a, lx }
    }

    pub fn rows(&self) -> usize {
        self.n_a / self.lx
    }

    fn validate(&self, n_sites: usize) -> Result<(), EdError> {
        if self.n_a == 0 || 2 * self.n_a > n_sites {
            return Err(EdError::BadPartition(format!(
                "subsystem of {} sites in a {n_sites}-site system; need 1 ≤ N_A ≤ N_s/2 (use the complement)",
                self.n_a
            )));
        }
        Ok(())
    }
}

/// Von Neumann entropy (nats) of the first `partition.n_a` sites.
pub fn entanglement_entropy(state: &[C64], n_sites: usize, partition: Partition) -> Result<f64, EdError> {
    partition.validate(n_sites)?;
    if state.len() != 1 << n_sites {
        return Err(EdError::BadPartition(format!("state length {} is not 2^{n_sites}", state.len())));
    }
    let da = 1usize << partition.n_a;
    let db = state.len() / da;
    // index = a + da·b, so row-major (db, da) holds ψ[a, b] transposed
    let m = ArrayView2::from_shape((db, da), state).expect("shape matches length");
    let (_, sv, _) = m.svddc(JobSvd::None).map_err(|e| EdError::Linalg(format!("svd: {e}")))?;
    Ok(entropy_of_weights(sv.iter().map(|s| s * s)))
}

fn entropy_of_weights(p: impl Iterator<Item = f64>) -> f64 {
    -p.filter(|&x| x > ZERO_WEIGHT).map(|x| x * x.ln()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntanglementTrace {
    pub times: Vec<f64>,
    pub entropy: Vec<f64>,
    pub partition: Partition,
    pub n_sites: usize,
}

impl EntanglementTrace {
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = String::from("t,S\n");
        for (t, s) in self.times.iter().zip(&self.entropy) {
            out.push_str(&format!("{t},{s}\n"));
        }
        std::fs::write(path, out)
    }
}

/// Entropy of each partition at every trajectory point.
pub fn entropy_traces<I>(trajectory: I, n_sites: usize, partitions: &[Partition]) -> Result<Vec<EntanglementTrace>, EdError>
where
    I: IntoIterator<Item = Result<StatePoint, EdError>>,
{
    for p in partitions {
        p.validate(n_sites)?;
    }
    let mut traces: Vec<EntanglementTrace> = partitions
        .iter()
        .map(|&partition| EntanglementTrace { times: Vec::new(), entropy: Vec::new(), partition, n_sites })
        .collect();
    for point in trajectory {
        let point = point?;
        for tr in traces.iter_mut() {
            tr.times.push(point.t);
            tr.entropy.push(entanglement_entropy(&point.state, n_sites, tr.partition)?);
        }
    }
    Ok(traces)
}

/// `max_{t ∈ [t_lo, t_hi]} S(t)`.
pub fn max_entropy_over_window(trace: &EntanglementTrace, t_lo: f64, t_hi: f64) -> Result<f64, EdError> {
    trace
        .times
        .iter()
        .zip(&trace.entropy)
        .filter(|(&t, _)| t >= t_lo - 1e-9 && t <= t_hi + 1e-9)
        .map(|(_, &s)| s)
        .reduce(f64::max)
        .ok_or(EdError::EmptyWindow { t_lo, t_hi })
}

/// Binary entropy of the mixed mode occupation, `H(x)`.
fn mode_entropy(x: f64) -> f64 {
    let x = x.clamp(-1.0, 1.0);
    let (p, q) = (0.5 * (1.0 + x), 0.5 * (1.0 - x));
    entropy_of_weights([p, q].into_iter())
}

/// Infinite-time entanglement entropy per subsystem site of the infinite
/// chain after a quench `h0 → h` (`h = 2Γ/J`; `h0 = ∞` allowed).
pub fn exact_entropy_density(h0: f64, h: f64) -> f64 {
    let arg = |phi: f64| {
        let c = phi.cos();
        if h0.is_infinite() {
            (h - c) / (1.0 - 2.0 * h * c + h * h).sqrt()
        } else {
            (1.0 - (h + h0) * c + h * h0) / ((1.0 - 2.0 * h * c + h * h) * (1.0 - 2.0 * h0 * c + h0 * h0)).sqrt()
        }
    };
    integrate(0.0, PI, 2048, |phi| mode_entropy(arg(phi))) / PI
}
