// SPDX-License-Identifier: Apache-2.0

//! Exact diagonalisation of small periodic transverse-field Ising lattices:
//! quench dynamics, correlators and entanglement entropy.

mod dense;
mod entropy;
mod extrapolate;
mod hamiltonian;
mod lattice;
mod observables;
mod propagate;

pub use entropy::{
    entanglement_entropy, entropy_traces, exact_entropy_density, max_entropy_over_window, EntanglementTrace, Partition,
};
pub use extrapolate::{basis, extrapolate, ExtrapolationFit, FitModel, SizeSample};
pub use hamiltonian::{build_hamiltonian, Hamiltonian};
pub use lattice::{Geometry, SpinConvention, SpinSystem, MAX_SITES};
pub use observables::{equal_time_corr, unequal_time_corr, zz_diagonal, Displacement};
pub use propagate::{
    evolve, evolve_from, ground_state, initial_state, inner, norm, x_polarized, InitialState, KrylovStepper, Method,
    QuenchSpec, SpectralPropagator, StatePoint, Trajectory, DENSE_MAX_SITES,
};

use crate::series::SeriesError;

#[derive(Debug, thiserror::Error)]
pub enum EdError {
    #[error("{n_sites} sites exceeds the {cap}-site limit")]
    TooLarge { n_sites: usize, cap: usize },
    #[error("invalid lattice: {0}")]
    BadLattice(String),
    #[error("invalid quench: {0}")]
    BadQuench(String),
    #[error("initial state norm {0} differs from 1")]
    NotNormalized(f64),
    #[error("invalid displacement: {0}")]
    BadDisplacement(String),
    #[error("propagator did not converge: {0}")]
    ConvergenceFailure(String),
    #[error("invalid partition: {0}")]
    BadPartition(String),
    #[error("no samples in window [{t_lo}, {t_hi}]")]
    EmptyWindow { t_lo: f64, t_hi: f64 },
    #[error("{n} samples cannot determine {p} coefficients")]
    TooFewSamples { n: usize, p: usize },
    #[error("design matrix is rank deficient (condition {condition:.3e})")]
    RankDeficient { condition: f64 },
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
}
