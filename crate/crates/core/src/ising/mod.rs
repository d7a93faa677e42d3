// SPDX-License-Identifier: Apache-2.0

//! Exact transverse correlator of the critical transverse-field Ising chain.

mod correlator;
pub mod special;

pub use correlator::{correlator, generate_series, generator_meta, CorrelatorSample, CriticalChainSpec, IsingError, Observable};
pub use special::{bessel_j, weber_e};
