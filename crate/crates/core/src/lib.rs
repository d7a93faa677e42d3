// SPDX-License-Identifier: Apache-2.0

//! Long-time forecasting of quantum many-body signals with Hankel DMD, plus
//! the exact transverse-field Ising generators used to benchmark it.

pub mod dmd;
pub mod ed;
pub mod gpr;
pub mod ising;
pub mod signal;
pub mod series;

pub use series::{SeriesError, SeriesMeta, TimeSeries};
