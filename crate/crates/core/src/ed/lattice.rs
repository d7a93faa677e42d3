// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::EdError;

/// Largest lattice the engine accepts (a 2^20 state vector is 16 MiB).
pub const MAX_SITES: usize = 20;

/// Periodic lattices. Rectangle sites are numbered column-major,
/// `site = x + lx·y`, so the first `lx·l_a` sites are `l_a` full rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Geometry {
    Chain { l: usize },
    Rectangle { lx: usize, ly: usize },
}

impl Geometry {
    pub fn n_sites(&self) -> usize {
        match *self {
            Geometry::Chain { l } => l,
            Geometry::Rectangle { lx, ly } => lx * ly,
        }
    }

    fn dims(&self) -> (usize, usize) {
        match *self {
            Geometry::Chain { l } => (l, 1),
            Geometry::Rectangle { lx, ly } => (lx, ly),
        }
    }

    pub fn coords(&self, site: usize) -> (usize, usize) {
        let (lx, _) = self.dims();
        (site % lx, site / lx)
    }

    /// Site reached from `site` by the periodic displacement `(dx, dy)`.
    pub fn translate(&self, site: usize, dx: i64, dy: i64) -> usize {
        let (lx, ly) = self.dims();
        let (x, y) = self.coords(site);
        let nx = (x as i64 + dx).rem_euclid(lx as i64) as usize;
        let ny = (y as i64 + dy).rem_euclid(ly as i64) as usize;
        nx + lx * ny
    }

    /// Unit displacements defining nearest-neighbour bonds.
    pub fn bond_displacements(&self) -> Vec<(i64, i64)> {
        match self {
            Geometry::Chain { .. } => vec![(1, 0)],
            Geometry::Rectangle { .. } => vec![(1, 0), (0, 1)],
        }
    }
}

/// Spin operator normalisation: `S = σ/2` or bare Pauli matrices.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpinConvention {
    #[default]
    SpinHalf,
    Pauli,
}

impl SpinConvention {
    pub fn scale(self) -> f64 {
        match self {
            SpinConvention::SpinHalf => 0.5,
            SpinConvention::Pauli => 1.0,
        }
    }
}

/// `H = −J Σ_⟨ij⟩ S^z_i S^z_j − Γ Σ_i S^x_i` on a periodic lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSystem {
    pub geometry: Geometry,
    pub j: f64,
    pub gamma: f64,
    #[serde(default)]
    pub convention: SpinConvention,
}

impl SpinSystem {
    pub fn new(geometry: Geometry, j: f64, gamma: f64) -> Result<Self, EdError> {
        let ok = match geometry {
            Geometry::Chain { l } => l >= 2,
            Geometry::Rectangle { lx, ly } => lx >= 2 && ly >= 2,
        };
        if !ok {
            return Err(EdError::BadLattice(format!("{geometry:?} needs at least two sites per direction")));
        }
        let n = geometry.n_sites();
        if n > MAX_SITES {
            return Err(EdError::TooLarge { n_sites: n, cap: MAX_SITES });
        }
        if !j.is_finite() || !gamma.is_finite() {
            return Err(EdError::BadLattice("couplings must be finite".into()));
        }
        Ok(Self { geometry, j, gamma, convention: SpinConvention::default() })
    }

    pub fn chain(l: usize, j: f64, gamma: f64) -> Result<Self, EdError> {
        Self::new(Geometry::Chain { l }, j, gamma)
    }

    pub fn rectangle(lx: usize, ly: usize, j: f64, gamma: f64) -> Result<Self, EdError> {
        Self::new(Geometry::Rectangle { lx, ly }, j, gamma)
    }

    pub fn with_convention(mut self, convention: SpinConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..self.clone() }
    }

    pub fn n_sites(&self) -> usize {
        self.geometry.n_sites()
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites()
    }

    /// One `(i, i + e)` entry per site and unit displacement `e`. A periodic
    /// direction of length 2 therefore lists its single bond twice.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let disp = self.geometry.bond_displacements();
        (0..self.n_sites())
            .flat_map(|i| disp.iter().map(move |&(dx, dy)| (i, self.geometry.translate(i, dx, dy))))
            .collect()
    }
}
