// SPDX-License-Identifier: Apache-2.0

use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::DmdError;
use crate::series::TimeSeries;

/// Time-shifted snapshot matrices built from one scalar series.
///
/// `x0[[i, j]] = f[i + j]`, `x1[[i, j]] = f[i + j + 1]` for `i < m`, `j < n - m`.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelPair<T> {
    pub x0: Array2<T>,
    pub x1: Array2<T>,
    pub m: usize,
    pub n: usize,
}

impl<T: Copy> HankelPair<T> {
    pub fn from_samples(samples: &[T], m: usize) -> Result<Self, DmdError> {
        let n = samples.len();
        if m == 0 || m >= n {
            return Err(DmdError::InvalidWindow { m, n });
        }
        let cols = n - m;
        let x0 = Array2::from_shape_fn((m, cols), |(i, j)| samples[i + j]);
        let x1 = Array2::from_shape_fn((m, cols), |(i, j)| samples[i + j + 1]);
        Ok(Self { x0, x1, m, n })
    }

    /// Number of snapshot columns, `n - m`.
    pub fn cols(&self) -> usize {
        self.n - self.m
    }
}

/// Builds the complex Hankel pair for `series` with snapshot length `m`.
pub fn build_hankel(series: &TimeSeries, m: usize) -> Result<HankelPair<C64>, DmdError> {
    HankelPair::from_samples(series.values(), m)
}

/// Real-valued Hankel pair; only meaningful when `series.is_real()`.
pub(crate) fn build_hankel_real(series: &TimeSeries, m: usize) -> Result<HankelPair<f64>, DmdError> {
    HankelPair::from_samples(&series.real_parts(), m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn four_sample_example() {
        let s = TimeSeries::from_real(0.0, 1.0, &[1.0, 2.0, 3.0, 4.0], "").unwrap();
        let h = build_hankel_real(&s, 2).unwrap();
        assert_eq!(h.x0, ndarray::array![[1.0, 2.0], [2.0, 3.0]]);
        assert_eq!(h.x1, ndarray::array![[2.0, 3.0], [3.0, 4.0]]);
    }

    #[test]
    fn paper_shapes() {
        let s = TimeSeries::from_real(0.0, 0.05, &vec![0.5; 2000], "").unwrap();
        let h = build_hankel(&s, 1000).unwrap();
        assert_eq!(h.x0.dim(), (1000, 1000));
        assert_eq!(h.x1.dim(), (1000, 1000));
    }

    #[test]
    fn invalid_windows() {
        let s = TimeSeries::from_real(0.0, 1.0, &[1.0, 2.0, 3.0], "").unwrap();
        assert!(matches!(build_hankel(&s, 0), Err(DmdError::InvalidWindow { .. })));
        assert!(matches!(build_hankel(&s, 3), Err(DmdError::InvalidWindow { .. })));
        assert!(matches!(build_hankel(&s, 7), Err(DmdError::InvalidWindow { .. })));
    }

    proptest! {
        #[test]
        fn antidiagonals_reproduce_series(vals in prop::collection::vec(-10.0f64..10.0, 2..60), frac in 0.0f64..1.0) {
            let n = vals.len();
            let m = 1 + ((n - 2) as f64 * frac) as usize;
            let h = HankelPair::from_samples(&vals, m).unwrap();
            let cols = n - m;
            for i in 0..m {
                for j in 0..cols {
                    prop_assert_eq!(h.x0[[i, j]], vals[i + j]);
                    prop_assert_eq!(h.x1[[i, j]], vals[i + j + 1]);
                }
            }
            // walking the first column then the last row recovers f_0..f_{N-2}
            let mut flat: Vec<f64> = (0..m).map(|i| h.x0[[i, 0]]).collect();
            flat.extend((1..cols).map(|j| h.x0[[m - 1, j]]));
            prop_assert_eq!(&flat[..], &vals[..n - 1]);
            let mut flat1: Vec<f64> = (0..m).map(|i| h.x1[[i, 0]]).collect();
            flat1.extend((1..cols).map(|j| h.x1[[m - 1, j]]));
            prop_assert_eq!(&flat1[..], &vals[1..]);
        }
    }
}
