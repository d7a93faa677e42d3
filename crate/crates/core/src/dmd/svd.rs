// SPDX-License-Identifier: Apache-2.0

//! Truncated SVD of the snapshot matrix, exact (LAPACK divide and conquer)
//! or randomized (range finder with power iterations).

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{JobSvd, QR, SVDDC};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::hankel::{build_hankel, build_hankel_real};
use super::{DmdError, DmdScalar};
use crate::series::TimeSeries;

/// Power iterations used by the randomized range finder.
const POWER_ITERS: usize = 2;

/// Rank-selection diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdTruncation {
    /// Every singular value the decomposition produced, descending.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub cutoff: f64,
    pub rank_upper_bound: Option<usize>,
}

impl SvdTruncation {
    /// First discarded singular value, or 0 when nothing was discarded.
    pub fn first_discarded(&self) -> f64 {
        self.singular_values.get(self.rank).copied().unwrap_or(0.0)
    }
}

/// `x0 ≈ u · diag(s) · v†` with `u` M×R and `v` (N−M)×R.
#[derive(Debug, Clone)]
pub struct TruncatedSvd<T> {
    pub u: Array2<T>,
    pub s: Array1<f64>,
    pub v: Array2<T>,
    pub truncation: SvdTruncation,
}

impl<T: DmdScalar> TruncatedSvd<T> {
    /// `u · diag(s) · v†`.
    pub fn reconstruct(&self) -> Array2<T> {
        let mut us = self.u.clone();
        for (mut col, &sv) in us.columns_mut().into_iter().zip(self.s.iter()) {
            col.mapv_inplace(|x| x.mul_real(sv));
        }
        us.dot(&conj_t(&self.v))
    }
}

pub(crate) fn check_cutoff(cutoff: f64, upper: Option<usize>) -> Result<(), DmdError> {
    if !(0.0..=1.0).contains(&cutoff) {
        return Err(DmdError::BadCutoff(cutoff));
    }
    if upper == Some(0) {
        return Err(DmdError::BadRankBound);
    }
    Ok(())
}

/// Smallest `R` with `σ_R/σ_0 < cutoff`, clamped to the available count and
/// `upper`. A zero cutoff keeps every strictly positive singular value.
pub fn select_rank(sv: &[f64], cutoff: f64, upper: Option<usize>) -> Result<usize, DmdError> {
    check_cutoff(cutoff, upper)?;
    let s0 = sv.first().copied().unwrap_or(0.0);
    if s0 <= 0.0 {
        return Err(DmdError::ZeroMatrix);
    }
    let r = if cutoff == 0.0 {
        sv.iter().take_while(|&&x| x > 0.0).count()
    } else {
        sv.iter().position(|&x| x / s0 < cutoff).unwrap_or(sv.len())
    };
    let r = r.min(upper.unwrap_or(usize::MAX));
    if r == 0 {
        return Err(DmdError::RankZero);
    }
    Ok(r)
}

pub(crate) fn conj_t<T: DmdScalar>(a: &Array2<T>) -> Array2<T> {
    a.t().mapv(|x| x.conj())
}

fn check_input<T: DmdScalar>(x0: &Array2<T>) -> Result<(), DmdError> {
    if x0.is_empty() {
        return Err(DmdError::ZeroMatrix);
    }
    if x0.iter().any(|x| !x.abs().is_finite()) {
        return Err(DmdError::NonFinite);
    }
    if x0.iter().all(|x| x.abs() == 0.0) {
        return Err(DmdError::ZeroMatrix);
    }
    Ok(())
}

/// Thin SVD `(U, σ, V†)` of the whole matrix.
pub(crate) fn thin_svd<T: DmdScalar>(a: &Array2<T>) -> Result<(Array2<T>, Array1<f64>, Array2<T>), DmdError> {
    let (u, s, vt) = a.svddc(JobSvd::Some).map_err(|e| DmdError::Linalg(format!("svd: {e}")))?;
    match (u, vt) {
        (Some(u), Some(vt)) => Ok((u, s, vt)),
        _ => Err(DmdError::Linalg("svd returned no singular vectors".into())),
    }
}

pub(crate) fn slice_rank<T: DmdScalar>(
    u: &Array2<T>,
    s: &Array1<f64>,
    vt: &Array2<T>,
    truncation: SvdTruncation,
) -> TruncatedSvd<T> {
    let r = truncation.rank;
    TruncatedSvd {
        u: u.slice(s![.., ..r]).to_owned(),
        s: s.slice(s![..r]).to_owned(),
        v: conj_t(&vt.slice(s![..r, ..]).to_owned()),
        truncation,
    }
}

/// Singular values of the snapshot matrix `X0` alone, descending. Skips the
/// singular vectors, so it is the cheap way to inspect a spectrum.
pub fn hankel_singular_values(series: &TimeSeries, m: usize) -> Result<Vec<f64>, DmdError> {
    fn values<T: DmdScalar>(x0: &Array2<T>) -> Result<Vec<f64>, DmdError> {
        check_input(x0)?;
        let (_, s, _) = x0.svddc(JobSvd::None).map_err(|e| DmdError::Linalg(format!("svd: {e}")))?;
        Ok(s.to_vec())
    }
    if series.is_real() {
        values(&build_hankel_real(series, m)?.x0)
    } else {
        values(&build_hankel(series, m)?.x0)
    }
}

pub fn truncated_svd<T: DmdScalar>(
    x0: &Array2<T>,
    cutoff: f64,
    rank_upper_bound: Option<usize>,
) -> Result<TruncatedSvd<T>, DmdError> {
    check_cutoff(cutoff, rank_upper_bound)?;
    check_input(x0)?;
    let (u, s, vt) = thin_svd(x0)?;
    let rank = select_rank(s.as_slice().unwrap(), cutoff, rank_upper_bound)?;
    let truncation =
        SvdTruncation { singular_values: s.to_vec(), rank, cutoff, rank_upper_bound };
    Ok(slice_rank(&u, &s, &vt, truncation))
}

fn orthonormal_range<T: DmdScalar>(y: Array2<T>) -> Result<Array2<T>, DmdError> {
    let (q, _) = y.qr().map_err(|e| DmdError::Linalg(format!("qr: {e}")))?;
    Ok(q)
}

/// Randomized truncated SVD: a seeded Gaussian sketch of `rank_upper_bound +
/// oversampling` columns, refined by power iterations. The reported singular
/// values are those of the sketch; the cutoff rule is applied to them and the
/// rank never exceeds `rank_upper_bound`.
pub fn randomized_truncated_svd<T: DmdScalar>(
    x0: &Array2<T>,
    cutoff: f64,
    rank_upper_bound: usize,
    oversampling: usize,
    seed: u64,
) -> Result<TruncatedSvd<T>, DmdError> {
    check_cutoff(cutoff, Some(rank_upper_bound))?;
    check_input(x0)?;
    let (m, n) = x0.dim();
    let k = (rank_upper_bound + oversampling).min(m).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = Array2::from_shape_simple_fn((n, k), || {
        let g: f64 = StandardNormal.sample(&mut rng);
        T::from_real(g)
    });
    let xh = conj_t(x0);
    let mut q = orthonormal_range(x0.dot(&omega))?;
    for _ in 0..POWER_ITERS {
        let z = orthonormal_range(xh.dot(&q))?;
        q = orthonormal_range(x0.dot(&z))?;
    }
    let b = conj_t(&q).dot(x0);
    let (ub, s, vt) = thin_svd(&b)?;
    let u = q.dot(&ub);
    let rank = select_rank(s.as_slice().unwrap(), cutoff, Some(rank_upper_bound))?;
    let truncation = SvdTruncation {
        singular_values: s.to_vec(),
        rank,
        cutoff,
        rank_upper_bound: Some(rank_upper_bound),
    };
    Ok(slice_rank(&u, &s, &vt, truncation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray_linalg::Norm;
    use num_complex::Complex64 as C64;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_matrix(m: usize, n: usize, rank: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn((m, rank), |_| rng.random::<f64>() - 0.5);
        let b = Array2::from_shape_fn((rank, n), |_| rng.random::<f64>() - 0.5);
        a.dot(&b)
    }

    #[test]
    fn rank_rule_is_strict_and_clamped() {
        let sv = [1.0, 0.5, 0.1, 0.01, 0.001];
        assert_eq!(select_rank(&sv, 0.1, None).unwrap(), 3);
        assert_eq!(select_rank(&sv, 0.0999, None).unwrap(), 3);
        assert_eq!(select_rank(&sv, 0.1000001, None).unwrap(), 2);
        assert_eq!(select_rank(&sv, 1e-9, None).unwrap(), 5);
        assert_eq!(select_rank(&sv, 1e-9, Some(2)).unwrap(), 2);
        assert_eq!(select_rank(&[1.0, 1e-3, 0.0], 0.0, None).unwrap(), 2);
        // a tie at the boundary keeps the smaller rank
        assert_eq!(select_rank(&[1.0, 0.2, 0.2, 0.01], 0.25, None).unwrap(), 1);
        assert!(matches!(select_rank(&sv, 1.5, None), Err(DmdError::BadCutoff(_))));
        assert_eq!(select_rank(&sv, 1.0, None).unwrap(), 1);
        assert!(matches!(select_rank(&[0.0, 0.0], 0.1, None), Err(DmdError::ZeroMatrix)));
    }

    #[test]
    fn rank_one_outer_product() {
        let u = ndarray::array![1.0, -2.0, 0.5, 3.0];
        let v = ndarray::array![0.3, 1.0, -1.0];
        let x = Array2::from_shape_fn((4, 3), |(i, j)| u[i] * v[j]);
        let t = truncated_svd(&x, 1e-12, None).unwrap();
        assert_eq!(t.truncation.rank, 1);
        assert!((&t.reconstruct() - &x).norm_max() < 1e-13);
    }

    #[test]
    fn hankel_beyond_lapack_block_size() {
        // min(m, n) > 25 takes the divide-and-conquer branch of the LAPACK driver
        let f: Vec<f64> = (0..240).map(|n| (0.2 * n as f64).cos() + 0.3 * 0.9f64.powi(n as i32)).collect();
        for m in [40, 120, 200] {
            let h = crate::dmd::HankelPair::from_samples(&f, m).unwrap();
            let t = truncated_svd(&h.x0, 0.0, None).unwrap();
            assert!((&t.reconstruct() - &h.x0).norm_max() < 1e-12, "m = {m}");
            assert!(t.truncation.singular_values[3] < 1e-10 * t.truncation.singular_values[0]);
        }
    }

    #[test]
    fn zero_matrix_rejected() {
        let z = Array2::<f64>::zeros((4, 4));
        assert!(matches!(truncated_svd(&z, 0.1, None), Err(DmdError::ZeroMatrix)));
        assert!(matches!(randomized_truncated_svd(&z, 0.0, 2, 2, 1), Err(DmdError::ZeroMatrix)));
    }

    #[test]
    fn randomized_matches_exact_on_low_rank() {
        let x = random_matrix(80, 60, 5, 3);
        let exact = truncated_svd(&x, 0.0, None).unwrap();
        let r = randomized_truncated_svd(&x, 0.0, 10, 5, 42).unwrap();
        for i in 0..5 {
            let rel = (r.truncation.singular_values[i] - exact.truncation.singular_values[i]).abs();
            assert!(rel < 1e-8 * exact.truncation.singular_values[0], "σ_{i}");
        }
        for &sv in &r.truncation.singular_values[5..] {
            assert!(sv < 1e-10);
        }
        let again = randomized_truncated_svd(&x, 0.0, 10, 5, 42).unwrap();
        assert_eq!(again.truncation.singular_values, r.truncation.singular_values);
    }

    #[test]
    fn complex_input_uses_complex_path() {
        let x = random_matrix(12, 9, 3, 5).mapv(|v| C64::new(v, 0.5 * v));
        let t = truncated_svd(&x, 1e-10, None).unwrap();
        assert_eq!(t.truncation.rank, 3);
        assert!((&t.reconstruct() - &x).norm_max() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn optimality_residual(seed in 0u64..1000, m in 4usize..20, n in 4usize..20, cut in 0.0f64..0.5) {
            let x = random_matrix(m, n, m.min(n), seed);
            let t = truncated_svd(&x, cut, None).unwrap();
            let resid = (&x - &t.reconstruct()).norm_l2().powi(2);
            let tail: f64 = t.truncation.singular_values[t.truncation.rank..].iter().map(|s| s * s).sum();
            let scale = x.norm_l2().powi(2);
            prop_assert!((resid - tail).abs() <= 1e-8 * scale.max(tail));
            // orthonormal factors
            let r = t.truncation.rank;
            let utu = t.u.t().dot(&t.u);
            let vtv = t.v.t().dot(&t.v);
            prop_assert!((&utu - &Array2::<f64>::eye(r)).norm_max() < 1e-12);
            prop_assert!((&vtv - &Array2::<f64>::eye(r)).norm_max() < 1e-12);
            prop_assert!(t.truncation.singular_values.windows(2).all(|w| w[0] >= w[1] && w[1] >= 0.0));
        }
    }
}
