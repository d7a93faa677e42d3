// SPDX-License-Identifier: Apache-2.0

//! Divide-and-conquer symmetric eigensolver. The generic `eigh` binding
//! uses the QR-iteration driver, several times slower at 4096².

use ndarray::{Array2, ShapeBuilder};

use super::EdError;

/// Eigenvalues ascending and eigenvectors as columns.
pub(crate) fn symmetric_eigh(a: Array2<f64>) -> Result<(Vec<f64>, Array2<f64>), EdError> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square matrix");
    if n == 0 {
        return Ok((Vec::new(), a));
    }
    // symmetric: row- and column-major storage coincide
    let mut data = a.into_raw_vec_and_offset().0;
    let ni = n as i32;
    let mut w = vec![0.0; n];
    let (mut info, jobz, uplo) = (0i32, b'V' as std::ffi::c_char, b'L' as std::ffi::c_char);
    let mut wq = [0.0f64];
    let mut iwq = [0i32];
    // SAFETY: buffers are sized per the LAPACK contract (queried first).
    unsafe {
        lapack_sys::dsyevd_(&jobz, &uplo, &ni, data.as_mut_ptr(), &ni, w.as_mut_ptr(), wq.as_mut_ptr(), &-1, iwq.as_mut_ptr(), &-1, &mut info);
    }
    if info != 0 {
        return Err(EdError::Linalg(format!("dsyevd workspace query failed: info = {info}")));
    }
    let lwork = wq[0] as i32;
    let liwork = iwq[0];
    let mut work = vec![0.0; lwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];
    unsafe {
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &ni,
            data.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(EdError::Linalg(format!("dsyevd failed: info = {info}")));
    }
    let v = Array2::from_shape_vec((n, n).f(), data).expect("length n²");
    Ok((w, v))
}
