//! Dense linear-algebra helpers on top of nalgebra.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::math;
use crate::{Error, Result};

/// Relative singular-value threshold used for numerical rank.
pub const RANK_RTOL: f64 = 1e-9;

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    math::max_abs(m.as_slice())
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank: singular values above `rtol·σ_max` (and above an
/// absolute floor `rtol`, so that a numerically zero matrix has rank 0).
pub fn rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    let s = singular_values(m);
    let smax = s.first().copied().unwrap_or(0.0);
    let cut = rtol * math::max(smax, 1.0);
    s.iter().filter(|&&v| v > cut).count()
}

/// Orthonormal basis (as columns) of the `k`-dimensional subspace spanned by
/// the right singular vectors of `m` with the smallest singular values.
/// With `k = dim ker m` this is a basis of the numerical kernel.
pub fn smallest_right_singular(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = m.ncols();
    if k == 0 {
        return DMatrix::zeros(n, 0);
    }
    // pad to a square matrix so that all n right singular vectors exist
    let rows = m.nrows().max(n);
    let mut sq = DMatrix::zeros(rows, n);
    sq.rows_mut(0, m.nrows()).copy_from(m);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let mut out = DMatrix::zeros(n, k);
    for (c, &i) in idx.iter().take(k).enumerate() {
        out.set_column(c, &vt.row(i).transpose());
    }
    out
}

/// Orthonormal basis of the numerical kernel of `m`.
pub fn null_space(m: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let k = m.ncols() - rank(m, rtol);
    smallest_right_singular(m, k)
}

/// Orthonormal basis of the intersection of the column spans of `u` and `w`
/// (both with orthonormal columns).
pub fn intersect(u: &DMatrix<f64>, w: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let n = u.nrows();
    if u.ncols() == 0 || w.ncols() == 0 {
        return DMatrix::zeros(n, 0);
    }
    // x = U c lies in span W iff (I - W Wᵀ) U c = 0
    let proj = DMatrix::<f64>::identity(n, n) - w * w.transpose();
    let c = null_space(&(proj * u), rtol);
    orthonormalize(&(u * c), rtol)
}

/// Orthonormal basis of the column span of `m`.
pub fn orthonormalize(m: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    if m.ncols() == 0 {
        return DMatrix::zeros(n, 0);
    }
    let r = rank(m, rtol);
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut out = DMatrix::zeros(n, r);
    for (c, &i) in idx.iter().take(r).enumerate() {
        out.set_column(c, &u.column(i));
    }
    out
}

/// Determinant via LU.
pub fn det(m: &DMatrix<f64>) -> f64 {
    m.clone().determinant()
}

/// Inverse; fails when the LU factorization is singular.
pub fn inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular(format!("{what} is not invertible")))
}

/// `m^k` for `k ≥ 0`.
pub fn matrix_power(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut acc = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..k {
        acc = &acc * m;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_and_kernel() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0]);
        assert_eq!(rank(&m, RANK_RTOL), 2);
        let k = null_space(&m, RANK_RTOL);
        assert_eq!(k.ncols(), 1);
        assert!(max_abs(&(&m * &k)) < 1e-12);
        assert_eq!(rank(&DMatrix::<f64>::zeros(3, 3), RANK_RTOL), 0);
    }

    #[test]
    fn intersection_of_planes() {
        // span{e1, e2} ∩ span{e2, e3} = span{e2}
        let u = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let w = DMatrix::from_column_slice(3, 2, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let i = intersect(&u, &w, RANK_RTOL);
        assert_eq!(i.ncols(), 1);
        assert!((i[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_inverse_fails() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(inverse(&m, "m").is_err());
        assert_eq!(det(&m), 0.0);
        let p = matrix_power(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]), 2);
        assert_eq!(max_abs(&p), 0.0);
    }
}
