//! Thin dense linear algebra layer over `faer`: complex eigendecompositions
//! with biorthogonal left vectors, solves, norms and small utilities shared by
//! all modules. Matrices are small (n <= a few hundred) and dense throughout.

use crate::error::{Error, Result};
use faer::complex_native::c64;
use faer::prelude::SpSolver;
use faer::{Mat, Side};

pub type RMat = Mat<f64>;
pub type CMat = Mat<c64>;

pub const C_ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const C_ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const C_I: c64 = c64 { re: 0.0, im: 1.0 };

#[inline]
pub fn cabs(z: c64) -> f64 {
    z.re.hypot(z.im)
}

#[inline]
pub fn cexp(z: c64) -> c64 {
    let m = z.re.exp();
    c64::new(m * z.im.cos(), m * z.im.sin())
}

pub fn cidentity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { C_ONE } else { C_ZERO })
}

pub fn to_complex(a: &RMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| c64::new(a[(i, j)], 0.0))
}

pub fn real_part(a: &CMat) -> RMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].re)
}

pub fn adjoint_c(a: &CMat) -> CMat {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].conj())
}

pub fn transpose_c(a: &CMat) -> CMat {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)])
}

/// Largest entry magnitude.
pub fn max_abs(a: &CMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(cabs(a[(i, j)]));
        }
    }
    m
}

pub fn max_abs_r(a: &RMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let svd = a.svd();
    svd.s_diagonal().read(0).re
}

/// a * z entrywise.
pub fn cscale(a: &CMat, z: c64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * z)
}

pub fn frobenius(a: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let z = a[(i, j)];
            s += z.re * z.re + z.im * z.im;
        }
    }
    s.sqrt()
}

/// Hermitian part (A + A^H)/2.
pub fn hermitian_part(a: &CMat) -> CMat {
    let ah = adjoint_c(a);
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + ah[(i, j)]) * 0.5)
}

/// Solve A X = B by partial-pivoting LU.
pub fn solve_c(a: &CMat, b: &CMat) -> CMat {
    a.partial_piv_lu().solve(b)
}

pub fn inverse_c(a: &CMat) -> CMat {
    solve_c(a, &cidentity(a.nrows()))
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh_c(a: &CMat) -> (Vec<f64>, CMat) {
    let evd = a.selfadjoint_eigendecomposition(Side::Lower);
    let n = a.nrows();
    let vals: Vec<f64> = (0..n).map(|i| evd.s().column_vector().read(i).re).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    let sorted: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let u = evd.u();
    let vecs = Mat::from_fn(n, n, |i, j| u.read(i, order[j]));
    (sorted, vecs)
}

pub fn eigh_r(a: &RMat) -> (Vec<f64>, RMat) {
    let evd = a.selfadjoint_eigendecomposition(Side::Lower);
    let n = a.nrows();
    let vals: Vec<f64> = (0..n).map(|i| evd.s().column_vector().read(i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    let sorted: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let u = evd.u();
    let vecs = Mat::from_fn(n, n, |i, j| u.read(i, order[j]));
    (sorted, vecs)
}

/// Full eigendecomposition of a general complex matrix.
///
/// `right` holds right eigenvectors as columns; `left` holds left eigenvectors
/// as columns, normalized so that `left_j^H right_i = delta_ij` (they are the
/// conjugated rows of the inverse of `right`).
pub struct ComplexEig {
    pub values: Vec<c64>,
    pub right: CMat,
    pub left: CMat,
    /// Condition number of the eigenvector matrix, a diagnostic for how
    /// trustworthy the decomposition is.
    pub vec_condition: f64,
}

pub fn eig_c(a: &CMat) -> Result<ComplexEig> {
    let n = a.nrows();
    let evd = a.complex_eigendecomposition();
    let values: Vec<c64> = (0..n).map(|i| evd.s().column_vector().read(i)).collect();
    let right = evd.u().to_owned();
    let svd = right.svd();
    let smax = svd.s_diagonal().read(0).re;
    let smin = svd.s_diagonal().read(n - 1).re;
    if !(smin > 0.0) || !smin.is_finite() {
        return Err(Error::SingularTransform(
            "eigenvector matrix is numerically singular".into(),
        ));
    }
    let left = adjoint_c(&inverse_c(&right));
    Ok(ComplexEig {
        values,
        right,
        left,
        vec_condition: smax / smin,
    })
}

/// Maximal pairwise distance under the optimal (minimum total distance)
/// matching of two equally sized eigenvalue lists; exhaustive over
/// permutations up to eight values, greedy beyond.
pub fn eigenvalue_matching_distance(a: &[c64], b: &[c64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let m = a.len();
    if m == 0 {
        return 0.0;
    }
    if m <= 8 {
        let mut idx: Vec<usize> = (0..m).collect();
        let mut best_cost = f64::INFINITY;
        let mut best_max = f64::INFINITY;
        permute_all(&mut idx, 0, &mut |perm| {
            let mut cost = 0.0;
            let mut worst = 0.0f64;
            for i in 0..m {
                let d = cabs(a[i] - b[perm[i]]);
                cost += d;
                worst = worst.max(d);
            }
            if cost < best_cost {
                best_cost = cost;
                best_max = worst;
            }
        });
        best_max
    } else {
        let mut used = vec![false; m];
        let mut worst = 0.0f64;
        for &za in a {
            let mut best = (f64::INFINITY, 0usize);
            for (j, &zb) in b.iter().enumerate() {
                if !used[j] {
                    let d = cabs(za - zb);
                    if d < best.0 {
                        best = (d, j);
                    }
                }
            }
            used[best.1] = true;
            worst = worst.max(best.0);
        }
        worst
    }
}

fn permute_all(idx: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == idx.len() {
        visit(idx);
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permute_all(idx, k + 1, visit);
        idx.swap(k, i);
    }
}

/// Principal-angle distance between the column spans of two orthonormal
/// blocks: the spectral norm of (I - Q1 Q1^H) Q2, i.e. the sine of the largest
/// principal angle.
pub fn subspace_sin(q1: &CMat, q2: &CMat) -> f64 {
    let proj = q1 * adjoint_c(q1) * q2;
    let resid = q2 - &proj;
    spectral_norm(&resid)
}

/// Orthonormalize the columns of a (full-column-rank) matrix by thin QR.
pub fn orthonormal_columns(a: &CMat) -> CMat {
    let n = a.nrows();
    let k = a.ncols();
    let qr = a.qr();
    let q = qr.compute_thin_q();
    Mat::from_fn(n, k, |i, j| q.read(i, j))
}

/// Columns spanning the same space as `vectors`, orthonormalized; used for
/// numerical kernels and invariant subspaces.
pub fn gram_schmidt_twice(vectors: &CMat) -> CMat {
    orthonormal_columns(&orthonormal_columns(vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_eig_biorthogonality() {
        let n = 6;
        let a = Mat::from_fn(n, n, |i, j| {
            c64::new(
                1.0 / (1.0 + (i as f64 - j as f64).abs()),
                -0.05 * (i * j) as f64,
            )
        });
        let eig = eig_c(&a).unwrap();
        let gram = adjoint_c(&eig.left) * &eig.right;
        let id = cidentity(n);
        let diff = &gram - &id;
        assert!(max_abs(&diff) < 1e-10, "biorthogonality: {}", max_abs(&diff));
        // residual A v = lambda v
        for j in 0..n {
            for i in 0..n {
                let mut r = C_ZERO;
                for k in 0..n {
                    r += a[(i, k)] * eig.right[(k, j)];
                }
                r -= eig.values[j] * eig.right[(i, j)];
                assert!(cabs(r) < 1e-12);
            }
        }
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let a = Mat::from_fn(3, 3, |i, j| {
            if i == j {
                c64::new(-(i as f64) - 1.0, 0.0)
            } else {
                C_ZERO
            }
        });
        assert!((spectral_norm(&a) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn subspace_angle_detects_rotation() {
        let q1 = Mat::from_fn(3, 1, |i, _| if i == 0 { C_ONE } else { C_ZERO });
        let th: f64 = 0.3;
        let q2 = Mat::from_fn(3, 1, |i, _| match i {
            0 => c64::new(th.cos(), 0.0),
            1 => c64::new(th.sin(), 0.0),
            _ => C_ZERO,
        });
        assert!((subspace_sin(&q1, &q2) - th.sin()).abs() < 1e-14);
    }
}
