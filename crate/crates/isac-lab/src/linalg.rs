//! Small dense complex linear-algebra helpers shared by the precoding and
//! full-duplex modules.
//!
//! Rank-revealing routines use modified Gram-Schmidt with one
//! re-orthogonalization pass; at the array sizes treated here (tens of
//! elements) that is exact enough and keeps the dependency surface small.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{IsacError, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Orthonormal basis of the column space of `a`.
///
/// Returns `(q, rank)` where the first `rank` columns of `q` span col(a).
/// Columns whose residual falls below `tol * max_column_norm` are treated as
/// dependent.
pub fn mgs_orthonormal(a: &CMat, tol: f64) -> (CMat, usize) {
    let n = a.nrows();
    let max_norm = (0..a.ncols())
        .map(|j| a.column(j).norm())
        .fold(0.0_f64, f64::max);
    let threshold = tol * max_norm.max(f64::MIN_POSITIVE);

    let mut basis: Vec<CVec> = Vec::new();
    for j in 0..a.ncols() {
        let mut v: CVec = a.column(j).into();
        // Two passes of MGS keep orthogonality near machine precision.
        for _ in 0..2 {
            for q in &basis {
                let coeff = q.dotc(&v);
                v -= q * coeff;
            }
        }
        let norm = v.norm();
        if norm > threshold {
            basis.push(v / Complex64::from(norm));
        }
    }

    let rank = basis.len();
    let mut q = CMat::zeros(n, rank.max(1));
    for (j, col) in basis.iter().enumerate() {
        q.set_column(j, col);
    }
    if rank == 0 {
        q = CMat::zeros(n, 0);
    }
    (q, rank)
}

/// Numerical rank of `a` at relative tolerance `tol`.
pub fn rank(a: &CMat, tol: f64) -> usize {
    mgs_orthonormal(a, tol).1
}

/// Solve `a x = b` for a square complex system via LU.
pub fn solve(a: &CMat, b: &CVec) -> Result<CVec> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| IsacError::numerical("singular linear system"))
}

/// Real value of the Hermitian quadratic form `v^H r v`.
pub fn herm_quad(r: &CMat, v: &CVec) -> f64 {
    (v.adjoint() * r * v)[(0, 0)].re
}

/// Real inner product `Re<a, b>` of two complex matrices viewed as vectors.
pub fn re_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

#[cfg(test)]
pub fn random_unitary(rng: &mut impl rand::Rng, n: usize) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| crate::rng::complex_normal(rng));
    let (q, rank) = mgs_orthonormal(&g, 1e-12);
    assert_eq!(rank, n, "random Gaussian matrix should be full rank");
    q
}
