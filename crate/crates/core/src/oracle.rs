//! Dense linear-algebra oracles (nalgebra) used to cross-check the closed forms.
//!
//! Matrices act on coordinates in the orthonormal basis `χ_a / √μ(a)` of weighted
//! `L²`, so adjoints and singular values coincide with operator-theoretic ones.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::{FiniteMeasureSpace, PFunction, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// `x̃_a = √μ(a) f(a)`.
pub fn to_coords(space: &FiniteMeasureSpace, f: &PFunction) -> Result<CVector> {
    space.check(f.space_id())?;
    Ok(CVector::from_iterator(
        f.len(),
        f.values()
            .iter()
            .zip(space.masses())
            .map(|(z, m)| z * m.sqrt()),
    ))
}

pub fn from_coords(space: &FiniteMeasureSpace, x: &CVector) -> Result<PFunction> {
    space.function(
        x.iter()
            .zip(space.masses())
            .map(|(z, m)| z / m.sqrt())
            .collect(),
    )
}

pub fn diag_real(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|&x| Complex64::new(x, 0.0)),
    ))
}

pub fn diag(values: &[Complex64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_column_slice(values))
}

/// Max-entry norm.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Singular values, descending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `rel · σ_max`.
pub fn numerical_rank(m: &CMatrix, rel: f64) -> usize {
    let s = singular_values(m);
    let cut = rel * s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&x| x > cut && x > 0.0).count()
}

pub fn nullity(m: &CMatrix, rel: f64) -> usize {
    m.ncols() - numerical_rank(m, rel)
}

/// Hermitian square root of a positive semidefinite matrix together with its
/// pseudo-inverse; eigenvalues at or below `rel · λ_max` are treated as zero.
pub fn psd_sqrt(m: &CMatrix, rel: f64) -> (CMatrix, CMatrix) {
    let eig = SymmetricEigen::new(m.clone());
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let n = m.nrows();
    let mut root = DVector::<Complex64>::zeros(n);
    let mut pinv = DVector::<Complex64>::zeros(n);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > rel * lmax && l > 0.0 {
            root[i] = Complex64::new(l.sqrt(), 0.0);
            pinv[i] = Complex64::new(1.0 / l.sqrt(), 0.0);
        }
    }
    let q = &eig.eigenvectors;
    let qh = q.adjoint();
    (
        q * CMatrix::from_diagonal(&root) * &qh,
        q * CMatrix::from_diagonal(&pinv) * qh,
    )
}

pub fn power(m: &CMatrix, mut k: u64) -> CMatrix {
    let mut result = CMatrix::identity(m.nrows(), m.ncols());
    let mut base = m.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result
}

/// LU solve; `None` when singular.
pub fn solve(m: &CMatrix, b: &CVector) -> Option<CVector> {
    m.clone().lu().solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_of_diagonal() {
        let m = diag_real(&[9.0, 4.0, 0.0]);
        let (root, pinv) = psd_sqrt(&m, 1e-12);
        assert!(max_abs(&(root - diag_real(&[3.0, 2.0, 0.0]))) < 1e-12);
        assert!(max_abs(&(pinv - diag_real(&[1.0 / 3.0, 0.5, 0.0]))) < 1e-12);
    }

    #[test]
    fn rank_and_power() {
        let m = diag_real(&[2.0, 0.0]);
        assert_eq!(numerical_rank(&m, 1e-9), 1);
        assert_eq!(nullity(&m, 1e-9), 1);
        assert!(max_abs(&(power(&m, 5) - diag_real(&[32.0, 0.0]))) < 1e-12);
        assert_eq!(power(&m, 0), CMatrix::identity(2, 2));
    }
}
