//! Small complex linear-algebra helpers on top of `nalgebra`.
//!
//! Channel vectors are stored as column vectors but read as rows: the inner
//! product `a b^H` of two channels is [`inner`]`(a, b)`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

pub type C64 = Complex64;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

/// Relative singular-value floor under which a matrix counts as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// `a b^H` for two row vectors.
pub fn inner(a: &CVector, b: &CVector) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

pub fn norm_sqr(a: &CVector) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// One draw of a circularly symmetric standard complex Gaussian, `CN(0, 1)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_gaussian_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    CVector::from_fn(n, |_, _| complex_gaussian(rng))
}

/// Stacks row vectors into a matrix, one vector per row.
pub fn stack_rows(rows: &[&CVector]) -> Result<CMatrix> {
    let Some(first) = rows.first() else {
        return Ok(CMatrix::zeros(0, 0));
    };
    let n = first.len();
    for r in rows {
        if r.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: r.len() });
        }
    }
    Ok(CMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]))
}

/// Row `i` of `m` as a vector.
pub fn row(m: &CMatrix, i: usize) -> CVector {
    CVector::from_iterator(m.ncols(), m.row(i).iter().copied())
}

/// Checks that `m` is square and Hermitian within `tol` (absolute, scaled by the largest entry).
pub fn check_hermitian(m: &CMatrix, tol: f64) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    let scale = m.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1.0);
    for i in 0..m.nrows() {
        for j in 0..=i {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > tol * scale {
                return Err(Error::invalid("matrix", "not Hermitian"));
            }
        }
    }
    Ok(())
}

/// `m / s` with `s` the largest entry magnitude (1 for a zero matrix).
///
/// The iterative decompositions lose relative accuracy on matrices whose
/// entries are far from unit scale, so callers decompose the scaled copy.
pub fn unit_scaled(m: &CMatrix) -> (CMatrix, f64) {
    let s = m.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    if s > 0.0 && s.is_finite() {
        (m.unscale(s), s)
    } else {
        (m.clone(), 1.0)
    }
}

/// Hermitian square root `A^{1/2}` of a positive semi-definite matrix.
///
/// Eigenvalues within `tol` (relative to the largest) below zero are clamped
/// to zero; anything more negative is rejected.
pub fn hermitian_sqrt(m: &CMatrix, tol: f64) -> Result<CMatrix> {
    check_hermitian(m, 1e-9)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    let (unit, scale) = unit_scaled(m);
    let eig = unit.symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let mut roots = Vec::with_capacity(n);
    for &lambda in eig.eigenvalues.iter() {
        if lambda < -tol * max.max(1e-300) {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: lambda });
        }
        roots.push((lambda.max(0.0) * scale).sqrt());
    }
    let u = &eig.eigenvectors;
    let mut scaled = u.clone();
    for (j, r) in roots.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*r);
    }
    Ok(&scaled * u.adjoint())
}

/// Singular values of `m`, largest first.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let (unit, scale) = unit_scaled(m);
    let mut sv: Vec<f64> = unit.svd(false, false).singular_values.iter().map(|s| s * scale).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Fails with [`Error::RankDeficient`] when `h` (rows = users) does not have
/// full row rank. The reported rows are the ones carrying weight in the
/// left null direction.
pub fn ensure_full_row_rank(h: &CMatrix) -> Result<()> {
    let l = h.nrows();
    if l == 0 {
        return Ok(());
    }
    if l > h.ncols() {
        return Err(Error::RankDeficient { rows: (0..l).collect() });
    }
    let svd = unit_scaled(h).0.svd(true, false);
    let sv = &svd.singular_values;
    let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    let (jmin, smin) = sv.iter().enumerate().fold((0, f64::INFINITY), |acc, (j, &s)| if s < acc.1 { (j, s) } else { acc });
    if smax > 0.0 && smin > RANK_TOLERANCE * smax {
        return Ok(());
    }
    let rows = match svd.u.as_ref() {
        Some(u) if smax > 0.0 => (0..l).filter(|&i| u[(i, jmin)].norm() > 1e-6).collect(),
        _ => (0..l).collect(),
    };
    Err(Error::RankDeficient { rows })
}

/// Frobenius norm of `a - I`.
pub fn distance_from_identity(a: &CMatrix) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            acc += (a[(i, j)] - target).norm_sqr();
        }
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_psd(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let a = CMatrix::from_fn(n, rank, |_, _| complex_gaussian(rng));
        &a * a.adjoint()
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for rank in 1..=4 {
            let m = random_psd(4, rank, &mut rng);
            let s = hermitian_sqrt(&m, 1e-12).unwrap();
            let back = &s * &s;
            assert!((back - &m).norm() < 1e-10 * m.norm());
            assert!((s.adjoint() - &s).norm() < 1e-12 * m.norm());
        }
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(-0.5, 0.0)]));
        assert!(matches!(hermitian_sqrt(&m, 1e-12), Err(Error::NotPositiveSemidefinite { .. })));
    }

    #[test]
    fn rank_check_names_dependent_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = complex_gaussian_vector(4, &mut rng);
        let b = complex_gaussian_vector(4, &mut rng);
        let c = &a * C64::new(0.0, 2.0);
        let h = stack_rows(&[&a, &b, &c]).unwrap();
        match ensure_full_row_rank(&h) {
            Err(Error::RankDeficient { rows }) => assert_eq!(rows, vec![0, 2]),
            other => panic!("unexpected {other:?}"),
        }
        let ok = stack_rows(&[&a, &b]).unwrap();
        assert!(ensure_full_row_rank(&ok).is_ok());
    }

    #[test]
    fn inner_conjugates_second_argument() {
        let a = CVector::from_vec(vec![C64::new(0.0, 1.0)]);
        let b = CVector::from_vec(vec![C64::new(1.0, 0.0)]);
        assert_eq!(inner(&a, &b), C64::new(0.0, 1.0));
        assert_eq!(inner(&b, &a), C64::new(0.0, -1.0));
    }
}
