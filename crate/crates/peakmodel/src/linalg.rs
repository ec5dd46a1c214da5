//! Small dense helpers on top of nalgebra.

use nalgebra::{SymmetricEigen, SVD};

use crate::{CMat, CVec, C64};

pub fn cvec(xs: &[C64]) -> CVec {
    CVec::from_column_slice(xs)
}

pub fn real_cvec(xs: &[f64]) -> CVec {
    CVec::from_iterator(xs.len(), xs.iter().map(|&x| C64::new(x, 0.0)))
}

pub fn diag(xs: &[C64]) -> CMat {
    CMat::from_diagonal(&cvec(xs))
}

/// Relative difference `|a-b| / max(|a|, |b|, floor)`.
pub fn rel_diff_mat(a: &CMat, b: &CMat) -> f64 {
    let scale = a.norm().max(b.norm()).max(1e-300);
    (a - b).norm() / scale
}

pub fn rel_diff_vec(a: &CVec, b: &CVec) -> f64 {
    let scale = a.norm().max(b.norm()).max(1e-300);
    (a - b).norm() / scale
}

pub fn hermitian_defect(a: &CMat) -> f64 {
    (a - a.adjoint()).norm()
}

pub fn symmetrize(a: &CMat) -> CMat {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = SVD::new(a.clone(), false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    s
}

pub fn smallest_singular(a: &CMat) -> f64 {
    singular_values(a).last().copied().unwrap_or(0.0)
}

pub fn condition_number(a: &CMat) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Numerical rank with singular values compared against `rel_tol * s_max`.
pub fn rank(a: &CMat, rel_tol: f64) -> usize {
    let s = singular_values(a);
    let Some(&hi) = s.first() else { return 0 };
    s.iter().filter(|&&x| x > rel_tol * hi).count()
}

/// Inverse that refuses matrices with condition number above `max_cond`.
pub fn checked_inverse(a: &CMat, max_cond: f64) -> Option<CMat> {
    if a.nrows() != a.ncols() {
        return None;
    }
    if a.nrows() == 0 {
        return Some(a.clone());
    }
    if condition_number(a) > max_cond {
        return None;
    }
    a.clone().lu().try_inverse()
}

/// Eigen-decomposition of the Hermitian part, eigenvalues ascending.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(symmetrize(a));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// `f(A)` for Hermitian `A` through its spectral decomposition.
pub fn hermitian_fn(a: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = hermitian_eigen(a);
    let fv: Vec<C64> = vals.iter().map(|&x| C64::new(f(x), 0.0)).collect();
    &vecs * diag(&fv) * vecs.adjoint()
}

/// Orthonormal basis (columns) of `ker a`.
pub fn null_space(a: &CMat, rel_tol: f64) -> CMat {
    let n = a.ncols();
    let r = rank(a, rel_tol);
    let (_, vecs) = hermitian_eigen(&(a.adjoint() * a));
    vecs.columns(0, n - r).into_owned()
}

/// Orthonormal basis of the column span of `a`.
pub fn range_basis(a: &CMat, rel_tol: f64) -> CMat {
    let r = rank(a, rel_tol);
    let (_, vecs) = hermitian_eigen(&(a * a.adjoint()));
    let n = a.nrows();
    vecs.columns(n - r, r).into_owned()
}

pub fn projector(a: &CMat, rel_tol: f64) -> CMat {
    let q = range_basis(a, rel_tol);
    &q * q.adjoint()
}

/// Spectral-norm gap between the orthogonal projectors onto two spans,
/// i.e. the sine of the largest principal angle.
pub fn subspace_distance(a: &CMat, b: &CMat, rel_tol: f64) -> f64 {
    let d = projector(a, rel_tol) - projector(b, rel_tol);
    singular_values(&d).first().copied().unwrap_or(0.0)
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
