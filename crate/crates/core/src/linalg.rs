//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues below this are treated as non-positive by the square-root helpers.
pub const POSITIVITY_FLOOR: f64 = 1e-14;

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = symmetrize(m);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (j, &i) in order.iter().enumerate() {
        vectors.set_column(j, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest absolute deviation from symmetry.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

fn sym_function(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sym_eigen(m);
    if !vals.is_empty() && vals[0] < POSITIVITY_FLOOR {
        return Err(Error::NotPositiveDefinite(vals[0]));
    }
    let d = DMatrix::from_diagonal(&vals.map(f));
    Ok(&vecs * d * vecs.transpose())
}

/// Principal square root of a symmetric positive definite matrix.
pub fn sym_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sym_function(m, f64::sqrt)
}

/// Inverse principal square root of a symmetric positive definite matrix.
pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sym_function(m, |x| 1.0 / x.sqrt())
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Singular values sorted descending.
pub fn singular_values_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `rel_tol * largest`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> (usize, Vec<f64>) {
    let s = singular_values_desc(m);
    let top = s.first().copied().unwrap_or(0.0);
    let rank = s.iter().filter(|&&x| x > rel_tol * top).count();
    (rank, s)
}

/// Moore-Penrose pseudo-inverse with relative cutoff.
pub fn pinv(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let top = svd.singular_values.max();
    let inv = svd
        .singular_values
        .map(|s| if s > rel_tol * top { 1.0 / s } else { 0.0 });
    vt.transpose() * DMatrix::from_diagonal(&inv) * u.transpose()
}

/// Right singular vectors belonging to the `count` smallest singular values,
/// together with all singular values sorted ascending.
pub fn smallest_right_singular_vectors(m: &DMatrix<f64>, count: usize) -> (DMatrix<f64>, Vec<f64>) {
    let n = m.ncols();
    // The eigenvectors of M^T M would square the conditioning, so use a full SVD.
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let mut out = DMatrix::zeros(n, count);
    for (j, &i) in order.iter().take(count).enumerate() {
        out.set_column(j, &vt.row(i).transpose());
    }
    let sv = order.iter().map(|&i| svd.singular_values[i]).collect();
    (out, sv)
}

/// Number of strictly positive eigenvalues of a symmetric matrix.
///
/// The matrix is first rescaled by the congruence `S M S`, `S = diag(1/sqrt(max(1, |m_ii|)))`,
/// which preserves inertia and tames rows with huge diagonal entries.
pub fn positive_inertia(m: &DMatrix<f64>) -> usize {
    let n = m.nrows();
    if n == 0 {
        return 0;
    }
    let scale: Vec<f64> = (0..n).map(|i| 1.0 / m[(i, i)].abs().max(1.0).sqrt()).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| m[(i, j)] * scale[i] * scale[j]);
    let vals = SymmetricEigen::new(symmetrize(&scaled)).eigenvalues;
    vals.iter().filter(|&&v| v > 0.0).count()
}

/// Operator norm of a symmetric form `q` with respect to the inner product given by `a`:
/// `sup |x^T q x| / x^T a x`.
pub fn form_norm(q: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<f64> {
    let ais = sym_inv_sqrt(a)?;
    let m = &ais * q * &ais;
    let (vals, _) = sym_eigen(&m);
    Ok(vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

/// Eigenvalues of the symmetric pencil `(q, a)` sorted ascending.
pub fn generalized_eigenvalues(q: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let ais = sym_inv_sqrt(a)?;
    let (vals, _) = sym_eigen(&(&ais * q * &ais));
    Ok(vals.iter().copied().collect())
}
