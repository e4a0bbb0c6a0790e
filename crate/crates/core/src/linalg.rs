//! Dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type CMat2 = Matrix2<C64>;

/// Relative eigenvalue tolerance below which a nominally PSD matrix is
/// considered broken rather than merely rounded.
pub const PSD_TOL: f64 = 1e-9;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `(A + A^H) / 2`.
pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let eig = hermitize(a).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_eigenvalue(a: &CMat) -> f64 {
    hermitian_eigen(a).0.first().copied().unwrap_or(0.0)
}

fn check_psd(values: &[f64], what: &str) -> Result<f64> {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = values.first().copied().unwrap_or(0.0);
    if min < -PSD_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::numerical(format!(
            "{what}: eigenvalue {min:e} is negative beyond tolerance (scale {scale:e})"
        )));
    }
    Ok(scale)
}

fn rebuild(values: &[f64], vectors: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let n = values.len();
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        let s = f(v.max(0.0));
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    hermitize(&(&scaled * vectors.adjoint()))
}

/// Hermitian square root through an eigendecomposition with eigenvalues
/// clamped at zero.
pub fn hermitian_sqrt(a: &CMat) -> Result<CMat> {
    let (values, vectors) = hermitian_eigen(a);
    check_psd(&values, "matrix square root")?;
    Ok(rebuild(&values, &vectors, f64::sqrt))
}

/// Projects a Hermitian matrix onto the PSD cone by flooring eigenvalues at 0.
pub fn psd_floor(a: &CMat) -> CMat {
    let (values, vectors) = hermitian_eigen(a);
    rebuild(&values, &vectors, |v| v)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == C64::default() {
                continue;
            }
            for p in 0..br {
                for q in 0..bc {
                    out[(i * br + p, j * bc + q)] = aij * b[(p, q)];
                }
            }
        }
    }
    out
}

pub fn cholesky(a: &CMat, what: &str) -> Result<Cholesky<C64, Dyn>> {
    Cholesky::new(a.clone())
        .ok_or_else(|| Error::numerical(format!("{what}: matrix is not positive definite")))
}

pub fn hpd_inverse(a: &CMat, what: &str) -> Result<CMat> {
    Ok(cholesky(a, what)?.inverse())
}

/// `log2 det(A)` for Hermitian positive-definite `A`.
pub fn log2det_hpd(a: &CMat, what: &str) -> Result<f64> {
    let chol = cholesky(a, what)?;
    Ok(log2det_from_cholesky(&chol))
}

pub fn log2det_from_cholesky(chol: &Cholesky<C64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>() * 2.0 / std::f64::consts::LN_2
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut acc = C64::default();
    for j in 0..n {
        for i in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().sum()
}

/// `||A - B||_F / ||B||_F`.
pub fn frobenius_rel(a: &CMat, b: &CMat) -> f64 {
    let denom = b.norm();
    if denom == 0.0 {
        return a.norm();
    }
    (a - b).norm() / denom
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Closed-form square root of a 2x2 Hermitian PSD matrix.
///
/// For PSD `A` with `s = sqrt(det A)` and `t = sqrt(tr A + 2s)`,
/// `sqrt(A) = (A + s I) / t`.
pub fn sqrt_hermitian_2x2(a: &CMat2) -> Result<CMat2> {
    let det = (a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)]).re;
    let tr = (a[(0, 0)] + a[(1, 1)]).re;
    if det < -PSD_TOL * tr.abs().powi(2).max(f64::MIN_POSITIVE) || tr < 0.0 {
        return Err(Error::domain("2x2 matrix is not positive semidefinite"));
    }
    let s = det.max(0.0).sqrt();
    let t = (tr + 2.0 * s).sqrt();
    if t == 0.0 {
        return Ok(CMat2::zeros());
    }
    Ok((a + CMat2::identity().scale(s)).unscale(t))
}

/// Inverse of a 2x2 Hermitian positive-definite matrix.
pub fn inv_2x2(a: &CMat2) -> Result<CMat2> {
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    if det.norm() == 0.0 || !det.re.is_finite() {
        return Err(Error::numerical("singular 2x2 matrix"));
    }
    Ok(CMat2::new(a[(1, 1)], -a[(0, 1)], -a[(1, 0)], a[(0, 0)]).map(|x| x / det))
}

pub fn det_2x2(a: &CMat2) -> C64 {
    a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)]
}
