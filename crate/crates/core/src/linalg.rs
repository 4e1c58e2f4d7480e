//! Small dense linear-algebra helpers on top of `nalgebra`.
//!
//! Everything here works on `DMatrix<f64>` (column-major) and adds the
//! conventions the decompositions rely on: descending singular values,
//! deterministic singular-vector signs, ridge-guarded Gram solves and a
//! real eigendecomposition that refuses complex spectra.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Condition number above which Gram solves get a relative ridge.
pub const RIDGE_CONDITION: f64 = 1e12;
/// Relative ridge added when [`RIDGE_CONDITION`] is exceeded.
pub const RIDGE_SCALE: f64 = 1e-12;

/// Thin SVD with singular values sorted in descending order. Backed by
/// `faer`, whose bidiagonal SVD stays accurate on matrices with many zero
/// singular values.
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    /// Right singular vectors as columns (`ncols × min(nrows, ncols)`).
    pub v: Matrix,
}

pub fn svd(m: &Matrix) -> Svd {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Svd { u: Matrix::zeros(r, 0), s: vec![], v: Matrix::zeros(c, 0) };
    }
    let fm = to_faer(m);
    let dec = fm.thin_svd().expect("SVD iteration converges");
    let (fu, fs, fv) = (dec.U(), dec.S().column_vector(), dec.V());
    let u = Matrix::from_fn(r, k, |i, j| fu[(i, j)]);
    let v = Matrix::from_fn(c, k, |i, j| fv[(i, j)]);
    let s = (0..k).map(|i| fs[i]).collect();
    Svd { u, s, v }
}

pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![];
    }
    to_faer(m).singular_values().expect("SVD iteration converges")
}

fn to_faer(m: &Matrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Number of singular values above `rtol · σ_max`.
pub fn numerical_rank(m: &Matrix, rtol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&x| x > rtol * smax).count(),
        _ => 0,
    }
}

/// Flip column signs so that the largest-magnitude entry of every column is
/// positive. Ties go to the lowest row index.
pub fn fix_column_signs(m: &mut Matrix) {
    for mut col in m.column_iter_mut() {
        let mut best = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if !col.is_empty() && col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// The `r` leading right singular vectors of `m`, sign-normalized.
pub fn leading_right_singular_vectors(m: &Matrix, r: usize) -> Matrix {
    let dec = svd(m);
    let mut v = dec.v.columns(0, r.min(dec.v.ncols())).into_owned();
    fix_column_signs(&mut v);
    v
}

/// The `r` leading left singular vectors of `m`, sign-normalized.
pub fn leading_left_singular_vectors(m: &Matrix, r: usize) -> Matrix {
    let dec = svd(m);
    let mut u = dec.u.columns(0, r.min(dec.u.ncols())).into_owned();
    fix_column_signs(&mut u);
    u
}

/// Moore–Penrose pseudo-inverse with singular values below `rtol · σ_max`
/// treated as zero.
pub fn pinv(m: &Matrix, rtol: f64) -> Matrix {
    let dec = svd(m);
    let smax = dec.s.first().copied().unwrap_or(0.0);
    let mut out = Matrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in dec.s.iter().enumerate() {
        if smax > 0.0 && s > rtol * smax {
            out += dec.v.column(k) * dec.u.column(k).transpose() / s;
        }
    }
    out
}

/// Solve `G X = rhs` for symmetric positive semidefinite `G`.
///
/// A ridge of `1e-12 · trace(G)` is added when the spectral condition number
/// exceeds `1e12`; the returned flag reports whether that happened.
pub fn solve_gram(g: &Matrix, rhs: &Matrix) -> Result<(Matrix, bool)> {
    let n = g.nrows();
    if g.ncols() != n || rhs.nrows() != n {
        return Err(Error::shape(format!(
            "gram {}x{} with right-hand side {}x{}",
            g.nrows(),
            g.ncols(),
            rhs.nrows(),
            rhs.ncols()
        )));
    }
    let eig = SymmetricEigen::new(g.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let mut ridged = false;
    let mut gg = g.clone();
    if !(max > 0.0) || min <= max / RIDGE_CONDITION {
        let tr = g.trace().max(f64::MIN_POSITIVE);
        for i in 0..n {
            gg[(i, i)] += RIDGE_SCALE * tr;
        }
        ridged = true;
    }
    let chol = gg.cholesky().ok_or_else(|| Error::NotPositiveDefinite("Gram matrix after ridge".into()))?;
    Ok((chol.solve(rhs), ridged))
}

/// Eigenvalues of a general real square matrix (via the real Schur form).
pub fn complex_eigenvalues(m: &Matrix) -> Vec<Complex<f64>> {
    if m.nrows() == 0 {
        return vec![];
    }
    m.clone().complex_eigenvalues().iter().copied().collect()
}

/// Largest imaginary part magnitude among the eigenvalues, relative to the
/// spectral radius.
pub fn relative_max_imag(eigs: &[Complex<f64>]) -> f64 {
    let radius = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let imag = eigs.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if radius > 0.0 {
        imag / radius
    } else {
        0.0
    }
}

/// Real eigendecomposition of a diagonalizable real matrix with real
/// spectrum. Eigenvectors are unit-norm columns ordered like the eigenvalues
/// (descending). Errors out when the spectrum has a complex pair.
pub fn real_eigen(m: &Matrix, imag_rtol: f64) -> Result<(Vec<f64>, Matrix)> {
    let n = m.nrows();
    let eigs = complex_eigenvalues(m);
    let rel = relative_max_imag(&eigs);
    if rel > imag_rtol {
        return Err(Error::ComplexEigenvalues { max_imag: rel });
    }
    let mut vals: Vec<f64> = eigs.iter().map(|z| z.re).collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    let mut vecs = Matrix::zeros(n, n);
    for (j, &lam) in vals.iter().enumerate() {
        let mut shifted = m.clone();
        for i in 0..n {
            shifted[(i, i)] -= lam;
        }
        let dec = svd(&shifted);
        let v = dec.v.column(n - 1);
        vecs.set_column(j, &v);
    }
    Ok((vals, vecs))
}

/// Leading eigenpair of a symmetric matrix.
pub fn leading_symmetric_eigenvector(q: &Matrix) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(q.clone());
    let mut best = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    (eig.eigenvalues[best], eig.eigenvectors.column(best).into_owned())
}

/// Real roots of `Σ c_k x^k` (coefficients in ascending order), found as the
/// eigenvalues of the companion matrix. Roots whose imaginary part exceeds
/// `imag_tol · (1 + |re|)` are discarded.
pub fn real_poly_roots(coeffs: &[f64], imag_tol: f64) -> Vec<f64> {
    let mut deg = coeffs.len();
    let scale = coeffs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    while deg > 0 && coeffs[deg - 1].abs() <= 1e-14 * scale {
        deg -= 1;
    }
    if deg <= 1 {
        return vec![];
    }
    let n = deg - 1;
    let lead = coeffs[n];
    let mut comp = Matrix::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        comp[(i, n - 1)] = -coeffs[i] / lead;
    }
    complex_eigenvalues(&comp)
        .into_iter()
        .filter(|z| z.im.abs() <= imag_tol * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .collect()
}

/// Relative Frobenius distance `‖a − b‖ / max(‖b‖, tiny)`.
pub fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_is_sorted_and_reconstructs() {
        let m = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 7.0]);
        let d = svd(&m);
        assert!(d.s[0] >= d.s[1]);
        let back = &d.u * Matrix::from_diagonal(&DVector::from_vec(d.s.clone())) * d.v.transpose();
        assert!(rel_diff(&back, &m) < 1e-14);
    }

    #[test]
    fn pinv_of_rank_one() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let p = pinv(&m, 1e-12);
        assert!(rel_diff(&(&m * &p * &m), &m) < 1e-13);
        assert_eq!(numerical_rank(&m, 1e-9), 1);
    }

    #[test]
    fn signs_follow_largest_entry() {
        let mut m = Matrix::from_row_slice(2, 2, &[0.1, 3.0, -2.0, -4.0]);
        fix_column_signs(&mut m);
        assert_eq!(m[(1, 0)], 2.0);
        assert_eq!(m[(1, 1)], 4.0);
    }

    #[test]
    fn ridge_triggers_on_singular_gram() {
        let g = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (_, ridged) = solve_gram(&g, &Matrix::identity(2, 2)).unwrap();
        assert!(ridged);
        let g = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (x, ridged) = solve_gram(&g, &Matrix::identity(2, 2)).unwrap();
        assert!(!ridged);
        assert!(rel_diff(&(&g * x), &Matrix::identity(2, 2)) < 1e-14);
    }

    #[test]
    fn real_eigen_refuses_rotation() {
        let r = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!(matches!(real_eigen(&r, 1e-10), Err(Error::ComplexEigenvalues { .. })));
        let m = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        let (vals, vecs) = real_eigen(&m, 1e-10).unwrap();
        assert!((vals[0] - 3.0).abs() < 1e-12 && (vals[1] - 2.0).abs() < 1e-12);
        for j in 0..2 {
            let v = vecs.column(j);
            assert!((&m * v - v * vals[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn polynomial_roots() {
        // (x - 1)(x + 2)(x² + 1)
        let c = [-2.0, 1.0, -1.0, 1.0, 1.0];
        let mut r = real_poly_roots(&c, 1e-8);
        r.sort_by(f64::total_cmp);
        assert_eq!(r.len(), 2);
        assert!((r[0] + 2.0).abs() < 1e-12 && (r[1] - 1.0).abs() < 1e-12);
    }
}
