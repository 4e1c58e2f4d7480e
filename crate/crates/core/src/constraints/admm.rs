use nalgebra::Cholesky;
use nalgebra::Dyn;

use super::{prox_apply, Constraint};
use crate::linalg::RIDGE_SCALE;
use crate::tensor::Matrix;
use crate::{Error, Result};

pub const ADMM_MAX_INNER: usize = 50;
/// Relative primal and dual residual tolerance.
pub const ADMM_TOL: f64 = 1e-4;

/// Warm-start state for one factor's ADMM subproblem.
#[derive(Clone, Debug)]
pub struct AdmmState {
    /// Constrained copy `Ã` of the factor.
    pub aux: Matrix,
    /// Scaled dual variable.
    pub dual: Matrix,
    pub rho: f64,
    /// Inner iterations used by the most recent call.
    pub iterations: usize,
    gram: Option<Matrix>,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl AdmmState {
    pub fn new(factor: &Matrix) -> Self {
        Self {
            aux: factor.clone(),
            dual: Matrix::zeros(factor.nrows(), factor.ncols()),
            rho: 0.0,
            iterations: 0,
            gram: None,
            chol: None,
        }
    }

    /// Factor `G + ρI` unless the cached factorization is for this Gram.
    fn refresh(&mut self, gram: &Matrix) -> Result<()> {
        if self.gram.as_ref() == Some(gram) && self.chol.is_some() {
            return Ok(());
        }
        let f = gram.nrows();
        let tr = gram.trace();
        self.rho = if tr > 0.0 { tr / f as f64 } else { 1.0 };
        let mut shifted = gram.clone();
        for i in 0..f {
            shifted[(i, i)] += self.rho;
        }
        let chol = match shifted.clone().cholesky() {
            Some(c) => c,
            None => {
                for i in 0..f {
                    shifted[(i, i)] += RIDGE_SCALE * tr.abs().max(1.0);
                }
                shifted.cholesky().ok_or_else(|| Error::NotPositiveDefinite("ADMM Gram is not PSD".into()))?
            }
        };
        self.chol = Some(chol);
        self.gram = Some(gram.clone());
        Ok(())
    }
}

/// Minimize `½‖X_(n) − K Aᵀ‖² + r(A)` given `G = KᵀK` and the MTTKRP result
/// `M = X_(n)ᵀK`, by ADMM on the split `A = Ã`.
///
/// Each inner iteration does one Cholesky solve with the cached factor of
/// `G + ρI`, one proximity step and one dual update. Returns the feasible
/// iterate `Ã` and the state to warm-start the next call.
pub fn admm_constrained_ls(
    gram: &Matrix,
    mttkrp: &Matrix,
    constraint: &Constraint,
    mut warm: AdmmState,
) -> Result<(Matrix, AdmmState)> {
    let (rows, f) = mttkrp.shape();
    if gram.shape() != (f, f) || warm.aux.shape() != (rows, f) || warm.dual.shape() != (rows, f) {
        return Err(Error::shape("ADMM state, Gram and MTTKRP disagree"));
    }
    let asym = (gram - gram.transpose()).norm();
    if asym > 1e-10 * gram.norm().max(1.0) {
        return Err(Error::NotPositiveDefinite("ADMM Gram is not symmetric".into()));
    }
    warm.refresh(gram)?;
    let rho = warm.rho;
    let chol = warm.chol.as_ref().expect("refreshed");
    let mt = mttkrp.transpose();
    if matches!(constraint, Constraint::None) {
        warm.aux = crate::linalg::solve_gram(gram, &mt)?.0.transpose();
        warm.dual.fill(0.0);
        warm.iterations = 1;
        return Ok((warm.aux.clone(), warm));
    }
    let mut iterations = 0;
    for _ in 0..ADMM_MAX_INNER {
        iterations += 1;
        let rhs = &mt + (&warm.aux + &warm.dual).transpose() * rho;
        let h = chol.solve(&rhs).transpose();
        let prev = warm.aux.clone();
        warm.aux = prox_apply(&(&h - &warm.dual), constraint, rho)?;
        warm.dual += &warm.aux - &h;
        let tiny = f64::MIN_POSITIVE;
        let primal = (&warm.aux - &h).norm() / warm.aux.norm().max(tiny);
        let dual = (&warm.aux - &prev).norm() / warm.dual.norm().max(tiny);
        if primal < ADMM_TOL && dual < ADMM_TOL {
            break;
        }
    }
    warm.iterations = iterations;
    Ok((warm.aux.clone(), warm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::solve_gram;
    use crate::random::{randn_matrix, rng};

    /// LS data `min ½‖Y − K Aᵀ‖²` expressed through `G` and `M`.
    fn problem(seed: u64, rows: usize, f: usize, samples: usize) -> (Matrix, Matrix, Matrix, Matrix) {
        let mut r = rng(seed);
        let k = randn_matrix(samples, f, &mut r);
        let y = randn_matrix(samples, rows, &mut r);
        let g = k.tr_mul(&k);
        let m = y.tr_mul(&k);
        (k, y, g, m)
    }

    fn unconstrained(g: &Matrix, m: &Matrix) -> Matrix {
        solve_gram(g, &m.transpose()).unwrap().0.transpose()
    }

    #[test]
    fn none_gives_least_squares() {
        let (_, _, g, m) = problem(1, 4, 3, 20);
        let (a, st) = admm_constrained_ls(&g, &m, &Constraint::None, AdmmState::new(&Matrix::zeros(4, 3))).unwrap();
        assert!((&a - unconstrained(&g, &m)).norm() < 1e-12 * a.norm());
        assert!(st.iterations <= 2);
    }

    #[test]
    fn inactive_nonnegativity() {
        // Planted nonnegative solution with consistent data.
        let mut r = rng(2);
        let k = randn_matrix(30, 3, &mut r);
        let a_true = randn_matrix(5, 3, &mut r).map(|x| x.abs() + 0.5);
        let y = &k * a_true.transpose();
        let (g, m) = (k.tr_mul(&k), y.tr_mul(&k));
        let mut st = AdmmState::new(&Matrix::zeros(5, 3));
        let mut a = Matrix::zeros(5, 3);
        for _ in 0..20 {
            let out = admm_constrained_ls(&g, &m, &Constraint::Nonnegative, st).unwrap();
            a = out.0;
            st = out.1;
        }
        assert!((&a - &a_true).norm() < 1e-6 * a_true.norm());
    }

    /// Projected gradient on `½ tr(A G Aᵀ) − tr(Aᵀ M)` over `A ≥ 0`.
    fn nnls_oracle(g: &Matrix, m: &Matrix) -> Matrix {
        let step = 1.0 / crate::linalg::singular_values(g)[0];
        let mut a = Matrix::zeros(m.nrows(), m.ncols());
        for _ in 0..200_000 {
            let grad = &a * g - m;
            let next = (&a - grad * step).map(|x| x.max(0.0));
            let delta = (&next - &a).norm();
            a = next;
            if delta < 1e-15 {
                break;
            }
        }
        a
    }

    #[test]
    fn active_nonnegativity_matches_projected_gradient() {
        let (_, _, g, m) = problem(3, 6, 3, 25);
        let oracle = nnls_oracle(&g, &m);
        assert!(oracle.iter().any(|&x| x == 0.0), "test needs active constraints");
        let mut st = AdmmState::new(&Matrix::zeros(6, 3));
        let mut a = Matrix::zeros(6, 3);
        for _ in 0..40 {
            let out = admm_constrained_ls(&g, &m, &Constraint::Nonnegative, st).unwrap();
            a = out.0;
            st = out.1;
        }
        assert!(a.iter().all(|&x| x >= 0.0));
        assert!((&a - &oracle).norm() <= 1e-4 * oracle.norm());
    }

    #[test]
    fn rejects_indefinite_gram() {
        let g = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -5.0]);
        let m = Matrix::zeros(3, 2);
        let r = admm_constrained_ls(&g, &m, &Constraint::Nonnegative, AdmmState::new(&Matrix::zeros(3, 2)));
        assert!(matches!(r, Err(Error::NotPositiveDefinite(_))));
    }
}
