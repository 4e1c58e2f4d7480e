use nalgebra::{Cholesky, DVector};

use crate::crb::build_fim;
use crate::tensor::{check_factors, gram_hadamard, KruskalModel, Matrix, TensorLike};
use crate::{Error, Result};

/// One damped Gauss–Newton (Levenberg–Marquardt) step for the CPD loss.
///
/// Works on the absorbed factors `A_n` (weights folded into mode 0) and
/// solves `(JᵀJ + δI) p = Jᵀr` with `r = vec(X − ⟦A⟧)`, where `JᵀJ` is the
/// dense Fisher information at unit noise. Returns `p` split per mode, to
/// be added to the absorbed factors. `δ` must be positive because `JᵀJ`
/// is always singular along the scaling directions.
pub fn gauss_newton_step<T: TensorLike + ?Sized>(t: &T, m: &KruskalModel, damping: f64) -> Result<Vec<Matrix>> {
    if !(damping > 0.0) {
        return Err(Error::invalid("Gauss-Newton damping must be positive"));
    }
    check_factors(t.shape(), &m.factors)?;
    let fs = m.absorbed_factors();
    let absorbed = KruskalModel::from_factors(fs.clone())?;
    let mut psi = build_fim(&absorbed, 1.0)?.dense_psi()?;
    for i in 0..psi.nrows() {
        psi[(i, i)] += damping;
    }
    let mut rhs = Vec::with_capacity(psi.nrows());
    for n in 0..fs.len() {
        let g = gram_hadamard(&fs, Some(n))?;
        let jr = t.mttkrp(&fs, n)? - &fs[n] * g;
        rhs.extend(jr.iter().copied());
    }
    let chol = Cholesky::new(psi).ok_or_else(|| Error::NotPositiveDefinite("damped Gauss-Newton system".into()))?;
    let p = chol.solve(&DVector::from_vec(rhs));
    let mut offset = 0;
    Ok(fs
        .iter()
        .map(|a| {
            let len = a.len();
            let block = Matrix::from_column_slice(a.nrows(), a.ncols(), &p.as_slice()[offset..offset + len]);
            offset += len;
            block
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpd::random_model;
    use crate::io::synth_model;
    use crate::tensor::model_fit_residual;

    fn apply(m: &KruskalModel, p: &[Matrix], step: f64) -> KruskalModel {
        let fs = m.absorbed_factors().iter().zip(p).map(|(a, d)| a + d * step).collect();
        KruskalModel::from_factors(fs).unwrap()
    }

    #[test]
    fn zero_step_at_exact_fit() {
        let (m, t) = synth_model(&[4, 3, 3], 2, 3, 0.0).unwrap();
        let p = gauss_newton_step(&t, &m, 1e-3).unwrap();
        assert!(p.iter().map(|d| d.norm()).sum::<f64>() < 1e-10);
    }

    #[test]
    fn step_reduces_loss_near_solution() {
        let (truth, t) = synth_model(&[5, 4, 3], 2, 6, 0.0).unwrap();
        let mut start = truth.absorb_weights();
        let noise = random_model(&[5, 4, 3], 2, 9, 0);
        for (a, d) in start.factors.iter_mut().zip(&noise.factors) {
            *a += d * 1e-3;
        }
        let before = model_fit_residual(&t, &start).unwrap();
        let p = gauss_newton_step(&t, &start, 1e-9).unwrap();
        let after = model_fit_residual(&t, &apply(&start, &p, 1.0)).unwrap();
        // Quadratic convergence near a zero-residual solution.
        assert!(after < 1e-3 * before, "{before} -> {after}");
    }

    #[test]
    fn heavy_damping_approaches_scaled_gradient() {
        let (_, t) = synth_model(&[3, 3, 3], 2, 2, 0.5).unwrap();
        let m = random_model(&[3, 3, 3], 2, 1, 0);
        let delta = 1e8;
        let p = gauss_newton_step(&t, &m, delta).unwrap();
        let g = crate::cpd::cpd_gradient(&t, &m.absorb_weights()).unwrap();
        for (pn, gn) in p.iter().zip(&g) {
            let expect = gn * (-0.5 / delta);
            assert!((pn - &expect).norm() < 1e-6 * expect.norm());
        }
        assert!(gauss_newton_step(&t, &m, 0.0).is_err());
    }
}
