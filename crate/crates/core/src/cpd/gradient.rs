use crate::tensor::{check_factors, gram_hadamard, KruskalModel, Matrix, TensorLike};
use crate::Result;

/// Gradient of `L = ‖X − ⟦m⟧‖²` with respect to each factor matrix, weights
/// held fixed:
/// `∂L/∂A_n = −2 mttkrp(X, n) + 2 A_n (∗_{m≠n} A_mᵀA_m)` on the weighted
/// factors, with the weights chained into the first mode.
pub fn cpd_gradient<T: TensorLike + ?Sized>(t: &T, m: &KruskalModel) -> Result<Vec<Matrix>> {
    check_factors(t.shape(), &m.factors)?;
    let fs = m.absorbed_factors();
    let mut grads = Vec::with_capacity(fs.len());
    for n in 0..fs.len() {
        let g = gram_hadamard(&fs, Some(n))?;
        let mt = t.mttkrp(&fs, n)?;
        let mut grad = (&fs[n] * g - mt) * 2.0;
        if n == 0 {
            for (f, &w) in m.weights.iter().enumerate() {
                grad.column_mut(f).scale_mut(w);
            }
        }
        grads.push(grad);
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpd::random_model;
    use crate::random::{randn_tensor, rng};
    use crate::tensor::{kruskal_reconstruct, DenseTensor};

    #[test]
    fn zero_at_exact_solution() {
        let m = random_model(&[3, 4, 2], 2, 1, 0);
        let t = kruskal_reconstruct(&m);
        for g in cpd_gradient(&t, &m).unwrap() {
            assert!(g.norm() < 1e-10);
        }
    }

    #[test]
    fn matches_finite_differences() {
        let mut r = rng(2);
        let t = randn_tensor(&[4, 3, 2], &mut r);
        let mut m = random_model(&[4, 3, 2], 2, 3, 0);
        m.weights = vec![1.3, 0.7];
        let grads = cpd_gradient(&t, &m).unwrap();
        let h = 1e-6;
        for n in 0..3 {
            let mut fd = Matrix::zeros(m.factors[n].nrows(), 2);
            for idx in 0..fd.len() {
                let mut p = m.clone();
                p.factors[n][idx] += h;
                let mut q = m.clone();
                q.factors[n][idx] -= h;
                fd[idx] = (t.residual(&p).unwrap() - t.residual(&q).unwrap()) / (2.0 * h);
            }
            assert!((&grads[n] - &fd).norm() <= 1e-5 * fd.norm(), "mode {n}");
        }
    }

    #[test]
    fn data_enters_linearly() {
        let mut r = rng(4);
        let t = randn_tensor(&[3, 3, 2], &mut r);
        let mut t2 = t.clone();
        t2.scale(2.0);
        let m = random_model(&[3, 3, 2], 2, 5, 0);
        let zero = DenseTensor::zeros(&[3, 3, 2]);
        let g0 = cpd_gradient(&zero, &m).unwrap();
        let g1 = cpd_gradient(&t, &m).unwrap();
        let g2 = cpd_gradient(&t2, &m).unwrap();
        for n in 0..3 {
            // g(X) = quadratic part + linear part; doubling X doubles the linear part.
            let lin1 = &g1[n] - &g0[n];
            let lin2 = &g2[n] - &g0[n];
            assert!((lin2 - lin1 * 2.0).norm() < 1e-12 * g1[n].norm().max(1.0));
        }
    }
}
