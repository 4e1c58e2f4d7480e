use nalgebra::DVector;

use crate::cpd::{FitOptions, FitReport, Init};
use crate::linalg::leading_symmetric_eigenvector;
use crate::random::{randn_matrix, rng_stream};
use crate::tensor::{DenseTensor, KruskalModel, Matrix, TensorLike};
use crate::{Error, Result};

/// Optimal unit direction `a` for a symmetric rank-1 term `c_k a aᵀ` fitted
/// to the slabs: the leading eigenvector of `Q = Σ_k c_k (X̃_k + X̃_kᵀ)`.
///
/// The sign is chosen to agree with `a_current`.
pub fn partial_symmetry_update(slabs: &[Matrix], c_column: &[f64], a_current: &DVector<f64>) -> Result<DVector<f64>> {
    if slabs.len() != c_column.len() || slabs.is_empty() {
        return Err(Error::shape("one weight per slab required"));
    }
    let n = slabs[0].nrows();
    if slabs.iter().any(|s| s.shape() != (n, n)) || a_current.len() != n {
        return Err(Error::shape("slabs must be square and match the current vector"));
    }
    let mut q = Matrix::zeros(n, n);
    for (s, &c) in slabs.iter().zip(c_column) {
        q += (s + s.transpose()) * c;
    }
    let scale: f64 = slabs.iter().map(|s| s.norm()).sum::<f64>() * c_column.iter().map(|c| c.abs()).fold(0.0, f64::max);
    if q.norm() <= 1e-14 * scale.max(f64::MIN_POSITIVE) || q.norm() == 0.0 {
        return Err(Error::Singular("symmetric update matrix is numerically zero".into()));
    }
    let (_, mut v) = leading_symmetric_eigenvector(&q);
    if v.dot(a_current) < 0.0 {
        v.neg_mut();
    }
    Ok(v)
}

/// Three-way CPD with `A = B` enforced exactly, by per-component rank-1
/// eigenvector updates of the tied factor and least-squares updates of `C`.
pub fn cpd_als_partial_symmetric(t: &DenseTensor, opts: &FitOptions) -> Result<(KruskalModel, FitReport)> {
    let shape = t.shape();
    if shape.len() != 3 || shape[0] != shape[1] {
        return Err(Error::shape("partial symmetry needs an I×I×K tensor"));
    }
    let (i, k, f) = (shape[0], shape[2], opts.rank);
    let start = web_time::Instant::now();
    let (mut a, mut c) = match &opts.init {
        Init::Provided(m) => (m.factors[0].clone(), m.absorbed_factors()[2].clone()),
        _ => {
            let mut r = rng_stream(opts.seed, 0);
            (randn_matrix(i, f, &mut r), randn_matrix(k, f, &mut r))
        }
    };
    for mut col in a.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
    }
    let slabs: Vec<Matrix> = (0..k).map(|kk| t.frontal_slab(kk)).collect();
    let model = |a: &Matrix, c: &Matrix| KruskalModel::from_factors(vec![a.clone(), a.clone(), c.clone()]);
    let xnorm = t.norm();
    let mut report = FitReport::default();
    let mut loss = t.residual(&model(&a, &c)?)?;
    report.loss.push(loss);
    for sweep in 1..=opts.max_sweeps {
        for comp in 0..f {
            let resid: Vec<Matrix> = (0..k)
                .map(|kk| {
                    let mut r = slabs[kk].clone();
                    for g in 0..f {
                        if g != comp {
                            r -= a.column(g) * a.column(g).transpose() * c[(kk, g)];
                        }
                    }
                    r
                })
                .collect();
            let cur = a.column(comp).into_owned();
            let ccol: Vec<f64> = c.column(comp).iter().copied().collect();
            if let Ok(u) = partial_symmetry_update(&resid, &ccol, &cur) {
                a.column_mut(comp).copy_from(&u);
            }
            let u = a.column(comp).into_owned();
            for kk in 0..k {
                c[(kk, comp)] = (u.transpose() * &resid[kk] * &u)[(0, 0)];
            }
        }
        let new = t.residual(&model(&a, &c)?)?;
        report.loss.push(new);
        report.sweeps = sweep;
        report.relative_change = (loss.sqrt() - new.sqrt()).abs() / xnorm.max(f64::MIN_POSITIVE);
        loss = new;
        if report.relative_change < opts.tol {
            break;
        }
    }
    let m = crate::cpd::normalize_model(&model(&a, &c)?);
    report.weights = m.weights.clone();
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((m, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{randn, rng};

    #[test]
    fn symmetric_slab() {
        let v = DVector::from_vec(vec![1.0, -2.0, 2.0]);
        let s = &v * v.transpose();
        let u =
            partial_symmetry_update(std::slice::from_ref(&s), &[1.0], &DVector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        assert!((u - &v / 3.0).norm() < 1e-12);
        let u2 = partial_symmetry_update(&[s * 2.0], &[1.0], &DVector::from_vec(vec![-1.0, 0.0, 0.0])).unwrap();
        assert!((u2 + &v / 3.0).norm() < 1e-12);
    }

    #[test]
    fn matches_dense_eigensolver() {
        let mut r = rng(2);
        let slabs: Vec<Matrix> = (0..3).map(|_| randn_matrix(4, 4, &mut r)).collect();
        let c = [0.5, -1.0, 2.0];
        let a = DVector::from_fn(4, |_, _| randn(&mut r));
        let u = partial_symmetry_update(&slabs, &c, &a).unwrap();
        let mut q = Matrix::zeros(4, 4);
        for (s, w) in slabs.iter().zip(c) {
            q += (s + s.transpose()) * w;
        }
        let eig = nalgebra::SymmetricEigen::new(q.clone());
        let lmax = eig.eigenvalues.max();
        assert!((&q * &u - &u * lmax).norm() < 1e-10);
        assert!(partial_symmetry_update(&[Matrix::zeros(4, 4)], &[1.0], &a).is_err());
    }

    #[test]
    fn symmetric_fit_recovers_planted() {
        let mut r = rng(8);
        let a = randn_matrix(5, 2, &mut r);
        let c = randn_matrix(4, 2, &mut r);
        let truth = KruskalModel::from_factors(vec![a.clone(), a, c]).unwrap();
        let t = crate::tensor::kruskal_reconstruct(&truth);
        let opts = FitOptions { rank: 2, max_sweeps: 2000, tol: 1e-14, seed: 3, ..FitOptions::default() };
        let (m, rep) = cpd_als_partial_symmetric(&t, &opts).unwrap();
        assert_eq!(m.factors[0], m.factors[1]);
        assert!(t.residual(&m).unwrap() < 1e-12 * t.norm_sq());
        for w in rep.loss.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-14);
        }
    }
}
