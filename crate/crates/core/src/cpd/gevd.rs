use rand::Rng as _;

use super::als::ls_update;
use crate::linalg::{pinv, real_eigen, svd};
use crate::random::rng_stream;
use crate::tensor::{gram_hadamard, DenseTensor, KruskalModel, Matrix, TensorLike};
use crate::{Error, Result};

/// Eigenvalues closer than this (relative to the spread) trigger a warning.
pub const EIGEN_GAP_WARNING: f64 = 1e-10;
/// Relative imaginary part above which the pencil is declared complex.
const IMAG_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct GevdOutcome {
    pub model: KruskalModel,
    /// Smallest pairwise eigenvalue distance over the spectral radius.
    pub min_eigen_gap: f64,
    pub warnings: Vec<String>,
}

/// Algebraic CPD of a three-way tensor from two random mixtures of its
/// frontal slabs. See [`gevd_init_detailed`].
pub fn gevd_init(t: &DenseTensor, rank: usize, seed: u64) -> Result<KruskalModel> {
    gevd_init_detailed(t, rank, seed).map(|o| o.model)
}

/// With `X̃_1 = A D_1 Bᵀ` and `X̃_2 = A D_2 Bᵀ` the two slab mixtures, the
/// leading `F` left singular vectors of `[X̃_1; X̃_2]` are `[A D_1; A D_2] M`
/// for some invertible `M`. Writing them as `[U_1; U_2]`, the eigenvectors
/// of `(U_1ᵀU_1)⁻¹ U_1ᵀU_2` are the columns of `M⁻¹`, so `U_1 M⁻¹` recovers
/// `A` up to column scaling. `B` follows from `X̃_1` and `C` from a
/// least-squares solve against the mode-3 unfolding.
///
/// Exact for noiseless data when `A` and `B` have full column rank and `C`
/// has no two proportional columns; a complex eigenvalue pair makes the
/// real-valued initialization fail with [`Error::ComplexEigenvalues`].
pub fn gevd_init_detailed(t: &DenseTensor, rank: usize, seed: u64) -> Result<GevdOutcome> {
    let shape = t.shape();
    if shape.len() != 3 {
        return Err(Error::invalid("GEVD initialization needs a three-way tensor"));
    }
    let (i, j, k) = (shape[0], shape[1], shape[2]);
    if rank == 0 || rank > i.min(j) {
        return Err(Error::invalid(format!("GEVD needs 1 <= F <= min(I, J) = {}", i.min(j))));
    }
    if k < 2 {
        return Err(Error::invalid("GEVD needs at least two frontal slabs"));
    }
    let mut r = rng_stream(seed, u64::MAX);
    let g1: Vec<f64> = (0..k).map(|_| r.random::<f64>()).collect();
    let g2: Vec<f64> = (0..k).map(|_| r.random::<f64>()).collect();
    let mut x1 = Matrix::zeros(i, j);
    let mut x2 = Matrix::zeros(i, j);
    for kk in 0..k {
        let s = t.frontal_slab(kk);
        x1 += &s * g1[kk];
        x2 += &s * g2[kk];
    }
    let mut stacked = Matrix::zeros(2 * i, j);
    stacked.rows_mut(0, i).copy_from(&x1);
    stacked.rows_mut(i, i).copy_from(&x2);
    let dec = svd(&stacked);
    let u = dec.u.columns(0, rank).into_owned();
    let u1 = u.rows(0, i).into_owned();
    let u2 = u.rows(i, i).into_owned();
    let r1 = u1.tr_mul(&u1);
    let r2 = u1.tr_mul(&u2);
    let pencil =
        r1.clone().lu().solve(&r2).ok_or_else(|| Error::Singular("first slab mixture is rank deficient".into()))?;
    let (vals, minv) = real_eigen(&pencil, IMAG_TOL)?;

    let spread = vals.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut gap = f64::INFINITY;
    for a in 0..vals.len() {
        for b in a + 1..vals.len() {
            gap = gap.min((vals[a] - vals[b]).abs() / spread);
        }
    }
    let mut warnings = vec![];
    if gap < EIGEN_GAP_WARNING {
        warnings.push(format!("near-defective pencil: relative eigenvalue gap {gap:.2e}"));
    }

    let a = &u1 * &minv;
    let bt = pinv(&a, 1e-12) * &x1;
    let b = bt.transpose();
    let mut fs = vec![a, b, Matrix::zeros(k, rank)];
    let g = gram_hadamard(&fs, Some(2))?;
    let m = t.mttkrp(&fs, 2)?;
    fs[2] = ls_update(&g, &m)?.0;
    Ok(GevdOutcome { model: KruskalModel::from_factors(fs)?, min_eigen_gap: gap, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpd::match_factors;
    use crate::io::synth_model;
    use crate::random::{randn_tensor, rng};
    use crate::tensor::kruskal_reconstruct;
    use crate::tucker::mlsvd;

    #[test]
    fn exact_recovery_rank_two() {
        for seed in 0..20 {
            let (truth, t) = synth_model(&[4, 4, 3], 2, seed, 0.0).unwrap();
            let m = gevd_init(&t, 2, seed).unwrap();
            let fm = match_factors(&truth, &m).unwrap();
            assert!(fm.max_relative_error < 1e-8, "seed {seed}: {}", fm.max_relative_error);
        }
    }

    #[test]
    fn rank_one_matches_mlsvd() {
        let t = crate::tensor::outer(&[vec![1.0, 2.0, -1.0], vec![0.5, 1.0], vec![3.0, -1.0, 1.0]]).unwrap();
        let m = gevd_init(&t, 1, 7).unwrap();
        let tk = mlsvd(&t, &[1, 1, 1]).unwrap();
        for n in 0..3 {
            let a = m.factors[n].column(0).normalize();
            let u = tk.bases[n].column(0);
            assert!((a.dot(&u).abs() - 1.0).abs() < 1e-12);
        }
        assert!(t.sub(&kruskal_reconstruct(&m)).unwrap().norm() < 1e-12 * t.norm());
    }

    #[test]
    fn complex_pencils_at_the_expected_rate() {
        let trials = 2000;
        let mut r = rng(99);
        let mut complex = 0;
        for s in 0..trials {
            let t = randn_tensor(&[2, 2, 2], &mut r);
            match gevd_init(&t, 2, s) {
                Err(Error::ComplexEigenvalues { .. }) => complex += 1,
                Err(e) => panic!("unexpected error {e}"),
                Ok(_) => {}
            }
        }
        let frac = complex as f64 / trials as f64;
        assert!((frac - (1.0 - std::f64::consts::FRAC_PI_4)).abs() < 0.03, "{frac}");
    }

    #[test]
    fn rejects_bad_shapes() {
        let t = DenseTensor::zeros(&[2, 2, 1]);
        assert!(gevd_init(&t, 1, 0).is_err());
        let t = DenseTensor::zeros(&[2, 3, 2]);
        assert!(gevd_init(&t, 3, 0).is_err());
    }
}
