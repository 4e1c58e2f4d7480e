use proptest::prelude::*;

use trilinear::random::{randn, randn_matrix, randn_tensor, rng};
use trilinear::tensor::{
    commutation_apply, fold, hadamard, khatri_rao, kronecker, mttkrp_dense, mttkrp_sparse, unfold, DenseTensor, Matrix,
    SparseTensor,
};
use trilinear::uniqueness::k_rank;

fn rel(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(48)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn khatri_rao_gram_is_hadamard_of_grams(seed in any::<u64>(), i in 1usize..7, j in 1usize..7, f in 1usize..6) {
        let mut r = rng(seed);
        let a = randn_matrix(i, f, &mut r);
        let b = randn_matrix(j, f, &mut r);
        let kr = khatri_rao(&b, &a).unwrap();
        let lhs = kr.transpose() * &kr;
        let rhs = hadamard(&(b.transpose() * &b), &(a.transpose() * &a)).unwrap();
        prop_assert!(rel(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn vec_of_diagonal_sandwich(seed in any::<u64>(), i in 1usize..7, j in 1usize..7, f in 1usize..6) {
        let mut r = rng(seed);
        let a = randn_matrix(i, f, &mut r);
        let b = randn_matrix(j, f, &mut r);
        let d: Vec<f64> = (0..f).map(|_| randn(&mut r)).collect();
        // Entry (p, q) of A diag(d) Bᵀ summed by hand, stored first-index-fastest.
        let mut lhs = Matrix::zeros(i * j, 1);
        for q in 0..j {
            for p in 0..i {
                lhs[(p + i * q, 0)] = (0..f).map(|k| a[(p, k)] * d[k] * b[(q, k)]).sum();
            }
        }
        let rhs = khatri_rao(&b, &a).unwrap() * Matrix::from_column_slice(f, 1, &d);
        prop_assert!(rel(&rhs, &lhs) <= 1e-12);
    }

    #[test]
    fn mixed_product_rule(seed in any::<u64>(), p in 1usize..5, q in 1usize..5, m in 1usize..5, n in 1usize..5, f in 1usize..5) {
        let mut r = rng(seed);
        let a = randn_matrix(p, m, &mut r);
        let b = randn_matrix(q, n, &mut r);
        let e = randn_matrix(m, f, &mut r);
        let g = randn_matrix(n, f, &mut r);
        let lhs = kronecker(&a, &b) * khatri_rao(&e, &g).unwrap();
        let rhs = khatri_rao(&(&a * &e), &(&b * &g)).unwrap();
        prop_assert!(rel(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn fold_inverts_unfold_bitwise(seed in any::<u64>(), shape in prop::collection::vec(1usize..5, 1..5)) {
        let t = randn_tensor(&shape, &mut rng(seed));
        for n in 0..shape.len() {
            let m = unfold(&t, n).unwrap();
            prop_assert_eq!(m.ncols(), shape[n]);
            prop_assert_eq!(m.nrows() * m.ncols(), t.len());
            let back = fold(&m, n, &shape).unwrap();
            prop_assert_eq!(back.shape(), t.shape());
            prop_assert!(back.data().iter().zip(t.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn sparse_and_dense_mttkrp_agree(
        seed in any::<u64>(),
        shape in prop::collection::vec(1usize..6, 2..5),
        density in 0.0f64..1.0,
        f in 1usize..5,
    ) {
        let mut r = rng(seed);
        let full = randn_tensor(&shape, &mut r);
        let mut entries = Vec::new();
        let mut dense = DenseTensor::zeros(&shape);
        for (lin, &v) in full.data().iter().enumerate() {
            if (randn(&mut r).abs() / 3.0).min(1.0) < density {
                let mut idx = Vec::with_capacity(shape.len());
                let mut rest = lin;
                for &s in &shape {
                    idx.push(rest % s);
                    rest /= s;
                }
                dense.set(&idx, v);
                entries.push((idx, v));
            }
        }
        let (sparse, _) = SparseTensor::from_entries(shape.clone(), entries).unwrap();
        let factors: Vec<Matrix> = shape.iter().map(|&s| randn_matrix(s, f, &mut r)).collect();
        for n in 0..shape.len() {
            let d = mttkrp_dense(&dense, &factors, n).unwrap();
            let s = mttkrp_sparse(&sparse, &factors, n).unwrap();
            prop_assert!((&d - &s).norm() <= 1e-12 * d.norm().max(1.0));
        }
    }

    #[test]
    fn khatri_rao_k_rank_bound(seed in any::<u64>(), i in 1usize..5, j in 1usize..5, f in 1usize..7, dup in any::<bool>()) {
        let mut r = rng(seed);
        let mut a = randn_matrix(i, f, &mut r);
        let b = randn_matrix(j, f, &mut r);
        if dup && f > 1 {
            // A repeated column pins k_A at 1 while the product may stay higher.
            let c = a.column(0).into_owned();
            a.set_column(f - 1, &c);
        }
        let ka = k_rank(&a, 1e-9).unwrap();
        let kb = k_rank(&b, 1e-9).unwrap();
        let kab = k_rank(&khatri_rao(&b, &a).unwrap(), 1e-9).unwrap();
        prop_assert!(kab >= (ka + kb).saturating_sub(1).min(f), "k_A={ka} k_B={kb} k_(B⊙A)={kab}");
    }

    #[test]
    fn commutation_is_transpose_permutation(seed in any::<u64>(), m in 1usize..7, n in 1usize..7) {
        let s = randn_matrix(m, n, &mut rng(seed));
        let out = commutation_apply(m, n, s.as_slice()).unwrap();
        let st = s.transpose();
        prop_assert_eq!(out.as_slice(), st.as_slice());
        let back = commutation_apply(n, m, &out).unwrap();
        prop_assert_eq!(back.as_slice(), s.as_slice());
    }
}
