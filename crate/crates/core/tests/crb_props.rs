use proptest::prelude::*;

use trilinear::cpd::random_model;
use trilinear::crb::{build_fim, crb_pinv, fim_rank_deficiency, CrbMethod};
use trilinear::linalg::singular_values;
use trilinear::tensor::Matrix;

fn model_dims() -> impl Strategy<Value = (Vec<usize>, usize)> {
    (prop::collection::vec(2usize..5, 3..5), 1usize..4)
}

fn rel(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn psi_is_symmetric_psd_with_large_null_space(seed in any::<u64>(), (dims, f) in model_dims()) {
        let m = random_model(&dims, f, seed, 0);
        let fim = build_fim(&m, 1.0).unwrap();
        let psi = fim.dense_psi().unwrap();
        prop_assert!((&psi - psi.transpose()).norm() <= 1e-12 * psi.norm());
        let eig = psi.clone().symmetric_eigen().eigenvalues;
        let (lo, hi) = (eig.min(), eig.max());
        prop_assert!(lo >= -1e-10 * hi, "eigenvalues span [{lo}, {hi}]");
        let deficiency = fim_rank_deficiency(&fim).unwrap();
        prop_assert!(deficiency >= (dims.len() - 1) * f);
    }

    #[test]
    fn bound_pinv_satisfies_penrose_conditions(seed in any::<u64>(), (dims, f) in model_dims()) {
        let m = random_model(&dims, f, seed, 1);
        let fim = build_fim(&m, 1.0).unwrap();
        let psi = fim.dense_psi().unwrap();
        let (report, p) = crb_pinv(&fim, true).unwrap();
        let p = p.unwrap();
        // Near-degenerate draws leave Ψ so ill-conditioned that no
        // pseudo-inverse, the SVD one included, meets the tolerance.
        let sv = singular_values(&psi);
        let kept = sv.len() - report.deficiency.unwrap_or(report.expected_deficiency);
        prop_assume!(sv[0] <= 1e6 * sv[kept - 1]);
        let identifiable = report.deficiency == Some(report.expected_deficiency);
        prop_assert_eq!(report.method == CrbMethod::Structured, identifiable);
        let tol = 1e-8;
        prop_assert!(rel(&(&psi * &p * &psi), &psi) <= tol);
        prop_assert!(rel(&(&p * &psi * &p), &p) <= tol);
        // The symmetry conditions are measured against ‖Ψ‖‖P‖, the size of
        // the roundoff a product of the two can carry.
        let scale = psi.norm() * p.norm();
        let pp = &psi * &p;
        prop_assert!((&pp - pp.transpose()).norm() <= tol * scale);
        let qp = &p * &psi;
        prop_assert!((&qp - qp.transpose()).norm() <= tol * scale);
    }
}

#[test]
fn random_models_have_exactly_the_scaling_null_space() {
    for seed in 0..100 {
        let dims = [3 + seed as usize % 3, 3, 2 + seed as usize % 4];
        let f = 1 + seed as usize % 3;
        let m = random_model(&dims, f, seed, 0);
        let fim = build_fim(&m, 1.0).unwrap();
        assert_eq!(fim_rank_deficiency(&fim).unwrap(), 2 * f, "seed {seed}");
    }
}
