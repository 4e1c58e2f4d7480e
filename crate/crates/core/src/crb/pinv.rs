use serde::{Deserialize, Serialize};

use super::FimBlocks;
use crate::linalg::{pinv, singular_values};
use crate::tensor::{kronecker, Matrix};
use crate::{Error, Result};

/// Relative singular-value threshold for the numerical rank of `Ψ`.
pub const RANK_RTOL: f64 = 1e-9;

/// Inverses of inner matrices with reciprocal condition below this send
/// the computation to the dense fallback.
const INNER_RCOND: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrbMethod {
    Structured,
    DenseFallback,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrbReport {
    /// Lower bound on `E‖Â_n − A_n‖²` per mode (trace of the mode block).
    pub mode_traces: Vec<f64>,
    pub total_trace: f64,
    /// Numerical rank deficiency of `Ψ`; `None` when too large to check.
    pub deficiency: Option<usize>,
    /// `(N−1)F`, the deficiency of an identifiable model.
    pub expected_deficiency: usize,
    pub method: CrbMethod,
    /// Multiplier applied to the traces of `Ψ†` (σ² for Gaussian noise).
    pub scale: f64,
}

/// Noise distributions whose Fisher information is a multiple of `Ψ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    /// Variance `σ²`: `Φ = Ψ / σ²`.
    Gaussian { sigma2: f64 },
    /// Scale `b`: `Φ = 2Ψ / b²`.
    Laplacian { b: f64 },
    /// Scale `γ`: `Φ = Ψ / (2γ²)`.
    Cauchy { gamma: f64 },
}

impl NoiseModel {
    /// Factor multiplying `Ψ†` in the bound.
    pub fn bound_scale(&self) -> Result<f64> {
        let (p, s) = match *self {
            NoiseModel::Gaussian { sigma2 } => (sigma2, sigma2),
            NoiseModel::Laplacian { b } => (b, b * b / 2.0),
            NoiseModel::Cauchy { gamma } => (gamma, 2.0 * gamma * gamma),
        };
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::invalid("noise parameter must be positive"));
        }
        Ok(s)
    }
}

/// Multiply every bound in `crb` by the inverse information scale of
/// `noise`. Applied to a unit-variance report this gives the bound under
/// `noise`; repeated application composes multiplicatively.
pub fn noise_rescale(crb: &CrbReport, noise: NoiseModel) -> Result<CrbReport> {
    let s = noise.bound_scale()?;
    let mut out = crb.clone();
    out.mode_traces.iter_mut().for_each(|t| *t *= s);
    out.total_trace *= s;
    out.scale *= s;
    Ok(out)
}

/// Numerical rank deficiency of `Ψ` (singular values below
/// `RANK_RTOL · σ_max`), from a dense SVD.
pub fn fim_rank_deficiency(fim: &FimBlocks) -> Result<usize> {
    let psi = fim.dense_psi()?;
    let s = singular_values(&psi);
    let tol = RANK_RTOL * s.first().copied().unwrap_or(0.0);
    Ok(s.iter().filter(|&&v| v <= tol).count())
}

fn inverse(m: &Matrix) -> Option<Matrix> {
    let s = singular_values(m);
    let (max, min) = (s.first().copied()?, s.last().copied()?);
    if !(max > 0.0) || min / max < INNER_RCOND {
        return None;
    }
    m.clone().try_inverse()
}

/// Pieces of `Ψ† = Ω⁻¹ − L(LᵀL)⁻²Lᵀ` with
/// `Ω⁻¹ = Δ⁻¹ − Δ⁻¹Υ S⁻¹ ΥᵀΔ⁻¹`, `S = (K + EEᵀ)⁻¹ + ΥᵀΔ⁻¹Υ`.
struct Structured {
    gamma_inv: Vec<Matrix>,
    s_inv: Matrix,
    l: Matrix,
    ltl_inv: Matrix,
}

fn structured(fim: &FimBlocks) -> Option<Structured> {
    let n = fim.ndim();
    let f = fim.rank();
    let ff = f * f;
    let gamma_inv = (0..n).map(|d| inverse(&fim.gamma(d))).collect::<Option<Vec<_>>>()?;
    let e = fim.e_matrix();
    let g_inv = inverse(&(fim.k_matrix() + &e * e.transpose()))?;
    let mut s = g_inv;
    for d in 0..n {
        let mut block = s.view_mut((d * ff, d * ff), (ff, ff));
        block += kronecker(&gamma_inv[d], fim.gram(d));
    }
    let s_inv = inverse(&s)?;
    // LᵀL = Eᵀ blkdiag(I_F ⊗ H_dᵀH_d) E.
    let mut ups_gram = Matrix::zeros(n * ff, n * ff);
    for d in 0..n {
        ups_gram.view_mut((d * ff, d * ff), (ff, ff)).copy_from(&kronecker(&Matrix::identity(f, f), fim.gram(d)));
    }
    let ltl_inv = inverse(&(e.transpose() * ups_gram * &e))?;
    Some(Structured { gamma_inv, s_inv, l: fim.null_basis(), ltl_inv })
}

impl Structured {
    /// Per-mode traces of `Ψ†` using only `F`-sized matrices.
    fn traces(&self, fim: &FimBlocks) -> Vec<f64> {
        let f = fim.rank();
        let ff = f * f;
        let m2 = &self.ltl_inv * &self.ltl_inv;
        (0..fim.ndim())
            .map(|d| {
                let nd = fim.factors()[d].nrows() as f64;
                let gi = &self.gamma_inv[d];
                let delta_inv = nd * gi.trace();
                let gi2 = gi * gi;
                let inner = (self.s_inv.view((d * ff, d * ff), (ff, ff)) * kronecker(&gi2, fim.gram(d))).trace();
                let od = fim.offset(d);
                let rows = fim.factors()[d].nrows() * f;
                let ld = self.l.rows(od, rows);
                let null = (&m2 * (ld.transpose() * ld)).trace();
                delta_inv - inner - null
            })
            .collect()
    }

    fn dense(&self, fim: &FimBlocks) -> Matrix {
        let n = fim.ndim();
        let f = fim.rank();
        let ff = f * f;
        let p = fim.num_params();
        let mut delta_inv = Matrix::zeros(p, p);
        let mut du = Matrix::zeros(p, n * ff);
        for d in 0..n {
            let nd = fim.factors()[d].nrows();
            let od = fim.offset(d);
            delta_inv
                .view_mut((od, od), (nd * f, nd * f))
                .copy_from(&kronecker(&self.gamma_inv[d], &Matrix::identity(nd, nd)));
            du.view_mut((od, d * ff), (nd * f, ff)).copy_from(&kronecker(&self.gamma_inv[d], &fim.factors()[d]));
        }
        let m2 = &self.ltl_inv * &self.ltl_inv;
        delta_inv - &du * &self.s_inv * du.transpose() - &self.l * m2 * self.l.transpose()
    }
}

/// Cramér–Rao bound `σ²Ψ†` for the model behind `fim`.
///
/// When the rank deficiency of `Ψ` equals `(N−1)F`, `Ψ†` follows from the
/// null-space completion `Ω = Ψ + LLᵀ` and the matrix inversion lemma; the
/// only inverses taken are of `F × F` and `NF² × NF²` matrices. Any other
/// deficiency, or an ill-conditioned inner matrix, falls back to a dense
/// SVD pseudo-inverse and says so in the report. With `want_matrix` the
/// dense `Ψ†` (unit noise) is returned as well.
pub fn crb_pinv(fim: &FimBlocks, want_matrix: bool) -> Result<(CrbReport, Option<Matrix>)> {
    let expected = (fim.ndim() - 1) * fim.rank();
    let deficiency = if fim.num_params() <= super::DENSE_PARAM_LIMIT { Some(fim_rank_deficiency(fim)?) } else { None };
    let pieces = if deficiency.is_none_or(|d| d == expected) { structured(fim) } else { None };
    let sigma2 = fim.sigma2();
    let (traces, matrix, method) = match pieces {
        Some(s) => {
            let m = if want_matrix { Some(s.dense(fim)) } else { None };
            (s.traces(fim), m, CrbMethod::Structured)
        }
        None => {
            let p = pinv(&fim.dense_psi()?, RANK_RTOL);
            let traces = (0..fim.ndim())
                .map(|d| {
                    let (o, r) = (fim.offset(d), fim.factors()[d].nrows() * fim.rank());
                    (0..r).map(|i| p[(o + i, o + i)]).sum()
                })
                .collect();
            (traces, want_matrix.then_some(p), CrbMethod::DenseFallback)
        }
    };
    let mode_traces: Vec<f64> = traces.into_iter().map(|t: f64| t * sigma2).collect();
    let report = CrbReport {
        total_trace: mode_traces.iter().sum(),
        mode_traces,
        deficiency,
        expected_deficiency: expected,
        method,
        scale: sigma2,
    };
    Ok((report, matrix))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpd::random_model;
    use crate::crb::build_fim;
    use crate::linalg::rel_diff;
    use crate::tensor::KruskalModel;

    fn check_against_dense(shape: &[usize], f: usize, seed: u64) {
        let m = random_model(shape, f, seed, 0);
        let fim = build_fim(&m, 1.0).unwrap();
        let (rep, p) = crb_pinv(&fim, true).unwrap();
        assert_eq!(rep.method, CrbMethod::Structured);
        let p = p.unwrap();
        let oracle = pinv(&fim.dense_psi().unwrap(), RANK_RTOL);
        assert!(rel_diff(&p, &oracle) < 1e-8, "{}", rel_diff(&p, &oracle));
        assert!((rep.total_trace - oracle.trace()).abs() < 1e-8 * oracle.trace());
    }

    #[test]
    fn structured_equals_dense_pinv() {
        check_against_dense(&[6, 6, 6], 2, 1);
        check_against_dense(&[8, 5, 4], 3, 2);
        check_against_dense(&[4, 3, 3, 2], 2, 3);
    }

    #[test]
    fn moore_penrose_conditions() {
        let m = random_model(&[5, 4, 4], 2, 7, 0);
        let fim = build_fim(&m, 1.0).unwrap();
        let psi = fim.dense_psi().unwrap();
        let p = crb_pinv(&fim, true).unwrap().1.unwrap();
        let scale = psi.norm() * p.norm();
        assert!((&psi * &p * &psi - &psi).norm() < 1e-8 * psi.norm() * scale);
        assert!((&p * &psi * &p - &p).norm() < 1e-8 * p.norm() * scale);
        let pp = &psi * &p;
        assert!((&pp - pp.transpose()).norm() < 1e-8 * scale);
        let pp = &p * &psi;
        assert!((&pp - pp.transpose()).norm() < 1e-8 * scale);
    }

    #[test]
    fn deficiency_counts() {
        for seed in 0..5 {
            let fim = build_fim(&random_model(&[4, 4, 4], 2, seed, 0), 1.0).unwrap();
            assert_eq!(fim_rank_deficiency(&fim).unwrap(), 4);
            let fim = build_fim(&random_model(&[3, 3, 2, 2], 2, seed, 0), 1.0).unwrap();
            assert_eq!(fim_rank_deficiency(&fim).unwrap(), 6);
        }
    }

    #[test]
    fn repeated_column_falls_back() {
        let mut m = random_model(&[4, 4, 4], 2, 3, 0);
        let c0 = m.factors[2].column(0).clone_owned();
        m.factors[2].column_mut(1).copy_from(&c0);
        let fim = build_fim(&m, 1.0).unwrap();
        let d = fim_rank_deficiency(&fim).unwrap();
        assert!(d > 4, "{d}");
        let (rep, p) = crb_pinv(&fim, true).unwrap();
        assert_eq!(rep.method, CrbMethod::DenseFallback);
        let oracle = pinv(&fim.dense_psi().unwrap(), RANK_RTOL);
        assert!(rel_diff(&p.unwrap(), &oracle) < 1e-8);
    }

    #[test]
    fn noise_scaling() {
        let m: KruskalModel = random_model(&[4, 3, 3], 2, 1, 0);
        let (unit, _) = crb_pinv(&build_fim(&m, 1.0).unwrap(), false).unwrap();
        let (four, _) = crb_pinv(&build_fim(&m, 4.0).unwrap(), false).unwrap();
        for (a, b) in unit.mode_traces.iter().zip(&four.mode_traces) {
            assert!((4.0 * a - b).abs() < 1e-10 * b);
            assert!(*a >= 0.0);
        }
        let sigma2 = 0.3;
        let g = noise_rescale(&unit, NoiseModel::Gaussian { sigma2 }).unwrap();
        let l = noise_rescale(&unit, NoiseModel::Laplacian { b: (2.0 * sigma2).sqrt() }).unwrap();
        assert!((g.total_trace - l.total_trace).abs() < 1e-12 * g.total_trace);
        let c = noise_rescale(&unit, NoiseModel::Cauchy { gamma: 0.5 }).unwrap();
        assert!((c.total_trace - 0.5 * unit.total_trace).abs() < 1e-12);
        let twice = noise_rescale(&g, NoiseModel::Cauchy { gamma: 0.5 }).unwrap();
        assert!((twice.total_trace - 0.5 * sigma2 * unit.total_trace).abs() < 1e-12 * unit.total_trace);
        assert!(noise_rescale(&unit, NoiseModel::Laplacian { b: 0.0 }).is_err());
    }
}
