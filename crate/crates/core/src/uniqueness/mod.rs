//! Identifiability of CPD models.
//!
//! Deterministic checks work on a given model (Kruskal ranks, ranks of
//! factors and of compound Khatri–Rao products). Generic checks depend
//! only on the dimensions and the number of components. A verdict is
//! `Unique` only when a sufficient condition holds and
//! `NecessaryConditionViolated` only when a necessary one fails; failing a
//! sufficient condition alone gives `Inconclusive`.

mod compound;
mod generic;

pub use compound::{compound_matrix, CompoundMatrix};
pub use generic::{check_generic, generic_rank, known_generic_exception, rank_bounds, RankBounds};

use std::collections::BTreeMap;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::linalg::{numerical_rank, singular_values};
use crate::tensor::{khatri_rao, khatri_rao_chain, unfold, DenseTensor, KruskalModel, Matrix};
use crate::{Error, Result};

/// Relative tolerance for k-ranks and ranks.
pub const RANK_RTOL: f64 = 1e-9;

/// Largest column count accepted by [`k_rank`]; the cost grows like
/// `C(F, k)` SVDs.
pub const K_RANK_MAX_COLS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Unique,
    Inconclusive,
    NecessaryConditionViolated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessVerdict {
    pub verdict: Verdict,
    /// Name of the condition that decided the verdict.
    pub condition: String,
    /// Quantities the decision was based on (k-ranks, ranks, bounds).
    pub witnesses: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl UniquenessVerdict {
    pub(crate) fn new(verdict: Verdict, condition: &str) -> Self {
        Self { verdict, condition: condition.into(), witnesses: BTreeMap::new(), notes: vec![] }
    }

    pub(crate) fn with(mut self, name: &str, value: f64) -> Self {
        self.witnesses.insert(name.into(), value);
        self
    }
}

/// Kruskal rank: the largest `k` such that every set of `k` columns has
/// smallest singular value above `tol · σ_max(a)`.
///
/// Checks every subset of each size in turn, so the cost is exponential in
/// the column count; more than [`K_RANK_MAX_COLS`] columns is an error.
pub fn k_rank(a: &Matrix, tol: f64) -> Result<usize> {
    let f = a.ncols();
    if f > K_RANK_MAX_COLS {
        return Err(Error::TooLarge(format!("k-rank of {f} columns (limit {K_RANK_MAX_COLS})")));
    }
    if a.nrows() == 0 || f == 0 {
        return Ok(0);
    }
    let smax = singular_values(a).first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(0);
    }
    let thresh = tol * smax;
    let mut k = 0;
    for size in 1..=f.min(a.nrows()) {
        let all_independent = (0..f).combinations(size).all(|cols| {
            let sub = a.select_columns(cols.iter());
            singular_values(&sub).last().copied().unwrap_or(0.0) > thresh
        });
        if !all_independent {
            break;
        }
        k = size;
    }
    Ok(k)
}

fn k_ranks(factors: &[Matrix]) -> Result<Vec<usize>> {
    factors.iter().map(|a| k_rank(a, RANK_RTOL)).collect()
}

/// Kruskal's condition `Σ_n k_n ≥ 2F + N − 1` from known k-ranks.
///
/// With `F > 1`, a k-rank below 2 in any mode rules uniqueness out.
pub fn check_kruskal_from_k_ranks(k: &[usize], rank: usize) -> UniquenessVerdict {
    let n = k.len();
    let sum: usize = k.iter().sum();
    let bound = 2 * rank + n - 1;
    let mut v = if rank == 1 {
        UniquenessVerdict::new(Verdict::Unique, "single-component")
    } else if k.iter().any(|&x| x < 2) {
        UniquenessVerdict::new(Verdict::NecessaryConditionViolated, "k-rank-at-least-two")
    } else if sum >= bound {
        UniquenessVerdict::new(Verdict::Unique, "kruskal")
    } else {
        UniquenessVerdict::new(Verdict::Inconclusive, "kruskal")
    };
    for (i, &x) in k.iter().enumerate() {
        v = v.with(&format!("k_rank_{i}"), x as f64);
    }
    v.with("k_rank_sum", sum as f64).with("kruskal_bound", bound as f64)
}

/// Kruskal's condition on a model, plus the necessary condition that the
/// Khatri–Rao product of every `N − 1` factors has full column rank.
pub fn check_kruskal(model: &KruskalModel) -> Result<UniquenessVerdict> {
    let f = model.rank();
    let mut v = check_kruskal_from_k_ranks(&k_ranks(&model.factors)?, f);
    if f > 1 && v.verdict != Verdict::NecessaryConditionViolated {
        for n in 0..model.ndim() {
            let others: Vec<&Matrix> =
                model.factors.iter().enumerate().filter(|&(m, _)| m != n).map(|(_, a)| a).collect();
            let r = numerical_rank(&khatri_rao_chain(&others)?, RANK_RTOL);
            if r < f {
                let mut bad =
                    UniquenessVerdict::new(Verdict::NecessaryConditionViolated, "khatri-rao-full-column-rank");
                bad.witnesses = v.witnesses.clone();
                v = bad.with("khatri_rao_mode", n as f64).with("khatri_rao_rank", r as f64);
                break;
            }
        }
    }
    Ok(v)
}

/// Conditions for three-way models with at least one full-column-rank
/// factor. With `r_C = F`, uniqueness follows when `M₂(B) ⊙ M₂(A)` has
/// full column rank `C(F, 2)`; with `r_A = r_B = F`, it follows when
/// `k_C ≥ 2`. Every mode is tried in the role of `C`.
pub fn check_one_mode_full_rank(model: &KruskalModel) -> Result<UniquenessVerdict> {
    if model.ndim() != 3 {
        return Err(Error::invalid("one-mode full-rank conditions are for three-way models"));
    }
    let f = model.rank();
    if f == 1 {
        return Ok(UniquenessVerdict::new(Verdict::Unique, "single-component"));
    }
    let k = k_ranks(&model.factors)?;
    let ranks: Vec<usize> = model.factors.iter().map(|a| numerical_rank(a, RANK_RTOL)).collect();
    let with_ranks = |mut v: UniquenessVerdict| {
        for i in 0..3 {
            v = v.with(&format!("k_rank_{i}"), k[i] as f64).with(&format!("rank_{i}"), ranks[i] as f64);
        }
        v
    };
    if k.iter().any(|&x| x < 2) {
        return Ok(with_ranks(UniquenessVerdict::new(Verdict::NecessaryConditionViolated, "k-rank-at-least-two")));
    }
    let pairs = f * (f - 1) / 2;
    for c in 0..3 {
        let (a, b) = match c {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let (fa, fb) = (&model.factors[a], &model.factors[b]);
        if ranks[c] == f && fa.nrows() >= 2 && fb.nrows() >= 2 {
            let m = khatri_rao(&compound_matrix(fb, 2)?.matrix, &compound_matrix(fa, 2)?.matrix)?;
            let r = numerical_rank(&m, RANK_RTOL);
            if r == pairs {
                return Ok(with_ranks(UniquenessVerdict::new(Verdict::Unique, "compound-khatri-rao-full-rank"))
                    .with("full_rank_mode", c as f64)
                    .with("compound_rank", r as f64));
            }
        }
    }
    for c in 0..3 {
        let others: Vec<usize> = (0..3).filter(|&m| m != c).collect();
        if others.iter().all(|&m| ranks[m] == f) && k[c] >= 2 {
            return Ok(
                with_ranks(UniquenessVerdict::new(Verdict::Unique, "two-full-rank-modes")).with("kr2_mode", c as f64)
            );
        }
    }
    Ok(with_ranks(UniquenessVerdict::new(Verdict::Inconclusive, "one-mode-full-rank")))
}

/// All deterministic checks on `model`: the first `Unique` verdict wins;
/// otherwise a violated necessary condition; otherwise inconclusive.
pub fn check_model(model: &KruskalModel) -> Result<Vec<UniquenessVerdict>> {
    let mut out = vec![check_kruskal(model)?];
    if model.ndim() == 3 {
        out.push(check_one_mode_full_rank(model)?);
    }
    Ok(out)
}

/// Combine verdicts from several conditions.
pub fn summarize(verdicts: &[UniquenessVerdict]) -> Verdict {
    if verdicts.iter().any(|v| v.verdict == Verdict::Unique) {
        Verdict::Unique
    } else if verdicts.iter().any(|v| v.verdict == Verdict::NecessaryConditionViolated) {
        Verdict::NecessaryConditionViolated
    } else {
        Verdict::Inconclusive
    }
}

/// Ranks of the mode unfoldings.
pub fn multilinear_rank(t: &DenseTensor, rtol: f64) -> Result<Vec<usize>> {
    (0..t.ndim()).map(|n| Ok(numerical_rank(&unfold(t, n)?, rtol))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpd::random_model;
    use crate::io::fixtures;

    #[test]
    fn k_rank_examples() {
        assert_eq!(k_rank(&Matrix::identity(3, 3), RANK_RTOL).unwrap(), 3);
        let rep = Matrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 1.0, 3.0, 3.0, 5.0]);
        assert_eq!(k_rank(&rep, RANK_RTOL).unwrap(), 1);
        let m = Matrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        assert_eq!(k_rank(&m, RANK_RTOL).unwrap(), 2);
        let z = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(k_rank(&z, RANK_RTOL).unwrap(), 0);
        assert!(k_rank(&Matrix::zeros(3, 21), RANK_RTOL).is_err());
    }

    /// Exhaustive oracle: largest k such that every k-subset has full
    /// rank, with rank from a QR-free Gram determinant.
    fn k_rank_oracle(a: &Matrix) -> usize {
        let f = a.ncols();
        let mut best = 0;
        for k in 1..=f {
            let ok = (0..f).combinations(k).all(|c| {
                let s = a.select_columns(c.iter());
                (s.transpose() * &s).determinant().abs() > 1e-12
            });
            if !ok {
                break;
            }
            best = k;
        }
        best
    }

    #[test]
    fn k_rank_matches_oracle_on_integer_matrices() {
        let mut r = crate::random::rng(3);
        use rand::Rng as _;
        for _ in 0..50 {
            let m = Matrix::from_fn(3, 5, |_, _| r.random_range(-1i32..=1) as f64);
            let k = k_rank(&m, RANK_RTOL).unwrap();
            assert_eq!(k, k_rank_oracle(&m));
            assert!(k <= numerical_rank(&m, RANK_RTOL));
        }
    }

    #[test]
    fn kruskal_examples() {
        let cm = fixtures::complex_mult_model();
        let v = check_kruskal(&cm).unwrap();
        assert_eq!(v.verdict, Verdict::Inconclusive);
        assert_eq!(v.witnesses["k_rank_sum"], 6.0);
        let v = check_kruskal(&random_model(&[4, 4, 4], 3, 1, 0)).unwrap();
        assert_eq!(v.verdict, Verdict::Unique);
        assert_eq!(v.witnesses["k_rank_sum"], 9.0);
        let v = check_kruskal(&random_model(&[2, 3, 4], 1, 1, 0)).unwrap();
        assert_eq!(v.verdict, Verdict::Unique);
        let mut m = random_model(&[4, 4, 4], 2, 2, 0);
        let c0 = m.factors[2].column(0) * 2.0;
        m.factors[2].column_mut(1).copy_from(&c0);
        assert_eq!(check_kruskal(&m).unwrap().verdict, Verdict::NecessaryConditionViolated);
    }

    #[test]
    fn kruskal_verdict_is_monotone() {
        for f in 2..5 {
            for a in 0..=f {
                for b in 0..=f {
                    for c in 0..=f {
                        let v = check_kruskal_from_k_ranks(&[a, b, c], f).verdict;
                        if v == Verdict::Unique {
                            for bumped in [[a + 1, b, c], [a, b + 1, c], [a, b, c + 1]] {
                                assert_eq!(check_kruskal_from_k_ranks(&bumped, f).verdict, Verdict::Unique);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn one_mode_full_rank_routes() {
        let m = random_model(&[5, 5, 4], 4, 8, 0);
        let v = check_one_mode_full_rank(&m).unwrap();
        assert_eq!(v.verdict, Verdict::Unique);
        assert_eq!(v.condition, "compound-khatri-rao-full-rank");
        let mut m = random_model(&[5, 5, 4], 3, 8, 0);
        let c0 = m.factors[2].column(0) * -1.5;
        m.factors[2].column_mut(2).copy_from(&c0);
        assert_eq!(check_one_mode_full_rank(&m).unwrap().verdict, Verdict::NecessaryConditionViolated);
        // No mode has full column rank: falls through to inconclusive.
        let m = random_model(&[3, 3, 3], 5, 1, 0);
        assert_eq!(check_one_mode_full_rank(&m).unwrap().verdict, Verdict::Inconclusive);
    }

    #[test]
    fn compound_columns_nonzero_when_k_rank_two() {
        let m = random_model(&[3, 4], 4, 5, 0).factors[0].clone();
        assert!(k_rank(&m, RANK_RTOL).unwrap() >= 2);
        let c = compound_matrix(&m, 2).unwrap();
        assert!(c.matrix.column_iter().all(|col| col.norm() > 0.0));
    }

    #[test]
    fn multilinear_rank_of_complex_mult() {
        let t = fixtures::complex_mult();
        assert_eq!(multilinear_rank(&t, RANK_RTOL).unwrap(), vec![2, 2, 2]);
    }
}
