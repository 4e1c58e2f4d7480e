use serde::{Deserialize, Serialize};

use crate::tensor::{KruskalModel, Matrix};
use crate::{Error, Result};

/// Canonical form of a model: unit-norm columns, weights sorted in
/// descending order, and a deterministic sign pattern.
///
/// Every factor except the last has its largest-magnitude entry positive
/// in each column (the lowest row wins ties); the product of the removed
/// signs goes into the last factor. Normalizing an already normalized
/// model returns it bit for bit.
pub fn normalize_model(m: &KruskalModel) -> KruskalModel {
    normalize_model_flagged(m).0
}

/// [`normalize_model`], also returning the original indices of components
/// that were identically zero. Such components get weight 0 and columns
/// `e_1`.
pub fn normalize_model_flagged(m: &KruskalModel) -> (KruskalModel, Vec<usize>) {
    normalize_impl(m, true)
}

/// Unit-norm columns and sorted weights without sign changes, for factors
/// whose constraint is not sign symmetric. Negative weights stay negative.
pub(crate) fn normalize_keep_signs(m: &KruskalModel) -> KruskalModel {
    normalize_impl(m, false).0
}

fn normalize_impl(m: &KruskalModel, fix_signs: bool) -> (KruskalModel, Vec<usize>) {
    let n_modes = m.ndim();
    let mut factors = m.factors.clone();
    let mut weights = m.weights.clone();
    let mut zero = vec![];
    for f in 0..m.rank() {
        let mut w = weights[f];
        let mut is_zero = w == 0.0;
        for a in factors.iter_mut() {
            let norm = a.column(f).norm();
            if norm == 0.0 || !norm.is_finite() {
                is_zero = true;
                continue;
            }
            if (norm - 1.0).abs() >= 1e-15 {
                a.column_mut(f).unscale_mut(norm);
                w *= norm;
            }
        }
        if is_zero {
            zero.push(f);
            weights[f] = 0.0;
            for a in factors.iter_mut() {
                a.column_mut(f).fill(0.0);
                a[(0, f)] = 1.0;
            }
            continue;
        }
        if !fix_signs {
            weights[f] = w;
            continue;
        }
        let mut negative = w < 0.0;
        for a in factors.iter_mut().take(n_modes - 1) {
            let col = a.column(f);
            let mut best = 0;
            for i in 1..col.len() {
                if col[i].abs() > col[best].abs() {
                    best = i;
                }
            }
            if col[best] < 0.0 {
                a.column_mut(f).neg_mut();
                negative = !negative;
            }
        }
        if negative {
            factors[n_modes - 1].column_mut(f).neg_mut();
        }
        weights[f] = w.abs();
    }
    let mut order: Vec<usize> = (0..m.rank()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
    let factors = factors.iter().map(|a| Matrix::from_fn(a.nrows(), a.ncols(), |i, c| a[(i, order[c])])).collect();
    let weights = order.iter().map(|&c| weights[c]).collect();
    (KruskalModel { factors, weights }, zero)
}

/// Correspondence between a reference model and an estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorMatch {
    /// `permutation[f]` is the estimate component matched to reference `f`.
    pub permutation: Vec<usize>,
    /// Per matched pair, the product over modes of `|cos|` between columns.
    pub congruence: Vec<f64>,
    /// Smallest congruence; 1 means every column agrees up to scaling.
    pub score: f64,
    /// Largest `‖a_ref − s·a_est‖ / ‖a_ref‖` over modes and components
    /// after scaling.
    pub max_relative_error: f64,
    /// `scalings[n][f]` multiplies estimate column `permutation[f]` of mode
    /// `n`. Modes before the last use least-squares scalings and the last
    /// mode compensates so that each rank-1 term is unchanged.
    pub scalings: Vec<Vec<f64>>,
}

fn cosine(a: nalgebra::DVectorView<f64>, b: nalgebra::DVectorView<f64>) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (a.dot(&b) / (na * nb)).abs()
    }
}

/// Resolve the permutation and scaling ambiguity of `estimate` against
/// `reference`.
///
/// Components are paired greedily by largest congruence, which is exact
/// whenever the estimate is close to the reference. Weights are absorbed
/// into the first factor on both sides. The estimate may have more
/// components than the reference; the unmatched ones are ignored.
pub fn match_factors(reference: &KruskalModel, estimate: &KruskalModel) -> Result<FactorMatch> {
    if reference.shape() != estimate.shape() {
        return Err(Error::shape("reference and estimate shapes differ"));
    }
    if estimate.rank() < reference.rank() {
        return Err(Error::invalid("estimate has fewer components than the reference"));
    }
    let r = reference.absorbed_factors();
    let e = estimate.absorbed_factors();
    let (fr, fe) = (reference.rank(), estimate.rank());
    let cong = |f: usize, g: usize| r.iter().zip(&e).map(|(a, b)| cosine(a.column(f), b.column(g))).product::<f64>();
    let mut pairs: Vec<(f64, usize, usize)> =
        (0..fr).flat_map(|f| (0..fe).map(move |g| (f, g))).map(|(f, g)| (cong(f, g), f, g)).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut permutation = vec![usize::MAX; fr];
    let mut congruence = vec![0.0; fr];
    let mut used = vec![false; fe];
    for (c, f, g) in pairs {
        if permutation[f] == usize::MAX && !used[g] {
            permutation[f] = g;
            congruence[f] = c;
            used[g] = true;
        }
    }
    let n = r.len();
    let mut scalings = vec![vec![1.0; fr]; n];
    let mut max_relative_error: f64 = 0.0;
    for f in 0..fr {
        let g = permutation[f];
        let mut prod = 1.0;
        for m in 0..n {
            let (a, b) = (r[m].column(f), e[m].column(g));
            let s = if m + 1 < n {
                let bb = b.norm_squared();
                let s = if bb > 0.0 { a.dot(&b) / bb } else { 0.0 };
                prod *= s;
                s
            } else if prod != 0.0 {
                1.0 / prod
            } else {
                0.0
            };
            scalings[m][f] = s;
            let na = a.norm();
            let err = (a - b * s).norm();
            let rel = if na > 0.0 { err / na } else { err };
            max_relative_error = max_relative_error.max(rel);
        }
    }
    let score = congruence.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(FactorMatch { permutation, congruence, score, max_relative_error, scalings })
}

/// Estimate factors permuted and scaled onto the reference (weights
/// absorbed), one matrix per mode with the reference's column count.
pub fn align_to_reference(reference: &KruskalModel, estimate: &KruskalModel) -> Result<Vec<Matrix>> {
    let fm = match_factors(reference, estimate)?;
    let e = estimate.absorbed_factors();
    Ok(e.iter()
        .enumerate()
        .map(|(m, b)| {
            Matrix::from_fn(b.nrows(), reference.rank(), |i, f| b[(i, fm.permutation[f])] * fm.scalings[m][f])
        })
        .collect())
}
