//! Tucker models: truncated multilinear SVD, higher-order orthogonal
//! iteration, truncation error bounds, and CPD in a compressed space.

mod hooi;

pub use hooi::{tucker_als, TuckerOptions, TuckerReport};

use crate::cpd::{cpd_als, FitOptions, FitReport, Init};
use crate::linalg::{fix_column_signs, leading_right_singular_vectors};
use crate::tensor::{fold, unfold, DenseTensor, KruskalModel, Matrix};
use crate::{Error, Result};

/// `X ≈ G ×_0 U_0 ×_1 U_1 ⋯` with orthonormal `U_n` of size `I_n × r_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct TuckerModel {
    pub core: DenseTensor,
    pub bases: Vec<Matrix>,
}

impl TuckerModel {
    pub fn ranks(&self) -> Vec<usize> {
        self.bases.iter().map(|u| u.ncols()).collect()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.bases.iter().map(|u| u.nrows()).collect()
    }
}

/// `X ×_mode M`: every mode-`mode` fiber is multiplied by `M`, so that
/// dimension `mode` becomes `M.nrows()`.
pub fn mode_product(t: &DenseTensor, m: &Matrix, mode: usize) -> Result<DenseTensor> {
    let x = unfold(t, mode)?;
    if m.ncols() != t.shape()[mode] {
        return Err(Error::shape(format!("mode-{mode} product with a {}×{} matrix", m.nrows(), m.ncols())));
    }
    let mut shape = t.shape().to_vec();
    shape[mode] = m.nrows();
    fold(&(x * m.transpose()), mode, &shape)
}

fn check_ranks(shape: &[usize], ranks: &[usize]) -> Result<()> {
    if ranks.len() != shape.len() {
        return Err(Error::shape(format!("{} ranks for a {}-way tensor", ranks.len(), shape.len())));
    }
    for (n, (&r, &i)) in ranks.iter().zip(shape).enumerate() {
        if r == 0 || r > i {
            return Err(Error::invalid(format!("rank {r} for mode {n} of size {i}")));
        }
    }
    Ok(())
}

/// Leading `r` right singular vectors of `m`, completed to `r` orthonormal
/// columns when `m` has fewer rows than `r`.
pub(crate) fn dominant_basis(m: &Matrix, r: usize) -> Matrix {
    let v = leading_right_singular_vectors(m, r);
    if v.ncols() == r {
        return v;
    }
    let n = m.ncols();
    let mut cols: Vec<nalgebra::DVector<f64>> = v.column_iter().map(|c| c.into_owned()).collect();
    for e in 0..n {
        if cols.len() == r {
            break;
        }
        let mut x = nalgebra::DVector::from_fn(n, |i, _| if i == e { 1.0 } else { 0.0 });
        for _ in 0..2 {
            for c in &cols {
                let d = c.dot(&x);
                x.axpy(-d, c, 1.0);
            }
        }
        let norm = x.norm();
        if norm > 1e-8 {
            cols.push(x / norm);
        }
    }
    let mut out = Matrix::from_columns(&cols);
    fix_column_signs(&mut out);
    out
}

/// Project `t` onto the bases: `t ×_0 U_0ᵀ ×_1 U_1ᵀ ⋯`.
pub fn project(t: &DenseTensor, bases: &[Matrix]) -> Result<DenseTensor> {
    let mut g = t.clone();
    for (n, u) in bases.iter().enumerate() {
        g = mode_product(&g, &u.transpose(), n)?;
    }
    Ok(g)
}

/// Truncated multilinear SVD: basis `n` is the `r_n` dominant right
/// singular vectors of the mode-`n` unfolding (largest entry of each
/// column positive) and the core is the projection of `t` onto them.
pub fn mlsvd(t: &DenseTensor, ranks: &[usize]) -> Result<TuckerModel> {
    check_ranks(t.shape(), ranks)?;
    let bases =
        ranks.iter().enumerate().map(|(n, &r)| Ok(dominant_basis(&unfold(t, n)?, r))).collect::<Result<Vec<_>>>()?;
    let core = project(t, &bases)?;
    Ok(TuckerModel { core, bases })
}

/// Full tensor `G ×_0 U_0 ×_1 U_1 ⋯`, one mode product at a time.
pub fn tucker_reconstruct(m: &TuckerModel) -> Result<DenseTensor> {
    let mut x = m.core.clone();
    for (n, u) in m.bases.iter().enumerate() {
        x = mode_product(&x, u, n)?;
    }
    Ok(x)
}

/// Squared Frobenius norms of the mode-`mode` slabs of `core`.
pub fn slab_norms_sq(core: &DenseTensor, mode: usize) -> Result<Vec<f64>> {
    let u = unfold(core, mode)?;
    Ok(u.column_iter().map(|c| c.norm_squared()).collect())
}

/// Upper bound on `‖X − X̂‖²` when the core of a full MLSVD is truncated
/// to `kept` ranks: the sum over modes of the squared norms of the
/// discarded slabs. Exact when only one mode is truncated.
pub fn truncation_error_bound(full_core: &DenseTensor, kept: &[usize]) -> Result<f64> {
    check_ranks(full_core.shape(), kept)?;
    let mut total = 0.0;
    for (n, &r) in kept.iter().enumerate() {
        total += slab_norms_sq(full_core, n)?[r..].iter().sum::<f64>();
    }
    Ok(total)
}

/// CPD fitted to the MLSVD core and expanded with the bases, `A_n = U_n Ã_n`.
///
/// Provided initial models are projected into the compressed space. The
/// reported losses are for the original tensor, which for orthonormal
/// bases is the core loss plus `‖X‖² − ‖G‖²`.
pub fn compress_then_cpd(t: &DenseTensor, ranks: &[usize], opts: &FitOptions) -> Result<(KruskalModel, FitReport)> {
    let tk = mlsvd(t, ranks)?;
    let prod: usize = ranks.iter().product();
    let limit = ranks.iter().map(|&r| prod / r).min().unwrap_or(0);
    if opts.rank > limit {
        return Err(Error::invalid(format!(
            "rank {} exceeds {limit}, the largest the compressed core supports",
            opts.rank
        )));
    }
    let mut core_opts = opts.clone();
    if let Init::Provided(m) = &opts.init {
        if m.shape() != t.shape() {
            return Err(Error::shape("provided initial model does not match the data"));
        }
        let factors = m.factors.iter().zip(&tk.bases).map(|(a, u)| u.transpose() * a).collect();
        core_opts.init = Init::Provided(KruskalModel::new(factors, m.weights.clone())?);
    }
    let (small, mut report) = cpd_als(&tk.core, &core_opts)?;
    let offset = (t.norm_sq() - tk.core.norm_sq()).max(0.0);
    report.loss.iter_mut().for_each(|l| *l += offset);
    let factors = small.factors.iter().zip(&tk.bases).map(|(a, u)| u * a).collect();
    Ok((KruskalModel::new(factors, small.weights)?, report))
}
