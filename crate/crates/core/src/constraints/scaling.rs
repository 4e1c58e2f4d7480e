use nalgebra::DVector;

use super::prox::{isotonic_nondecreasing, keep_largest, project_simplex};
use super::Constraint;
use crate::tensor::Matrix;
use crate::{Error, Result};

/// Euclidean projection onto a column-wise constraint set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Projector {
    Identity,
    Nonnegative,
    Simplex,
    HardSparsity(usize),
    Monotone,
}

impl Projector {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match *self {
            Projector::Identity => v.to_vec(),
            Projector::Nonnegative => v.iter().map(|x| x.max(0.0)).collect(),
            Projector::Simplex => project_simplex(v),
            Projector::HardSparsity(s) => keep_largest(v, s),
            Projector::Monotone => isotonic_nondecreasing(v),
        }
    }

    pub fn for_constraint(c: &Constraint) -> Option<Projector> {
        match *c {
            Constraint::None => Some(Projector::Identity),
            Constraint::Nonnegative => Some(Projector::Nonnegative),
            Constraint::Simplex => Some(Projector::Simplex),
            Constraint::HardSparsity { s } => Some(Projector::HardSparsity(s)),
            Constraint::MonotoneNondecreasing => Some(Projector::Monotone),
            _ => None,
        }
    }
}

/// Best constrained `c` in `min ‖X̃ − m cᵀ‖_F²`: the projection of the
/// unconstrained coefficients `X̃ᵀm / ‖m‖²` onto the constraint set.
pub fn optimal_scaling_update(residual: &Matrix, m: &DVector<f64>, projector: Projector) -> Result<DVector<f64>> {
    if residual.nrows() != m.len() {
        return Err(Error::shape(format!("{} rows vs vector of length {}", residual.nrows(), m.len())));
    }
    let nn = m.norm_squared();
    if !(nn > 0.0) {
        return Err(Error::invalid("optimal scaling needs a nonzero vector"));
    }
    let c = residual.tr_mul(m) / nn;
    Ok(DVector::from_vec(projector.apply(c.as_slice())))
}

/// One pass of column-wise optimal-scaling updates on `factor`, using the
/// Gram `G` of the other modes' Khatri–Rao product and the MTTKRP `M`.
///
/// For column `f` the residual with the other components removed gives
/// `c̃ = (M(:,f) − A G(:,f) + a_f G(f,f)) / G(f,f)` without forming it.
pub fn osl_column_sweep(gram: &Matrix, mttkrp: &Matrix, factor: &mut Matrix, projector: Projector) {
    for f in 0..factor.ncols() {
        let gff = gram[(f, f)];
        if !(gff > 0.0) {
            continue;
        }
        let c = (mttkrp.column(f) - &*factor * gram.column(f) + factor.column(f) * gff) / gff;
        let p = projector.apply(c.as_slice());
        factor.column_mut(f).copy_from_slice(&p);
    }
}
