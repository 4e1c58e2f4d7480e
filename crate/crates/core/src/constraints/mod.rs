//! Constrained conditional updates for alternating fits: AO-ADMM with a
//! library of proximity operators, column-wise optimal scaling for
//! projection-type constraints, and the exact symmetric rank-1 update.

mod admm;
mod prox;
mod scaling;
mod symmetry;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use admm::{admm_constrained_ls, AdmmState, ADMM_MAX_INNER, ADMM_TOL};
pub use prox::{isotonic_nondecreasing, project_simplex, prox_apply};
pub use scaling::{optimal_scaling_update, osl_column_sweep, Projector};
pub use symmetry::{cpd_als_partial_symmetric, partial_symmetry_update};

use crate::tensor::Matrix;
use crate::{Error, Result};

/// Per-mode constraint on a factor matrix. Column-wise constraints act on
/// each column independently.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Constraint {
    #[default]
    None,
    Nonnegative,
    /// `λ‖A‖₁` penalty.
    L1 {
        lambda: f64,
    },
    /// Columns nonnegative and summing to one.
    Simplex,
    /// `λ Σ_f ‖D a_f‖²` with `D` the first-difference operator.
    Smooth {
        lambda: f64,
    },
    /// At most `s` nonzeros per column.
    HardSparsity {
        s: usize,
    },
    MonotoneNondecreasing,
    /// Factor tied to the factor of another mode.
    SymmetricWith {
        mode: usize,
    },
}

/// How a constraint is enforced inside an alternating fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Route {
    Unconstrained,
    Admm,
    ColumnProjection,
    SymmetricPenalty,
}

impl Constraint {
    pub fn validate(&self, mode: usize, shape: &[usize]) -> Result<()> {
        match *self {
            Constraint::L1 { lambda } | Constraint::Smooth { lambda } if !(lambda > 0.0) => {
                Err(Error::invalid(format!("mode {mode}: penalty weight must be positive")))
            }
            Constraint::HardSparsity { s } if s == 0 || s > shape[mode] => {
                Err(Error::invalid(format!("mode {mode}: sparsity level {s} must lie in 1..={}", shape[mode])))
            }
            Constraint::SymmetricWith { mode: other } => {
                if other >= shape.len() || other == mode {
                    Err(Error::invalid(format!("mode {mode}: cannot tie to mode {other}")))
                } else if shape[other] != shape[mode] {
                    Err(Error::invalid(format!("modes {mode} and {other} differ in size")))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub(crate) fn route(&self) -> Route {
        match self {
            Constraint::None => Route::Unconstrained,
            Constraint::Nonnegative | Constraint::L1 { .. } | Constraint::Simplex | Constraint::Smooth { .. } => {
                Route::Admm
            }
            Constraint::HardSparsity { .. } | Constraint::MonotoneNondecreasing => Route::ColumnProjection,
            Constraint::SymmetricWith { .. } => Route::SymmetricPenalty,
        }
    }

    /// Regularizer value `r(A)`; zero for set constraints.
    pub fn penalty(&self, a: &Matrix) -> f64 {
        match *self {
            Constraint::L1 { lambda } => lambda * a.iter().map(|x| x.abs()).sum::<f64>(),
            Constraint::Smooth { lambda } => {
                let mut s = 0.0;
                for col in a.column_iter() {
                    for i in 1..col.len() {
                        s += (col[i] - col[i - 1]).powi(2);
                    }
                }
                lambda * s
            }
            _ => 0.0,
        }
    }

    /// Whether `a` satisfies the constraint (penalties are always feasible).
    pub fn is_feasible(&self, a: &Matrix, tol: f64) -> bool {
        match *self {
            Constraint::Nonnegative => a.iter().all(|&x| x >= 0.0),
            Constraint::Simplex => a.column_iter().all(|c| c.iter().all(|&x| x >= 0.0) && (c.sum() - 1.0).abs() <= tol),
            Constraint::HardSparsity { s } => a.column_iter().all(|c| c.iter().filter(|&&x| x != 0.0).count() <= s),
            Constraint::MonotoneNondecreasing => a.column_iter().all(|c| (1..c.len()).all(|i| c[i] >= c[i - 1] - tol)),
            _ => true,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::None => write!(f, "none"),
            Constraint::Nonnegative => write!(f, "nonneg"),
            Constraint::L1 { lambda } => write!(f, "l1:{lambda}"),
            Constraint::Simplex => write!(f, "simplex"),
            Constraint::Smooth { lambda } => write!(f, "smooth:{lambda}"),
            Constraint::HardSparsity { s } => write!(f, "sparse:{s}"),
            Constraint::MonotoneNondecreasing => write!(f, "monotone"),
            Constraint::SymmetricWith { mode } => write!(f, "symmetric:{}", mode + 1),
        }
    }
}

/// Parses `none`, `nonneg`, `l1:λ`, `simplex`, `smooth:λ`, `sparse:s`,
/// `monotone` and `symmetric:m` (1-based mode).
impl FromStr for Constraint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let num = |what: &str| -> Result<f64> {
            arg.ok_or_else(|| Error::invalid(format!("{what} needs a parameter")))?
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("{what}: {e}")))
        };
        let int = |what: &str| -> Result<usize> {
            arg.ok_or_else(|| Error::invalid(format!("{what} needs a parameter")))?
                .parse::<usize>()
                .map_err(|e| Error::invalid(format!("{what}: {e}")))
        };
        Ok(match kind {
            "none" => Constraint::None,
            "nonneg" | "nonnegative" => Constraint::Nonnegative,
            "l1" => Constraint::L1 { lambda: num("l1")? },
            "simplex" => Constraint::Simplex,
            "smooth" => Constraint::Smooth { lambda: num("smooth")? },
            "sparse" | "hard-sparsity" => Constraint::HardSparsity { s: int("sparse")? },
            "monotone" => Constraint::MonotoneNondecreasing,
            "symmetric" | "sym" => {
                let m = int("symmetric")?;
                if m == 0 {
                    return Err(Error::invalid("symmetric mode is 1-based"));
                }
                Constraint::SymmetricWith { mode: m - 1 }
            }
            other => return Err(Error::invalid(format!("unknown constraint kind '{other}'"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for s in ["none", "nonneg", "l1:0.5", "simplex", "smooth:2", "sparse:3", "monotone", "symmetric:2"] {
            let c: Constraint = s.parse().unwrap();
            assert_eq!(c.to_string(), s);
        }
        assert!("banana".parse::<Constraint>().is_err());
        assert!("l1".parse::<Constraint>().is_err());
        assert!("symmetric:0".parse::<Constraint>().is_err());
    }

    #[test]
    fn validation() {
        assert!(Constraint::L1 { lambda: -1.0 }.validate(0, &[3, 3]).is_err());
        assert!(Constraint::HardSparsity { s: 4 }.validate(0, &[3, 3]).is_err());
        assert!(Constraint::SymmetricWith { mode: 1 }.validate(0, &[3, 4]).is_err());
        assert!(Constraint::SymmetricWith { mode: 1 }.validate(0, &[3, 3]).is_ok());
    }
}
