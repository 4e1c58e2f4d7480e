//! CPD fitting: alternating least squares (optionally constrained), the
//! algebraic GEVD initializer, gradients with exact line search, SGD,
//! missing-data variants, a damped Gauss–Newton step, and the
//! normalization/matching utilities used for evaluation.

mod als;
mod gauss_newton;
mod gevd;
mod gradient;
mod line_search;
mod missing;
mod normalize;
mod sgd;

use serde::{Deserialize, Serialize};

pub use als::cpd_als;
pub use gauss_newton::gauss_newton_step;
pub use gevd::{gevd_init, gevd_init_detailed, GevdOutcome};
pub use gradient::cpd_gradient;
pub use line_search::{exact_line_search, LineSearch, LineSearchResult};
pub use missing::{cpd_als_missing, em_impute_fit, em_initial_completion, masked_residual, MissingMask};
pub use normalize::{align_to_reference, match_factors, normalize_model, normalize_model_flagged, FactorMatch};
pub use sgd::{cpd_sgd, sgd_batch_conflict_free, sgd_update};

use crate::constraints::Constraint;
use crate::random::{randn_matrix, rng_stream};
use crate::tensor::{DenseTensor, KruskalModel, Matrix};
use crate::{Error, Result};

/// Growth of the largest component norm, relative to its value after the
/// first sweep, that marks a fit as diverging.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Default)]
pub enum Init {
    #[default]
    Random,
    Gevd,
    Provided(KruskalModel),
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub rank: usize,
    pub max_sweeps: usize,
    /// Stop when the change of `√loss` relative to `‖X‖` drops below this.
    pub tol: f64,
    pub init: Init,
    pub seed: u64,
    pub restarts: usize,
    /// One entry per mode; an empty list means unconstrained.
    pub constraints: Vec<Constraint>,
    /// Observed-entry mask; routes `cpd_als` to the row-wise weighted path.
    pub missing: Option<MissingMask>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            rank: 1,
            max_sweeps: 500,
            tol: 1e-8,
            init: Init::Random,
            seed: 0,
            restarts: 1,
            constraints: vec![],
            missing: None,
        }
    }
}

impl FitOptions {
    pub fn with_rank(rank: usize) -> Self {
        Self { rank, ..Self::default() }
    }

    pub(crate) fn validate(&self, shape: &[usize]) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::invalid("rank must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be at least 1"));
        }
        if !self.constraints.is_empty() {
            if self.constraints.len() != shape.len() {
                return Err(Error::invalid(format!(
                    "{} constraints for a {}-way tensor",
                    self.constraints.len(),
                    shape.len()
                )));
            }
            for (n, c) in self.constraints.iter().enumerate() {
                c.validate(n, shape)?;
            }
        }
        if let Init::Provided(m) = &self.init {
            if m.shape() != shape || m.rank() != self.rank {
                return Err(Error::shape("provided initial model does not match data and rank"));
            }
        }
        Ok(())
    }

    pub(crate) fn constraint(&self, mode: usize) -> &Constraint {
        static NONE: Constraint = Constraint::None;
        self.constraints.get(mode).unwrap_or(&NONE)
    }
}

/// Summary of one fit. `loss[0]` is the loss of the initial model and
/// `loss[s]` the loss after sweep `s`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FitReport {
    pub sweeps: usize,
    pub loss: Vec<f64>,
    pub relative_change: f64,
    pub wall_time_s: f64,
    pub weights: Vec<f64>,
    /// Largest component norm `|λ_f| ∏_n ‖a_{n,f}‖` after each sweep.
    pub max_component_norm: Vec<f64>,
    pub diverging: bool,
    pub ridge_applied: bool,
    /// Rows skipped for lack of observed entries (missing-data fits).
    pub skipped_rows: usize,
    /// Total ADMM inner iterations per sweep (constrained fits).
    pub admm_iterations: Vec<usize>,
    /// Index of the restart that produced the returned model.
    pub restart: usize,
    pub warnings: Vec<String>,
}

impl FitReport {
    pub fn final_loss(&self) -> f64 {
        self.loss.last().copied().unwrap_or(f64::NAN)
    }

    pub(crate) fn track_divergence(&mut self, model: &KruskalModel) {
        let norm = model.component_norms().into_iter().fold(0.0, f64::max);
        self.max_component_norm.push(norm);
        if let (Some(&first), Some(&last)) = (self.max_component_norm.get(1), self.max_component_norm.last()) {
            self.diverging = first > 0.0 && last > DIVERGENCE_FACTOR * first;
        }
    }
}

/// Standard-normal factors for restart `restart` of `seed`.
pub fn random_model(shape: &[usize], rank: usize, seed: u64, restart: u64) -> KruskalModel {
    let mut r = rng_stream(seed, restart);
    let factors = shape.iter().map(|&i| randn_matrix(i, rank, &mut r)).collect();
    KruskalModel::from_factors(factors).expect("valid random model")
}

/// Warn when `F` exceeds `min_n ∏_{m≠n} I_m`, the largest rank any
/// unfolding can certify.
pub(crate) fn rank_warning(shape: &[usize], rank: usize) -> Option<String> {
    let total: usize = shape.iter().product();
    let bound = shape.iter().map(|&i| total / i).min().unwrap_or(0);
    (rank > bound).then(|| format!("rank {rank} exceeds the unfolding bound {bound}; proceeding"))
}

/// Initial models for each restart.
///
/// With GEVD initialization the first start is the GEVD model (when it
/// exists) and the remaining starts are random.
pub(crate) fn initial_models(
    dense: Option<&DenseTensor>,
    shape: &[usize],
    opts: &FitOptions,
    warnings: &mut Vec<String>,
) -> Vec<KruskalModel> {
    (0..opts.restarts)
        .map(|r| match (&opts.init, r) {
            (Init::Provided(m), 0) => m.clone(),
            (Init::Gevd, 0) => match dense.map(|t| gevd_init_detailed(t, opts.rank, opts.seed)) {
                Some(Ok(out)) => {
                    warnings.extend(out.warnings);
                    out.model
                }
                Some(Err(e)) => {
                    warnings.push(format!("GEVD initialization unavailable ({e}); using random start"));
                    random_model(shape, opts.rank, opts.seed, 0)
                }
                None => {
                    warnings.push("GEVD initialization needs dense data; using random start".into());
                    random_model(shape, opts.rank, opts.seed, 0)
                }
            },
            _ => random_model(shape, opts.rank, opts.seed, r as u64),
        })
        .collect()
}

/// Run `fit` from every initial model and keep the lowest terminal loss.
pub(crate) fn best_of<F>(
    inits: Vec<KruskalModel>,
    mut warnings: Vec<String>,
    mut fit: F,
) -> Result<(KruskalModel, FitReport)>
where
    F: FnMut(KruskalModel) -> Result<(KruskalModel, FitReport)>,
{
    let mut best: Option<(KruskalModel, FitReport)> = None;
    for (r, init) in inits.into_iter().enumerate() {
        let (m, mut rep) = fit(init)?;
        rep.restart = r;
        let better = best.as_ref().is_none_or(|(_, b)| rep.final_loss() < b.final_loss());
        if better {
            best = Some((m, rep));
        }
    }
    let (m, mut rep) = best.expect("at least one restart");
    warnings.append(&mut rep.warnings);
    rep.warnings = warnings;
    Ok((m, rep))
}

/// Absorbed factors as an unweighted model.
pub(crate) fn unweighted(factors: &[Matrix]) -> KruskalModel {
    KruskalModel::from_factors(factors.to_vec()).expect("consistent factors")
}
