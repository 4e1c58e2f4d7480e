use web_time::Instant;

use super::normalize::normalize_keep_signs;
use super::{best_of, initial_models, normalize_model, rank_warning, unweighted, FitOptions, FitReport, Init};
use crate::constraints::{admm_constrained_ls, osl_column_sweep, prox_apply, AdmmState, Constraint, Projector, Route};
use crate::linalg::solve_gram;
use crate::tensor::{gram_hadamard, KruskalModel, Matrix, TensorLike};
use crate::Result;

/// CPD by alternating least squares.
///
/// Each mode update solves `A_n (∗_{m≠n} A_mᵀA_m) = mttkrp(X, n)`; modes
/// with constraints use AO-ADMM, column-wise optimal scaling, or a
/// coupling penalty instead. Returns the best of `opts.restarts` runs,
/// normalized.
pub fn cpd_als<T: TensorLike + ?Sized>(t: &T, opts: &FitOptions) -> Result<(KruskalModel, FitReport)> {
    opts.validate(t.shape())?;
    if let Some(mask) = &opts.missing {
        return super::cpd_als_missing(&t.to_dense(), mask, opts);
    }
    let mut warnings: Vec<String> = rank_warning(t.shape(), opts.rank).into_iter().collect();
    let dense = matches!(opts.init, Init::Gevd).then(|| t.to_dense());
    let inits = initial_models(dense.as_ref(), t.shape(), opts, &mut warnings);
    best_of(inits, warnings, |init| als_run(t, init, opts))
}

/// Conditional objective `‖X − ⟦A_n; others⟧‖² − ‖X‖² + 2 r(A_n)`,
/// evaluated from the Gram and MTTKRP of the other modes.
fn conditional_objective(a: &Matrix, gram: &Matrix, mttkrp: &Matrix, c: &Constraint) -> f64 {
    (a * gram).component_mul(a).sum() - 2.0 * a.dot(mttkrp) + 2.0 * c.penalty(a)
}

/// Unconstrained least-squares update of one factor.
pub(crate) fn ls_update(gram: &Matrix, mttkrp: &Matrix) -> Result<(Matrix, bool)> {
    let (sol, ridged) = solve_gram(gram, &mttkrp.transpose())?;
    Ok((sol.transpose(), ridged))
}

/// Objective reported in the loss trajectory: data misfit plus twice the
/// penalty terms (matching the `½‖·‖²` scaling of the ADMM subproblems).
fn objective<T: TensorLike + ?Sized>(t: &T, fs: &[Matrix], opts: &FitOptions) -> Result<f64> {
    let mut obj = t.residual(&unweighted(fs))?;
    for (n, a) in fs.iter().enumerate() {
        obj += 2.0 * opts.constraint(n).penalty(a);
    }
    Ok(obj)
}

pub(crate) fn als_run<T: TensorLike + ?Sized>(
    t: &T,
    init: KruskalModel,
    opts: &FitOptions,
) -> Result<(KruskalModel, FitReport)> {
    let start = Instant::now();
    let ndim = t.ndim();
    let mut fs = init.absorbed_factors();
    let mut admm: Vec<Option<AdmmState>> = vec![None; ndim];
    for n in 0..ndim {
        let c = opts.constraint(n);
        if matches!(
            c,
            Constraint::Nonnegative
                | Constraint::Simplex
                | Constraint::HardSparsity { .. }
                | Constraint::MonotoneNondecreasing
        ) {
            fs[n] = prox_apply(&fs[n], c, 1.0)?;
        }
        if c.route() == Route::Admm {
            admm[n] = Some(AdmmState::new(&fs[n]));
        }
    }
    let xnorm = t.norm_sq().sqrt();
    let mut report = FitReport::default();
    let mut loss = objective(t, &fs, opts)?;
    report.loss.push(loss);
    report.track_divergence(&unweighted(&fs));

    for sweep in 1..=opts.max_sweeps {
        let mut inner = 0;
        for n in 0..ndim {
            let g = gram_hadamard(&fs, Some(n))?;
            let m = t.mttkrp(&fs, n)?;
            let c = opts.constraint(n);
            match c.route() {
                Route::Unconstrained => {
                    let (a, ridged) = ls_update(&g, &m)?;
                    report.ridge_applied |= ridged;
                    fs[n] = a;
                }
                Route::Admm => {
                    let state = admm[n].take().expect("ADMM state for constrained mode");
                    let (a, state) = admm_constrained_ls(&g, &m, c, state)?;
                    inner += state.iterations;
                    if conditional_objective(&a, &g, &m, c) <= conditional_objective(&fs[n], &g, &m, c) {
                        fs[n] = a;
                    }
                    admm[n] = Some(state);
                }
                Route::ColumnProjection => {
                    let proj = Projector::for_constraint(c).expect("projection constraint");
                    osl_column_sweep(&g, &m, &mut fs[n], proj);
                }
                Route::SymmetricPenalty => {
                    let Constraint::SymmetricWith { mode: other } = *c else { unreachable!() };
                    let f = g.nrows();
                    let mu = g.trace() / f as f64;
                    let mut gg = g.clone();
                    for i in 0..f {
                        gg[(i, i)] += mu;
                    }
                    let rhs = &m + &fs[other] * mu;
                    let (a, ridged) = ls_update(&gg, &rhs)?;
                    report.ridge_applied |= ridged;
                    fs[n] = a;
                }
            }
        }
        if admm.iter().any(Option::is_some) {
            report.admm_iterations.push(inner);
        }
        let new = objective(t, &fs, opts)?;
        report.loss.push(new);
        report.sweeps = sweep;
        report.track_divergence(&unweighted(&fs));
        report.relative_change = if xnorm > 0.0 { (loss.sqrt() - new.sqrt()).abs() / xnorm } else { 0.0 };
        loss = new;
        if report.relative_change < opts.tol {
            break;
        }
    }
    let model = if opts.constraints.iter().any(|c| matches!(c, Constraint::MonotoneNondecreasing)) {
        normalize_keep_signs(&unweighted(&fs))
    } else {
        normalize_model(&unweighted(&fs))
    };
    report.weights = model.weights.clone();
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((model, report))
}
