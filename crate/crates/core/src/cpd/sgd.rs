use std::collections::HashSet;
use web_time::Instant;

use rand::Rng as _;

use super::{normalize_model, random_model, unweighted, FitOptions, FitReport, Init};
use crate::random::rng_stream;
use crate::tensor::{Matrix, TensorLike};
use crate::{Error, KruskalModel, Result};

/// Initial learning rate.
pub const SGD_ETA0: f64 = 0.1;

/// One stochastic gradient step on the single entry `x = X(idx)`.
///
/// Only rows `A_n(idx[n], :)` change. With `p_n` the elementwise product of
/// the other modes' rows (for three modes: `B(j,:)∗C(k,:)`, `A(i,:)∗C(k,:)`,
/// `A(i,:)∗B(j,:)`), the residual is `e = x − ⟨A_0(i,:), p_0⟩` and each row
/// moves by `2η e p_n`, all from the pre-update values.
pub fn sgd_update(factors: &mut [Matrix], idx: &[usize], x: f64, eta: f64) {
    let deltas = sgd_deltas(factors, idx, x, eta);
    for (n, d) in deltas.into_iter().enumerate() {
        let mut row = factors[n].row_mut(idx[n]);
        for (f, v) in d.into_iter().enumerate() {
            row[f] += v;
        }
    }
}

fn sgd_deltas(factors: &[Matrix], idx: &[usize], x: f64, eta: f64) -> Vec<Vec<f64>> {
    let n = factors.len();
    let f = factors[0].ncols();
    // prefix[m] = ∗_{q<m} rows, suffix[m] = ∗_{q≥m} rows.
    let mut prefix = vec![vec![1.0; f]; n + 1];
    let mut suffix = vec![vec![1.0; f]; n + 1];
    for m in 0..n {
        for c in 0..f {
            prefix[m + 1][c] = prefix[m][c] * factors[m][(idx[m], c)];
        }
    }
    for m in (0..n).rev() {
        for c in 0..f {
            suffix[m][c] = suffix[m + 1][c] * factors[m][(idx[m], c)];
        }
    }
    let model: f64 = prefix[n].iter().sum();
    let e = x - model;
    (0..n).map(|m| (0..f).map(|c| 2.0 * eta * e * prefix[m][c] * suffix[m + 1][c]).collect()).collect()
}

/// Apply a batch of entry updates that share no index in any mode. Such
/// updates touch disjoint rows, so applying them together equals applying
/// them one after another.
pub fn sgd_batch_conflict_free(factors: &mut [Matrix], batch: &[(Vec<usize>, f64)], eta: f64) -> Result<()> {
    for n in 0..factors.len() {
        let mut seen = HashSet::new();
        for (idx, _) in batch {
            if !seen.insert(idx[n]) {
                return Err(Error::invalid(format!("batch repeats index {} in mode {n}", idx[n])));
            }
        }
    }
    let compute = |(idx, x): &(Vec<usize>, f64)| sgd_deltas(factors, idx, *x, eta);
    #[cfg(feature = "parallel")]
    let deltas: Vec<Vec<Vec<f64>>> = {
        use rayon::prelude::*;
        batch.par_iter().map(compute).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let deltas: Vec<Vec<Vec<f64>>> = batch.iter().map(compute).collect();
    for ((idx, _), d) in batch.iter().zip(deltas) {
        for (n, dn) in d.into_iter().enumerate() {
            let mut row = factors[n].row_mut(idx[n]);
            for (f, v) in dn.into_iter().enumerate() {
                row[f] += v;
            }
        }
    }
    Ok(())
}

/// CPD by stochastic gradient descent over the stored (and, with a mask,
/// observed) entries. Each epoch draws as many samples as there are
/// entries; the step size is `η_t = 0.1 / (1 + t / (10 · NNZ))`.
pub fn cpd_sgd<T: TensorLike + ?Sized>(t: &T, opts: &FitOptions) -> Result<(KruskalModel, FitReport)> {
    opts.validate(t.shape())?;
    let start = Instant::now();
    let ndim = t.ndim();
    let mut idxs: Vec<usize> = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    t.for_each_entry(&mut |idx, v| {
        if opts.missing.as_ref().is_none_or(|m| m.is_observed(idx)) {
            idxs.extend_from_slice(idx);
            vals.push(v);
        }
    });
    let nnz = vals.len();
    if nnz == 0 {
        return Err(Error::invalid("no observed entries to sample"));
    }
    let mut fs = match &opts.init {
        Init::Provided(m) => m.absorbed_factors(),
        _ => {
            let rms = (vals.iter().map(|v| v * v).sum::<f64>() / nnz as f64).sqrt();
            let s = (rms / (opts.rank as f64).sqrt()).powf(1.0 / ndim as f64).max(1e-3);
            random_model(t.shape(), opts.rank, opts.seed, 0).factors.into_iter().map(|a| a * s).collect()
        }
    };
    let sample_loss = |fs: &[Matrix]| -> f64 {
        (0..nnz)
            .map(|e| {
                let idx = &idxs[e * ndim..(e + 1) * ndim];
                let model: f64 = (0..opts.rank).map(|c| (0..ndim).map(|n| fs[n][(idx[n], c)]).product::<f64>()).sum();
                (vals[e] - model).powi(2)
            })
            .sum()
    };
    let tau = 10.0 * nnz as f64;
    let mut rng = rng_stream(opts.seed, 1 << 32);
    let norm = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut report = FitReport::default();
    let mut loss = sample_loss(&fs);
    report.loss.push(loss);
    let mut step = 0u64;
    for epoch in 1..=opts.max_sweeps {
        for _ in 0..nnz {
            let e = rng.random_range(0..nnz);
            let eta = SGD_ETA0 / (1.0 + step as f64 / tau);
            sgd_update(&mut fs, &idxs[e * ndim..(e + 1) * ndim], vals[e], eta);
            step += 1;
        }
        let new = sample_loss(&fs);
        report.loss.push(new);
        report.sweeps = epoch;
        report.track_divergence(&unweighted(&fs));
        report.relative_change = if norm > 0.0 { (loss.sqrt() - new.sqrt()).abs() / norm } else { 0.0 };
        loss = new;
        if report.relative_change < opts.tol && loss < opts.tol * norm * norm {
            break;
        }
    }
    let model = normalize_model(&unweighted(&fs));
    report.weights = model.weights.clone();
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((model, report))
}
