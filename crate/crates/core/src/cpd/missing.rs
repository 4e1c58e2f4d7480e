use web_time::Instant;

use super::als::ls_update;
use super::{best_of, cpd_als, initial_models, normalize_model, unweighted, FitOptions, FitReport};
use crate::linalg::solve_gram;
use crate::tensor::{gram_hadamard, kruskal_reconstruct, next_index, DenseTensor, KruskalModel, Matrix, TensorLike};
use crate::{Error, Result};

/// Observed-entry indicator with the shape of the data, column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MissingMask {
    shape: Vec<usize>,
    observed: Vec<bool>,
}

impl MissingMask {
    pub fn new(shape: Vec<usize>, observed: Vec<bool>) -> Result<Self> {
        if observed.len() != shape.iter().product::<usize>() {
            return Err(Error::shape("mask length does not match its shape"));
        }
        Ok(Self { shape, observed })
    }

    pub fn full(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), observed: vec![true; shape.iter().product()] }
    }

    /// Entries where `t` is nonzero are observed.
    pub fn from_indicator(t: &DenseTensor) -> Self {
        Self { shape: t.shape().to_vec(), observed: t.data().iter().map(|&v| v != 0.0).collect() }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    fn lin(&self, idx: &[usize]) -> usize {
        let mut lin = 0;
        let mut stride = 1;
        for (&i, &s) in idx.iter().zip(&self.shape) {
            lin += i * stride;
            stride *= s;
        }
        lin
    }

    pub fn is_observed(&self, idx: &[usize]) -> bool {
        self.observed[self.lin(idx)]
    }

    pub fn set(&mut self, idx: &[usize], observed: bool) {
        let l = self.lin(idx);
        self.observed[l] = observed;
    }

    pub fn count_observed(&self) -> usize {
        self.observed.iter().filter(|&&b| b).count()
    }

    pub fn is_full(&self) -> bool {
        self.observed.iter().all(|&b| b)
    }
}

/// `Σ_{observed} (X − ⟦m⟧)²`.
pub fn masked_residual(t: &DenseTensor, mask: &MissingMask, m: &KruskalModel) -> Result<f64> {
    if mask.shape() != t.shape() || m.shape() != t.shape() {
        return Err(Error::shape("mask, data and model shapes differ"));
    }
    let r = kruskal_reconstruct(m);
    Ok(t.data()
        .iter()
        .zip(r.data())
        .zip(mask.observed())
        .filter(|(_, &o)| o)
        .map(|((a, b), _)| (a - b) * (a - b))
        .sum())
}

/// Observed entries kept, missing entries set to the mean of the observed.
pub fn em_initial_completion(t: &DenseTensor, mask: &MissingMask) -> DenseTensor {
    let obs = mask.count_observed().max(1);
    let mean = t.data().iter().zip(mask.observed()).filter(|(_, &o)| o).map(|(v, _)| v).sum::<f64>() / obs as f64;
    let data = t.data().iter().zip(mask.observed()).map(|(&v, &o)| if o { v } else { mean }).collect();
    DenseTensor::new(t.shape().to_vec(), data).expect("same shape")
}

fn check_mask(t: &DenseTensor, mask: &MissingMask, opts: &FitOptions) -> Result<()> {
    opts.validate(t.shape())?;
    if mask.shape() != t.shape() {
        return Err(Error::shape(format!("mask {:?} vs data {:?}", mask.shape(), t.shape())));
    }
    if mask.count_observed() == 0 {
        return Err(Error::invalid("mask has no observed entries"));
    }
    Ok(())
}

/// CPD of partially observed data by row-wise weighted least squares.
///
/// Each row of a factor is fitted to the observed entries of its slice
/// only, so every row solves its own `F × F` system. Rows with no observed
/// entries keep their value and are counted in `skipped_rows`. A full mask
/// runs [`cpd_als`].
pub fn cpd_als_missing(t: &DenseTensor, mask: &MissingMask, opts: &FitOptions) -> Result<(KruskalModel, FitReport)> {
    check_mask(t, mask, opts)?;
    let opts = FitOptions { missing: None, ..opts.clone() };
    if mask.is_full() {
        return cpd_als(t, &opts);
    }
    let mut warnings = vec![];
    if !opts.constraints.is_empty() {
        warnings.push("constraints are ignored by the missing-data fit".into());
    }
    let completion = em_initial_completion(t, mask);
    let inits = initial_models(Some(&completion), t.shape(), &opts, &mut warnings);
    best_of(inits, warnings, |init| rowwise_run(t, mask, init, &opts))
}

pub(crate) fn rowwise_run(
    t: &DenseTensor,
    mask: &MissingMask,
    init: KruskalModel,
    opts: &FitOptions,
) -> Result<(KruskalModel, FitReport)> {
    let start = Instant::now();
    let mut fs = init.absorbed_factors();
    let xnorm = t.data().iter().zip(mask.observed()).filter(|(_, &o)| o).map(|(v, _)| v * v).sum::<f64>().sqrt();
    let mut report = FitReport::default();
    let mut loss = masked_residual(t, mask, &unweighted(&fs))?;
    report.loss.push(loss);
    report.track_divergence(&unweighted(&fs));
    let mut skipped_rows = std::collections::HashSet::new();
    for sweep in 1..=opts.max_sweeps {
        for n in 0..fs.len() {
            let (a, skipped, ridged) = masked_mode_update(t, mask, &fs, n)?;
            fs[n] = a;
            skipped_rows.extend(skipped.into_iter().map(|i| (n, i)));
            report.ridge_applied |= ridged;
        }
        let new = masked_residual(t, mask, &unweighted(&fs))?;
        report.loss.push(new);
        report.sweeps = sweep;
        report.track_divergence(&unweighted(&fs));
        report.relative_change = if xnorm > 0.0 { (loss.sqrt() - new.sqrt()).abs() / xnorm } else { 0.0 };
        loss = new;
        if report.relative_change < opts.tol {
            break;
        }
    }
    report.skipped_rows = skipped_rows.len();
    if report.skipped_rows > 0 {
        report.warnings.push(format!("{} factor rows had no observed entries and were skipped", report.skipped_rows));
    }
    let model = normalize_model(&unweighted(&fs));
    report.weights = model.weights.clone();
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((model, report))
}

/// Row-wise weighted LS update of factor `mode`: row `i` solves
/// `(Σ_r w_r w_rᵀ) a_i = Σ_r x_r w_r` over the observed entries `r` of
/// slice `i`, where `w_r` is the matching Khatri–Rao row.
fn masked_mode_update(
    t: &DenseTensor,
    mask: &MissingMask,
    fs: &[Matrix],
    mode: usize,
) -> Result<(Matrix, Vec<usize>, bool)> {
    let f = fs[0].ncols();
    let rows = t.shape()[mode];
    let mut grams = vec![Matrix::zeros(f, f); rows];
    let mut rhs = vec![Matrix::zeros(f, 1); rows];
    let mut count = vec![0usize; rows];
    let mut idx = vec![0; t.ndim()];
    let mut w = nalgebra::DVector::<f64>::zeros(f);
    for (lin, &x) in t.data().iter().enumerate() {
        if mask.observed()[lin] {
            for c in 0..f {
                w[c] = (0..fs.len()).filter(|&m| m != mode).map(|m| fs[m][(idx[m], c)]).product();
            }
            let i = idx[mode];
            grams[i].ger(1.0, &w, &w, 1.0);
            rhs[i] += &w * x;
            count[i] += 1;
        }
        next_index(&mut idx, t.shape());
    }
    let mut a = fs[mode].clone();
    let mut skipped = vec![];
    let mut ridged = false;
    for i in 0..rows {
        if count[i] == 0 {
            skipped.push(i);
            continue;
        }
        let (sol, r) = solve_gram(&grams[i], &rhs[i])?;
        ridged |= r;
        a.row_mut(i).copy_from(&sol.transpose());
    }
    Ok((a, skipped, ridged))
}

/// CPD of partially observed data by expectation maximization: missing
/// entries are imputed from the current model, `X_c = W∗X + (1−W)∗⟦m⟧`,
/// between full-data ALS sweeps. The first completion uses the mean of
/// the observed entries. A full mask runs [`cpd_als`].
pub fn em_impute_fit(t: &DenseTensor, mask: &MissingMask, opts: &FitOptions) -> Result<(KruskalModel, FitReport)> {
    check_mask(t, mask, opts)?;
    let opts = FitOptions { missing: None, ..opts.clone() };
    if mask.is_full() {
        return cpd_als(t, &opts);
    }
    let mut warnings = vec![];
    let completion = em_initial_completion(t, mask);
    let inits = initial_models(Some(&completion), t.shape(), &opts, &mut warnings);
    best_of(inits, warnings, |init| em_run(t, mask, &completion, init, &opts))
}

fn em_run(
    t: &DenseTensor,
    mask: &MissingMask,
    completion: &DenseTensor,
    init: KruskalModel,
    opts: &FitOptions,
) -> Result<(KruskalModel, FitReport)> {
    let start = Instant::now();
    let mut xc = completion.clone();
    let mut fs = init.absorbed_factors();
    let xnorm = t.data().iter().zip(mask.observed()).filter(|(_, &o)| o).map(|(v, _)| v * v).sum::<f64>().sqrt();
    let mut report = FitReport::default();
    let mut loss = masked_residual(t, mask, &unweighted(&fs))?;
    report.loss.push(loss);
    report.track_divergence(&unweighted(&fs));
    for sweep in 1..=opts.max_sweeps {
        for n in 0..fs.len() {
            let g = gram_hadamard(&fs, Some(n))?;
            let m = xc.mttkrp(&fs, n)?;
            let (a, ridged) = ls_update(&g, &m)?;
            report.ridge_applied |= ridged;
            fs[n] = a;
        }
        let model = kruskal_reconstruct(&unweighted(&fs));
        for ((c, &o), (&x, &v)) in xc.data_mut().iter_mut().zip(mask.observed()).zip(t.data().iter().zip(model.data()))
        {
            *c = if o { x } else { v };
        }
        let new = masked_residual(t, mask, &unweighted(&fs))?;
        report.loss.push(new);
        report.sweeps = sweep;
        report.track_divergence(&unweighted(&fs));
        report.relative_change = if xnorm > 0.0 { (loss.sqrt() - new.sqrt()).abs() / xnorm } else { 0.0 };
        loss = new;
        if report.relative_change < opts.tol {
            break;
        }
    }
    let model = normalize_model(&unweighted(&fs));
    report.weights = model.weights.clone();
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpd::{als::als_run, random_model, Init};
    use crate::io::synth_model;
    use crate::random::rng;
    use rand::Rng as _;

    fn random_mask(shape: &[usize], frac: f64, seed: u64) -> MissingMask {
        let mut r = rng(seed);
        let n: usize = shape.iter().product();
        MissingMask::new(shape.to_vec(), (0..n).map(|_| r.random::<f64>() < frac).collect()).unwrap()
    }

    #[test]
    fn full_mask_is_plain_als() {
        let (_, t) = synth_model(&[4, 5, 3], 2, 1, 0.1).unwrap();
        let opts = FitOptions { rank: 2, seed: 3, max_sweeps: 50, ..FitOptions::default() };
        let full = MissingMask::full(t.shape());
        let (a, _) = cpd_als_missing(&t, &full, &opts).unwrap();
        let (b, _) = cpd_als(&t, &opts).unwrap();
        assert_eq!(a, b);
        let (c, _) = em_impute_fit(&t, &full, &opts).unwrap();
        assert_eq!(c, b);
        // The row-wise update itself agrees with the batch update on a full mask.
        let init = random_model(t.shape(), 2, 3, 0);
        let (rw, _) = rowwise_run(&t, &full, init.clone(), &opts).unwrap();
        let (batch, _) = als_run(&t, init, &opts).unwrap();
        let (ra, rb) = (kruskal_reconstruct(&rw), kruskal_reconstruct(&batch));
        assert!(ra.sub(&rb).unwrap().norm() < 1e-8 * rb.norm());
    }

    #[test]
    fn thirty_percent_observed_recovery() {
        let (truth, t) = synth_model(&[8, 8, 8], 2, 5, 0.0).unwrap();
        let mask = random_mask(t.shape(), 0.3, 6);
        let opts = FitOptions { rank: 2, max_sweeps: 3000, tol: 1e-14, restarts: 3, seed: 1, ..FitOptions::default() };
        let (m, rep) = cpd_als_missing(&t, &mask, &opts).unwrap();
        assert!(rep.final_loss() < 1e-8, "{}", rep.final_loss());
        let full_err = t.sub(&kruskal_reconstruct(&m)).unwrap().norm() / t.norm();
        assert!(full_err < 1e-4, "{full_err}");
        for w in rep.loss.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-10) + 1e-300);
        }
        let _ = truth;
    }

    #[test]
    fn fewer_constraints_fit_at_least_as_well() {
        let (_, t) = synth_model(&[5, 4, 4], 2, 7, 0.3).unwrap();
        let opts = FitOptions { rank: 2, seed: 2, ..FitOptions::default() };
        let (full_model, _) = cpd_als(&t, &opts).unwrap();
        let mut mask = MissingMask::full(t.shape());
        mask.set(&[1, 2, 3], false);
        let warm = FitOptions { init: Init::Provided(full_model.clone()), ..opts };
        let (m, _) = cpd_als_missing(&t, &mask, &warm).unwrap();
        assert!(masked_residual(&t, &mask, &m).unwrap() <= masked_residual(&t, &mask, &full_model).unwrap() + 1e-12);
    }

    #[test]
    fn em_first_completion_and_agreement() {
        let t = DenseTensor::from_fn(&[2, 2, 1], |i| (1 + i[0] + 2 * i[1]) as f64);
        let mut mask = MissingMask::full(t.shape());
        mask.set(&[1, 1, 0], false);
        let c = em_initial_completion(&t, &mask);
        assert_eq!(c.data(), &[1.0, 2.0, 3.0, 2.0]);

        let (_, t) = synth_model(&[7, 6, 5], 2, 8, 0.0).unwrap();
        let mask = random_mask(t.shape(), 0.5, 9);
        let opts = FitOptions { rank: 2, max_sweeps: 5000, tol: 1e-15, restarts: 2, seed: 4, ..FitOptions::default() };
        let (a, ra) = cpd_als_missing(&t, &mask, &opts).unwrap();
        let (b, rb) = em_impute_fit(&t, &mask, &opts).unwrap();
        let la = masked_residual(&t, &mask, &a).unwrap();
        let lb = masked_residual(&t, &mask, &b).unwrap();
        assert!((la - lb).abs() < 1e-6, "{la} {lb}");
        for w in rb.loss.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-10) + 1e-300);
        }
        let _ = ra;
    }

    #[test]
    fn empty_slice_rows_are_skipped() {
        let (_, t) = synth_model(&[3, 3, 3], 1, 2, 0.0).unwrap();
        let mut mask = MissingMask::full(t.shape());
        for j in 0..3 {
            for k in 0..3 {
                mask.set(&[2, j, k], false);
            }
        }
        let opts = FitOptions { rank: 1, max_sweeps: 10, ..FitOptions::default() };
        let (_, rep) = cpd_als_missing(&t, &mask, &opts).unwrap();
        assert_eq!(rep.skipped_rows, 1);
        assert!(!rep.warnings.is_empty());
    }
}
