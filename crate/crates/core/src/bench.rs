//! Monte-Carlo suites: the real typical-rank experiment on `I×I×2`
//! Gaussian tensors, and empirical CPD error against the Cramér–Rao bound.
//!
//! Trials are independent and draw from stream `trial` of the master
//! seed, so results do not depend on the number of threads.

use web_time::Instant;

use serde::{Deserialize, Serialize};

use crate::cpd::{align_to_reference, cpd_als, FitOptions, Init};
use crate::crb::{build_fim, crb_pinv};
use crate::io::{sigma_for_snr, synth_model};
use crate::linalg::{complex_eigenvalues, relative_max_imag};
use crate::random::{randn, randn_matrix, rng_stream};
use crate::tensor::{kruskal_reconstruct, Matrix};
use crate::{Error, Result};

/// Eigenvalues with imaginary part below this (relative to the spectral
/// radius) count as real.
pub const REAL_EIG_RTOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TypicalRankReport {
    pub size: usize,
    pub trials: usize,
    pub seed: u64,
    /// Trials whose pencil `X(:,:,1)⁻¹ X(:,:,2)` has a real spectrum, i.e.
    /// tensors of real rank `size`.
    pub real_pencils: usize,
    pub fraction_rank_size: f64,
    /// Binomial standard error of the fraction.
    pub std_error: f64,
    pub wall_time_s: f64,
}

/// Whether the `n×n×2` tensor with slabs `x1`, `x2` has rank `n` over ℝ,
/// judged by the spectrum of `x1⁻¹x2`. A singular `x1` (probability zero
/// for Gaussian data) counts as not real.
pub fn pencil_has_real_spectrum(x1: &Matrix, x2: &Matrix) -> bool {
    let Some(inv) = x1.clone().try_inverse() else { return false };
    relative_max_imag(&complex_eigenvalues(&(inv * x2))) <= REAL_EIG_RTOL
}

fn trial_is_real(size: usize, seed: u64, trial: usize) -> bool {
    let mut r = rng_stream(seed, trial as u64);
    let x1 = randn_matrix(size, size, &mut r);
    let x2 = randn_matrix(size, size, &mut r);
    pencil_has_real_spectrum(&x1, &x2)
}

/// Fraction of `size×size×2` standard-normal tensors of rank `size`.
pub fn typical_rank(size: usize, trials: usize, seed: u64) -> Result<TypicalRankReport> {
    if size < 2 || trials == 0 {
        return Err(Error::invalid("typical-rank needs size ≥ 2 and at least one trial"));
    }
    let start = Instant::now();
    #[cfg(feature = "parallel")]
    let real_pencils = {
        use rayon::prelude::*;
        (0..trials).into_par_iter().filter(|&k| trial_is_real(size, seed, k)).count()
    };
    #[cfg(not(feature = "parallel"))]
    let real_pencils = (0..trials).filter(|&k| trial_is_real(size, seed, k)).count();
    let p = real_pencils as f64 / trials as f64;
    Ok(TypicalRankReport {
        size,
        trials,
        seed,
        real_pencils,
        fraction_rank_size: p,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MseCrbReport {
    pub dims: Vec<usize>,
    pub rank: usize,
    pub snr_db: f64,
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
    /// Mean over trials of `Σ_n ‖Â_n − A_n‖²` after alignment.
    pub empirical_mse: f64,
    pub crb_trace: f64,
    pub ratio: f64,
    pub per_mode_mse: Vec<f64>,
    pub per_mode_crb: Vec<f64>,
    /// Trials whose fit did not come close to the planted factors
    /// (they still count towards the mean).
    pub poor_fits: usize,
    pub wall_time_s: f64,
}

/// Monte-Carlo CPD error against the CRB for one planted model.
///
/// The model is drawn once from `seed`; each trial adds fresh Gaussian
/// noise at the requested SNR, fits by ALS from the GEVD start, and
/// resolves permutation and scaling against the truth before measuring.
pub fn mse_vs_crb(dims: &[usize], rank: usize, snr_db: f64, trials: usize, seed: u64) -> Result<MseCrbReport> {
    if trials == 0 {
        return Err(Error::invalid("mse-vs-crb needs at least one trial"));
    }
    let start = Instant::now();
    let (truth, clean) = synth_model(dims, rank, seed, 0.0)?;
    let truth_f = truth.absorbed_factors();
    let sigma = sigma_for_snr(clean.norm_sq(), clean.len(), snr_db);
    let (crb, _) = crb_pinv(&build_fim(&truth, sigma * sigma)?, false)?;

    let run = |k: usize| -> Result<Vec<f64>> {
        let mut noise = rng_stream(seed, 1_000 + k as u64);
        let mut x = clean.clone();
        for v in x.data_mut() {
            *v += sigma * randn(&mut noise);
        }
        let opts = FitOptions {
            init: Init::Gevd,
            tol: 1e-12,
            max_sweeps: 1000,
            seed: k as u64,
            ..FitOptions::with_rank(rank)
        };
        let (est, _) = cpd_als(&x, &opts)?;
        let aligned = align_to_reference(&truth, &est)?;
        Ok(aligned.iter().zip(&truth_f).map(|(a, b)| (a - b).norm_squared()).collect())
    };
    #[cfg(feature = "parallel")]
    let per_trial: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..trials).into_par_iter().map(run).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let per_trial: Vec<Vec<f64>> = (0..trials).map(run).collect::<Result<_>>()?;

    let n = dims.len();
    let mut per_mode_mse = vec![0.0; n];
    let mut poor_fits = 0;
    let signal: f64 = truth_f.iter().map(|a| a.norm_squared()).sum();
    for errs in &per_trial {
        for (m, e) in errs.iter().enumerate() {
            per_mode_mse[m] += e / trials as f64;
        }
        if errs.iter().sum::<f64>() > 1e-2 * signal {
            poor_fits += 1;
        }
    }
    let empirical_mse: f64 = per_mode_mse.iter().sum();
    debug_assert_eq!(kruskal_reconstruct(&truth).shape(), dims);
    Ok(MseCrbReport {
        dims: dims.to_vec(),
        rank,
        snr_db,
        sigma,
        trials,
        seed,
        empirical_mse,
        crb_trace: crb.total_trace,
        ratio: empirical_mse / crb.total_trace,
        per_mode_mse,
        per_mode_crb: crb.mode_traces,
        poor_fits,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
