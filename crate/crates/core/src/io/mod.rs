//! Tensor files, synthetic data, named fixtures and a serializable model
//! document.
//!
//! # Tensor file format
//!
//! ```text
//! TNSR <dense|coo> <text|binary>
//! <N>
//! <I_1> <I_2> ... <I_N>
//! <payload>
//! ```
//!
//! * `dense text`: one value per line, column-major (first index fastest),
//!   written with 17 significant digits so values round-trip exactly.
//! * `dense binary`: the values as little-endian `f64`, column-major,
//!   immediately after the third header line.
//! * `coo text`: one entry per line, `i_1 ... i_N value`, with **1-based**
//!   indices. Duplicate coordinates are summed and reported as a warning.
//!
//! Lines starting with `#` and blank lines are ignored in text payloads.

pub mod fixtures;
mod format;

pub use format::{parse_tensor, read_tensor, write_tensor, write_tensor_to, Encoding, ReadOutcome, MAGIC};

use serde::{Deserialize, Serialize};

use crate::random::{randn, randn_matrix, rng_stream};
use crate::tensor::{kruskal_reconstruct, DenseTensor, KruskalModel, Matrix};
use crate::{Error, Result};

/// Random planted model and data `⟦A_0, …, A_{N−1}⟧ + σ·noise`.
///
/// Factors are standard normal with unit-norm columns and unit weights;
/// noise is i.i.d. `N(0, σ²)`. Factors and noise come from separate
/// streams of `seed`, so the model does not depend on `sigma`.
pub fn synth_model(dims: &[usize], rank: usize, seed: u64, sigma: f64) -> Result<(KruskalModel, DenseTensor)> {
    if dims.is_empty() || dims.contains(&0) || rank == 0 {
        return Err(Error::invalid("dimensions and rank must be positive"));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid("noise level must be finite and non-negative"));
    }
    let mut r = rng_stream(seed, 0);
    let factors: Vec<Matrix> = dims
        .iter()
        .map(|&i| {
            let mut a = randn_matrix(i, rank, &mut r);
            for mut c in a.column_iter_mut() {
                let n = c.norm();
                c /= n;
            }
            a
        })
        .collect();
    let model = KruskalModel::from_factors(factors)?;
    let mut t = kruskal_reconstruct(&model);
    if sigma > 0.0 {
        let mut noise = rng_stream(seed, 1);
        for x in t.data_mut() {
            *x += sigma * randn(&mut noise);
        }
    }
    Ok((model, t))
}

/// Noise level giving a signal-to-noise ratio of `snr_db` decibels for a
/// signal of squared norm `signal_norm_sq` spread over `entries` entries.
pub fn sigma_for_snr(signal_norm_sq: f64, entries: usize, snr_db: f64) -> f64 {
    (signal_norm_sq / entries as f64 / 10f64.powf(snr_db / 10.0)).sqrt()
}

/// Serializable form of a [`KruskalModel`]: factors stored column-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub shape: Vec<usize>,
    pub rank: usize,
    pub weights: Vec<f64>,
    pub factors: Vec<Vec<f64>>,
}

impl From<&KruskalModel> for ModelDoc {
    fn from(m: &KruskalModel) -> Self {
        Self {
            shape: m.shape(),
            rank: m.rank(),
            weights: m.weights.clone(),
            factors: m.factors.iter().map(|a| a.as_slice().to_vec()).collect(),
        }
    }
}

impl TryFrom<&ModelDoc> for KruskalModel {
    type Error = Error;

    fn try_from(d: &ModelDoc) -> Result<Self> {
        if d.factors.len() != d.shape.len() {
            return Err(Error::shape("model document: factor count differs from shape"));
        }
        let factors = d
            .factors
            .iter()
            .zip(&d.shape)
            .map(|(v, &i)| {
                if v.len() != i * d.rank {
                    return Err(Error::shape("model document: factor length differs from shape × rank"));
                }
                Ok(Matrix::from_column_slice(i, d.rank, v))
            })
            .collect::<Result<Vec<_>>>()?;
        KruskalModel::new(factors, d.weights.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::model_fit_residual;

    #[test]
    fn noiseless_synth_is_exact_and_deterministic() {
        let (m, t) = synth_model(&[4, 3, 5], 2, 9, 0.0).unwrap();
        assert_eq!(model_fit_residual(&t, &m).unwrap(), 0.0);
        let (m2, t2) = synth_model(&[4, 3, 5], 2, 9, 0.0).unwrap();
        assert_eq!(m, m2);
        assert_eq!(t, t2);
        for a in &m.factors {
            for c in a.column_iter() {
                assert!((c.norm() - 1.0).abs() < 1e-14);
            }
        }
        let (m3, _) = synth_model(&[4, 3, 5], 2, 9, 0.3).unwrap();
        assert_eq!(m, m3);
    }

    #[test]
    fn noise_level_matches_request() {
        let (dims, sigma) = ([6, 5, 4], 0.05);
        let mut ratios = vec![];
        for seed in 0..100 {
            let (_, clean) = synth_model(&dims, 2, seed, 0.0).unwrap();
            let (_, noisy) = synth_model(&dims, 2, seed, sigma).unwrap();
            let noise = noisy.sub(&clean).unwrap().norm_sq();
            ratios.push(noise / (120.0 * sigma * sigma));
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((mean - 1.0).abs() < 0.05, "{mean}");
        let s = sigma_for_snr(2.0, 200, 40.0);
        assert!((2.0 / (200.0 * s * s) - 1e4).abs() < 1e-6);
    }

    #[test]
    fn model_doc_round_trip() {
        let (m, _) = synth_model(&[2, 3], 2, 1, 0.0).unwrap();
        let doc = ModelDoc::from(&m);
        assert_eq!(KruskalModel::try_from(&doc).unwrap(), m);
        let mut bad = doc.clone();
        bad.factors[0].pop();
        assert!(KruskalModel::try_from(&bad).is_err());
    }
}
