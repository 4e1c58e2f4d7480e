use serde::{Deserialize, Serialize};

use super::{dominant_basis, mlsvd, mode_product, project, TuckerModel};
use crate::tensor::{unfold, DenseTensor};
use crate::Result;

#[derive(Clone, Debug)]
pub struct TuckerOptions {
    pub max_sweeps: usize,
    /// Stop when the relative change of the reward drops below this.
    pub tol: f64,
}

impl Default for TuckerOptions {
    fn default() -> Self {
        Self { max_sweeps: 200, tol: 1e-10 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TuckerReport {
    pub sweeps: usize,
    /// `‖G‖²` after initialization and after every sweep.
    pub reward: Vec<f64>,
    /// `‖X − X̂‖² = ‖X‖² − ‖G‖²` for the final model.
    pub residual: f64,
}

/// Best multilinear-rank approximation by higher-order orthogonal
/// iteration, started from the truncated MLSVD.
///
/// Each update of mode `n` projects `X` on the other bases and keeps the
/// `r_n` dominant right singular vectors of that small unfolding, which
/// maximizes the reward `‖G‖²` over `U_n` with the others fixed.
pub fn tucker_als(t: &DenseTensor, ranks: &[usize], opts: &TuckerOptions) -> Result<(TuckerModel, TuckerReport)> {
    let mut model = mlsvd(t, ranks)?;
    let mut report = TuckerReport { reward: vec![model.core.norm_sq()], ..Default::default() };
    for sweep in 1..=opts.max_sweeps {
        for n in 0..t.ndim() {
            let mut y = t.clone();
            for (m, u) in model.bases.iter().enumerate() {
                if m != n {
                    y = mode_product(&y, &u.transpose(), m)?;
                }
            }
            model.bases[n] = dominant_basis(&unfold(&y, n)?, ranks[n]);
        }
        model.core = project(t, &model.bases)?;
        let reward = model.core.norm_sq();
        let prev = *report.reward.last().expect("initial reward");
        report.reward.push(reward);
        report.sweeps = sweep;
        if (reward - prev).abs() <= opts.tol * prev.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    report.residual = (t.norm_sq() - model.core.norm_sq()).max(0.0);
    Ok((model, report))
}
