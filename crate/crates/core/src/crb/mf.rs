use serde::{Deserialize, Serialize};

use crate::linalg::numerical_rank;
use crate::tensor::{kronecker, Matrix};
use crate::{Error, Result};

/// Cramér–Rao traces for `Y = WHᵀ + N`, `W: m × k`, `H: n × k`.
///
/// Any unbiased estimator satisfies `E‖Ŵ − W‖² ≥ σ²β_W` and
/// `E‖Ĥ − H‖² ≥ σ²β_H`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MfCrb {
    pub beta_w: f64,
    pub beta_h: f64,
    pub sigma2: f64,
}

impl MfCrb {
    pub fn bound_w(&self) -> f64 {
        self.sigma2 * self.beta_w
    }

    pub fn bound_h(&self) -> f64 {
        self.sigma2 * self.beta_h
    }
}

/// Dense `Ψ = JᵀJ` of the two-factor model over `[vec W; vec H]`.
pub fn mf_fim(w: &Matrix, h: &Matrix) -> Result<Matrix> {
    let (m, n, k) = (w.nrows(), h.nrows(), w.ncols());
    if h.ncols() != k {
        return Err(Error::shape("W and H need the same number of columns"));
    }
    let p = (m + n) * k;
    let mut psi = Matrix::zeros(p, p);
    let hth = h.transpose() * h;
    let wtw = w.transpose() * w;
    psi.view_mut((0, 0), (m * k, m * k)).copy_from(&kronecker(&hth, &Matrix::identity(m, m)));
    psi.view_mut((m * k, m * k), (n * k, n * k)).copy_from(&kronecker(&wtw, &Matrix::identity(n, n)));
    // ∂vec(WHᵀ)/∂W[i,a] · ∂vec(WHᵀ)/∂H[j,b] = Σ_{r,s} δ_{ri} H[s,a] W[r,b] δ_{sj} = W[i,b] H[j,a].
    for a in 0..k {
        for i in 0..m {
            for b in 0..k {
                for j in 0..n {
                    let v = w[(i, b)] * h[(j, a)];
                    psi[(i + m * a, m * k + j + n * b)] = v;
                    psi[(m * k + j + n * b, i + m * a)] = v;
                }
            }
        }
    }
    Ok(psi)
}

fn side(g_other: &Matrix, g_self: &Matrix, rows: usize, joint_inv: &Matrix, null_term: &Matrix) -> Result<f64> {
    let k = g_other.nrows();
    let inv = g_other.clone().try_inverse().ok_or_else(|| Error::Singular("factor Gram".into()))?;
    let first = rows as f64 * inv.trace();
    let mid = Matrix::identity(k * k, k * k) + kronecker(&inv, g_self);
    let mid_inv = mid.try_inverse().ok_or_else(|| Error::Singular("inner Kronecker system".into()))?;
    let second = (mid_inv * kronecker(&(&inv * &inv), g_self)).trace();
    let third = (joint_inv * joint_inv * null_term).trace();
    Ok(first - second - third)
}

/// Closed-form `β_W` and `β_H`.
///
/// `β_W = tr((HᵀH)⁻¹ ⊗ I_m) − tr((I + (HᵀH)⁻¹ ⊗ WᵀW)⁻¹ ((HᵀH)⁻² ⊗ WᵀW))
///        − tr((I ⊗ WᵀW + HᵀH ⊗ I)⁻² (I ⊗ WᵀW))`
/// and symmetrically for `β_H`. Only `k² × k²` systems are solved.
pub fn crb_matrix_factorization(w: &Matrix, h: &Matrix, sigma2: f64) -> Result<MfCrb> {
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("noise variance must be positive"));
    }
    let k = w.ncols();
    if h.ncols() != k || k == 0 {
        return Err(Error::shape("W and H need the same, nonzero number of columns"));
    }
    if numerical_rank(w, 1e-12) < k || numerical_rank(h, 1e-12) < k {
        return Err(Error::Singular("W and H must have full column rank".into()));
    }
    let wtw = w.transpose() * w;
    let hth = h.transpose() * h;
    let id = Matrix::identity(k, k);
    let joint = kronecker(&id, &wtw) + kronecker(&hth, &id);
    let joint_inv = joint.try_inverse().ok_or_else(|| Error::Singular("null-space Gram".into()))?;
    let beta_w = side(&hth, &wtw, w.nrows(), &joint_inv, &kronecker(&id, &wtw))?;
    let beta_h = side(&wtw, &hth, h.nrows(), &joint_inv, &kronecker(&hth, &id))?;
    Ok(MfCrb { beta_w, beta_h, sigma2 })
}
