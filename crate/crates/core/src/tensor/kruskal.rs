use super::{check_factors, gram_hadamard, next_index, DenseTensor, Matrix, TensorLike};
use crate::{Error, Result};

/// `⟦λ; A_0, …, A_{N−1}⟧ = Σ_f λ_f a_{0,f} ∘ … ∘ a_{N−1,f}`.
#[derive(Clone, Debug, PartialEq)]
pub struct KruskalModel {
    pub factors: Vec<Matrix>,
    pub weights: Vec<f64>,
}

impl KruskalModel {
    pub fn new(factors: Vec<Matrix>, weights: Vec<f64>) -> Result<Self> {
        let f = factors.first().map(|a| a.ncols()).unwrap_or(0);
        if f == 0 {
            return Err(Error::invalid("model needs at least one factor with F >= 1"));
        }
        if factors.iter().any(|a| a.ncols() != f || a.nrows() == 0) {
            return Err(Error::shape("factors must share a column count and be non-empty"));
        }
        if weights.len() != f {
            return Err(Error::shape(format!("{} weights for rank {f}", weights.len())));
        }
        Ok(Self { factors, weights })
    }

    /// Model with unit weights.
    pub fn from_factors(factors: Vec<Matrix>) -> Result<Self> {
        let f = factors.first().map(|a| a.ncols()).unwrap_or(0);
        Self::new(factors, vec![1.0; f])
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn ndim(&self) -> usize {
        self.factors.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(|a| a.nrows()).collect()
    }

    /// Factors with the weights multiplied into the first factor.
    pub fn absorbed_factors(&self) -> Vec<Matrix> {
        let mut fs = self.factors.clone();
        for (f, &w) in self.weights.iter().enumerate() {
            fs[0].column_mut(f).scale_mut(w);
        }
        fs
    }

    /// Same tensor, unit weights.
    pub fn absorb_weights(&self) -> KruskalModel {
        KruskalModel { factors: self.absorbed_factors(), weights: vec![1.0; self.rank()] }
    }

    /// `|λ_f| · ∏_n ‖a_{n,f}‖`, the Frobenius norm of each rank-1 term.
    pub fn component_norms(&self) -> Vec<f64> {
        (0..self.rank())
            .map(|f| self.weights[f].abs() * self.factors.iter().map(|a| a.column(f).norm()).product::<f64>())
            .collect()
    }

    /// Number of scalar parameters with weights absorbed, `F · Σ I_n`.
    pub fn num_params(&self) -> usize {
        self.rank() * self.factors.iter().map(|a| a.nrows()).sum::<usize>()
    }
}

/// Dense tensor of the model.
pub fn kruskal_reconstruct(m: &KruskalModel) -> DenseTensor {
    let shape = m.shape();
    let rest = &shape[1..];
    let f = m.rank();
    let a0 = &m.factors[0];
    let i0 = shape[0];
    let mut out = DenseTensor::zeros(&shape);
    let data = out.data_mut();
    let mut idx = vec![0; rest.len()];
    let mut w = vec![0.0; f];
    let mut block = 0;
    loop {
        for (c, x) in w.iter_mut().enumerate() {
            *x = m.weights[c];
            for (k, &i) in idx.iter().enumerate() {
                *x *= m.factors[k + 1][(i, c)];
            }
        }
        for i in 0..i0 {
            let mut s = 0.0;
            for (c, &wc) in w.iter().enumerate() {
                s += a0[(i, c)] * wc;
            }
            data[block * i0 + i] = s;
        }
        block += 1;
        if !next_index(&mut idx, rest) {
            break;
        }
    }
    out
}

/// `‖X − ⟦m⟧‖_F²`.
///
/// Dense data is compared against the materialized model. Sparse data uses
/// `‖X‖² − 2⟨X, ⟦m⟧⟩ + λᵀ(∗_n A_nᵀA_n)λ` with the inner product taken from
/// one MTTKRP, so the model is never materialized.
pub fn model_fit_residual<T: TensorLike + ?Sized>(t: &T, m: &KruskalModel) -> Result<f64> {
    t.residual(m)
}

pub(crate) fn residual_dense(t: &DenseTensor, m: &KruskalModel) -> Result<f64> {
    check_factors(t.shape(), &m.factors)?;
    let r = kruskal_reconstruct(m);
    Ok(t.data().iter().zip(r.data()).map(|(a, b)| (a - b) * (a - b)).sum())
}

pub(crate) fn residual_implicit<T: TensorLike + ?Sized>(t: &T, m: &KruskalModel) -> Result<f64> {
    check_factors(t.shape(), &m.factors)?;
    let mt = t.mttkrp(&m.factors, 0)?;
    let mut inner = 0.0;
    for f in 0..m.rank() {
        inner += m.weights[f] * mt.column(f).dot(&m.factors[0].column(f));
    }
    let g = gram_hadamard(&m.factors, None)?;
    let lam = nalgebra::DVector::from_column_slice(&m.weights);
    let model_sq = (lam.transpose() * g * &lam)[(0, 0)];
    Ok((t.norm_sq() - 2.0 * inner + model_sq).max(0.0))
}
