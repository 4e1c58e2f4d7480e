//! Tensor storage, the Kronecker/Khatri–Rao product algebra, mode
//! unfoldings and the MTTKRP kernels used by every fitting routine.

mod dense;
mod kruskal;
mod mttkrp;
mod products;
mod sparse;

pub use dense::{fold, unfold, DenseTensor};
pub use kruskal::{kruskal_reconstruct, model_fit_residual, KruskalModel};

pub use mttkrp::{mttkrp_dense, mttkrp_sparse};
pub use products::{commutation_apply, gram_hadamard, hadamard, khatri_rao, khatri_rao_chain, kronecker, outer};
pub use sparse::SparseTensor;

pub use crate::linalg::Matrix;
use crate::{Error, Result};

/// Either storage format, for code paths that accept both.
#[derive(Clone, Debug, PartialEq)]
pub enum Tensor {
    Dense(DenseTensor),
    Sparse(SparseTensor),
}

/// Operations the fitting routines need from a data tensor.
pub trait TensorLike: Sync {
    fn shape(&self) -> &[usize];
    fn norm_sq(&self) -> f64;
    fn mttkrp(&self, factors: &[Matrix], mode: usize) -> Result<Matrix>;
    fn to_dense(&self) -> DenseTensor;

    /// Visit the stored entries: every element for dense data, the
    /// nonzeros for sparse data.
    fn for_each_entry(&self, f: &mut dyn FnMut(&[usize], f64));

    fn ndim(&self) -> usize {
        self.shape().len()
    }

    /// `‖X − ⟦model⟧‖²`.
    fn residual(&self, model: &KruskalModel) -> Result<f64> {
        kruskal::residual_implicit(self, model)
    }
}

impl TensorLike for DenseTensor {
    fn shape(&self) -> &[usize] {
        DenseTensor::shape(self)
    }
    fn norm_sq(&self) -> f64 {
        DenseTensor::norm_sq(self)
    }
    fn mttkrp(&self, factors: &[Matrix], mode: usize) -> Result<Matrix> {
        mttkrp_dense(self, factors, mode)
    }
    fn to_dense(&self) -> DenseTensor {
        self.clone()
    }
    fn residual(&self, model: &KruskalModel) -> Result<f64> {
        kruskal::residual_dense(self, model)
    }
    fn for_each_entry(&self, f: &mut dyn FnMut(&[usize], f64)) {
        let mut idx = vec![0; self.ndim()];
        for &v in self.data() {
            f(&idx, v);
            next_index(&mut idx, DenseTensor::shape(self));
        }
    }
}

impl TensorLike for SparseTensor {
    fn shape(&self) -> &[usize] {
        SparseTensor::shape(self)
    }
    fn norm_sq(&self) -> f64 {
        SparseTensor::norm_sq(self)
    }
    fn mttkrp(&self, factors: &[Matrix], mode: usize) -> Result<Matrix> {
        mttkrp_sparse(self, factors, mode)
    }
    fn to_dense(&self) -> DenseTensor {
        SparseTensor::to_dense(self)
    }
    fn for_each_entry(&self, f: &mut dyn FnMut(&[usize], f64)) {
        for (idx, v) in self.iter() {
            f(idx, v);
        }
    }
}

impl TensorLike for Tensor {
    fn shape(&self) -> &[usize] {
        match self {
            Tensor::Dense(t) => t.shape(),
            Tensor::Sparse(t) => t.shape(),
        }
    }
    fn norm_sq(&self) -> f64 {
        match self {
            Tensor::Dense(t) => t.norm_sq(),
            Tensor::Sparse(t) => t.norm_sq(),
        }
    }
    fn mttkrp(&self, factors: &[Matrix], mode: usize) -> Result<Matrix> {
        match self {
            Tensor::Dense(t) => mttkrp_dense(t, factors, mode),
            Tensor::Sparse(t) => mttkrp_sparse(t, factors, mode),
        }
    }
    fn to_dense(&self) -> DenseTensor {
        match self {
            Tensor::Dense(t) => t.clone(),
            Tensor::Sparse(t) => t.to_dense(),
        }
    }
    fn residual(&self, model: &KruskalModel) -> Result<f64> {
        match self {
            Tensor::Dense(t) => kruskal::residual_dense(t, model),
            Tensor::Sparse(t) => kruskal::residual_implicit(t, model),
        }
    }
    fn for_each_entry(&self, f: &mut dyn FnMut(&[usize], f64)) {
        match self {
            Tensor::Dense(t) => t.for_each_entry(f),
            Tensor::Sparse(t) => t.for_each_entry(f),
        }
    }
}

/// Check that `factors` fit a tensor of `shape` and return their shared
/// column count.
pub(crate) fn check_factors(shape: &[usize], factors: &[Matrix]) -> Result<usize> {
    if factors.len() != shape.len() {
        return Err(Error::shape(format!("{} factors for a {}-way tensor", factors.len(), shape.len())));
    }
    let f = factors.first().map(|a| a.ncols()).unwrap_or(0);
    for (n, a) in factors.iter().enumerate() {
        if a.nrows() != shape[n] {
            return Err(Error::shape(format!("factor {n} has {} rows, mode size is {}", a.nrows(), shape[n])));
        }
        if a.ncols() != f {
            return Err(Error::shape(format!("factor {n} has {} columns, expected {f}", a.ncols())));
        }
    }
    Ok(f)
}

pub(crate) fn check_mode(mode: usize, ndim: usize) -> Result<()> {
    if mode >= ndim {
        Err(Error::ModeOutOfRange { mode, ndim })
    } else {
        Ok(())
    }
}

/// Advance a column-major multi-index; returns false after the last one.
pub(crate) fn next_index(idx: &mut [usize], shape: &[usize]) -> bool {
    for (i, &s) in idx.iter_mut().zip(shape) {
        *i += 1;
        if *i < s {
            return true;
        }
        *i = 0;
    }
    false
}
