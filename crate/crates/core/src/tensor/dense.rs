use serde::{Deserialize, Serialize};

use super::{check_mode, next_index, Matrix};
use crate::{Error, Result};

/// N-way array of reals stored column-major (first index fastest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        validate_shape(&shape)?;
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(Error::shape(format!("shape {shape:?} needs {len} values, got {}", data.len())));
        }
        Ok(Self { shape, data })
    }

    /// # Panics
    /// If `shape` is empty or has a zero entry.
    pub fn zeros(shape: &[usize]) -> Self {
        validate_shape(shape).expect("invalid tensor shape");
        Self { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    /// Build a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut t = Self::zeros(shape);
        let mut idx = vec![0; shape.len()];
        let mut lin = 0;
        loop {
            t.data[lin] = f(&idx);
            lin += 1;
            if !next_index(&mut idx, shape) {
                break;
            }
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut lin = 0;
        let mut stride = 1;
        for (&i, &s) in idx.iter().zip(&self.shape) {
            debug_assert!(i < s);
            lin += i * stride;
            stride *= s;
        }
        lin
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.linear_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let lin = self.linear_index(idx);
        self.data[lin] = v;
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    /// `self − other`, elementwise.
    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.shape != other.shape {
            return Err(Error::shape(format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(DenseTensor { shape: self.shape.clone(), data })
    }

    /// Frontal slab `X(:, :, k)` of a three-way tensor.
    pub fn frontal_slab(&self, k: usize) -> Matrix {
        assert_eq!(self.ndim(), 3, "frontal slabs need a three-way tensor");
        let (i, j) = (self.shape[0], self.shape[1]);
        Matrix::from_column_slice(i, j, &self.data[k * i * j..(k + 1) * i * j])
    }
}

fn validate_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() {
        return Err(Error::shape("tensor needs at least one mode"));
    }
    if shape.contains(&0) {
        return Err(Error::shape(format!("mode sizes must be positive, got {shape:?}")));
    }
    Ok(())
}

/// Mode-`mode` unfolding: a `(∏_{m≠mode} I_m) × I_mode` matrix.
///
/// Row index is the column-major linear index over the remaining modes in
/// increasing order, so for three modes `X_(0) = (C ⊙ B) Aᵀ`,
/// `X_(1) = (C ⊙ A) Bᵀ` and `X_(2) = (B ⊙ A) Cᵀ`.
pub fn unfold(t: &DenseTensor, mode: usize) -> Result<Matrix> {
    check_mode(mode, t.ndim())?;
    let shape = t.shape();
    let left: usize = shape[..mode].iter().product();
    let n = shape[mode];
    let right: usize = shape[mode + 1..].iter().product();
    let rows = left * right;
    let mut out = Matrix::zeros(rows, n);
    let data = t.data();
    let buf = out.as_mut_slice();
    for i in 0..n {
        let col = &mut buf[i * rows..(i + 1) * rows];
        for b in 0..right {
            let src = &data[left * (i + n * b)..left * (i + n * b) + left];
            col[left * b..left * b + left].copy_from_slice(src);
        }
    }
    Ok(out)
}

/// Inverse of [`unfold`].
pub fn fold(m: &Matrix, mode: usize, shape: &[usize]) -> Result<DenseTensor> {
    validate_shape(shape)?;
    check_mode(mode, shape.len())?;
    let left: usize = shape[..mode].iter().product();
    let n = shape[mode];
    let right: usize = shape[mode + 1..].iter().product();
    if m.nrows() != left * right || m.ncols() != n {
        return Err(Error::shape(format!(
            "{}x{} matrix cannot fold into {shape:?} along mode {mode}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut data = vec![0.0; left * n * right];
    let rows = left * right;
    let buf = m.as_slice();
    for i in 0..n {
        let col = &buf[i * rows..(i + 1) * rows];
        for b in 0..right {
            data[left * (i + n * b)..left * (i + n * b) + left].copy_from_slice(&col[left * b..left * b + left]);
        }
    }
    DenseTensor::new(shape.to_vec(), data)
}
