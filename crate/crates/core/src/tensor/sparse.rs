use serde::{Deserialize, Serialize};

use super::DenseTensor;
use crate::{Error, Result};

/// Coordinate-format tensor. Indices are 0-based and stored flat, `ndim`
/// per entry, sorted by column-major linear index with no duplicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseTensor {
    shape: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseTensor {
    /// Canonicalize a list of entries. Duplicate index tuples are summed; the
    /// second return value is the number of entries that were merged away.
    pub fn from_entries(shape: Vec<usize>, entries: Vec<(Vec<usize>, f64)>) -> Result<(Self, usize)> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::shape(format!("invalid shape {shape:?}")));
        }
        let n = shape.len();
        let mut keyed = Vec::with_capacity(entries.len());
        for (pos, (idx, v)) in entries.into_iter().enumerate() {
            if idx.len() != n {
                return Err(Error::shape(format!("entry {pos} has {} indices, expected {n}", idx.len())));
            }
            let mut lin = 0usize;
            let mut stride = 1usize;
            for (m, (&i, &s)) in idx.iter().zip(&shape).enumerate() {
                if i >= s {
                    return Err(Error::shape(format!("entry {pos}: index {i} out of bounds for mode {m} of size {s}")));
                }
                lin += i * stride;
                stride *= s;
            }
            keyed.push((lin, idx, v));
        }
        keyed.sort_by_key(|e| e.0);
        let mut indices = Vec::with_capacity(keyed.len() * n);
        let mut values: Vec<f64> = Vec::with_capacity(keyed.len());
        let mut last = None;
        let mut merged = 0;
        for (lin, idx, v) in keyed {
            if last == Some(lin) {
                *values.last_mut().unwrap() += v;
                merged += 1;
            } else {
                indices.extend_from_slice(&idx);
                values.push(v);
                last = Some(lin);
            }
        }
        Ok((Self { shape, indices, values }, merged))
    }

    /// Sparse copy of the nonzero entries of `t`.
    pub fn from_dense(t: &DenseTensor) -> Self {
        let n = t.ndim();
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut idx = vec![0; n];
        for &v in t.data() {
            if v != 0.0 {
                indices.extend_from_slice(&idx);
                values.push(v);
            }
            super::next_index(&mut idx, t.shape());
        }
        Self { shape: t.shape().to_vec(), indices, values }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn coords(&self, e: usize) -> &[usize] {
        let n = self.shape.len();
        &self.indices[e * n..(e + 1) * n]
    }

    pub fn value(&self, e: usize) -> f64 {
        self.values[e]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> + '_ {
        (0..self.nnz()).map(move |e| (self.coords(e), self.values[e]))
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn to_dense(&self) -> DenseTensor {
        let mut t = DenseTensor::zeros(&self.shape);
        for (idx, v) in self.iter() {
            let lin = t.linear_index(idx);
            t.data_mut()[lin] += v;
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let (t, merged) = SparseTensor::from_entries(
            vec![2, 2, 2],
            vec![(vec![0, 0, 0], 1.0), (vec![1, 1, 0], 4.0), (vec![0, 0, 0], 2.0)],
        )
        .unwrap();
        assert_eq!(merged, 1);
        assert_eq!(t.nnz(), 2);
        assert_eq!(t.to_dense().get(&[0, 0, 0]), 3.0);
    }

    #[test]
    fn bounds_are_checked() {
        let r = SparseTensor::from_entries(vec![2, 2], vec![(vec![0, 2], 1.0)]);
        assert!(r.is_err());
    }

    #[test]
    fn dense_round_trip() {
        let d = DenseTensor::from_fn(&[3, 2, 2], |i| if (i[0] + i[1] + i[2]) % 2 == 0 { 1.5 } else { 0.0 });
        let s = SparseTensor::from_dense(&d);
        assert_eq!(s.nnz(), 6);
        assert_eq!(s.to_dense(), d);
    }
}
