//! Matricized-tensor times Khatri–Rao product.
//!
//! `mttkrp(X, {A_m}, n) = X_(n)ᵀ (A_{N−1} ⊙ … ⊙ A_{n+1} ⊙ A_{n−1} ⊙ … ⊙ A_0)`,
//! an `I_n × F` matrix. Neither kernel forms the Khatri–Rao product: the
//! needed row of it is generated on the fly for each fiber or nonzero.
//!
//! Parallel execution (feature `parallel`) splits the dense kernel over
//! output rows, and the sparse kernel over a fixed number of nonzero chunks
//! whose private accumulators are summed in chunk order. Chunking does not
//! depend on the thread count, so results are reproducible run to run.

use super::{check_factors, check_mode, next_index, DenseTensor, Matrix, SparseTensor};
use crate::Result;

/// Below this many multiply-adds the kernels stay sequential.
#[cfg(feature = "parallel")]
const PAR_THRESHOLD: usize = 1 << 15;
const SPARSE_CHUNK: usize = 4096;
const MAX_SPARSE_CHUNKS: usize = 16;

pub fn mttkrp_dense(t: &DenseTensor, factors: &[Matrix], mode: usize) -> Result<Matrix> {
    check_mode(mode, t.ndim())?;
    let f = check_factors(t.shape(), factors)?;
    let rows = t.shape()[mode];
    let compute = |r0: usize, r1: usize| dense_rows(t, factors, mode, f, r0, r1);

    #[cfg(feature = "parallel")]
    let buf = if t.len() * f >= PAR_THRESHOLD && rows > 1 {
        use rayon::prelude::*;
        let chunks = rayon::current_num_threads().min(rows).max(1);
        let step = rows.div_ceil(chunks);
        let parts: Vec<Vec<f64>> = (0..rows)
            .step_by(step)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|r0| compute(r0, (r0 + step).min(rows)))
            .collect();
        parts.concat()
    } else {
        compute(0, rows)
    };
    #[cfg(not(feature = "parallel"))]
    let buf = compute(0, rows);

    Ok(Matrix::from_row_slice(rows, f, &buf))
}

/// Rows `r0..r1` of the dense MTTKRP, returned row-major.
fn dense_rows(t: &DenseTensor, factors: &[Matrix], mode: usize, f: usize, r0: usize, r1: usize) -> Vec<f64> {
    let shape = t.shape();
    let n_mode = shape[mode];
    let left_shape = &shape[..mode];
    let right_shape = &shape[mode + 1..];
    let left: usize = left_shape.iter().product();
    let data = t.data();
    let mut out = vec![0.0; (r1 - r0) * f];
    let mut wr = vec![1.0; f];
    let mut w = vec![1.0; f];
    let mut bidx = vec![0; right_shape.len()];
    let mut b = 0;
    loop {
        wr.iter_mut().for_each(|x| *x = 1.0);
        for (m, &i) in bidx.iter().enumerate() {
            let a = &factors[mode + 1 + m];
            for (c, x) in wr.iter_mut().enumerate() {
                *x *= a[(i, c)];
            }
        }
        let mut aidx = vec![0; left_shape.len()];
        for a_lin in 0..left {
            w.copy_from_slice(&wr);
            for (m, &i) in aidx.iter().enumerate() {
                let a = &factors[m];
                for (c, x) in w.iter_mut().enumerate() {
                    *x *= a[(i, c)];
                }
            }
            let base = a_lin + left * n_mode * b;
            for i in r0..r1 {
                let x = data[base + left * i];
                if x != 0.0 {
                    let row = &mut out[(i - r0) * f..(i - r0 + 1) * f];
                    for (o, &wc) in row.iter_mut().zip(&w) {
                        *o += x * wc;
                    }
                }
            }
            next_index(&mut aidx, left_shape);
        }
        b += 1;
        if !next_index(&mut bidx, right_shape) {
            break;
        }
    }
    out
}

pub fn mttkrp_sparse(t: &SparseTensor, factors: &[Matrix], mode: usize) -> Result<Matrix> {
    check_mode(mode, t.ndim())?;
    let f = check_factors(t.shape(), factors)?;
    let rows = t.shape()[mode];
    let nnz = t.nnz();
    let chunks = nnz.div_ceil(SPARSE_CHUNK).clamp(1, MAX_SPARSE_CHUNKS);
    if chunks == 1 {
        let mut out = vec![0.0; rows * f];
        sparse_accumulate(t, factors, mode, f, 0, nnz, &mut out);
        return Ok(Matrix::from_row_slice(rows, f, &out));
    }
    let step = nnz.div_ceil(chunks);
    let run = |c: usize| {
        let mut acc = vec![0.0; rows * f];
        sparse_accumulate(t, factors, mode, f, c * step, ((c + 1) * step).min(nnz), &mut acc);
        acc
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        if nnz * f >= PAR_THRESHOLD {
            (0..chunks).into_par_iter().map(run).collect()
        } else {
            (0..chunks).map(run).collect()
        }
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Vec<f64>> = (0..chunks).map(run).collect();

    let mut out = vec![0.0; rows * f];
    for p in parts {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    Ok(Matrix::from_row_slice(rows, f, &out))
}

/// Accumulate nonzeros `e0..e1` into a row-major `I_mode × F` buffer.
fn sparse_accumulate(
    t: &SparseTensor,
    factors: &[Matrix],
    mode: usize,
    f: usize,
    e0: usize,
    e1: usize,
    out: &mut [f64],
) {
    let mut w = vec![0.0; f];
    for e in e0..e1 {
        let idx = t.coords(e);
        w.iter_mut().for_each(|x| *x = t.value(e));
        for (m, &i) in idx.iter().enumerate() {
            if m != mode {
                let a = &factors[m];
                for (c, x) in w.iter_mut().enumerate() {
                    *x *= a[(i, c)];
                }
            }
        }
        let row = &mut out[idx[mode] * f..(idx[mode] + 1) * f];
        for (o, &wc) in row.iter_mut().zip(&w) {
            *o += wc;
        }
    }
}
