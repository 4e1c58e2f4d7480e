use super::{DenseTensor, Matrix};
use crate::{Error, Result};

/// Column-wise Kronecker product: column `f` is `a_f ⊗ b_f`.
pub fn khatri_rao(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::shape(format!("Khatri-Rao needs equal column counts, got {} and {}", a.ncols(), b.ncols())));
    }
    let (i, j) = (a.nrows(), b.nrows());
    Ok(Matrix::from_fn(i * j, a.ncols(), |r, f| a[(r / j, f)] * b[(r % j, f)]))
}

/// `M_0 ⊙ M_1 ⊙ … ⊙ M_{k−1}` for a non-empty list.
pub fn khatri_rao_chain(mats: &[&Matrix]) -> Result<Matrix> {
    let (first, rest) = mats.split_first().ok_or_else(|| Error::invalid("empty Khatri-Rao chain"))?;
    rest.iter().try_fold((*first).clone(), |acc, m| khatri_rao(&acc, m))
}

pub fn kronecker(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

pub fn hadamard(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(a.component_mul(b))
}

/// `v_0 ∘ v_1 ∘ … ∘ v_{N−1}`.
pub fn outer(vectors: &[Vec<f64>]) -> Result<DenseTensor> {
    if vectors.is_empty() || vectors.iter().any(|v| v.is_empty()) {
        return Err(Error::invalid("outer product needs non-empty vectors"));
    }
    let shape: Vec<usize> = vectors.iter().map(|v| v.len()).collect();
    Ok(DenseTensor::from_fn(&shape, |idx| idx.iter().zip(vectors).map(|(&i, v)| v[i]).product()))
}

/// `K_{m,n} v` for `v = vec(S)` with `S` of size `m × n`; returns `vec(Sᵀ)`.
pub fn commutation_apply(m: usize, n: usize, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != m * n {
        return Err(Error::shape(format!("vector of length {} for K_({m},{n})", v.len())));
    }
    let mut out = vec![0.0; v.len()];
    for j in 0..n {
        for i in 0..m {
            out[j + n * i] = v[i + m * j];
        }
    }
    Ok(out)
}

/// Hadamard product of `A_nᵀ A_n` over every mode except `skip`.
///
/// With `skip = Some(n)` this is the Gram of the Khatri–Rao product of the
/// other factors, without forming that product.
pub fn gram_hadamard(factors: &[Matrix], skip: Option<usize>) -> Result<Matrix> {
    let f = factors.first().map(|a| a.ncols()).ok_or_else(|| Error::invalid("no factors"))?;
    let mut g = Matrix::from_element(f, f, 1.0);
    for (n, a) in factors.iter().enumerate() {
        if a.ncols() != f {
            return Err(Error::shape(format!("factor {n} has {} columns, expected {f}", a.ncols())));
        }
        if Some(n) != skip {
            g.component_mul_assign(&a.tr_mul(a));
        }
    }
    Ok(g)
}
