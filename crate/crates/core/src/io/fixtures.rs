//! Named test tensors: complex multiplication, Strassen's 2×2 matrix
//! multiplication, and a tensor of rank 3 with border rank 2.

use crate::tensor::{kruskal_reconstruct, DenseTensor, KruskalModel, Matrix, Tensor};
use crate::{Error, Result};

/// Names accepted by [`fixture`].
pub const NAMES: [&str; 3] = ["complexmult", "strassen", "border-rank"];

/// Frontal slabs `[1 0; 0 −1]` and `[0 1; 1 0]`: bilinear map from the
/// real and imaginary parts of two complex numbers to those of their
/// product.
pub fn complex_mult() -> DenseTensor {
    DenseTensor::new(vec![2, 2, 2], vec![1.0, 0.0, 0.0, -1.0, 0.0, 1.0, 1.0, 0.0]).expect("fixed shape")
}

/// Three-term real decomposition of [`complex_mult`]: the products
/// `x_r y_r`, `x_i y_i` and `(x_r + x_i)(y_r + y_i)`.
pub fn complex_mult_model() -> KruskalModel {
    let ab = Matrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
    let c = Matrix::from_row_slice(2, 3, &[1.0, -1.0, 0.0, -1.0, -1.0, 1.0]);
    KruskalModel::from_factors(vec![ab.clone(), ab, c]).expect("fixed factors")
}

/// The 4×4×4 tensor with `vec(M₁ M₂)_k = vec(M₁)ᵀ X(:,:,k) vec(M₂)` for
/// 2×2 matrices, `vec` column-major.
pub fn strassen() -> DenseTensor {
    let mut t = DenseTensor::zeros(&[4, 4, 4]);
    for i in 0..2 {
        for j in 0..2 {
            for l in 0..2 {
                t.set(&[i + 2 * l, l + 2 * j, i + 2 * j], 1.0);
            }
        }
    }
    t
}

/// Strassen's seven-multiplication scheme as a rank-7 model of
/// [`strassen`]; all entries are in `{0, ±1}`.
pub fn strassen_model() -> KruskalModel {
    #[rustfmt::skip]
    let a = Matrix::from_row_slice(4, 7, &[
        1.0, 0.0, 1.0, 0.0, 1.0, -1.0, 0.0,
        0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0,
        1.0, 1.0, 0.0, 1.0, 0.0, 0.0, -1.0,
    ]);
    #[rustfmt::skip]
    let b = Matrix::from_row_slice(4, 7, &[
        1.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0,
        0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0,
        1.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0,
    ]);
    #[rustfmt::skip]
    let c = Matrix::from_row_slice(4, 7, &[
        1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 1.0,
        0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0,
        1.0, -1.0, 1.0, 0.0, 0.0, 1.0, 0.0,
    ]);
    KruskalModel::from_factors(vec![a, b, c]).expect("fixed factors")
}

/// `vec(P)` for `P = M₁M₂` computed through the bilinear forms of `t`.
pub fn bilinear_product(t: &DenseTensor, m1: &Matrix, m2: &Matrix) -> Matrix {
    let (x, y) = (m1.as_slice(), m2.as_slice());
    let mut p = Matrix::zeros(2, 2);
    for k in 0..4 {
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                s += x[i] * t.get(&[i, j, k]) * y[j];
            }
        }
        p.as_mut_slice()[k] = s;
    }
    p
}

fn check_pair(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() || u.is_empty() {
        return Err(Error::shape("u and v must be nonempty and of equal length"));
    }
    Ok(())
}

/// `u∘u∘v + u∘v∘u + v∘u∘u`, which has rank 3 when `u` and `v` are unit
/// vectors with `|⟨u, v⟩| ≠ 1`, yet is a limit of rank-2 tensors.
pub fn border_rank(u: &[f64], v: &[f64]) -> Result<DenseTensor> {
    check_pair(u, v)?;
    let n = u.len();
    Ok(DenseTensor::from_fn(&[n, n, n], |i| {
        u[i[0]] * u[i[1]] * v[i[2]] + u[i[0]] * v[i[1]] * u[i[2]] + v[i[0]] * u[i[1]] * u[i[2]]
    }))
}

/// Rank-2 approximant `n·w∘w∘w − n·u∘u∘u` with `w = u + v/n`, whose two
/// components diverge as `n` grows while their sum converges to
/// [`border_rank`].
pub fn border_rank_sequence(u: &[f64], v: &[f64], n: f64) -> Result<KruskalModel> {
    check_pair(u, v)?;
    if !(n > 0.0) {
        return Err(Error::invalid("sequence index must be positive"));
    }
    let len = u.len();
    let col = |c: usize, i: usize| if c == 0 { u[i] + v[i] / n } else { u[i] };
    let f = Matrix::from_fn(len, 2, |i, c| col(c, i));
    KruskalModel::new(vec![f.clone(), f.clone(), f], vec![n, -n])
}

/// Look a fixture up by name. `border-rank` uses `u = e_1`, `v = e_2` in ℝ².
pub fn fixture(name: &str) -> Result<Tensor> {
    match name {
        "complexmult" => Ok(Tensor::Dense(complex_mult())),
        "strassen" => Ok(Tensor::Dense(strassen())),
        "border-rank" => Ok(Tensor::Dense(border_rank(&[1.0, 0.0], &[0.0, 1.0])?)),
        _ => Err(Error::invalid(format!("unknown fixture `{name}`; known: {}", NAMES.join(", ")))),
    }
}

/// Reference decomposition shipped with a fixture, if any.
pub fn fixture_model(name: &str) -> Option<KruskalModel> {
    match name {
        "complexmult" => Some(complex_mult_model()),
        "strassen" => Some(strassen_model()),
        _ => None,
    }
}

/// Reconstruction error of a fixture's shipped model.
pub fn fixture_model_error(name: &str) -> Result<f64> {
    let t = match fixture(name)? {
        Tensor::Dense(t) => t,
        Tensor::Sparse(s) => s.to_dense(),
    };
    let m = fixture_model(name).ok_or_else(|| Error::invalid(format!("fixture `{name}` ships no model")))?;
    Ok(kruskal_reconstruct(&m).sub(&t)?.norm())
}
