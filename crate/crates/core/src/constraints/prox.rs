use super::Constraint;
use crate::tensor::Matrix;
use crate::{Error, Result};

/// Proximity operator of `constraint` with penalty parameter `rho`, applied
/// to a factor matrix. Column-wise constraints act per column.
///
/// Set constraints are projections and ignore `rho`. For `L1 { lambda }` the
/// threshold is `lambda / rho`; for `Smooth { lambda }` each column solves
/// `(2λ DᵀD + ρ I) c = ρ v`.
pub fn prox_apply(v: &Matrix, constraint: &Constraint, rho: f64) -> Result<Matrix> {
    if !(rho > 0.0) {
        return Err(Error::invalid("prox scale must be positive"));
    }
    let mut out = v.clone();
    match *constraint {
        Constraint::None => {}
        Constraint::Nonnegative => out.iter_mut().for_each(|x| *x = x.max(0.0)),
        Constraint::L1 { lambda } => {
            let t = lambda / rho;
            out.iter_mut().for_each(|x| *x = x.signum() * (x.abs() - t).max(0.0));
        }
        Constraint::Simplex => {
            for mut col in out.column_iter_mut() {
                let p = project_simplex(col.as_slice());
                col.copy_from_slice(&p);
            }
        }
        Constraint::Smooth { lambda } => {
            for mut col in out.column_iter_mut() {
                let p = smooth_solve(col.as_slice(), lambda, rho);
                col.copy_from_slice(&p);
            }
        }
        Constraint::HardSparsity { s } => {
            for mut col in out.column_iter_mut() {
                let p = keep_largest(col.as_slice(), s);
                col.copy_from_slice(&p);
            }
        }
        Constraint::MonotoneNondecreasing => {
            for mut col in out.column_iter_mut() {
                let p = isotonic_nondecreasing(col.as_slice());
                col.copy_from_slice(&p);
            }
        }
        Constraint::SymmetricWith { .. } => {
            return Err(Error::invalid("symmetric coupling has no proximity operator"));
        }
    }
    Ok(out)
}

/// Euclidean projection onto `{x ≥ 0, Σx = 1}` by the sort-and-threshold
/// method. Equal entries are ordered by index.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Least-squares nondecreasing fit (pool adjacent violators).
pub fn isotonic_nondecreasing(v: &[f64]) -> Vec<f64> {
    // Each block: (sum, count).
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(v.len());
    for &x in v {
        blocks.push((x, 1));
        while blocks.len() > 1 {
            let (s1, n1) = blocks[blocks.len() - 1];
            let (s0, n0) = blocks[blocks.len() - 2];
            if s0 / n0 as f64 > s1 / n1 as f64 {
                blocks.pop();
                *blocks.last_mut().unwrap() = (s0 + s1, n0 + n1);
            } else {
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(v.len());
    for (s, n) in blocks {
        out.extend(std::iter::repeat_n(s / n as f64, n));
    }
    out
}

/// Keep the `s` largest-magnitude entries (ties to the lower index).
pub(crate) fn keep_largest(v: &[f64], s: usize) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    let mut out = vec![0.0; v.len()];
    for &i in order.iter().take(s) {
        out[i] = v[i];
    }
    out
}

/// Solve `(2λ DᵀD + ρ I) c = ρ v` with the Thomas algorithm.
fn smooth_solve(v: &[f64], lambda: f64, rho: f64) -> Vec<f64> {
    let n = v.len();
    if n == 1 {
        return v.to_vec();
    }
    let w = 2.0 * lambda;
    let diag = |i: usize| rho + w * if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
    let off = -w;
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    c_prime[0] = off / diag(0);
    d_prime[0] = rho * v[0] / diag(0);
    for i in 1..n {
        let denom = diag(i) - off * c_prime[i - 1];
        c_prime[i] = off / denom;
        d_prime[i] = (rho * v[i] - off * d_prime[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d_prime[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d_prime[i] - c_prime[i] * x[i + 1];
    }
    x
}
