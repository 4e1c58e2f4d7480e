use crate::linalg::real_poly_roots;
use crate::tensor::{KruskalModel, Matrix, TensorLike};
use crate::{Error, Result};

/// Outcome of an exact line search along a joint factor direction.
#[derive(Clone, Debug)]
pub struct LineSearchResult {
    pub step: f64,
    pub predicted_loss: f64,
    /// Loss polynomial coefficients in the normalized variable `μ / scale`,
    /// ascending powers.
    pub coefficients: Vec<f64>,
    pub scale: f64,
}

impl LineSearchResult {
    /// Interpolated loss at step `mu`.
    pub fn polynomial(&self, mu: f64) -> f64 {
        horner(&self.coefficients, mu / self.scale)
    }
}

/// Keeps the previously accepted step as the sampling scale.
#[derive(Clone, Debug)]
pub struct LineSearch {
    pub last_step: f64,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self { last_step: 1.0 }
    }
}

impl LineSearch {
    pub fn search<T: TensorLike + ?Sized>(
        &mut self,
        t: &T,
        m: &KruskalModel,
        direction: &[Matrix],
        window: (f64, f64),
    ) -> Result<LineSearchResult> {
        let res = exact_line_search(t, m, direction, window, self.last_step)?;
        if res.step != 0.0 {
            self.last_step = res.step.abs();
        }
        Ok(res)
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Sample points (in units of the scale) for a polynomial of degree `deg`.
/// The first seven are `{0, ±¼, ±½, 1, 2}`.
fn sample_points(deg: usize) -> Vec<f64> {
    let mut pts = vec![0.0, 0.25, -0.25, 0.5, -0.5, 1.0, 2.0];
    let mut k: usize = 1;
    while pts.len() < deg + 1 {
        pts.push(if k % 2 == 1 { -(0.5 + 0.5 * k.div_ceil(2) as f64) } else { 2.0 + 0.5 * (k / 2) as f64 });
        k += 1;
    }
    pts.truncate(deg + 1);
    pts
}

/// Exact minimization of `L(μ) = ‖X − ⟦A_n + μ Δ_n⟧‖²` over `μ ∈ window`.
///
/// `L` is a polynomial of degree `2N` in `μ` (degree 6 for three modes). It
/// is recovered exactly from `2N + 1` samples `μ = scale · {0, ±¼, ±½, 1, 2, …}`
/// by a Vandermonde solve; the real roots of its derivative (companion-matrix
/// eigenvalues) and the window endpoints are the candidates.
pub fn exact_line_search<T: TensorLike + ?Sized>(
    t: &T,
    m: &KruskalModel,
    direction: &[Matrix],
    window: (f64, f64),
    scale: f64,
) -> Result<LineSearchResult> {
    if direction.len() != m.factors.len() || direction.iter().zip(&m.factors).any(|(d, a)| d.shape() != a.shape()) {
        return Err(Error::shape("direction must match the model factors"));
    }
    if !(window.0 < window.1) || !(scale > 0.0) {
        return Err(Error::invalid("line search needs lo < hi and a positive scale"));
    }
    let deg = 2 * m.ndim();
    let nu = sample_points(deg);
    let loss_at = |mu: f64| -> Result<f64> {
        let mut p = m.clone();
        for (a, d) in p.factors.iter_mut().zip(direction) {
            *a += d * mu;
        }
        t.residual(&p)
    };
    let vals: Vec<f64> = nu.iter().map(|&v| loss_at(v * scale)).collect::<Result<_>>()?;
    let vander = Matrix::from_fn(deg + 1, deg + 1, |r, c| nu[r].powi(c as i32));
    let coeffs = vander
        .lu()
        .solve(&nalgebra::DVector::from_vec(vals.clone()))
        .ok_or_else(|| Error::Singular("Vandermonde system of line-search samples".into()))?;
    let coefficients: Vec<f64> = coeffs.iter().copied().collect();
    let base = LineSearchResult { step: 0.0, predicted_loss: vals[0], coefficients: coefficients.clone(), scale };

    let deriv: Vec<f64> = (1..coefficients.len()).map(|k| k as f64 * coefficients[k]).collect();
    let size = coefficients.iter().map(|c| c.abs()).sum::<f64>();
    if deriv.iter().all(|d| d.abs() <= 1e-13 * size) {
        return Ok(base);
    }
    let (lo, hi) = (window.0 / scale, window.1 / scale);
    let mut cands = vec![lo, hi];
    cands.extend(real_poly_roots(&deriv, 1e-8).into_iter().filter(|&r| r > lo && r < hi));
    cands.extend(nu.iter().copied().filter(|&v| v >= lo && v <= hi));
    let mut best: (f64, f64) = (f64::INFINITY, 0.0);
    for &c in &cands {
        let v = horner(&coefficients, c);
        if v < best.0 || (v == best.0 && c.abs() < best.1.abs()) {
            best = (v, c);
        }
    }
    Ok(LineSearchResult { step: best.1 * scale, predicted_loss: best.0, ..base })
}
