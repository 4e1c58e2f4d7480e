use crate::tensor::{check_factors, kronecker, KruskalModel, Matrix};
use crate::{Error, Result};

/// Dense verification paths refuse models with more parameters than this.
pub const DENSE_PARAM_LIMIT: usize = 200_000;

/// Block structure of `Ψ = Δ + ΥKΥᵀ` for an `N`-way model `⟦H_0, …, H_{N−1}⟧`.
///
/// * `Δ = blkdiag(Γ_d ⊗ I_{n_d})` with `Γ_d = ∗_{j≠d} H_jᵀH_j`.
/// * `Υ = blkdiag(I_F ⊗ H_d)`.
/// * `K` has zero diagonal blocks and `K_{d,c} = K_{F,F} diag(vec Γ_{d,c})`
///   with `Γ_{d,c} = ∗_{j∉{d,c}} H_jᵀH_j`.
///
/// Only the factors and their `F × F` Grams are stored; the large matrices
/// are assembled on request for verification.
#[derive(Clone, Debug)]
pub struct FimBlocks {
    factors: Vec<Matrix>,
    grams: Vec<Matrix>,
    sigma2: f64,
}

/// Fisher information of `model` (weights absorbed into mode 0) under
/// Gaussian noise of variance `sigma2`.
pub fn build_fim(model: &KruskalModel, sigma2: f64) -> Result<FimBlocks> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::invalid("noise variance must be positive"));
    }
    if model.ndim() < 2 {
        return Err(Error::invalid("Fisher information needs at least two modes"));
    }
    let factors = model.absorbed_factors();
    check_factors(&model.shape(), &factors)?;
    let grams = factors.iter().map(|h| h.transpose() * h).collect();
    Ok(FimBlocks { factors, grams, sigma2 })
}

impl FimBlocks {
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn rank(&self) -> usize {
        self.factors[0].ncols()
    }

    pub fn ndim(&self) -> usize {
        self.factors.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(|h| h.nrows()).collect()
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    /// `H_dᵀH_d`.
    pub fn gram(&self, d: usize) -> &Matrix {
        &self.grams[d]
    }

    /// Length of `θ`, `F · Σ n_d`.
    pub fn num_params(&self) -> usize {
        self.rank() * self.shape().iter().sum::<usize>()
    }

    /// Offset of mode `d` inside `θ`.
    pub fn offset(&self, d: usize) -> usize {
        self.rank() * self.factors[..d].iter().map(|h| h.nrows()).sum::<usize>()
    }

    /// `Γ_d`.
    pub fn gamma(&self, d: usize) -> Matrix {
        let f = self.rank();
        let mut g = Matrix::from_element(f, f, 1.0);
        for (j, gj) in self.grams.iter().enumerate() {
            if j != d {
                g.component_mul_assign(gj);
            }
        }
        g
    }

    /// `Γ_{d,c}` for `d ≠ c`; the all-ones matrix when no other mode exists.
    pub fn gamma_pair(&self, d: usize, c: usize) -> Matrix {
        let f = self.rank();
        let mut g = Matrix::from_element(f, f, 1.0);
        for (j, gj) in self.grams.iter().enumerate() {
            if j != d && j != c {
                g.component_mul_assign(gj);
            }
        }
        g
    }

    pub(crate) fn guard(&self) -> Result<()> {
        let p = self.num_params();
        if p > DENSE_PARAM_LIMIT {
            return Err(Error::TooLarge(format!("{p} parameters exceed the dense limit {DENSE_PARAM_LIMIT}")));
        }
        Ok(())
    }

    /// `Ψ z` for `z` given as one `n_d × F` block per mode, applied without
    /// forming `Ψ`: `(Ψz)_d = Z_d Γ_d + Σ_{c≠d} H_d (Γ_{d,c} ∗ Z_cᵀH_c)`.
    pub fn apply(&self, z: &[Matrix]) -> Result<Vec<Matrix>> {
        if z.len() != self.ndim() || z.iter().zip(&self.factors).any(|(a, h)| a.shape() != h.shape()) {
            return Err(Error::shape("Ψ operand blocks must match the factor shapes"));
        }
        let cross: Vec<Matrix> = z.iter().zip(&self.factors).map(|(zc, hc)| zc.transpose() * hc).collect();
        Ok((0..self.ndim())
            .map(|d| {
                let mut out = &z[d] * self.gamma(d);
                for c in (0..self.ndim()).filter(|&c| c != d) {
                    out += &self.factors[d] * self.gamma_pair(d, c).component_mul(&cross[c]);
                }
                out
            })
            .collect())
    }

    /// Dense `Ψ` (unit noise).
    pub fn dense_psi(&self) -> Result<Matrix> {
        self.guard()?;
        let p = self.num_params();
        let f = self.rank();
        let mut psi = Matrix::zeros(p, p);
        for d in 0..self.ndim() {
            let nd = self.factors[d].nrows();
            let od = self.offset(d);
            let gd = self.gamma(d);
            for a in 0..f {
                for b in 0..f {
                    for i in 0..nd {
                        psi[(od + i + nd * a, od + i + nd * b)] = gd[(a, b)];
                    }
                }
            }
            for c in (0..self.ndim()).filter(|&c| c != d) {
                let (hd, hc) = (&self.factors[d], &self.factors[c]);
                let nc = hc.nrows();
                let oc = self.offset(c);
                let g = self.gamma_pair(d, c);
                for a in 0..f {
                    for b in 0..f {
                        for j in 0..nc {
                            let s = g[(a, b)] * hc[(j, a)];
                            for i in 0..nd {
                                psi[(od + i + nd * a, oc + j + nc * b)] = hd[(i, b)] * s;
                            }
                        }
                    }
                }
            }
        }
        Ok(psi)
    }

    /// Dense `Φ = Ψ / σ²`.
    pub fn dense_fim(&self) -> Result<Matrix> {
        Ok(self.dense_psi()? / self.sigma2)
    }

    /// `Δ_d = Γ_d ⊗ I_{n_d}`.
    pub fn delta_block(&self, d: usize) -> Matrix {
        kronecker(&self.gamma(d), &Matrix::identity(self.factors[d].nrows(), self.factors[d].nrows()))
    }

    /// `Υ_d = I_F ⊗ H_d`.
    pub fn upsilon_block(&self, d: usize) -> Matrix {
        kronecker(&Matrix::identity(self.rank(), self.rank()), &self.factors[d])
    }

    /// Dense `K` of size `NF² × NF²`.
    pub fn k_matrix(&self) -> Matrix {
        let f = self.rank();
        let n = self.ndim();
        let ff = f * f;
        let mut k = Matrix::zeros(n * ff, n * ff);
        for d in 0..n {
            for c in (0..n).filter(|&c| c != d) {
                let g = self.gamma_pair(d, c);
                // K_{F,F}[i + F j, j + F i] = 1, right-multiplied by diag(vec Γ).
                for i in 0..f {
                    for j in 0..f {
                        k[(d * ff + i + f * j, c * ff + j + f * i)] = g[(j, i)];
                    }
                }
            }
        }
        k
    }

    /// `E` of size `NF² × (N−1)F`: block `(0, c)` is `I_F ⊙ I_F` and block
    /// `(c+1, c)` is `−(I_F ⊙ I_F)`.
    pub fn e_matrix(&self) -> Matrix {
        let f = self.rank();
        let n = self.ndim();
        let ff = f * f;
        let mut e = Matrix::zeros(n * ff, (n - 1) * f);
        for c in 0..n - 1 {
            for l in 0..f {
                e[(l + f * l, c * f + l)] = 1.0;
                e[((c + 1) * ff + l + f * l, c * f + l)] = -1.0;
            }
        }
        e
    }

    /// `L = ΥE`, whose columns span the scaling null space of `Ψ`: column
    /// `(c, l)` holds `vec(H_0 e_l e_lᵀ)` in block 0 and `−vec(H_{c+1} e_l e_lᵀ)`
    /// in block `c + 1`.
    pub fn null_basis(&self) -> Matrix {
        let f = self.rank();
        let mut l = Matrix::zeros(self.num_params(), (self.ndim() - 1) * f);
        let h0 = &self.factors[0];
        let n0 = h0.nrows();
        for c in 0..self.ndim() - 1 {
            let hc = &self.factors[c + 1];
            let nc = hc.nrows();
            let oc = self.offset(c + 1);
            for k in 0..f {
                let col = c * f + k;
                for i in 0..n0 {
                    l[(i + n0 * k, col)] = h0[(i, k)];
                }
                for i in 0..nc {
                    l[(oc + i + nc * k, col)] = -hc[(i, k)];
                }
            }
        }
        l
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpd::random_model;
    use crate::tensor::kruskal_reconstruct;

    fn blockdiag(blocks: &[Matrix]) -> Matrix {
        let (r, c) = blocks.iter().fold((0, 0), |(r, c), b| (r + b.nrows(), c + b.ncols()));
        let mut m = Matrix::zeros(r, c);
        let (mut i, mut j) = (0, 0);
        for b in blocks {
            m.view_mut((i, j), b.shape()).copy_from(b);
            i += b.nrows();
            j += b.ncols();
        }
        m
    }

    /// Central-difference Jacobian of `θ ↦ vec ⟦H⟧`.
    fn fd_jacobian(m: &KruskalModel) -> Matrix {
        let fs = m.absorbed_factors();
        let total: usize = m.shape().iter().product();
        let p = m.num_params();
        let mut j = Matrix::zeros(total, p);
        let h = 1e-6;
        let mut col = 0;
        for n in 0..fs.len() {
            for idx in 0..fs[n].len() {
                let eval = |delta: f64| {
                    let mut g = fs.clone();
                    g[n].as_mut_slice()[idx] += delta;
                    kruskal_reconstruct(&KruskalModel::from_factors(g).unwrap())
                };
                let (plus, minus) = (eval(h), eval(-h));
                for r in 0..total {
                    j[(r, col)] = (plus.data()[r] - minus.data()[r]) / (2.0 * h);
                }
                col += 1;
            }
        }
        j
    }

    #[test]
    fn diagonal_block_is_hadamard_kron_identity() {
        let m = random_model(&[3, 3, 2], 2, 1, 0);
        let fim = build_fim(&m, 1.0).unwrap();
        let psi = fim.dense_psi().unwrap();
        let (a, b, c) = (&m.factors[0], &m.factors[1], &m.factors[2]);
        let g = (c.transpose() * c).component_mul(&(b.transpose() * b));
        let expect = kronecker(&g, &Matrix::identity(3, 3));
        assert!((psi.view((0, 0), (6, 6)) - expect).norm() < 1e-14);
        let _ = a;
    }

    #[test]
    fn dense_matches_finite_difference_jacobian() {
        for (shape, f) in [(vec![3, 4, 2], 2), (vec![2, 3, 2, 2], 2)] {
            let m = random_model(&shape, f, 5, 0);
            let fim = build_fim(&m, 0.25).unwrap();
            let j = fd_jacobian(&m);
            let oracle = j.transpose() * &j / 0.25;
            let dense = fim.dense_fim().unwrap();
            assert!((&dense - &oracle).norm() < 1e-6 * oracle.norm());
        }
    }

    #[test]
    fn structured_form_and_operator_agree_with_dense() {
        let m = random_model(&[4, 3, 5], 3, 2, 0);
        let fim = build_fim(&m, 1.0).unwrap();
        let psi = fim.dense_psi().unwrap();
        let delta = blockdiag(&(0..3).map(|d| fim.delta_block(d)).collect::<Vec<_>>());
        let ups = blockdiag(&(0..3).map(|d| fim.upsilon_block(d)).collect::<Vec<_>>());
        let structured = &delta + &ups * fim.k_matrix() * ups.transpose();
        assert!((&structured - &psi).norm() < 1e-12 * psi.norm());
        assert!((&ups * fim.e_matrix() - fim.null_basis()).norm() < 1e-14);

        let z = random_model(&[4, 3, 5], 3, 8, 0).factors;
        let out = fim.apply(&z).unwrap();
        let zv: Vec<f64> = z.iter().flat_map(|a| a.iter().copied()).collect();
        let dense_out = &psi * nalgebra::DVector::from_vec(zv);
        let ov: Vec<f64> = out.iter().flat_map(|a| a.iter().copied()).collect();
        assert!((nalgebra::DVector::from_vec(ov) - &dense_out).norm() < 1e-12 * dense_out.norm());
    }

    #[test]
    fn symmetric_psd_with_scaling_null_space() {
        for seed in 0..5 {
            let m = random_model(&[4, 5, 3, 2], 2, seed, 0);
            let fim = build_fim(&m, 1.0).unwrap();
            let psi = fim.dense_psi().unwrap();
            assert!((&psi - psi.transpose()).norm() <= 1e-12 * psi.norm());
            let eig = psi.clone().symmetric_eigen();
            let max = eig.eigenvalues.max();
            assert!(eig.eigenvalues.min() >= -1e-10 * max);
            let l = fim.null_basis();
            assert!((&psi * &l).norm() <= 1e-10 * psi.norm() * l.norm());
        }
    }

    #[test]
    fn invalid_noise() {
        let m = random_model(&[2, 2, 2], 1, 0, 0);
        assert!(build_fim(&m, 0.0).is_err());
        assert!(build_fim(&m, -1.0).is_err());
    }
}
