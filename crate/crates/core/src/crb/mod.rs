//! Fisher information for CPD and two-factor matrix models, with
//! Cramér–Rao bounds computed by a structured pseudo-inverse.
//!
//! With i.i.d. Gaussian noise of variance `σ²`, the Fisher information of
//! the stacked parameter `θ = [vec A_0; …; vec A_{N−1}]` is `Φ = Ψ / σ²`
//! with `Ψ = JᵀJ`. `Ψ` is singular along the scaling directions of the
//! model, so the bound is the pseudo-inverse `σ²Ψ†`.

mod fim;
mod mf;
mod pinv;

pub use fim::{build_fim, FimBlocks, DENSE_PARAM_LIMIT};
pub use mf::{crb_matrix_factorization, mf_fim, MfCrb};
pub use pinv::{crb_pinv, fim_rank_deficiency, noise_rescale, CrbMethod, CrbReport, NoiseModel, RANK_RTOL};
