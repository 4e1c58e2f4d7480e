//! Canonical polyadic (CPD) and Tucker decompositions of dense and sparse
//! tensors, together with identifiability checks and Cramér–Rao bounds.
//!
//! Tensors are stored column-major (first index fastest), so `vec` and the
//! mode unfoldings follow the usual `X_(1) = (C ⊙ B) Aᵀ` convention.
//! Modes are 0-based throughout the library API; the command-line tool and
//! the COO file format use 1-based indices.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod constraints;
pub mod cpd;
pub mod crb;
mod error;
pub mod io;
pub mod linalg;
pub mod random;
pub mod tensor;
pub mod tucker;
pub mod uniqueness;

pub use error::{Error, Result};
pub use tensor::{DenseTensor, KruskalModel, Matrix, SparseTensor, Tensor};
