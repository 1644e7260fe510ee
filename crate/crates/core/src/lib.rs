// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod combined;
pub mod dense;
pub mod dense_amls;
pub mod error;
pub mod hamls;
pub mod hmatrix;
pub mod mesh;
pub mod quadrature;

pub use error::{AmlsError, Result};
