// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod cli;
pub mod error;
pub mod kernels;
mod precision;
pub mod quadrature;
pub mod rigidity;
pub mod special_fn;
pub mod su2;
pub mod verify;

pub use error::{Error, Result};
