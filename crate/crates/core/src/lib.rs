#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conditions;
pub mod error;
pub mod format;
pub mod functionals;
pub mod grid;
pub mod harness;
pub mod initial_data;
pub mod nonlinearity;
pub mod quadrature;
pub mod solver;
mod tridiag;

pub use error::{Error, Result};
