// `!(x > 0.0)` style guards deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary_space;
pub mod decay_lab;
pub mod error;
pub mod geometry;
pub mod integral_equation;
pub mod kernels;
pub mod potentials;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
