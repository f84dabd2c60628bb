//! Optimal investment for a defined-contribution pension fund that maximizes
//! CRRA utility of terminal surplus subject to a lower bound on the tail VaR
//! and a portfolio-insurance floor, with inflation-linked assets.

// `!(a > b)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod feasibility;
pub mod kernel;
pub mod market;
pub mod montecarlo;
pub mod normal;
pub mod quadrature;
pub mod quantile;
pub mod roots;
pub mod solver;
pub mod strategy;
pub mod utility;

pub use error::{Error, Result};
