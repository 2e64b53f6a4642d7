//! Optimal deception against data-driven linear-quadratic adversaries.

pub mod adversary;
pub mod deception;
pub mod dual;
pub mod instances;
pub mod matsolve;
pub mod robustness;

pub use matsolve::{Matrix, SymPosDef};
