//! Numerical verification of Hermite-Hadamard type inequalities for scalar
//! fields on closed balls in R^3.

pub mod fields;
pub mod expr;
pub mod geometry;
pub mod inequalities;
pub mod quadrature;
mod sampling;
pub mod summation;
pub mod report;
pub mod cli;
