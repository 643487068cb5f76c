//! Greedy rational approximation of functions of symmetric positive definite
//! operators, fitted directly in the uniform norm.
//!
//! The library builds rational (and more general dictionary) approximations
//! `f(z) ~ c0 + sum_j c_j / (z - p_j)` with all poles negative, so that
//! applying the approximation to an SPD matrix only ever requires solving
//! shifted systems `(A - p_j I) x = b` that are themselves SPD.
//!
//! Three drivers are provided:
//!
//! * [`greedy::run_oga`] — orthogonal greedy selection with L2 projection;
//! * [`greedy::run_improved_oga`] — the same selection followed by a best
//!   uniform-norm coefficient fit (once at the end or after every step);
//! * [`greedy::run_wcga`] — a weak Chebyshev greedy loop working in the
//!   uniform norm throughout.
//!
//! Supporting modules: [`minimax`] solves the linear best-uniform coefficient
//! subproblem, [`operator`] applies partial fractions to SPD matrices via
//! shifted solves, and [`precond`] runs a desk-scale preconditioner benchmark
//! on a 1-D spectral surrogate of a fractional interface operator.

pub mod analysis;
pub mod domain;
pub mod error;
pub mod greedy;
pub mod minimax;
pub mod operator;
pub mod precond;

pub use domain::{
    Approximant, BasisElement, DictionarySpec, GreedyTrace, Interval, IterationRecord,
    PartialFraction, PoleWindow, TargetFunction,
};
pub use error::{Error, Result};
