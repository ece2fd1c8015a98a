//! Numerical workbench for weighted frequency functions of Robin problems
//! `div(A Du) = V u` in a half-ball with `A Du · n = η u` on the flat boundary.
//!
//! The crate is organised bottom-up:
//!
//! * [`quadrature`] integrates against the degenerate weights `(r² − |x|²)^p`;
//! * [`coefficients`] holds the data `(A, V, η)` and their scalar bounds;
//! * [`solutions`] provides analytic test solutions and a P1 finite-element solver;
//! * [`frequency`] computes `H`, `I`, `N` and checks the inequalities they obey;
//! * [`flatten`] straightens a curved boundary chart into the half-space normal form;
//! * [`doubling`] turns frequency bounds into doubling and vanishing-order reports;
//! * [`cli`] wires everything into config-driven experiments.

pub mod cli;
pub mod coefficients;
pub mod doubling;
pub mod error;
pub mod flatten;
pub mod frequency;
pub mod linalg;
pub mod quadrature;
pub mod solutions;

pub use error::{Error, Result};
pub use linalg::{Mat, Point};
