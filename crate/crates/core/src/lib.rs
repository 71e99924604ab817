//! Desk-scale laboratory for finite sums of weighted composition operators
//! `W = Σ uᵢ C_{φᵢ}` acting between `L^p` spaces of a finite measure space.
//!
//! The crate computes the criterion function `J`, evaluates the closed-range,
//! injectivity and invertibility criteria, builds the polar decomposition and the
//! spectral measure of the power multiplier, and cross-checks each verdict against
//! dense linear-algebra oracles.
//!
//! Layout:
//! - [`measure_space`]: atoms, partitions, conditional expectation, norms, refinement.
//! - [`dynamics`]: self-maps, Radon–Nikodym derivatives, fibers, periods.
//! - [`operator`]: the operator itself, its matrix, `J`, and the `W*W = M_J` identity.
//! - [`criteria`]: closed-range criteria, band decompositions, witness search.
//! - [`polar`] and [`spectral`]: polar decomposition, invertibility, spectral measure,
//!   injectivity.
//! - [`harness`]: scenario files, random instances, reports and the self-test suite.

pub mod criteria;
pub mod dynamics;
mod error;
pub mod harness;
pub mod measure_space;
pub mod operator;
pub mod oracle;
mod par;
pub mod polar;
pub mod spectral;
mod sum;
pub mod tol;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use dynamics::SelfMap;
pub use measure_space::{Atom, AtomKind, Exponent, FiniteMeasureSpace, PFunction, Partition};
pub use operator::{CriterionFunction, Term, WeightedSumOperator};
pub use tol::Tolerances;
