//! Majority dynamics on regular trees and random regular graphs, together with
//! the dynamic cavity machinery built on top of it.
//!
//! The modules are layered bottom-up:
//!
//! * [`graphs`] and [`dynamics`] define the substrate and the synchronous update.
//! * [`montecarlo`] estimates consensus thresholds and bias curves by simulation.
//! * [`gaussian`] evaluates the Gaussian slice probabilities used by [`cavity`],
//!   which computes the correlation/response kernels and the biased-regime predictor.
//! * [`lowerbound`] holds the exact root-trajectory recursion and the
//!   alternating-core iteration behind the lower bound on the threshold.
//! * [`upperbound`] evaluates the bootstrap-percolation upper bound.
//! * [`cltcheck`] compares exact lattice sums with their Gaussian approximation.
//!
//! Probability-mass code is generic over [`Scalar`], implemented for `f64` and
//! for exact rationals.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cavity;
pub mod cltcheck;
pub mod dynamics;
mod error;
pub mod gaussian;
pub mod graphs;
pub mod lowerbound;
pub mod montecarlo;
mod scalar;
pub mod seed;
pub mod trajectory;
pub mod upperbound;

pub use error::{Error, ErrorClass, Result};
pub use scalar::Scalar;
pub use seed::RandomSeed;
pub use trajectory::Trajectory;

/// Floating-point scalar used by all numerical code.
pub type Real = f64;

/// Exact rational scalar for oracle computations.
pub type Exact = num_rational::BigRational;

/// Root-trajectory family in double precision.
pub type RootFamily = lowerbound::ConditionalFamily<Real>;

/// Root-trajectory family in exact arithmetic.
pub type ExactRootFamily = lowerbound::ConditionalFamily<Exact>;

/// Alternating-core tables in double precision.
pub type Psi = lowerbound::PsiTables<Real>;
