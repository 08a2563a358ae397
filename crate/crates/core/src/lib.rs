//! Two-parameter weak thresholding greedy algorithm for the multivariate
//! Haar basis of `L1[0,1]^d`.
//!
//! All numeric code is generic over [`Scalar`]; the crate's reference
//! scalar is the exact [`Rational`], and the aliases below fix it.

pub mod constructions;
pub mod dyadic;
pub mod error;
pub mod greedy;
pub mod haar;
pub mod io;
pub mod scalar;
pub mod symmetry;
pub mod verify;

pub use dyadic::{DyadicCube, GeneralizedChain, HaarKey};
pub use error::{Error, Result};
pub use greedy::{GreedyParams, GreedyTrace, SelectionRule};
pub use haar::{Grid, HaarExpansion, Region};
pub use scalar::Scalar;

/// Exact arbitrary-precision rational.
pub type Rational = num_rational::BigRational;

/// Exact Haar expansion; the representation used by every verification path.
pub type Expansion = HaarExpansion<Rational>;
pub type ExpansionF64 = HaarExpansion<f64>;
pub type ExpansionF32 = HaarExpansion<f32>;

pub type Trace = GreedyTrace<Rational>;
pub type TraceF64 = GreedyTrace<f64>;
pub type Params = GreedyParams<Rational>;
