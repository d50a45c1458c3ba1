//! Numerical verification engines for warped-product quasi-Einstein metrics
//! with harmonic Weyl curvature.
//!
//! The crate provides two independent curvature engines — exact adapted-frame
//! closed forms over derivative jets ([`warped`]) and a finite-difference
//! coordinate-chart oracle ([`chart`]) — plus the defining-equation residual
//! battery ([`analysis`]), the structure ODE system with first-integral
//! monitors ([`flow`]) and constructors for the classified metric families
//! ([`catalog`]).
//!
//! Everything is generic over the floating scalar through [`scalar::Real`];
//! the aliases below fix the `f64` instantiation used by the verification
//! binary and the test suites.

// index arithmetic over small dense tensors reads better as plain loops,
// and comparisons are deliberately negated so NaN parameters fail closed
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod scalar;

pub mod analysis;
pub mod catalog;
pub mod chart;
pub mod flow;
pub mod jet;
pub mod smooth;
pub mod tensor;
pub mod warped;

pub use scalar::Real;

/// Default verification scalar.
pub type Scalar = f64;
pub type Jet = jet::Jet4<Scalar>;
pub type Fn1 = smooth::SmoothFn<Scalar>;
pub type Window = smooth::Interval<Scalar>;
pub type Metric = warped::MultiWarpedMetric<Scalar>;
pub type Fiber = warped::FiberBlock<Scalar>;
pub type PotentialF64 = analysis::Potential<Scalar>;
pub type Family = catalog::ResolvedFamily<Scalar>;
pub type FlowState = flow::ODEState<Scalar>;
