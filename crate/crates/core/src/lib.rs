//! Space-time connections and Harnack quantities for exact Ricci flows.
//!
//! The crate evaluates every quantity through truncated Taylor jets of the
//! closed-form metrics in [`solutions`], so derivatives of curvature are
//! exact up to floating-point roundoff. Identities are reported as
//! [`residual::Residual`] values and compared against a scale-relative
//! tolerance.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod error;
pub mod harnack;
pub mod jets;
pub mod lie;
pub mod residual;
pub mod sampling;
pub mod solutions;
pub mod spacetime;
pub mod tensor;

pub use error::{LabError, Result};
pub use jets::Jet;
pub use residual::Residual;
pub use solutions::{FlowSolution, Geometry, Point, SolutionParams};
