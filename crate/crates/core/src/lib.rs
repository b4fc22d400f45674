//! Exact symbolic calculus for Lie algebra actions on coordinate charts.
//!
//! The crate models finite-dimensional Lie algebras acting by polynomial or
//! rational vector fields on open coordinate charts, and builds the calculus
//! that sits on top: differential forms with scalar / vector / tangent values,
//! graded brackets, principal connection data with curvature and covariant
//! derivatives, Maurer-Cartan forms for free transitive actions, numeric flow
//! and parallel transport, and invariant-polynomial characteristic forms.
//!
//! All symbolic data lives over a canonical rational-function field, so
//! structural equality of results is mathematical equality; numeric layers
//! (flows, transport, holonomy) carry explicit tolerances.

// Dense index loops and `% 2` parity tests read better than iterator
// chains in the matrix and sign-bookkeeping kernels below.
#![allow(clippy::needless_range_loop, clippy::manual_is_multiple_of)]

pub mod error;
pub mod poly;
pub mod ratfunc;
pub mod chart;
pub mod linalg;
pub mod form;
pub mod lie;
pub mod cert;
pub mod brackets;
pub mod action;
pub mod connection;
pub mod homogeneous;
pub mod transport;
pub mod chernweil;
pub mod fixtures;
pub mod sampler;
pub mod scenario;

pub use chart::Chart;
pub use error::{Error, Result};
pub use poly::{Poly, Rat};
pub use ratfunc::{parse_expr, RationalFunction, RF};
