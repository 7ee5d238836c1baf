//! Exact perturbative solver for the overdetermined torsion problem on a
//! perturbed disk.
//!
//! The crate builds, in exact rational arithmetic, the truncated pair
//! `(u^[K], w^[K])` solving
//!
//! ```text
//! -Δu + mu w u = 1   on the domain r <= 1 + mu g(θ)
//!  u = 0,  ∂_ν u = 1/2   on its boundary
//! ```
//!
//! up to a residual of order mu^{K+1}, and evaluates the quantitative
//! machinery (majorizing sequences, exponential envelopes, optimal
//! truncation order, super-polynomial error constants) attached to the
//! construction.
//!
//! Modules:
//! - [`rational`]: arbitrary-precision rationals and combinatorics;
//! - [`radial`]: the ring of `c r^m log^p r` expressions and its integral
//!   operators;
//! - [`fourier`]: finite trigonometric series over that ring;
//! - [`hierarchy`]: the order-by-order construction;
//! - [`defects`]: symbolic mu-series and numeric sups of the three defects;
//! - [`bounds`]: scheme constants, recurrences, Catalan closed form,
//!   optimal order and error constants.

pub mod bounds;
pub mod defects;
pub mod error;
pub mod fourier;
pub mod hierarchy;
pub mod radial;
pub mod rational;
pub mod serialize;

pub use error::{Error, Result};
pub use fourier::{FourierField, ThetaField};
pub use hierarchy::{FreeCoefficients, HierarchyState};
pub use radial::{OriginClass, RadialExpr};
pub use rational::Rat;
