//! Numerics for the fractional Hardy problem with a KPZ gradient term,
//!
//! ```text
//! (−Δ)ˢu = λ u/|x|^{2s} + |∇u|ᵖ + μ f   in Ω = B_R,   u = 0 in ℝᴺ∖Ω.
//! ```
//!
//! The crate computes the sharp Hardy constant, the Gamma-ratio multipliers
//! and the critical exponents `p±(λ, s)`, builds exact radial solutions and
//! supersolutions, discretizes the radial fractional Laplacian, and runs the
//! monotone approximation scheme whose convergence or blow-up separates
//! existence from non-existence.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod construct;
pub mod error;
pub mod io;
mod quadrature;
pub mod radialop;
pub mod solver;
pub mod specfun;
pub mod sweep;

pub use error::{Error, Result};
