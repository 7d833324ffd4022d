//! Boundary null-controls for the one-dimensional fractional heat and
//! Schrödinger equations.
//!
//! The crate builds controls by the moment method (a biorthogonal family to
//! the exponentials, assembled into an entire interpolant and inverted by
//! Paley–Wiener), measures control costs with minimum-norm Gramian solves,
//! certifies controls with an exact modal simulator, and fits the cost
//! blow-up `exp(ρ/T^τ)` over sweeps of the horizon.

pub mod biorthogonal;
pub mod constants;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod numerics;
pub mod simulator;
pub mod spectrum;
pub mod synthesis;

pub use error::{Error, Result};
pub use spectrum::{FracModel, ModelKind};
