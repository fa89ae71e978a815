//! Moments and transforms of exponential functionals `I_t = ∫₀ᵗ e^{-X_s} ds`
//! of Lévy processes and processes with independent increments.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod expr;
pub mod mc;
pub mod moments;
pub mod process;
pub mod quad;
pub mod spec;

pub use error::{Error, Result};
