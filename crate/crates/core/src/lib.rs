//! Polynomial matrix inversion by quantum singular value transformation,
//! simulated classically, and its use as the derivative solver in a
//! compact-scheme 1D Maxwell evolution.

// `!(x > 0.0)` style checks are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backend;
pub mod error;
pub mod matkit;
pub mod maxwell;
pub mod pade;
pub mod phasekit;
pub mod qcsim;
pub mod qsvt_op;

pub use error::{Error, Result};
pub use matkit::{CMatrix, CVector};
