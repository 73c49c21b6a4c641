//! Harmonic balance for nonlinear structural dynamics with Jacobians from
//! reverse-mode automatic differentiation.
//!
//! The crate is `no_std` (it needs `alloc`). File formats and the command
//! line live in the companion `hbad` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod ad;
pub mod continuation;
mod error;
pub mod fourier;
pub mod hb;
pub mod linalg;
pub mod model;
pub mod stability;
pub mod timeint;

pub use error::{Error, Result};
