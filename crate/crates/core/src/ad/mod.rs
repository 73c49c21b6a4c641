//! Scalar reverse-mode automatic differentiation.
//!
//! Values are recorded on a [`Tape`] while ordinary arithmetic runs on
//! [`Var`] handles. Gradients and dense Jacobians come from reverse sweeps
//! over the recording. Non-smooth primitives (`abs`, `pos_part`, branching on
//! values) differentiate the branch that was taken, with derivative 0 exactly
//! at a kink.
//!
//! Domain violations (square root of a negative number, logarithm of a
//! non-positive number, division by zero, `atan2(0, 0)`) are flagged on the
//! tape and surface as [`Error::Domain`](crate::Error::Domain) when the
//! Jacobian is extracted.

mod scalar;
mod tape;

pub use scalar::{Scalar, POW_BASE_FLOOR};
pub use tape::{jacobian, jacobian_with_values, OpKind, Tape, Var};
