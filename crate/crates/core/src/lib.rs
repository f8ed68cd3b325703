//! Number of harmonics of the Wigner function as a complexity measure for
//! the kicked quartic oscillator, its link to echo fidelity, and the
//! classical phase-space counterpart.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod model;
pub mod propagator;
pub mod harmonics;
pub mod echo;
pub mod oracle;
pub mod classical;
pub mod fit;
pub mod random;

pub use error::{Error, Result};
