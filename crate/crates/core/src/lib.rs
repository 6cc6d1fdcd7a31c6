//! Projected least squares (PLS) quantum state tomography.
//!
//! The pipeline: build a measurement scheme, compute Born-rule outcome
//! probabilities for a target state, draw seeded samples, invert the
//! frequencies with a closed-form least-squares estimator, and project the
//! result onto the set of density matrices. On top of that sit the
//! concentration-bound formulas and the Monte-Carlo harness that checks them.

pub mod analyze;
pub mod error;
pub mod estimate;
pub mod exec;
pub mod harness;
pub mod linalg;
pub mod measurements;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
