//! Structural and practical identifiability analysis for car-following
//! models.
//!
//! - [`expr`]: symbolic expressions, parsing, differentiation, evaluation.
//! - [`models`]: the builtin models and user-defined ones.
//! - [`structural`]: Lie-derivative rank tests of the parameter-augmented
//!   system.
//! - [`simulate`]: Euler simulation and the output-error functional.
//! - [`directtest`]: the direct test for indistinguishable parameter pairs.
//! - [`cli`]: configuration and the command runners behind `cfident`.

pub mod cli;
pub mod directtest;
pub mod error;
pub mod expr;
pub mod models;
pub mod simulate;
pub mod structural;

pub use error::{Error, Result};
