//! Domain adaptation from a sparsely-labeled source: joint projected
//! clustering, graph label propagation, and marginal/conditional
//! distribution alignment, optimized by alternating a constrained
//! eigen-step with nonnegative multiplicative updates.
//!
//! The crate exposes the data model ([`dataset`]), the similarity graph and
//! harmonic propagation ([`graph`]), the alignment quantities
//! ([`alignment`]), the solver ([`solver`]), an experiment harness
//! ([`harness`]), built-in oracle checks ([`selfcheck`]), and the CLI
//! dispatcher ([`cli`]) used by the `slsada` binary.

pub mod alignment;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod graph;
pub mod harness;
pub mod selfcheck;
pub mod solver;

pub use error::{Error, Result};
