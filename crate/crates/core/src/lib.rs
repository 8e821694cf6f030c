//! Training-time regularizers that make the distribution of learned embeddings
//! statistically similar across the two values of a binary sensitive attribute.
//!
//! The crate provides five parameter-free similarity measures (an MMD
//! U-statistic, a debiased entropic-transport divergence, and three
//! closed-form divergences between fitted diagonal Gaussians), a manual
//! reverse-mode MLP stack, a single-loop trainer that adds `lambda *
//! measure` to the task loss, a nested-loop adversarial baseline, and an
//! evaluation harness that measures attribute leakage with freshly trained
//! probes.
//!
//! Everything is `f64`, deterministic under a fixed seed, and free of global
//! state: random number generators are created explicitly and passed down.

pub mod data;
pub mod divergences;
pub mod error;
pub mod eval;
pub mod model;
pub mod numerics;
pub mod stats;
pub mod training;

pub use error::{Error, Result};
