//! Contextual dynamic pricing with heterogeneous buyers.
//!
//! The crate provides exact finite-support pricing primitives, finite model
//! classes, the learners (optimistic posterior sampling, variance-aware
//! zooming, type-feedback learners), lower-bound instance generators and a
//! seeded experiment harness that measures regret against the exact
//! per-context benchmark.

pub mod error;
pub mod gops;
pub mod harness;
pub mod instances;
pub mod learner;
pub mod model_space;
pub mod pricing;
pub mod type_feedback;
pub mod verify;
pub mod zoomv;

pub use error::{PricingError, Result};
