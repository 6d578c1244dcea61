//! Learners that observe the buyer's type after each round.

pub mod ellipsoid;
pub mod identifier;
pub mod plugin;

pub use ellipsoid::{CutOutcome, EllipsoidState};
pub use identifier::{Identifier, IdentifierConfig, IdentifierState, Mode};
pub use plugin::{Plugin, PluginState};
