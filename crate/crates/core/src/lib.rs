//! Cycle-level model of a sparse bidirectional-RNN accelerator built around
//! bitmask-encoded weights and activations.

pub mod cost;
pub mod error;
pub mod model;
pub mod sim;
pub mod sparse;

pub use error::{Error, Result};
