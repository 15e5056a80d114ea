//! Long-run average cost impulse control for finite continuous-time Markov chains.

pub mod cost;
pub mod ergodic;
pub mod error;
pub mod impulse;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod policy;
pub mod problems;
pub mod sim;
pub mod stopping;

pub use error::{Error, Result};
