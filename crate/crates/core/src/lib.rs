pub mod analysis;
pub mod chain;
pub mod cli;
pub mod cluster;
pub mod config;
pub mod context;
pub mod detect;
pub mod embed;
pub mod error;
pub mod fixtures;
mod http;
pub mod objective;
pub mod proposal;
pub mod rng;
pub mod semantics;

pub use error::{CarolError, Result};
