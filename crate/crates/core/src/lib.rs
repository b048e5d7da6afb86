pub mod cli;
pub mod dict;
pub mod encoder;
pub mod error;
pub mod frozen;
pub mod metrics;
pub mod rng;
pub mod segment;
pub mod synth;
pub mod text;
pub mod train;

pub use error::{Error, Result};
