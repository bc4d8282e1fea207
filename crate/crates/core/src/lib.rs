mod error;
mod linalg;
pub mod baselines;
pub mod cli;
pub mod config;
pub mod harness;
pub mod nn;
pub mod numeric;
pub mod problem;
pub mod projection;
pub mod trainer;

pub use error::{Error, Result};
