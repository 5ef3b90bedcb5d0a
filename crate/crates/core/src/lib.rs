pub mod analytic;
pub mod config;
pub mod emit;
pub mod engine;
pub mod error;
pub mod hilbert;
pub mod strobe;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
