pub mod channel;
pub mod chest;
pub mod coding;
pub mod error;
pub mod grid;
pub mod rng;
pub mod rx;
pub mod sim;
pub mod waveform;

pub use error::{Error, Result};
