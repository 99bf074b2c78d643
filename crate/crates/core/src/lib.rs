pub mod asymptotics;
pub mod cache_sizing;
pub mod closed_forms;
pub mod curve;
pub mod distributions;
pub mod error;
pub mod monte_carlo;
pub mod order_engine;
pub mod quad;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
