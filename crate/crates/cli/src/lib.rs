//! Command-line front end: synthesis, training, inference, evaluation,
//! classical baselines and the latency benchmark.

pub mod bench;
pub mod commands;
pub mod error;
pub mod pipeline;

pub use commands::{run, Cli};
pub use error::exit_code;
