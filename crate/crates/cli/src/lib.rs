//! Command-line workflows around the `dbd_core` library: optimizing and
//! persisting circular orderings, drawing samples from them, Monte Carlo
//! evaluation and benchmarking.

pub mod args;
pub mod commands;
pub mod error;
pub mod sequence_file;

pub use args::Cli;
pub use commands::run;
pub use error::{CliError, CliResult};
pub use sequence_file::SequenceFile;
