//! Staged pipeline over the `gfm-core` algorithms. Every subcommand reads
//! and writes plain-text artifacts in a work directory.

pub mod config;
pub mod error;
pub mod pipeline;

pub use config::{parse_override, Paths, PipelineConfig};
pub use error::{CliError, Result};
pub use pipeline::{run_command, Command, Outcome};
