//! Library surface of the `ksrg` binary: config parsing, command execution,
//! and SVG plot rendering. The binary in `main.rs` is a thin clap wrapper;
//! integration tests drive the same code in-process through this crate.

pub mod config;
pub mod plot;
pub mod run;

pub use config::{parse_config, parse_override_args, RunConfig};
pub use run::{execute, CliError, Cmd};
