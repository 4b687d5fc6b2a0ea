//! Library half of the `soma` command-line tool: config schema, commands and
//! named experiment recipes. The binary in `main.rs` only parses arguments.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod recipes;

pub use error::{CliError, Result};
