// SPDX-License-Identifier: Apache-2.0

//! Command implementations behind the `awgsim` binary.

pub mod analyses;
pub mod commands;
pub mod config;
pub mod error;
pub mod simulate;

pub use error::{CliError, EXIT_CONFIG, EXIT_RUNTIME};
