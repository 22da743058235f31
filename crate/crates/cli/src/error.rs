// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use awgsim::analysis::AnalysisError;
use awgsim::clocktree::ClockError;
use awgsim::dacmodel::DacError;
use awgsim::equalizer::EqualizerError;
use thiserror::Error;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: missing files, malformed JSON, out-of-range parameters.
    #[error("{0}")]
    Config(String),
    /// The inputs were valid but the run could not complete.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub fn config(path: &Path, msg: impl std::fmt::Display) -> Self {
        CliError::Config(format!("{}: {msg}", path.display()))
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {err}", path.display()))
    }
}

impl From<awgsim::Error> for CliError {
    fn from(e: awgsim::Error) -> Self {
        use awgsim::Error as E;
        let runtime = match &e {
            E::Equalizer(EqualizerError::SingularSystem(_)) => true,
            E::Analysis(AnalysisError::OutOfModelRange(_)) => false,
            E::Analysis(_) => true,
            E::Clock(ClockError::EdgeReorder(..)) => true,
            E::Dac(DacError::NonMonotonicEdges { .. }) => true,
            E::CorruptStream(_) => true,
            _ => false,
        };
        if runtime {
            CliError::Runtime(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

macro_rules! via_core {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                awgsim::Error::from(e).into()
            }
        })*
    };
}

via_core!(
    AnalysisError,
    ClockError,
    DacError,
    EqualizerError,
    awgsim::patgen::PatgenError,
    awgsim::wavec::WavecError
);

pub type Result<T> = std::result::Result<T, CliError>;
