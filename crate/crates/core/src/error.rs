// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::clocktree::ClockError;
use crate::dacmodel::DacError;
use crate::equalizer::EqualizerError;
use crate::patgen::PatgenError;
use crate::wavec::WavecError;

/// Any error raised by the simulation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Patgen(#[from] PatgenError),
    #[error(transparent)]
    Dac(#[from] DacError),
    #[error(transparent)]
    Clock(#[from] ClockError),
    #[error(transparent)]
    Wavec(#[from] WavecError),
    #[error(transparent)]
    Equalizer(#[from] EqualizerError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("serializer produced an invalid segment pattern at sample {0}")]
    CorruptStream(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
