// SPDX-License-Identifier: Apache-2.0

//! Metrology: spectral metrics, static linearity, jitter, eye diagrams and
//! the power model.

mod eye;
mod jitter;
mod linearity;
mod power;
mod spectral;

pub use eye::{eye_diagram, eye_opening, EyeDiagram, EyeOpening, MIN_EYE_UI};
pub use jitter::{
    jitter_decompose, jitter_decompose_with_period, threshold_crossings, JitterReport, CLOCK_PHASES,
    DUAL_DIRAC_Q_BER_1E12, MIN_JITTER_CROSSINGS,
};
pub use linearity::{inl_dnl, LinearityReport};
pub use power::{
    power_model, PowerReport, DIGITAL_SHARE, MAX_SAMPLE_RATE, MAX_SUPPLY, MIN_SAMPLE_RATE, MIN_SUPPLY,
    OPERATING_MAX_SAMPLE_RATE, OPERATING_MAX_SUPPLY, POWER_AT_MAX_CORNER_MW, POWER_AT_MIN_CORNER_MW, QUBITS_PER_DRIVE,
};
pub use spectral::{
    im3, sfdr, snap_to_bin, sndr, spectrum, thd, Spectrum, SpectrumOptions, COHERENCE_TOLERANCE_BINS, DB_FLOOR,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("record length {0} is not a power of two")]
    RecordNotPowerOfTwo(usize),
    #[error("InsufficientSamples: need {needed}, have {available}")]
    InsufficientSamples { needed: usize, available: usize },
    #[error("NonCoherentTone: {frequency} Hz is {offset_bins} bins off the grid")]
    NonCoherentTone { frequency: f64, offset_bins: f64 },
    #[error("OutOfBandProduct: {0}")]
    OutOfBandProduct(String),
    #[error("DegenerateTable: level[255] equals level[0]")]
    DegenerateTable,
    #[error("OutOfModelRange: {0}")]
    OutOfModelRange(String),
    #[error("invalid analysis input: {0}")]
    InvalidInput(String),
}
