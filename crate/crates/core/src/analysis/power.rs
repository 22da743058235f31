// SPDX-License-Identifier: Apache-2.0

//! Supply power versus sample rate and supply voltage.
//!
//! `total = P_static + k * f * V^2`, pinned by the two corners of the
//! validity range (40 mW and 140 mW). Digital blocks take a fixed share.

use serde::Serialize;

use super::AnalysisError;

pub const MIN_SAMPLE_RATE: f64 = 2e9;
pub const MAX_SAMPLE_RATE: f64 = 34e9;
pub const MIN_SUPPLY: f64 = 0.6;
pub const MAX_SUPPLY: f64 = 1.0;

pub const POWER_AT_MIN_CORNER_MW: f64 = 40.0;
pub const POWER_AT_MAX_CORNER_MW: f64 = 140.0;

pub const DIGITAL_SHARE: f64 = 0.20;

/// Qubits served per drive line under frequency multiplexing.
pub const QUBITS_PER_DRIVE: f64 = 20.0;

/// Upper corner of the nominal operating region (20 GS/s, 0.8 V), where the
/// per-qubit figure stays within 2-4 mW.
pub const OPERATING_MAX_SAMPLE_RATE: f64 = 20e9;
pub const OPERATING_MAX_SUPPLY: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerReport {
    pub total_mw: f64,
    pub analog_mw: f64,
    pub digital_mw: f64,
    pub per_qubit_mw: f64,
}

fn activity(sample_rate: f64, supply: f64) -> f64 {
    sample_rate / 1e9 * supply * supply
}

pub fn power_model(sample_rate: f64, supply: f64) -> Result<PowerReport, AnalysisError> {
    if !(MIN_SAMPLE_RATE..=MAX_SAMPLE_RATE).contains(&sample_rate) {
        return Err(AnalysisError::OutOfModelRange(format!(
            "sample rate {sample_rate} Hz outside [2, 34] GHz"
        )));
    }
    if !(MIN_SUPPLY..=MAX_SUPPLY).contains(&supply) {
        return Err(AnalysisError::OutOfModelRange(format!(
            "supply {supply} V outside [0.6, 1.0] V"
        )));
    }
    let lo = activity(MIN_SAMPLE_RATE, MIN_SUPPLY);
    let hi = activity(MAX_SAMPLE_RATE, MAX_SUPPLY);
    let x = activity(sample_rate, supply);
    let total = POWER_AT_MIN_CORNER_MW + (POWER_AT_MAX_CORNER_MW - POWER_AT_MIN_CORNER_MW) * ((x - lo) / (hi - lo));
    let digital = DIGITAL_SHARE * total;
    Ok(PowerReport {
        total_mw: total,
        analog_mw: total - digital,
        digital_mw: digital,
        per_qubit_mw: total / QUBITS_PER_DRIVE,
    })
}
