// SPDX-License-Identifier: Apache-2.0

use serde::Serialize;

use super::AnalysisError;
use crate::dacmodel::{LevelTable, CODE_COUNT};

/// INL and DNL in LSB against the endpoint line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearityReport {
    /// One value per code; zero at both endpoints.
    pub inl: Vec<f64>,
    /// One value per code transition `c -> c + 1`.
    pub dnl: Vec<f64>,
    /// Endpoint-fit LSB size in volts.
    pub lsb: f64,
}

impl LinearityReport {
    pub fn max_abs_inl(&self) -> f64 {
        self.inl.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_dnl(&self) -> f64 {
        self.dnl.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Endpoint-fit linearity of a 256-entry level table.
///
/// DNL is formed as the first difference of INL, which equals
/// `(level[c+1] - level[c]) / lsb - 1` and keeps the telescoping identity
/// `sum(dnl[..c]) = inl[c] - inl[0]` tight in floating point.
pub fn inl_dnl(levels: &LevelTable) -> Result<LinearityReport, AnalysisError> {
    let l = levels.levels();
    debug_assert_eq!(l.len(), CODE_COUNT);
    let first = l[0];
    let span = l[CODE_COUNT - 1] - first;
    if span == 0.0 {
        return Err(AnalysisError::DegenerateTable);
    }
    let lsb = span / (CODE_COUNT - 1) as f64;
    let inl: Vec<f64> = l
        .iter()
        .enumerate()
        .map(|(c, v)| {
            let fit = first + span * (c as f64 / (CODE_COUNT - 1) as f64);
            (v - fit) / lsb
        })
        .collect();
    let dnl = inl.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(LinearityReport { inl, dnl, lsb })
}
