// SPDX-License-Identifier: Apache-2.0

//! Dual-Dirac jitter decomposition of threshold crossings.
//!
//! Every crossing is assigned to the nearest UI slot of an ideal clock and
//! its time interval error (TIE) is grouped by slot index modulo a pattern
//! period. The spread of the group means is the deterministic jitter; what
//! is left after removing the group means is random jitter.

use serde::Serialize;

use super::AnalysisError;
use crate::dacmodel::AnalogTrace;

/// Q-scale multiplier for BER 1e-12.
pub const DUAL_DIRAC_Q_BER_1E12: f64 = 14.069;

pub const MIN_JITTER_CROSSINGS: usize = 10_000;

/// Mux phases per quarter-rate clock cycle; the default grouping period.
pub const CLOCK_PHASES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JitterReport {
    /// Peak-to-peak total jitter at BER 1e-12, seconds.
    pub total: f64,
    pub random_sigma: f64,
    /// Peak-to-peak deterministic jitter, seconds.
    pub deterministic: f64,
    pub crossings: usize,
}

/// Decomposes using the four clock phases as groups.
pub fn jitter_decompose(crossings: &[f64], nominal_period: f64) -> Result<JitterReport, AnalysisError> {
    jitter_decompose_with_period(crossings, nominal_period, CLOCK_PHASES)
}

/// Decomposes with TIE grouped by UI slot modulo `phase_period`.
///
/// For a repeating data pattern use a multiple of both the pattern length
/// and [`CLOCK_PHASES`] so that data-dependent jitter lands in the group
/// means rather than in the random term.
pub fn jitter_decompose_with_period(
    crossings: &[f64],
    nominal_period: f64,
    phase_period: usize,
) -> Result<JitterReport, AnalysisError> {
    if crossings.len() < MIN_JITTER_CROSSINGS {
        return Err(AnalysisError::InsufficientSamples {
            needed: MIN_JITTER_CROSSINGS,
            available: crossings.len(),
        });
    }
    if !(nominal_period > 0.0) || phase_period == 0 {
        return Err(AnalysisError::InvalidInput(
            "period and phase_period must be positive".into(),
        ));
    }
    let t0 = crossings[0];
    let mut sums = vec![0.0; phase_period];
    let mut counts = vec![0usize; phase_period];
    let mut slots = Vec::with_capacity(crossings.len());
    let mut ties = Vec::with_capacity(crossings.len());
    for &t in crossings {
        let rel = t - t0;
        let slot = (rel / nominal_period).round();
        if slot < 0.0 {
            return Err(AnalysisError::InvalidInput("crossings must be in time order".into()));
        }
        let tie = rel - slot * nominal_period;
        let g = (slot as u64 % phase_period as u64) as usize;
        sums[g] += tie;
        counts[g] += 1;
        slots.push(g);
        ties.push(tie);
    }
    let means: Vec<Option<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| (c > 0).then(|| s / c as f64))
        .collect();
    let (lo, hi) = means
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &m| {
            (lo.min(m), hi.max(m))
        });
    let deterministic = hi - lo;

    let groups = means.iter().flatten().count();
    let ss: f64 = ties
        .iter()
        .zip(&slots)
        .map(|(tie, &g)| (tie - means[g].unwrap()).powi(2))
        .sum();
    let dof = (crossings.len() - groups).max(1);
    let random_sigma = (ss / dof as f64).sqrt();
    Ok(JitterReport {
        total: deterministic + DUAL_DIRAC_Q_BER_1E12 * random_sigma,
        random_sigma,
        deterministic,
        crossings: crossings.len(),
    })
}

/// Times at which the trace crosses `threshold`, by linear interpolation
/// between grid samples. A sample exactly on the threshold counts with the
/// side it came from.
pub fn threshold_crossings(trace: &AnalogTrace, threshold: f64) -> Vec<f64> {
    let dt = trace.sample_period;
    let mut out = Vec::new();
    let mut above = match trace.samples.first() {
        Some(v) => *v > threshold,
        None => return out,
    };
    for (i, w) in trace.samples.windows(2).enumerate() {
        let now = if w[1] == threshold { above } else { w[1] > threshold };
        if now != above {
            let frac = (threshold - w[0]) / (w[1] - w[0]);
            out.push((i as f64 + frac) * dt);
            above = now;
        }
    }
    out
}
