// SPDX-License-Identifier: Apache-2.0

use serde::Serialize;

use super::jitter::threshold_crossings;
use super::AnalysisError;
use crate::dacmodel::AnalogTrace;

/// Minimum trace length for eye folding, in UI.
pub const MIN_EYE_UI: f64 = 100.0;

/// Two-UI folded persistence histogram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EyeDiagram {
    pub time_bins: usize,
    pub voltage_bins: usize,
    pub unit_interval: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Row-major: `counts[t * voltage_bins + v]`.
    pub counts: Vec<u32>,
}

impl EyeDiagram {
    pub fn count(&self, time_bin: usize, voltage_bin: usize) -> u32 {
        self.counts[time_bin * self.voltage_bins + voltage_bin]
    }

    /// Voltage rows with at least one hit.
    pub fn occupied_rows(&self) -> Vec<usize> {
        (0..self.voltage_bins)
            .filter(|&v| (0..self.time_bins).any(|t| self.count(t, v) > 0))
            .collect()
    }

    /// `time_s,voltage_v,count` rows for non-empty cells, bin centers.
    pub fn to_csv(&self) -> String {
        let dt = 2.0 * self.unit_interval / self.time_bins as f64;
        let dv = (self.v_max - self.v_min) / self.voltage_bins as f64;
        let mut out = String::from("time_s,voltage_v,count\n");
        for t in 0..self.time_bins {
            for v in 0..self.voltage_bins {
                let c = self.count(t, v);
                if c > 0 {
                    let tc = (t as f64 + 0.5) * dt;
                    let vc = self.v_min + (v as f64 + 0.5) * dv;
                    out.push_str(&format!("{tc:.8e},{vc:.8e},{c}\n"));
                }
            }
        }
        out
    }
}

fn check_span(trace: &AnalogTrace, unit_interval: f64) -> Result<(), AnalysisError> {
    if !(unit_interval > 0.0) {
        return Err(AnalysisError::InvalidInput("unit interval must be positive".into()));
    }
    let needed = (MIN_EYE_UI * unit_interval / trace.sample_period).ceil() as usize;
    if trace.duration() < MIN_EYE_UI * unit_interval {
        return Err(AnalysisError::InsufficientSamples {
            needed,
            available: trace.len(),
        });
    }
    Ok(())
}

/// Column of time `t` folded over `window`. Times within 1e-9 of a column
/// edge snap to it so that grid samples on UI boundaries fold consistently.
fn time_bin(t: f64, window: f64, nt: usize) -> usize {
    let x = (t / window).fract() * nt as f64;
    let r = x.round();
    let x = if (x - r).abs() < 1e-9 { r } else { x };
    (x as usize) % nt
}

/// Folds the trace modulo two UI into a `bins.0 x bins.1` histogram spanning
/// the trace's voltage range.
pub fn eye_diagram(trace: &AnalogTrace, unit_interval: f64, bins: (usize, usize)) -> Result<EyeDiagram, AnalysisError> {
    check_span(trace, unit_interval)?;
    let (nt, nv) = bins;
    if nt == 0 || nv == 0 {
        return Err(AnalysisError::InvalidInput(
            "histogram needs at least one bin per axis".into(),
        ));
    }
    let v_min = trace.samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let v_max = trace.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = v_max - v_min;
    let window = 2.0 * unit_interval;
    let mut counts = vec![0u32; nt * nv];
    for (i, &v) in trace.samples.iter().enumerate() {
        let t = time_bin(trace.time_of(i), window, nt);
        let row = if span > 0.0 {
            (((v - v_min) / span * nv as f64) as usize).min(nv - 1)
        } else {
            0
        };
        counts[t * nv + row] += 1;
    }
    Ok(EyeDiagram {
        time_bins: nt,
        voltage_bins: nv,
        unit_interval,
        v_min,
        v_max,
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EyeOpening {
    /// Inner vertical opening at the eye center, volts. Negative when closed.
    pub vertical: f64,
    /// UI minus the peak-to-peak spread of crossing phases, seconds.
    pub horizontal: f64,
    /// Mean crossing phase within the UI, seconds.
    pub crossing_phase: f64,
}

fn wrap(x: f64, period: f64) -> f64 {
    x - period * (x / period).round()
}

/// Inner eye opening about `threshold`.
///
/// The eye center is half a UI after the circular mean crossing phase;
/// the vertical opening is read there by linear interpolation.
pub fn eye_opening(trace: &AnalogTrace, unit_interval: f64, threshold: f64) -> Result<EyeOpening, AnalysisError> {
    check_span(trace, unit_interval)?;
    let crossings = threshold_crossings(trace, threshold);
    if crossings.is_empty() {
        return Err(AnalysisError::InvalidInput("trace never crosses the threshold".into()));
    }
    let ui = unit_interval;
    let (s, c) = crossings.iter().fold((0.0, 0.0), |(s, c), t| {
        let a = std::f64::consts::TAU * t / ui;
        (s + a.sin(), c + a.cos())
    });
    let mean = s.atan2(c) / std::f64::consts::TAU * ui;
    let (lo, hi) = crossings
        .iter()
        .map(|t| wrap(t - mean, ui))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
    let horizontal = ui - (hi - lo);

    let center = mean + ui / 2.0;
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let last = trace.len() - 1;
    let mut m = 0.0f64;
    loop {
        let t = center.rem_euclid(ui) + m * ui;
        let x = t / trace.sample_period;
        let i = x.floor() as usize;
        if i >= last {
            break;
        }
        let f = x - i as f64;
        let v = trace.samples[i] * (1.0 - f) + trace.samples[i + 1] * f;
        if v > threshold {
            upper = upper.min(v);
        } else {
            lower = lower.max(v);
        }
        m += 1.0;
    }
    Ok(EyeOpening {
        vertical: upper - lower,
        horizontal,
        crossing_phase: mean.rem_euclid(ui),
    })
}
