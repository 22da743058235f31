// SPDX-License-Identifier: Apache-2.0

//! Segmented 8-bit voltage-mode DAC.
//!
//! The two code MSBs drive three unary (thermometer) segments of 64 LSB
//! each; the six LSBs drive binary-weighted segments 32..1. Segment order
//! everywhere in this crate is `T2, T1, T0, B5, B4, B3, B2, B1, B0`.
//!
//! The output stage is modeled behaviorally: every code maps to a static
//! level (weight sum with per-segment mismatch), the levels are held
//! between clock edges and then smoothed by a single-pole response.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clocktree::EdgeSchedule;

/// Number of DAC segments driven by the serializer.
pub const SEGMENT_COUNT: usize = 9;

/// Number of DAC codes.
pub const CODE_COUNT: usize = 256;

/// Nominal weight of each segment in LSB units.
pub const NOMINAL_WEIGHTS: [u32; SEGMENT_COUNT] = [64, 64, 64, 32, 16, 8, 4, 2, 1];

/// Segment labels, in segment order.
pub const SEGMENT_NAMES: [&str; SEGMENT_COUNT] = ["T2", "T1", "T0", "B5", "B4", "B3", "B2", "B1", "B0"];

/// Rise time (10-90%) of a single pole is `2.2 * tau`.
const RISE_TIME_PER_TAU: f64 = 2.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DacError {
    #[error("edge times must be strictly increasing (violated at edge {index})")]
    NonMonotonicEdges { index: usize },
    #[error("{codes} codes but {edges} clock edges")]
    LengthMismatch { codes: usize, edges: usize },
    #[error("oversample factor {0} is below the minimum of 8")]
    OversampleTooLow(usize),
    #[error("invalid DAC configuration: {0}")]
    InvalidConfig(String),
}

/// Enable bit of each segment for one code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SegmentEnables(pub [bool; SEGMENT_COUNT]);

impl SegmentEnables {
    /// Sum of the nominal weights of the enabled segments.
    pub fn nominal_sum(&self) -> u32 {
        self.0
            .iter()
            .zip(NOMINAL_WEIGHTS)
            .filter(|(on, _)| **on)
            .map(|(_, w)| w)
            .sum()
    }

    /// Recovers the code driven by these enables.
    ///
    /// Returns `None` for enable patterns the encoder never produces
    /// (a thermometer segment on while a lower one is off).
    pub fn decode(&self) -> Option<u8> {
        let [t2, t1, t0, ..] = self.0;
        let unary_ok = (t2 || !t1) && (t1 || !t0);
        unary_ok.then(|| self.nominal_sum() as u8)
    }
}

/// Maps a code onto the segment enables.
///
/// `code / 64` thermometer segments are switched on starting from T2; the
/// six low bits select binary segments directly.
pub fn thermometer_encode(code: u8) -> SegmentEnables {
    let unary = code >> 6;
    let mut bits = [false; SEGMENT_COUNT];
    for (i, bit) in bits.iter_mut().take(3).enumerate() {
        *bit = (i as u8) < unary;
    }
    for b in 0..6 {
        bits[3 + b] = code & (0x20 >> b) != 0;
    }
    SegmentEnables(bits)
}

/// Static DAC parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DacConfig {
    /// Output voltage at code 255 for a mismatch-free DAC.
    pub full_scale_voltage: f64,
    /// Relative weight error of each segment, in segment order.
    pub weight_mismatch: [f64; SEGMENT_COUNT],
    /// 10-90% rise time of the output stage in seconds. Zero gives an
    /// ideal zero-order hold.
    pub output_rise_time: f64,
}

impl Default for DacConfig {
    fn default() -> Self {
        Self {
            full_scale_voltage: 1.0,
            weight_mismatch: [0.0; SEGMENT_COUNT],
            output_rise_time: 0.0,
        }
    }
}

impl DacConfig {
    pub fn ideal(full_scale_voltage: f64) -> Self {
        Self {
            full_scale_voltage,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DacError> {
        if !(self.full_scale_voltage.is_finite() && self.full_scale_voltage > 0.0) {
            return Err(DacError::InvalidConfig(format!(
                "full_scale_voltage must be positive and finite, got {}",
                self.full_scale_voltage
            )));
        }
        for (name, m) in SEGMENT_NAMES.iter().zip(self.weight_mismatch) {
            if !(m.abs() < 0.5) {
                return Err(DacError::InvalidConfig(format!(
                    "weight_mismatch for segment {name} must satisfy |m| < 0.5, got {m}"
                )));
            }
        }
        if !(self.output_rise_time.is_finite() && self.output_rise_time >= 0.0) {
            return Err(DacError::InvalidConfig(format!(
                "output_rise_time must be non-negative, got {}",
                self.output_rise_time
            )));
        }
        Ok(())
    }

    /// Actual (mismatched) weight of every segment in LSB units.
    pub fn actual_weights(&self) -> [f64; SEGMENT_COUNT] {
        let mut w = [0.0; SEGMENT_COUNT];
        for i in 0..SEGMENT_COUNT {
            w[i] = NOMINAL_WEIGHTS[i] as f64 * (1.0 + self.weight_mismatch[i]);
        }
        w
    }
}

/// Output voltage for `code`.
pub fn level_of(code: u8, cfg: &DacConfig) -> f64 {
    level_of_enables(&thermometer_encode(code), cfg)
}

/// Output voltage for an arbitrary enable pattern.
pub fn level_of_enables(enables: &SegmentEnables, cfg: &DacConfig) -> f64 {
    let weights = cfg.actual_weights();
    let sum: f64 = enables
        .0
        .iter()
        .zip(weights)
        .filter(|(on, _)| **on)
        .map(|(_, w)| w)
        .sum();
    // Scaling the normalized sum keeps a mismatch-free table on the exact
    // same float grid as an endpoint fit line, so ideal INL is exactly zero.
    cfg.full_scale_voltage * (sum / 255.0)
}

/// One output voltage per code.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelTable {
    levels: Vec<f64>,
}

impl LevelTable {
    /// Wraps measured or computed levels. Returns `None` unless exactly
    /// 256 finite values are supplied.
    pub fn from_levels(levels: Vec<f64>) -> Option<Self> {
        (levels.len() == CODE_COUNT && levels.iter().all(|v| v.is_finite())).then_some(Self { levels })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn level(&self, code: u8) -> f64 {
        self.levels[code as usize]
    }

    /// `code,voltage` rows with 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("code,voltage\n");
        for (code, v) in self.levels.iter().enumerate() {
            out.push_str(&format!("{code},{v:.8e}\n"));
        }
        out
    }
}

pub fn build_level_table(cfg: &DacConfig) -> LevelTable {
    LevelTable {
        levels: (0..=255u8).map(|c| level_of(c, cfg)).collect(),
    }
}

/// Uniformly sampled output voltage, starting at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogTrace {
    pub samples: Vec<f64>,
    pub sample_period: f64,
}

impl AnalogTrace {
    pub fn new(samples: Vec<f64>, sample_period: f64) -> Self {
        Self { samples, sample_period }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.sample_period
    }

    pub fn time_of(&self, index: usize) -> f64 {
        index as f64 * self.sample_period
    }

    /// `time_s,voltage_v` rows with 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * self.samples.len() + 20);
        out.push_str("time_s,voltage_v\n");
        for (i, v) in self.samples.iter().enumerate() {
            out.push_str(&format!("{:.8e},{v:.8e}\n", self.time_of(i)));
        }
        out
    }
}

/// Renders codes switched at `edges` into an oversampled voltage trace.
///
/// The grid period is `edges.nominal_period / oversample` and the grid
/// starts at t = 0. Before the first edge the output rests, settled, at the
/// first code's level. The trace extends one nominal period past the last
/// edge. The single-pole response is evaluated in closed form between
/// events, so edge times need not align with the grid.
pub fn render(codes: &[u8], edges: &EdgeSchedule, cfg: &DacConfig, oversample: usize) -> Result<AnalogTrace, DacError> {
    cfg.validate()?;
    if oversample < 8 {
        return Err(DacError::OversampleTooLow(oversample));
    }
    let times = &edges.edge_times;
    if codes.len() != times.len() {
        return Err(DacError::LengthMismatch {
            codes: codes.len(),
            edges: times.len(),
        });
    }
    if let Some(i) = (1..times.len()).find(|&i| !(times[i] > times[i - 1])) {
        return Err(DacError::NonMonotonicEdges { index: i });
    }
    if codes.is_empty() {
        return Ok(AnalogTrace::new(Vec::new(), edges.nominal_period / oversample as f64));
    }

    let table = build_level_table(cfg);
    let dt = edges.nominal_period / oversample as f64;
    let end = times[times.len() - 1] + edges.nominal_period;
    let n_grid = (end / dt).ceil().max(1.0) as usize;
    let tau = cfg.output_rise_time / RISE_TIME_PER_TAU;

    let mut out = Vec::with_capacity(n_grid);
    let mut target = table.level(codes[0]);
    let mut state = target;
    let mut state_time = f64::NEG_INFINITY;
    let mut next_edge = 0;

    let advance = |state: f64, target: f64, from: f64, to: f64| -> f64 {
        if tau == 0.0 || from == f64::NEG_INFINITY {
            target
        } else {
            target + (state - target) * (-(to - from) / tau).exp()
        }
    };

    for j in 0..n_grid {
        let t = j as f64 * dt;
        while next_edge < times.len() && times[next_edge] <= t {
            let te = times[next_edge];
            state = advance(state, target, state_time, te);
            state_time = te;
            target = table.level(codes[next_edge]);
            next_edge += 1;
        }
        let v = if state_time == f64::NEG_INFINITY {
            state
        } else {
            advance(state, target, state_time, t)
        };
        out.push(v);
    }
    Ok(AnalogTrace::new(out, dt))
}
