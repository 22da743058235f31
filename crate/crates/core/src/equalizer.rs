// SPDX-License-Identifier: Apache-2.0

//! Cable channel, PRBS7 source and feed-forward equalization.
//!
//! The channel is a UI-spaced FIR (tap 0 is the main cursor) optionally
//! followed by a single-pole low-pass. FFE taps are solved by least squares
//! on the combined FIR response and applied to the real-valued samples
//! before quantization, so the pre-distortion lives in the stored pattern.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dacmodel::AnalogTrace;

/// Maximum number of FFE taps.
pub const MAX_FFE_TAPS: usize = 32;

/// Rank tolerance on the normal equations (smallest over largest eigenvalue).
pub const RANK_TOLERANCE: f64 = 1e-12;

/// FIR part of the reference cable.
pub const REFERENCE_CHANNEL_TAPS: [f64; 2] = [1.0, 0.35];

/// Low-pass corner of the reference cable, as a fraction of the sample rate.
pub const REFERENCE_LOWPASS_RATIO: f64 = 0.45;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EqualizerError {
    #[error("PRBS7 seed must be a nonzero 7-bit value")]
    ZeroSeed,
    #[error("PRBS7 seed {0:#x} does not fit in 7 bits")]
    SeedOutOfRange(u8),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("invalid FFE request: {0}")]
    InvalidRequest(String),
    #[error("SingularSystem: normal equations are rank-deficient (eigenvalue ratio {0:e})")]
    SingularSystem(f64),
}

/// Seven-bit Fibonacci LFSR for x^7 + x^6 + 1.
///
/// Each step computes `b = s[6] ^ s[5]` (bits counted from 0), shifts the
/// state left by one inserting `b`, and outputs `b`.
pub fn prbs7(seed: u8, n: usize) -> Result<Vec<bool>, EqualizerError> {
    if seed == 0 {
        return Err(EqualizerError::ZeroSeed);
    }
    if seed > 0x7F {
        return Err(EqualizerError::SeedOutOfRange(seed));
    }
    let mut state = seed;
    Ok((0..n)
        .map(|_| {
            let bit = ((state >> 6) ^ (state >> 5)) & 1;
            state = ((state << 1) | bit) & 0x7F;
            bit == 1
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub taps: Vec<f64>,
    /// Single-pole corner as a fraction of the sample rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lowpass_ratio: Option<f64>,
}

impl ChannelModel {
    pub fn fir(taps: Vec<f64>) -> Result<Self, EqualizerError> {
        let ch = Self {
            taps,
            lowpass_ratio: None,
        };
        ch.validate()?;
        Ok(ch)
    }

    /// `[1.0, 0.35]` followed by a pole at 0.45x the sample rate.
    pub fn reference() -> Self {
        Self {
            taps: REFERENCE_CHANNEL_TAPS.to_vec(),
            lowpass_ratio: Some(REFERENCE_LOWPASS_RATIO),
        }
    }

    pub fn identity() -> Self {
        Self {
            taps: vec![1.0],
            lowpass_ratio: None,
        }
    }

    pub fn validate(&self) -> Result<(), EqualizerError> {
        if self.taps.is_empty() {
            return Err(EqualizerError::InvalidChannel("no taps".into()));
        }
        if self.taps.iter().any(|t| !t.is_finite()) {
            return Err(EqualizerError::InvalidChannel("non-finite tap".into()));
        }
        if self.taps[0] == 0.0 {
            return Err(EqualizerError::InvalidChannel("main cursor (tap 0) is zero".into()));
        }
        if let Some(r) = self.lowpass_ratio {
            if !(r.is_finite() && r > 0.0) {
                return Err(EqualizerError::InvalidChannel(format!(
                    "lowpass_ratio must be positive, got {r}"
                )));
            }
        }
        Ok(())
    }

    pub fn dc_gain(&self) -> f64 {
        self.taps.iter().sum()
    }

    /// Low-pass time constant in seconds at `sample_rate`.
    pub fn lowpass_tau(&self, sample_rate: f64) -> Option<f64> {
        self.lowpass_ratio.map(|r| 1.0 / (2.0 * PI * r * sample_rate))
    }

    /// Filters an oversampled trace with `samples_per_ui` grid points per
    /// symbol. The FIR taps are spaced one UI apart and the low-pass pole
    /// is evaluated exactly for a piecewise-constant input. History before
    /// the first sample is taken as the first sample (settled line).
    pub fn filter_trace(&self, trace: &AnalogTrace, samples_per_ui: usize) -> AnalogTrace {
        let x = &trace.samples;
        if x.is_empty() {
            return trace.clone();
        }
        let mut y: Vec<f64> = (0..x.len())
            .map(|n| {
                self.taps
                    .iter()
                    .enumerate()
                    .map(|(k, h)| h * x[n.saturating_sub(k * samples_per_ui)])
                    .sum()
            })
            .collect();
        if let Some(ratio) = self.lowpass_ratio {
            let ui = trace.sample_period * samples_per_ui as f64;
            let tau = 1.0 / (2.0 * PI * ratio / ui);
            let alpha = 1.0 - (-trace.sample_period / tau).exp();
            let mut state = y[0];
            for v in y.iter_mut() {
                state += alpha * (*v - state);
                *v = state;
            }
        }
        AnalogTrace::new(y, trace.sample_period)
    }
}

/// Causal convolution with the channel, truncated to the input length,
/// starting from rest. A low-pass, when present, is discretized at one
/// sample per UI.
pub fn apply_channel(samples: &[f64], ch: &ChannelModel) -> Vec<f64> {
    let mut y: Vec<f64> = (0..samples.len())
        .map(|n| {
            ch.taps
                .iter()
                .take(n + 1)
                .enumerate()
                .map(|(k, h)| h * samples[n - k])
                .sum()
        })
        .collect();
    if let Some(ratio) = ch.lowpass_ratio {
        let alpha = 1.0 - (-2.0 * PI * ratio).exp();
        let mut state = 0.0;
        for v in y.iter_mut() {
            state += alpha * (*v - state);
            *v = state;
        }
    }
    y
}

/// Full linear convolution of two tap vectors.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfeTaps {
    pub taps: Vec<f64>,
    pub main_tap_index: usize,
}

impl FfeTaps {
    pub fn identity() -> Self {
        Self {
            taps: vec![1.0],
            main_tap_index: 0,
        }
    }

    pub fn validate(&self) -> Result<(), EqualizerError> {
        if self.taps.is_empty() || self.taps.len() > MAX_FFE_TAPS {
            return Err(EqualizerError::InvalidRequest(format!(
                "tap count must be in 1..={MAX_FFE_TAPS}, got {}",
                self.taps.len()
            )));
        }
        if self.main_tap_index >= self.taps.len() {
            return Err(EqualizerError::InvalidRequest(format!(
                "main_tap_index {} out of range for {} taps",
                self.main_tap_index,
                self.taps.len()
            )));
        }
        if self.taps.iter().any(|t| !t.is_finite()) {
            return Err(EqualizerError::InvalidRequest("non-finite tap".into()));
        }
        Ok(())
    }
}

/// Sum of squared deviations of `conv(ffe, channel)` from a unit impulse at
/// `main`.
pub fn ls_residual(ffe: &[f64], channel: &[f64], main: usize) -> f64 {
    convolve(ffe, channel)
        .iter()
        .enumerate()
        .map(|(k, v)| if k == main { (v - 1.0).powi(2) } else { v * v })
        .sum()
}

/// Least-squares zero-forcing taps (unnormalized), from the normal
/// equations of the convolution matrix.
pub fn solve_ffe_unscaled(ch: &ChannelModel, n_taps: usize, main_tap_index: usize) -> Result<Vec<f64>, EqualizerError> {
    ch.validate()?;
    if n_taps == 0 || n_taps > MAX_FFE_TAPS {
        return Err(EqualizerError::InvalidRequest(format!(
            "n_taps must be in 1..={MAX_FFE_TAPS}, got {n_taps}"
        )));
    }
    if main_tap_index >= n_taps {
        return Err(EqualizerError::InvalidRequest(format!(
            "main_tap_index {main_tap_index} must be below n_taps {n_taps}"
        )));
    }
    let h = &ch.taps;
    let rows = n_taps + h.len() - 1;
    let conv = DMatrix::from_fn(
        rows,
        n_taps,
        |r, c| if r >= c && r - c < h.len() { h[r - c] } else { 0.0 },
    );
    let normal = conv.transpose() * &conv;
    let eig = normal.clone().symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.iter().cloned().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if !(ratio >= RANK_TOLERANCE) {
        return Err(EqualizerError::SingularSystem(ratio));
    }
    let mut target = DVector::zeros(rows);
    target[main_tap_index] = 1.0;
    let rhs = conv.transpose() * target;
    let chol = normal.cholesky().ok_or(EqualizerError::SingularSystem(ratio))?;
    Ok(chol.solve(&rhs).iter().cloned().collect())
}

/// Least-squares FFE, rescaled so that the taps sum to one (the equalized
/// DC gain equals the channel DC gain).
pub fn solve_ffe(ch: &ChannelModel, n_taps: usize, main_tap_index: usize) -> Result<FfeTaps, EqualizerError> {
    let raw = solve_ffe_unscaled(ch, n_taps, main_tap_index)?;
    let sum: f64 = raw.iter().sum();
    if !(sum.abs() > f64::EPSILON) {
        return Err(EqualizerError::SingularSystem(0.0));
    }
    Ok(FfeTaps {
        taps: raw.iter().map(|t| t / sum).collect(),
        main_tap_index,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfeOutput {
    pub samples: Vec<f64>,
    /// Samples clamped to [-1, 1].
    pub clipped: usize,
}

/// Pre-distorts `samples`: `y[n] = sum_j taps[j] * x[n - j + main]`.
///
/// Indices outside the record repeat the nearest boundary sample, so a
/// constant input stays constant. The output is clamped to [-1, 1].
pub fn apply_ffe(samples: &[f64], ffe: &FfeTaps) -> FfeOutput {
    let len = samples.len() as isize;
    let main = ffe.main_tap_index as isize;
    let mut clipped = 0;
    let out = (0..len)
        .map(|n| {
            let v: f64 = ffe
                .taps
                .iter()
                .enumerate()
                .map(|(j, t)| t * samples[(n - j as isize + main).clamp(0, len - 1) as usize])
                .sum();
            if v.abs() > 1.0 {
                clipped += 1;
                v.clamp(-1.0, 1.0)
            } else {
                v
            }
        })
        .collect();
    FfeOutput { samples: out, clipped }
}

/// Combined pulse response and residual ISI of channel plus equalizer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsiReport {
    pub combined_response: Vec<f64>,
    pub main_cursor: f64,
    /// Worst-case ISI: sum of |non-main cursors| over |main cursor|.
    pub residual_isi: f64,
    /// Same figure for the channel alone.
    pub unequalized_isi: f64,
    /// Largest single |non-main cursor| over |main cursor|.
    pub residual_peak_cursor: f64,
    pub unequalized_peak_cursor: f64,
}

impl IsiReport {
    /// Fractional reduction of the largest ISI cursor. Zero for a channel
    /// without ISI.
    pub fn reduction(&self) -> f64 {
        fraction_removed(self.residual_peak_cursor, self.unequalized_peak_cursor)
    }

    /// Fractional reduction of worst-case ISI.
    pub fn worst_case_reduction(&self) -> f64 {
        fraction_removed(self.residual_isi, self.unequalized_isi)
    }
}

fn fraction_removed(after: f64, before: f64) -> f64 {
    if before > 0.0 {
        1.0 - after / before
    } else {
        0.0
    }
}

fn off_main(response: &[f64], main: usize) -> impl Iterator<Item = f64> + '_ {
    response
        .iter()
        .enumerate()
        .filter(move |(k, _)| *k != main)
        .map(|(_, v)| v.abs())
}

fn worst_case_isi(response: &[f64], main: usize) -> f64 {
    off_main(response, main).fold(0.0, |a, v| a + v) / response[main].abs()
}

fn peak_cursor(response: &[f64], main: usize) -> f64 {
    off_main(response, main).fold(0.0, f64::max) / response[main].abs()
}

pub fn isi_report(ch: &ChannelModel, ffe: &FfeTaps) -> IsiReport {
    let combined = convolve(&ffe.taps, &ch.taps);
    IsiReport {
        main_cursor: combined[ffe.main_tap_index],
        residual_isi: worst_case_isi(&combined, ffe.main_tap_index),
        unequalized_isi: worst_case_isi(&ch.taps, 0),
        residual_peak_cursor: peak_cursor(&combined, ffe.main_tap_index),
        unequalized_peak_cursor: peak_cursor(&ch.taps, 0),
        combined_response: combined,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Array-of-bits LFSR, written independently of the bit-twiddled one.
    fn lfsr_oracle(seed: u8, n: usize) -> Vec<bool> {
        // reg[0] is the newest bit (state bit 0), reg[6] the oldest (bit 6)
        let mut reg: Vec<bool> = (0..7).map(|i| seed & (1 << i) != 0).collect();
        let mut out = Vec::new();
        for _ in 0..n {
            let fb = reg[6] != reg[5];
            reg.pop();
            reg.insert(0, fb);
            out.push(fb);
        }
        out
    }

    #[test]
    fn isi_free_channel() {
        let r = isi_report(&ChannelModel::identity(), &FfeTaps::identity());
        assert_eq!(r.unequalized_isi.to_bits(), 0.0f64.to_bits());
        assert_eq!(r.reduction(), 0.0);
        assert_eq!(r.worst_case_reduction(), 0.0);
    }

    #[test]
    fn prbs_period_is_127() {
        for seed in 1..=127u8 {
            let s = prbs7(seed, 254).unwrap();
            assert_eq!(s[..127], s[127..]);
            let p = (1..=127).find(|&p| (0..127).all(|i| s[i] == s[i + p])).unwrap();
            assert_eq!(p, 127, "seed {seed}");
            assert_eq!(s[..127].iter().filter(|b| **b).count(), 64);
        }
    }

    #[test]
    fn prbs_matches_oracle() {
        let s = prbs7(0x7F, 7).unwrap();
        assert_eq!(s, lfsr_oracle(0x7F, 7));
        assert_eq!(s, vec![false, false, false, false, false, false, true]);
        assert_eq!(prbs7(0x35, 300).unwrap(), lfsr_oracle(0x35, 300));
    }

    #[test]
    fn prbs_seed_errors() {
        assert_eq!(prbs7(0, 4), Err(EqualizerError::ZeroSeed));
        assert_eq!(prbs7(0x80, 4), Err(EqualizerError::SeedOutOfRange(0x80)));
    }

    #[test]
    fn channel_identity_and_impulse() {
        let x = [0.3, -0.2, 0.9, 0.1];
        assert_eq!(apply_channel(&x, &ChannelModel::identity()), x.to_vec());
        let ch = ChannelModel::fir(vec![1.0, 0.3]).unwrap();
        assert_eq!(apply_channel(&[1.0, 0.0, 0.0, 0.0], &ch), vec![1.0, 0.3, 0.0, 0.0]);
    }

    #[test]
    fn channel_matches_reference_convolution() {
        let ch = ChannelModel::fir(vec![0.9, 0.25, -0.1, 0.05]).unwrap();
        let x: Vec<f64> = (0..50).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let y = apply_channel(&x, &ch);
        for n in 0..x.len() {
            let mut acc = 0.0;
            for k in 0..ch.taps.len() {
                if n >= k {
                    acc += ch.taps[k] * x[n - k];
                }
            }
            assert!((y[n] - acc).abs() < 1e-14);
        }
    }

    #[test]
    fn channel_validation() {
        assert!(ChannelModel::fir(vec![]).is_err());
        assert!(ChannelModel::fir(vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn ffe_identity_channel() {
        for n in 1..6 {
            for main in 0..n {
                let f = solve_ffe(&ChannelModel::identity(), n, main).unwrap();
                for (i, t) in f.taps.iter().enumerate() {
                    let expect = if i == main { 1.0 } else { 0.0 };
                    assert!((t - expect).abs() < 1e-12);
                }
            }
        }
    }

    /// Solves a 3x3 system with Cramer's rule.
    fn cramer3(a: [[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
        let det = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let d = det(a);
        let mut out = [0.0; 3];
        for c in 0..3 {
            let mut m = a;
            for r in 0..3 {
                m[r][c] = b[r];
            }
            out[c] = det(m) / d;
        }
        out
    }

    #[test]
    fn ffe_three_taps_normal_equation_oracle() {
        let ch = ChannelModel::fir(vec![1.0, 0.3]).unwrap();
        let raw = solve_ffe_unscaled(&ch, 3, 0).unwrap();
        // H^T H for h = [1, 0.3] and three taps is tridiagonal (1.09, 0.3)
        let a = [[1.09, 0.3, 0.0], [0.3, 1.09, 0.3], [0.0, 0.3, 1.09]];
        let oracle = cramer3(a, [1.0, 0.0, 0.0]);
        for i in 0..3 {
            assert!((raw[i] - oracle[i]).abs() < 1e-12);
        }
        // close to the truncated geometric inverse [1, -0.3, 0.09]
        let geo = [1.0, -0.3, 0.09];
        let scale = raw[0];
        for i in 0..3 {
            assert!((raw[i] / scale - geo[i]).abs() < 0.01, "tap {i}: {}", raw[i] / scale);
        }
        let scaled = solve_ffe(&ch, 3, 0).unwrap();
        assert!((scaled.taps.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ffe_reduces_post_cursor_isi() {
        let ch = ChannelModel::fir(vec![1.0, 0.3]).unwrap();
        let f = solve_ffe(&ch, 3, 0).unwrap();
        let r = isi_report(&ch, &f);
        assert!(r.reduction() >= 0.9, "reduction {}", r.reduction());
    }

    #[test]
    fn ffe_local_optimality() {
        let ch = ChannelModel::fir(vec![1.0, 0.35, -0.08]).unwrap();
        for &(n, main) in &[(3, 0), (5, 1), (7, 2)] {
            let raw = solve_ffe_unscaled(&ch, n, main).unwrap();
            let base = ls_residual(&raw, &ch.taps, main);
            for i in 0..n {
                for d in [1e-3, -1e-3] {
                    let mut p = raw.clone();
                    p[i] += d;
                    assert!(ls_residual(&p, &ch.taps, main) >= base);
                }
            }
        }
    }

    #[test]
    fn isi_shrinks_with_more_taps() {
        let ch = ChannelModel::fir(vec![1.0, 0.35]).unwrap();
        let isi: Vec<f64> = [3, 5, 7]
            .iter()
            .map(|&n| isi_report(&ch, &solve_ffe(&ch, n, 0).unwrap()).residual_isi)
            .collect();
        assert!(isi[0] > isi[1] && isi[1] > isi[2], "{isi:?}");
    }

    #[test]
    fn ffe_request_errors() {
        let ch = ChannelModel::identity();
        assert!(matches!(solve_ffe(&ch, 0, 0), Err(EqualizerError::InvalidRequest(_))));
        assert!(matches!(solve_ffe(&ch, 33, 0), Err(EqualizerError::InvalidRequest(_))));
        assert!(matches!(solve_ffe(&ch, 3, 3), Err(EqualizerError::InvalidRequest(_))));
        let tiny = ChannelModel::fir(vec![1e-200]).unwrap();
        assert!(matches!(solve_ffe(&tiny, 2, 0), Err(EqualizerError::SingularSystem(_))));
    }

    #[test]
    fn apply_ffe_identity_and_dc() {
        let x: Vec<f64> = (0..20).map(|i| (i as f64 * 0.3).sin() * 0.9).collect();
        assert_eq!(apply_ffe(&x, &FfeTaps::identity()).samples, x);
        let f = solve_ffe(&ChannelModel::fir(vec![1.0, 0.3]).unwrap(), 3, 0).unwrap();
        let out = apply_ffe(&[0.5; 40], &f);
        assert!(out.samples.iter().all(|v| (v - 0.5).abs() < 1e-12));
        assert_eq!(out.clipped, 0);
    }

    #[test]
    fn apply_ffe_alignment_and_clipping() {
        let f = FfeTaps {
            taps: vec![-0.25, 1.5, -0.25],
            main_tap_index: 1,
        };
        let mut x = vec![0.0; 7];
        x[3] = 1.0;
        let out = apply_ffe(&x, &f);
        assert_eq!(out.samples, vec![0.0, 0.0, -0.25, 1.0, -0.25, 0.0, 0.0]);
        assert_eq!(out.clipped, 1);
    }

    #[test]
    fn ffe_opens_the_eye_at_sampling_instants() {
        let ch = ChannelModel::fir(vec![1.0, 0.3]).unwrap();
        let bits = prbs7(0x7F, 127 * 4).unwrap();
        let x: Vec<f64> = bits.iter().map(|b| if *b { 0.8 } else { -0.8 }).collect();
        let opening = |y: &[f64]| y[10..].iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        let plain = opening(&apply_channel(&x, &ch));
        let f = solve_ffe(&ch, 3, 0).unwrap();
        let eq = apply_ffe(&x, &f);
        let equalized = opening(&apply_channel(&eq.samples, &ch));
        assert!(equalized > plain, "equalized {equalized} vs plain {plain}");
    }

    #[test]
    fn trace_filter_settled_start_and_dc() {
        let tr = AnalogTrace::new(vec![0.5; 200], 1e-12);
        let out = ChannelModel::reference().filter_trace(&tr, 8);
        assert!(out.samples.iter().all(|v| (v - 0.5 * 1.35).abs() < 1e-12));
    }
}
