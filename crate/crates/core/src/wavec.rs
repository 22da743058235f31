// SPDX-License-Identifier: Apache-2.0

//! Pulse compiler.
//!
//! A [`PulseProgram`] is a list of envelope-shaped carrier bursts and gaps.
//! Compilation synthesizes the real-valued waveform, optionally
//! pre-distorts it with FFE taps, quantizes it to offset-binary DAC codes
//! and packs the codes into an [`SramImage`].
//!
//! Every segment has its own time origin: sample `n` of a segment is at
//! `t = n / sample_rate`, and carrier phase is referenced to `t = 0`, so a
//! segment synthesizes identically wherever it sits in memory. Envelopes
//! are centered on the middle sample, `t_c = (N - 1) / (2 * sample_rate)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equalizer::{apply_ffe, FfeTaps};
use crate::patgen::{pack_image, PatgenError, SramImage, MAX_SAMPLES};

/// Gaussian envelopes are cut at this many sigmas from the center.
pub const GAUSSIAN_TRUNCATION_SIGMAS: f64 = 3.0;

const MIDSCALE: f64 = 127.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WavecError {
    #[error("ProgramTooLong: program needs {samples} samples, memory holds 32768")]
    ProgramTooLong { samples: usize },
    #[error("AliasedCarrier: segment {segment} carrier {frequency} Hz is at or above Nyquist ({nyquist} Hz)")]
    AliasedCarrier {
        segment: usize,
        frequency: f64,
        nyquist: f64,
    },
    #[error("segment {segment}: {reason}")]
    InvalidSegment { segment: usize, reason: String },
    #[error("invalid sample rate {0} Hz")]
    InvalidSampleRate(f64),
    #[error("program has no segments")]
    EmptyProgram,
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Patgen(#[from] PatgenError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "envelope", rename_all = "snake_case")]
pub enum Envelope {
    /// Gaussian with standard deviation `sigma` seconds, truncated and
    /// lifted so it is zero at the cut and 1 at the center.
    Gaussian {
        sigma: f64,
    },
    /// Hann-shaped raised cosine spanning the whole segment.
    RaisedCosine,
    Square,
    /// Silence; carrier parameters are ignored.
    FlatGap,
}

/// One carrier of an FDMA tone set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSegment {
    pub envelope: Envelope,
    /// Fraction of full scale, in [-1, 1].
    pub amplitude: f64,
    /// Seconds.
    pub duration: f64,
    /// Hz. Ignored when `tones` is non-empty.
    pub carrier_frequency: f64,
    /// Radians. Ignored when `tones` is non-empty.
    pub phase: f64,
    /// FDMA carriers sharing this segment's envelope. When present the
    /// segment waveform is `amplitude * env(t) * sum(a_i cos(2 pi f_i t + phi_i))`.
    pub tones: Vec<Tone>,
}

impl PulseSegment {
    pub fn carrier(envelope: Envelope, amplitude: f64, duration: f64, carrier_frequency: f64, phase: f64) -> Self {
        Self {
            envelope,
            amplitude,
            duration,
            carrier_frequency,
            phase,
            tones: Vec::new(),
        }
    }

    pub fn gap(duration: f64) -> Self {
        Self::carrier(Envelope::FlatGap, 0.0, duration, 0.0, 0.0)
    }

    pub fn fdma(envelope: Envelope, amplitude: f64, duration: f64, tones: Vec<Tone>) -> Self {
        Self {
            envelope,
            amplitude,
            duration,
            carrier_frequency: 0.0,
            phase: 0.0,
            tones,
        }
    }

    /// Sample count at `sample_rate`, rounded half away from zero.
    pub fn sample_count(&self, sample_rate: f64) -> usize {
        (self.duration * sample_rate).round() as usize
    }

    fn validate(&self, index: usize, sample_rate: f64) -> Result<(), WavecError> {
        let invalid = |reason: String| Err(WavecError::InvalidSegment { segment: index, reason });
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return invalid(format!("duration must be positive, got {}", self.duration));
        }
        if self.sample_count(sample_rate) == 0 {
            return invalid(format!("duration {} s is shorter than half a sample", self.duration));
        }
        if !(self.amplitude.is_finite() && self.amplitude.abs() <= 1.0) {
            return invalid(format!("amplitude must lie in [-1, 1], got {}", self.amplitude));
        }
        if let Envelope::Gaussian { sigma } = self.envelope {
            if !(sigma.is_finite() && sigma > 0.0) {
                return invalid(format!("gaussian sigma must be positive, got {sigma}"));
            }
        }
        if self.envelope == Envelope::FlatGap {
            return Ok(());
        }
        let nyquist = sample_rate / 2.0;
        let check_carrier = |f: f64, phase: f64| {
            if !(f.is_finite() && phase.is_finite()) || f < 0.0 {
                return invalid(format!("carrier frequency must be non-negative and finite, got {f}"));
            }
            if f >= nyquist {
                return Err(WavecError::AliasedCarrier {
                    segment: index,
                    frequency: f,
                    nyquist,
                });
            }
            Ok(())
        };
        if self.tones.is_empty() {
            check_carrier(self.carrier_frequency, self.phase)?;
        } else {
            let mut total = 0.0;
            for tone in &self.tones {
                check_carrier(tone.frequency, tone.phase)?;
                if !tone.amplitude.is_finite() {
                    return invalid("tone amplitude must be finite".into());
                }
                total += tone.amplitude.abs();
            }
            if total > 1.0 + 1e-12 {
                return invalid(format!("FDMA tone amplitudes sum to {total}, which exceeds 1"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseProgram {
    pub segments: Vec<PulseSegment>,
    /// Full DAC sample rate in Hz.
    pub sample_rate: f64,
}

impl PulseProgram {
    pub fn validate(&self) -> Result<usize, WavecError> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(WavecError::InvalidSampleRate(self.sample_rate));
        }
        if self.segments.is_empty() {
            return Err(WavecError::EmptyProgram);
        }
        for (i, seg) in self.segments.iter().enumerate() {
            seg.validate(i, self.sample_rate)?;
        }
        let samples: usize = self.segments.iter().map(|s| s.sample_count(self.sample_rate)).sum();
        if samples > MAX_SAMPLES {
            return Err(WavecError::ProgramTooLong { samples });
        }
        Ok(samples)
    }
}

/// Envelope value at offset `dt` seconds from the segment center, for a
/// segment lasting `duration` seconds.
pub fn envelope_at(envelope: Envelope, dt: f64, duration: f64) -> f64 {
    let half = duration / 2.0;
    match envelope {
        Envelope::FlatGap => 0.0,
        Envelope::Square => 1.0,
        Envelope::RaisedCosine => {
            if dt.abs() > half {
                0.0
            } else {
                0.5 * (1.0 + (PI * dt / half).cos())
            }
        }
        Envelope::Gaussian { sigma } => {
            let cut = (GAUSSIAN_TRUNCATION_SIGMAS * sigma).min(half);
            if dt.abs() >= cut {
                return 0.0;
            }
            let g = |x: f64| (-(x * x) / (2.0 * sigma * sigma)).exp();
            let floor = g(cut);
            (g(dt) - floor) / (1.0 - floor)
        }
    }
}

fn synth_segment(seg: &PulseSegment, sample_rate: f64, out: &mut Vec<f64>) {
    let n = seg.sample_count(sample_rate);
    if seg.envelope == Envelope::FlatGap {
        out.extend(std::iter::repeat_n(0.0, n));
        return;
    }
    let center = (n as f64 - 1.0) / (2.0 * sample_rate);
    for k in 0..n {
        let t = k as f64 / sample_rate;
        let env = envelope_at(seg.envelope, t - center, seg.duration);
        let carrier = if seg.tones.is_empty() {
            (2.0 * PI * seg.carrier_frequency * t + seg.phase).cos()
        } else {
            seg.tones
                .iter()
                .map(|tone| tone.amplitude * (2.0 * PI * tone.frequency * t + tone.phase).cos())
                .sum()
        };
        out.push(seg.amplitude * (env * carrier));
    }
}

/// Real-valued waveform of the whole program, in [-1, 1].
pub fn synth(program: &PulseProgram) -> Result<Vec<f64>, WavecError> {
    let total = program.validate()?;
    let mut out = Vec::with_capacity(total);
    for seg in &program.segments {
        synth_segment(seg, program.sample_rate, &mut out);
    }
    Ok(out)
}

/// Offset-binary 8-bit samples at the full DAC rate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSequence(pub Vec<u8>);

impl CodeSequence {
    pub fn codes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn quantize_sample(s: f64) -> u8 {
    // f64::round rounds half away from zero
    (MIDSCALE + MIDSCALE * s).round().clamp(0.0, 255.0) as u8
}

pub fn dequantize(code: u8) -> f64 {
    (code as f64 - MIDSCALE) / MIDSCALE
}

/// Maps [-1, 1] onto codes 0..=255, clamping out-of-range values.
pub fn quantize(samples: &[f64]) -> Result<CodeSequence, WavecError> {
    if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
        return Err(WavecError::NonFinite(i));
    }
    Ok(CodeSequence(samples.iter().map(|&s| quantize_sample(s)).collect()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledProgram {
    pub image: SramImage,
    /// Codes before frame padding.
    pub codes: CodeSequence,
    /// Samples clamped by the FFE stage.
    pub clipped: usize,
}

/// synth, optional FFE pre-distortion, quantize, pack.
pub fn compile(program: &PulseProgram, ffe: Option<&FfeTaps>) -> Result<CompiledProgram, WavecError> {
    let samples = synth(program)?;
    let (samples, clipped) = match ffe {
        Some(taps) => {
            let out = apply_ffe(&samples, taps);
            (out.samples, out.clipped)
        }
        None => (samples, 0),
    };
    let codes = quantize(&samples)?;
    let image = pack_image(codes.codes())?;
    Ok(CompiledProgram { image, codes, clipped })
}

/// JSON pulse-program document. Units: ns, GHz, radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramFile {
    pub sample_rate_ghz: f64,
    pub segments: Vec<SegmentFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    Gaussian,
    RaisedCosine,
    Square,
    FlatGap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentFile {
    pub envelope: EnvelopeKind,
    pub duration_ns: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub carrier_ghz: f64,
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tones: Vec<ToneFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneFile {
    pub amplitude: f64,
    pub frequency_ghz: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

impl ProgramFile {
    /// Converts units and checks field presence. Range checks happen in
    /// [`PulseProgram::validate`].
    pub fn into_program(self) -> Result<PulseProgram, WavecError> {
        let mut segments = Vec::with_capacity(self.segments.len());
        for (i, s) in self.segments.into_iter().enumerate() {
            let envelope = match s.envelope {
                EnvelopeKind::Gaussian => {
                    let sigma_ns = s.sigma_ns.ok_or_else(|| WavecError::InvalidSegment {
                        segment: i,
                        reason: "gaussian envelope requires sigma_ns".into(),
                    })?;
                    Envelope::Gaussian { sigma: sigma_ns * 1e-9 }
                }
                EnvelopeKind::RaisedCosine => Envelope::RaisedCosine,
                EnvelopeKind::Square => Envelope::Square,
                EnvelopeKind::FlatGap => Envelope::FlatGap,
            };
            segments.push(PulseSegment {
                envelope,
                amplitude: s.amplitude,
                duration: s.duration_ns * 1e-9,
                carrier_frequency: s.carrier_ghz * 1e9,
                phase: s.phase_rad,
                tones: s
                    .tones
                    .iter()
                    .map(|t| Tone {
                        amplitude: t.amplitude,
                        frequency: t.frequency_ghz * 1e9,
                        phase: t.phase_rad,
                    })
                    .collect(),
            });
        }
        let program = PulseProgram {
            segments,
            sample_rate: self.sample_rate_ghz * 1e9,
        };
        program.validate()?;
        Ok(program)
    }
}
