// SPDX-License-Identifier: Apache-2.0

//! Coherent single-sided spectra and the tone metrics built on them.
//!
//! Records are rectangular-windowed and every analyzed tone must sit on a
//! bin, so there is no leakage and each metric reads single bins.

use std::collections::BTreeSet;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::AnalysisError;
use crate::dacmodel::AnalogTrace;

/// Largest allowed distance between a declared tone and its bin.
pub const COHERENCE_TOLERANCE_BINS: f64 = 1e-6;

/// Magnitudes are floored here so that empty bins stay finite.
pub const DB_FLOOR: f64 = -400.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumOptions {
    /// Amplitude that reads 0 dBFS.
    pub full_scale: f64,
    /// Tones the record must hold coherently, in Hz.
    pub tones: Vec<f64>,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            full_scale: 1.0,
            tones: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bin_width: f64,
    pub record_length: usize,
    /// Single-sided peak amplitude per bin, in trace units.
    pub amplitudes: Vec<f64>,
    pub full_scale: f64,
    /// Bin count after which frequencies alias back onto the band; equals
    /// the record length unless the spectrum was band-limited.
    pub alias_period: usize,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.frequency(k)).collect()
    }

    pub fn magnitude_db(&self, bin: usize) -> f64 {
        let a = self.amplitudes[bin] / self.full_scale;
        if a > 0.0 {
            (20.0 * a.log10()).max(DB_FLOOR)
        } else {
            DB_FLOOR
        }
    }

    pub fn magnitudes_db(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.magnitude_db(k)).collect()
    }

    fn is_edge_bin(&self, bin: usize) -> bool {
        bin == 0 || 2 * bin == self.record_length
    }

    /// Mean-square contribution of a bin.
    pub fn power(&self, bin: usize) -> f64 {
        let a = self.amplitudes[bin];
        if self.is_edge_bin(bin) {
            a * a
        } else {
            a * a / 2.0
        }
    }

    pub fn total_power(&self) -> f64 {
        (0..self.len()).map(|k| self.power(k)).sum()
    }

    /// Bin index of `frequency`, or an error if it is off the grid.
    pub fn bin_of(&self, frequency: f64) -> Result<usize, AnalysisError> {
        let exact = frequency / self.bin_width;
        let bin = exact.round();
        let offset = (exact - bin).abs();
        if offset > COHERENCE_TOLERANCE_BINS || bin < 0.0 {
            return Err(AnalysisError::NonCoherentTone {
                frequency,
                offset_bins: offset,
            });
        }
        Ok(bin as usize)
    }

    /// Where bin `k` lands after aliasing.
    pub fn fold(&self, k: usize) -> usize {
        let m = k % self.alias_period;
        if 2 * m > self.alias_period {
            self.alias_period - m
        } else {
            m
        }
    }

    /// Keeps the first Nyquist zone of a signal sampled at `sample_rate`,
    /// which must be a whole number of bins.
    pub fn band_limited(&self, sample_rate: f64) -> Result<Spectrum, AnalysisError> {
        let period = self.bin_of(sample_rate)?;
        if period < 2 || period > self.record_length {
            return Err(AnalysisError::InvalidInput(format!(
                "band sample rate {sample_rate} Hz outside the analyzed span"
            )));
        }
        let keep = period / 2 + 1;
        Ok(Spectrum {
            amplitudes: self.amplitudes[..keep.min(self.len())].to_vec(),
            alias_period: period,
            ..self.clone()
        })
    }

    /// `freq_hz,dbfs` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz,dbfs\n");
        for k in 0..self.len() {
            out.push_str(&format!("{:.8e},{:.8e}\n", self.frequency(k), self.magnitude_db(k)));
        }
        out
    }
}

/// Nearest on-bin frequency for a record of `record` samples at
/// `sample_rate`.
pub fn snap_to_bin(frequency: f64, sample_rate: f64, record: usize) -> f64 {
    let width = sample_rate / record as f64;
    (frequency / width).round() * width
}

/// Rectangular-window spectrum of the first `record` samples.
pub fn spectrum(trace: &AnalogTrace, record: usize, opts: &SpectrumOptions) -> Result<Spectrum, AnalysisError> {
    if record < 2 || !record.is_power_of_two() {
        return Err(AnalysisError::RecordNotPowerOfTwo(record));
    }
    if trace.len() < record {
        return Err(AnalysisError::InsufficientSamples {
            needed: record,
            available: trace.len(),
        });
    }
    if !(opts.full_scale > 0.0) {
        return Err(AnalysisError::InvalidInput("full_scale must be positive".into()));
    }
    let bin_width = 1.0 / (record as f64 * trace.sample_period);
    let mut spec = Spectrum {
        bin_width,
        record_length: record,
        amplitudes: Vec::new(),
        full_scale: opts.full_scale,
        alias_period: record,
    };
    for &tone in &opts.tones {
        spec.bin_of(tone)?;
    }

    let mut buf: Vec<Complex<f64>> = trace.samples[..record].iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(record).process(&mut buf);

    let n = record as f64;
    spec.amplitudes = (0..=record / 2)
        .map(|k| {
            let m = buf[k].norm() / n;
            if k == 0 || k == record / 2 {
                m
            } else {
                2.0 * m
            }
        })
        .collect();
    Ok(spec)
}

fn max_db(spec: &Spectrum, bins: impl Iterator<Item = usize>) -> f64 {
    bins.map(|k| spec.magnitude_db(k)).fold(f64::NEG_INFINITY, f64::max)
}

/// Spurious-free dynamic range in dB: strongest signal bin over the
/// strongest bin that is neither signal nor DC.
pub fn sfdr(spec: &Spectrum, signal_bins: &[usize]) -> Result<f64, AnalysisError> {
    if signal_bins.is_empty() {
        return Err(AnalysisError::InvalidInput("no signal bins".into()));
    }
    if let Some(b) = signal_bins.iter().find(|b| **b >= spec.len()) {
        return Err(AnalysisError::InvalidInput(format!("signal bin {b} outside spectrum")));
    }
    let signal: BTreeSet<usize> = signal_bins.iter().copied().collect();
    let carrier = max_db(spec, signal.iter().copied());
    let spur = max_db(spec, (1..spec.len()).filter(|k| !signal.contains(k)));
    Ok(carrier - spur)
}

/// Signal-to-noise-and-distortion ratio in dB; DC is excluded.
pub fn sndr(spec: &Spectrum, signal_bins: &[usize]) -> Result<f64, AnalysisError> {
    let signal: BTreeSet<usize> = signal_bins.iter().copied().collect();
    if signal.is_empty() || signal.iter().any(|k| *k == 0 || *k >= spec.len()) {
        return Err(AnalysisError::InvalidInput(
            "signal bins must be non-DC bins of the spectrum".into(),
        ));
    }
    let p_sig: f64 = signal.iter().map(|&k| spec.power(k)).sum();
    let p_rest: f64 = (1..spec.len())
        .filter(|k| !signal.contains(k))
        .map(|k| spec.power(k))
        .sum();
    Ok(10.0 * (p_sig / p_rest).log10())
}

/// Third-order intermodulation in dBc: the larger of the products at
/// `2f1 - f2` and `2f2 - f1` relative to the larger tone.
pub fn im3(spec: &Spectrum, f1: f64, f2: f64) -> Result<f64, AnalysisError> {
    if !(f1 < f2) {
        return Err(AnalysisError::InvalidInput(format!("need f1 < f2, got {f1} and {f2}")));
    }
    let b1 = spec.bin_of(f1)? as isize;
    let b2 = spec.bin_of(f2)? as isize;
    let lo = 2 * b1 - b2;
    let hi = 2 * b2 - b1;
    let last = spec.len() as isize - 1;
    if lo <= 0 || hi > last {
        return Err(AnalysisError::OutOfBandProduct(format!(
            "IM3 products at bins {lo} and {hi} must lie in 1..={last}"
        )));
    }
    let product = spec.magnitude_db(lo as usize).max(spec.magnitude_db(hi as usize));
    let tone = spec.magnitude_db(b1 as usize).max(spec.magnitude_db(b2 as usize));
    Ok(product - tone)
}

/// Total harmonic distortion in percent over harmonics `2..=n_harmonics+1`.
///
/// Harmonic bins are aliased with the spectrum's alias period. A harmonic
/// that folds onto DC or the fundamental cannot be separated and is
/// reported as out of band.
pub fn thd(spec: &Spectrum, f0: f64, n_harmonics: usize) -> Result<f64, AnalysisError> {
    let b0 = spec.bin_of(f0)?;
    if b0 == 0 || b0 >= spec.len() {
        return Err(AnalysisError::InvalidInput(format!("fundamental {f0} Hz not in band")));
    }
    let mut bins = BTreeSet::new();
    for h in 2..=n_harmonics + 1 {
        let k = spec.fold(h * b0);
        if k == 0 || k == b0 {
            return Err(AnalysisError::OutOfBandProduct(format!(
                "harmonic {h} of bin {b0} aliases onto bin {k}"
            )));
        }
        bins.insert(k);
    }
    let harmonic_power: f64 = bins.iter().map(|&k| spec.amplitudes[k].powi(2)).sum();
    Ok(harmonic_power.sqrt() / spec.amplitudes[b0] * 100.0)
}
