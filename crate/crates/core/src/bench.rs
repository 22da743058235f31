// SPDX-License-Identifier: Apache-2.0

//! End-to-end test benches built from the pipeline stages.

use serde::Serialize;

use crate::analysis::{
    eye_opening, jitter_decompose_with_period, threshold_crossings, EyeOpening, JitterReport, CLOCK_PHASES,
};
use crate::clocktree::{derive_edges, ClockConfig, EdgeSchedule};
use crate::dacmodel::{build_level_table, render, AnalogTrace, DacConfig, LevelTable, CODE_COUNT};
use crate::equalizer::{apply_ffe, prbs7, ChannelModel, FfeTaps};
use crate::error::{Error, Result};
use crate::patgen::{pack_image, run_sequencer, serialize, SequencerConfig, SramImage};
use crate::wavec::quantize;

/// PRBS7 repeats every 127 bits.
pub const PRBS7_PERIOD: usize = 127;

/// Group period for PRBS jitter: pattern period times clock phases.
pub const PRBS_JITTER_GROUPS: usize = PRBS7_PERIOD * CLOCK_PHASES;

/// Longest whole number of PRBS7 periods that fits in pattern memory.
pub const PRBS_MAX_BITS: usize = PRBS7_PERIOD * 258;

/// Output of the digital and analog datapath.
#[derive(Debug, Clone, PartialEq)]
pub struct DatapathOutput {
    /// Codes recovered from the serializer bit streams.
    pub codes: Vec<u8>,
    pub edges: EdgeSchedule,
    pub trace: AnalogTrace,
}

/// image, sequencer, serializer, segment decode, clock edges, DAC render.
pub fn run_datapath(
    image: &SramImage,
    seq: &SequencerConfig,
    clock: &ClockConfig,
    dac: &DacConfig,
    oversample: usize,
) -> Result<DatapathOutput> {
    let codes = decode_codes(image, seq)?;
    let edges = derive_edges(codes.len(), clock)?;
    let trace = render(&codes, &edges, dac, oversample)?;
    Ok(DatapathOutput { codes, edges, trace })
}

/// Digital half of the datapath: the codes the DAC segments see.
pub fn decode_codes(image: &SramImage, seq: &SequencerConfig) -> Result<Vec<u8>> {
    let frames = run_sequencer(image, seq)?;
    serialize(&frames)
        .decode()
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or(Error::CorruptStream(i)))
        .collect()
}

/// Every code from 0 to 255 held for `samples_per_code` samples.
pub fn ramp_codes(samples_per_code: usize) -> Vec<u8> {
    (0..CODE_COUNT)
        .flat_map(|c| std::iter::repeat_n(c as u8, samples_per_code))
        .collect()
}

/// Recovers the level table from a rendered ramp by averaging the second
/// half of each code's dwell.
pub fn measure_ramp_levels(trace: &AnalogTrace, samples_per_code: usize, oversample: usize) -> Option<LevelTable> {
    let dwell = samples_per_code * oversample;
    if dwell < 2 || trace.len() < CODE_COUNT * dwell {
        return None;
    }
    let levels = (0..CODE_COUNT)
        .map(|c| {
            let window = &trace.samples[c * dwell + dwell / 2..(c + 1) * dwell];
            window.iter().sum::<f64>() / window.len() as f64
        })
        .collect();
    LevelTable::from_levels(levels)
}

/// One sample per UI taken at the middle of each symbol.
pub fn sample_at_ui_centers(trace: &AnalogTrace, oversample: usize, symbols: usize) -> AnalogTrace {
    let samples = (0..symbols)
        .map(|k| k * oversample + oversample / 2)
        .take_while(|&i| i < trace.len())
        .map(|i| trace.samples[i])
        .collect();
    AnalogTrace::new(samples, trace.sample_period * oversample as f64)
}

/// PRBS7 eye and jitter measurement setup.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrbsBench {
    pub seed: u8,
    pub bits: usize,
    /// Symbol amplitude as a fraction of the code range, applied as +/-.
    pub amplitude: f64,
    pub oversample: usize,
    pub clock: ClockConfig,
    pub dac: DacConfig,
    /// Crossings earlier than this many UI are dropped as line settling.
    pub warmup_ui: usize,
}

impl PrbsBench {
    /// 20 GS/s, full pattern memory, 0.45 swing, 10 ps rise time.
    pub fn reference() -> Self {
        let mut dac = DacConfig::ideal(1.0);
        dac.output_rise_time = 10e-12;
        Self {
            seed: 0x7F,
            bits: PRBS_MAX_BITS,
            amplitude: 0.45,
            oversample: 16,
            clock: ClockConfig::ideal(20e9),
            dac,
            warmup_ui: 2 * PRBS7_PERIOD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrbsMeasurement {
    pub jitter: JitterReport,
    pub eye: EyeOpening,
    /// Samples clamped by the FFE stage.
    pub clipped: usize,
    pub trace: AnalogTrace,
}

/// Bipolar PRBS7 symbols, `+amplitude` for a one.
pub fn prbs_symbols(seed: u8, bits: usize, amplitude: f64) -> Result<Vec<f64>> {
    Ok(prbs7(seed, bits)?
        .into_iter()
        .map(|b| if b { amplitude } else { -amplitude })
        .collect())
}

/// Plays PRBS7 through the full datapath and `channel`, optionally
/// pre-distorted by `ffe`, and measures edge jitter and eye opening at the
/// channel output. Jitter is grouped by [`PRBS_JITTER_GROUPS`] so the
/// data-dependent part is counted as deterministic.
pub fn measure_prbs(bench: &PrbsBench, channel: &ChannelModel, ffe: Option<&FfeTaps>) -> Result<PrbsMeasurement> {
    channel.validate()?;
    let symbols = prbs_symbols(bench.seed, bench.bits, bench.amplitude)?;
    let (symbols, clipped) = match ffe {
        Some(taps) => {
            taps.validate()?;
            let out = apply_ffe(&symbols, taps);
            (out.samples, out.clipped)
        }
        None => (symbols, 0),
    };
    let codes = quantize(&symbols)?;
    let image = pack_image(codes.codes())?;
    let out = run_datapath(
        &image,
        &SequencerConfig::whole(&image),
        &bench.clock,
        &bench.dac,
        bench.oversample,
    )?;
    let trace = channel.filter_trace(&out.trace, bench.oversample);

    let table = build_level_table(&bench.dac);
    let threshold = channel.dc_gain() * 0.5 * (table.level(0) + table.level(255));
    let ui = bench.clock.period();
    let start = bench.warmup_ui as f64 * ui;
    let crossings: Vec<f64> = threshold_crossings(&trace, threshold)
        .into_iter()
        .filter(|&t| t >= start)
        .collect();
    let jitter = jitter_decompose_with_period(&crossings, ui, PRBS_JITTER_GROUPS)?;
    let eye = eye_opening(&trace, ui, threshold)?;
    Ok(PrbsMeasurement {
        jitter,
        eye,
        clipped,
        trace,
    })
}
