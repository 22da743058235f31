// SPDX-License-Identifier: Apache-2.0

//! On-disk configuration formats. Units: ns, GHz, V, mW.

use std::fs;
use std::path::{Path, PathBuf};

use awgsim::clocktree::ClockConfig;
use awgsim::dacmodel::{DacConfig, SEGMENT_COUNT};
use awgsim::equalizer::{ChannelModel, FfeTaps};
use awgsim::patgen::{SequencerConfig, SramImage};
use awgsim::wavec::{ProgramFile, PulseProgram};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisKind {
    Sfdr,
    Im3,
    Thd,
    Linearity,
    Jitter,
    Eye,
    Power,
}

impl AnalysisKind {
    pub fn name(self) -> &'static str {
        match self {
            AnalysisKind::Sfdr => "sfdr",
            AnalysisKind::Im3 => "im3",
            AnalysisKind::Thd => "thd",
            AnalysisKind::Linearity => "linearity",
            AnalysisKind::Jitter => "jitter",
            AnalysisKind::Eye => "eye",
            AnalysisKind::Power => "power",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DacFile {
    #[serde(default = "one")]
    pub full_scale_v: f64,
    #[serde(default)]
    pub weight_mismatch: [f64; SEGMENT_COUNT],
    #[serde(default)]
    pub rise_time_ns: f64,
}

fn one() -> f64 {
    1.0
}

impl DacFile {
    pub fn into_config(self) -> DacConfig {
        DacConfig {
            full_scale_voltage: self.full_scale_v,
            weight_mismatch: self.weight_mismatch,
            output_rise_time: self.rise_time_ns * 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockFile {
    pub sample_rate_ghz: f64,
    #[serde(default)]
    pub duty_cycle_error: f64,
    #[serde(default)]
    pub quadrature_error: f64,
    #[serde(default)]
    pub rj_sigma_ns: f64,
}

impl ClockFile {
    pub fn into_config(self, seed: u64) -> ClockConfig {
        ClockConfig {
            sample_rate: self.sample_rate_ghz * 1e9,
            duty_cycle_error: self.duty_cycle_error,
            quadrature_error: self.quadrature_error,
            rj_sigma: self.rj_sigma_ns * 1e-9,
            rng_seed: seed,
        }
    }
}

/// A bare coefficient array or the full object form.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ChannelFile {
    Taps(Vec<f64>),
    Full(ChannelModel),
}

impl ChannelFile {
    pub fn into_model(self) -> ChannelModel {
        match self {
            ChannelFile::Taps(taps) => ChannelModel {
                taps,
                lowpass_ratio: None,
            },
            ChannelFile::Full(m) => m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum TapsFile {
    Taps(Vec<f64>),
    Full(FfeTaps),
}

impl TapsFile {
    pub fn into_taps(self) -> FfeTaps {
        match self {
            TapsFile::Taps(taps) => FfeTaps {
                taps,
                main_tap_index: 0,
            },
            TapsFile::Full(t) => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequencerFile {
    #[serde(default)]
    pub start_frame: usize,
    pub frame_count: Option<usize>,
    #[serde(default = "one_loop")]
    pub loop_count: u32,
    #[serde(default)]
    pub byte_rotation: u8,
}

fn one_loop() -> u32 {
    1
}

impl SequencerFile {
    pub fn for_image(&self, image: &SramImage) -> SequencerConfig {
        SequencerConfig {
            start_frame: self.start_frame,
            frame_count: self
                .frame_count
                .unwrap_or_else(|| image.frame_count().saturating_sub(self.start_frame)),
            loop_count: self.loop_count,
            byte_rotation: self.byte_rotation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Source {
    /// Path to a pulse-program JSON file.
    Program(PathBuf),
    /// Every code held for `samples_per_code` samples.
    Ramp { samples_per_code: usize },
    Prbs7 {
        #[serde(default = "prbs_seed")]
        seed: u8,
        #[serde(default = "prbs_bits")]
        bits: usize,
        #[serde(default = "prbs_amplitude")]
        amplitude: f64,
    },
}

fn prbs_seed() -> u8 {
    0x7F
}

fn prbs_bits() -> usize {
    awgsim::bench::PRBS_MAX_BITS
}

fn prbs_amplitude() -> f64 {
    0.45
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub source: Source,
    pub dac: Option<PathBuf>,
    pub clock: Option<PathBuf>,
    pub channel: Option<PathBuf>,
    pub ffe: Option<PathBuf>,
    pub sequencer: Option<SequencerFile>,
    #[serde(default = "default_oversample")]
    pub oversample: usize,
    #[serde(default)]
    pub analyses: Vec<AnalysisKind>,
    /// Tones for spectral metrics; taken from the program when absent.
    pub tones_ghz: Option<Vec<f64>>,
    pub record_length: Option<usize>,
    #[serde(default = "default_harmonics")]
    pub thd_harmonics: usize,
    #[serde(default)]
    pub signal_guard_bins: usize,
    #[serde(default = "default_supply")]
    pub supply_v: f64,
    #[serde(default)]
    pub rng_seed: u64,
    pub output_dir: Option<PathBuf>,
}

fn default_oversample() -> usize {
    16
}

fn default_harmonics() -> usize {
    5
}

fn default_supply() -> f64 {
    0.8
}

/// Hash of every configuration byte that went into a run.
#[derive(Debug, Default, Clone)]
pub struct ConfigHasher(Sha256);

impl ConfigHasher {
    pub fn add(&mut self, label: &str, bytes: &[u8]) {
        self.0.update((label.len() as u64).to_le_bytes());
        self.0.update(label.as_bytes());
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(bytes);
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::config(path, e))
}

pub fn parse_json<T: DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| CliError::config(path, e))
}

/// Reads, hashes under `label` and parses a JSON file.
pub fn load_json<T: DeserializeOwned>(path: &Path, label: &str, hasher: &mut ConfigHasher) -> Result<T> {
    let bytes = read_bytes(path)?;
    hasher.add(label, &bytes);
    parse_json(path, &bytes)
}

pub fn load_program(path: &Path, hasher: &mut ConfigHasher) -> Result<PulseProgram> {
    let file: ProgramFile = load_json(path, "program", hasher)?;
    file.into_program().map_err(|e| CliError::config(path, e))
}

pub fn load_channel(path: &Path, hasher: &mut ConfigHasher) -> Result<ChannelModel> {
    let ch = load_json::<ChannelFile>(path, "channel", hasher)?.into_model();
    ch.validate().map_err(|e| CliError::config(path, e))?;
    Ok(ch)
}

pub fn load_taps(path: &Path, hasher: &mut ConfigHasher) -> Result<FfeTaps> {
    let taps = load_json::<TapsFile>(path, "ffe", hasher)?.into_taps();
    taps.validate().map_err(|e| CliError::config(path, e))?;
    Ok(taps)
}

pub fn load_dac(path: &Path, hasher: &mut ConfigHasher) -> Result<DacConfig> {
    let dac = load_json::<DacFile>(path, "dac", hasher)?.into_config();
    dac.validate().map_err(|e| CliError::config(path, e))?;
    Ok(dac)
}

pub fn load_clock(path: &Path, seed: u64, hasher: &mut ConfigHasher) -> Result<ClockConfig> {
    let clock = load_json::<ClockFile>(path, "clock", hasher)?.into_config(seed);
    clock.validate().map_err(|e| CliError::config(path, e))?;
    Ok(clock)
}
