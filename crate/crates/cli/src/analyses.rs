// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use awgsim::analysis::{
    eye_diagram, eye_opening, im3, inl_dnl, jitter_decompose_with_period, power_model, sfdr, snap_to_bin, sndr,
    spectrum, thd, threshold_crossings, Spectrum, SpectrumOptions,
};
use awgsim::bench::{measure_ramp_levels, sample_at_ui_centers};
use awgsim::dacmodel::AnalogTrace;
use serde_json::{json, Value};

use crate::config::AnalysisKind;
use crate::error::{CliError, Result};

pub const EYE_BINS: (usize, usize) = (64, 128);

/// Everything the metric suite needs to know about a trace.
#[derive(Debug, Clone)]
pub struct AnalysisInput<'a> {
    pub trace: &'a AnalogTrace,
    /// Grid points per UI.
    pub oversample: usize,
    /// Symbols per second.
    pub symbol_rate: f64,
    /// Decision threshold for crossings and the eye, volts.
    pub threshold: f64,
    /// Sine amplitude that reads 0 dBFS, volts.
    pub full_scale: f64,
    /// Declared tones in Hz; snapped to the analysis grid before use.
    pub tones: Vec<f64>,
    pub record_length: Option<usize>,
    pub thd_harmonics: usize,
    /// Bins on each side of a tone counted as signal, for shaped envelopes.
    pub signal_guard_bins: usize,
    pub supply_v: f64,
    pub jitter_groups: usize,
    pub ramp_samples_per_code: Option<usize>,
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct AnalysisOutput {
    pub blocks: BTreeMap<String, Value>,
    /// Plot files: name and CSV contents.
    pub files: Vec<(String, String)>,
}

pub fn metric(value: f64, units: &str) -> Value {
    json!({ "value": value, "units": units })
}

struct SpectralView {
    spec: Spectrum,
    tones: Vec<f64>,
}

fn spectral(input: &AnalysisInput) -> Result<SpectralView> {
    let symbols = input.trace.len() / input.oversample;
    let sampled = sample_at_ui_centers(input.trace, input.oversample, symbols);
    let record = match input.record_length {
        Some(r) => r,
        None if sampled.len() >= 2 => 1 << sampled.len().ilog2(),
        None => return Err(CliError::Runtime("trace too short for a spectrum".into())),
    };
    if !record.is_power_of_two() {
        return Err(CliError::Config(format!(
            "record_length {record} is not a power of two"
        )));
    }
    let tones: Vec<f64> = input
        .tones
        .iter()
        .map(|&f| snap_to_bin(f, input.symbol_rate, record))
        .collect();
    let opts = SpectrumOptions {
        full_scale: input.full_scale,
        tones: tones.clone(),
    };
    let spec = spectrum(&sampled, record, &opts)?;
    Ok(SpectralView { spec, tones })
}

fn strongest_bin(spec: &Spectrum) -> usize {
    (1..spec.len())
        .max_by(|a, b| spec.amplitudes[*a].total_cmp(&spec.amplitudes[*b]))
        .unwrap_or(0)
}

pub fn run_analyses(kinds: &[AnalysisKind], input: &AnalysisInput) -> Result<AnalysisOutput> {
    let mut out = AnalysisOutput::default();
    let mut kinds = kinds.to_vec();
    kinds.sort();
    kinds.dedup();

    let needs_spectrum = kinds
        .iter()
        .any(|k| matches!(k, AnalysisKind::Sfdr | AnalysisKind::Im3 | AnalysisKind::Thd));
    let view = if needs_spectrum { Some(spectral(input)?) } else { None };
    if let Some(v) = &view {
        out.files.push(("spectrum.csv".into(), v.spec.to_csv()));
    }

    for kind in kinds {
        let block = match kind {
            AnalysisKind::Sfdr => {
                let v = view.as_ref().unwrap();
                let centers: Vec<usize> = if v.tones.is_empty() {
                    vec![strongest_bin(&v.spec)]
                } else {
                    v.tones
                        .iter()
                        .map(|&f| v.spec.bin_of(f))
                        .collect::<std::result::Result<_, _>>()?
                };
                let g = input.signal_guard_bins;
                let mut bins: Vec<usize> = centers
                    .iter()
                    .flat_map(|&b| b.saturating_sub(g).max(1)..=(b + g).min(v.spec.len() - 1))
                    .collect();
                bins.sort_unstable();
                bins.dedup();
                json!({
                    "sfdr_db": metric(sfdr(&v.spec, &bins)?, "dB"),
                    "sndr_db": metric(sndr(&v.spec, &bins)?, "dB"),
                    "signal_bins": centers,
                    "signal_guard_bins": g,
                    "record_length": v.spec.record_length,
                })
            }
            AnalysisKind::Im3 => {
                let v = view.as_ref().unwrap();
                let [f1, f2] = v.tones[..] else {
                    return Err(CliError::Config(format!(
                        "im3 needs exactly two tones, got {}",
                        v.tones.len()
                    )));
                };
                let (f1, f2) = (f1.min(f2), f1.max(f2));
                json!({
                    "im3_dbc": metric(im3(&v.spec, f1, f2)?, "dBc"),
                    "tone_bins": [v.spec.bin_of(f1)?, v.spec.bin_of(f2)?],
                    "tones_ghz": [f1 / 1e9, f2 / 1e9],
                })
            }
            AnalysisKind::Thd => {
                let v = view.as_ref().unwrap();
                let f0 = match v.tones.first() {
                    Some(&f) => f,
                    None => v.spec.frequency(strongest_bin(&v.spec)),
                };
                json!({
                    "thd_percent": metric(thd(&v.spec, f0, input.thd_harmonics)?, "%"),
                    "fundamental_ghz": f0 / 1e9,
                    "harmonics": input.thd_harmonics,
                })
            }
            AnalysisKind::Linearity => {
                let spc = input
                    .ramp_samples_per_code
                    .ok_or_else(|| CliError::Config("linearity needs a ramp source".into()))?;
                let table = measure_ramp_levels(input.trace, spc, input.oversample)
                    .ok_or_else(|| CliError::Runtime("trace is shorter than the ramp".into()))?;
                let r = inl_dnl(&table)?;
                let mut csv = String::from("code,level_v,inl_lsb,dnl_lsb\n");
                for (c, level) in table.levels().iter().enumerate() {
                    let dnl = r.dnl.get(c).map(|d| format!("{d:.8e}")).unwrap_or_default();
                    csv.push_str(&format!("{c},{level:.8e},{:.8e},{dnl}\n", r.inl[c]));
                }
                out.files.push(("linearity.csv".into(), csv));
                json!({
                    "max_abs_inl_lsb": metric(r.max_abs_inl(), "LSB"),
                    "max_abs_dnl_lsb": metric(r.max_abs_dnl(), "LSB"),
                    "lsb_v": metric(r.lsb, "V"),
                })
            }
            AnalysisKind::Jitter => {
                let crossings = threshold_crossings(input.trace, input.threshold);
                let r = jitter_decompose_with_period(&crossings, 1.0 / input.symbol_rate, input.jitter_groups)?;
                json!({
                    "tj_ps": metric(r.total * 1e12, "ps"),
                    "rj_ps": metric(r.random_sigma * 1e12, "ps"),
                    "dj_ps": metric(r.deterministic * 1e12, "ps"),
                    "crossings": r.crossings,
                    "phase_groups": input.jitter_groups,
                })
            }
            AnalysisKind::Eye => {
                let ui = 1.0 / input.symbol_rate;
                let eye = eye_diagram(input.trace, ui, EYE_BINS)?;
                let o = eye_opening(input.trace, ui, input.threshold)?;
                out.files.push(("eye.csv".into(), eye.to_csv()));
                json!({
                    "vertical_opening_v": metric(o.vertical, "V"),
                    "horizontal_opening_ps": metric(o.horizontal * 1e12, "ps"),
                    "crossing_phase_ps": metric(o.crossing_phase * 1e12, "ps"),
                })
            }
            AnalysisKind::Power => {
                let p = power_model(input.symbol_rate, input.supply_v)?;
                json!({
                    "total_mw": metric(p.total_mw, "mW"),
                    "analog_mw": metric(p.analog_mw, "mW"),
                    "digital_mw": metric(p.digital_mw, "mW"),
                    "per_qubit_mw": metric(p.per_qubit_mw, "mW"),
                    "supply_v": input.supply_v,
                })
            }
        };
        out.blocks.insert(kind.name().into(), block);
    }
    Ok(out)
}
