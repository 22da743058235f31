// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};

use awgsim::analysis::CLOCK_PHASES;
use awgsim::bench::{prbs_symbols, ramp_codes, run_datapath, PRBS_JITTER_GROUPS};
use awgsim::clocktree::ClockConfig;
use awgsim::dacmodel::{build_level_table, DacConfig};
use awgsim::equalizer::apply_ffe;
use awgsim::patgen::{pack_image, SequencerConfig};
use awgsim::wavec::{compile, quantize, PulseProgram};
use serde_json::{json, Value};

use crate::analyses::{run_analyses, AnalysisInput};
use crate::config::{
    load_channel, load_clock, load_dac, load_program, load_taps, parse_json, read_bytes, ConfigHasher, ScenarioFile,
    Source,
};
use crate::error::{CliError, Result};

pub const DEFAULT_OUT_DIR: &str = "awgsim-out";

/// Sample rate used by ramp and PRBS sources without a clock file.
pub const DEFAULT_SAMPLE_RATE: f64 = 20e9;

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub out_dir: PathBuf,
    pub report: Value,
}

fn program_tones(program: &PulseProgram) -> Vec<f64> {
    let mut tones: Vec<f64> = Vec::new();
    for seg in &program.segments {
        let fs: Vec<f64> = if seg.tones.is_empty() {
            vec![seg.carrier_frequency]
        } else {
            seg.tones.iter().map(|t| t.frequency).collect()
        };
        for f in fs {
            if f > 0.0 && !tones.contains(&f) {
                tones.push(f);
            }
        }
    }
    tones
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

pub fn report_text(report: &Value) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report is plain JSON");
    s.push('\n');
    s
}

/// Runs one scenario. `out_dir` and `seed` override the scenario's own.
pub fn simulate(scenario_path: &Path, out_dir: Option<&Path>, seed: Option<u64>) -> Result<SimOutcome> {
    let mut hasher = ConfigHasher::default();
    let bytes = read_bytes(scenario_path)?;
    hasher.add("scenario", &bytes);
    let sc: ScenarioFile = parse_json(scenario_path, &bytes)?;
    let base = scenario_path.parent().unwrap_or(Path::new("."));
    let seed = seed.unwrap_or(sc.rng_seed);

    let dac = match &sc.dac {
        Some(p) => load_dac(&base.join(p), &mut hasher)?,
        None => DacConfig::ideal(1.0),
    };
    let ffe = match &sc.ffe {
        Some(p) => Some(load_taps(&base.join(p), &mut hasher)?),
        None => None,
    };
    let clock_file = match &sc.clock {
        Some(p) => Some(load_clock(&base.join(p), seed, &mut hasher)?),
        None => None,
    };
    let channel = match &sc.channel {
        Some(p) => Some(load_channel(&base.join(p), &mut hasher)?),
        None => None,
    };

    let mut tones = Vec::new();
    let mut clipped = 0;
    let mut ramp_spc = None;
    let mut jitter_groups = CLOCK_PHASES;
    let (image, sample_rate, source) = match &sc.source {
        Source::Program(p) => {
            let program = load_program(&base.join(p), &mut hasher)?;
            let compiled = compile(&program, ffe.as_ref())?;
            clipped = compiled.clipped;
            tones = program_tones(&program);
            (compiled.image, program.sample_rate, "program")
        }
        Source::Ramp { samples_per_code } => {
            if ffe.is_some() {
                return Err(CliError::config(scenario_path, "ffe does not apply to a ramp source"));
            }
            if *samples_per_code == 0 {
                return Err(CliError::config(scenario_path, "samples_per_code must be at least 1"));
            }
            ramp_spc = Some(*samples_per_code);
            let rate = clock_file.as_ref().map_or(DEFAULT_SAMPLE_RATE, |c| c.sample_rate);
            (pack_image(&ramp_codes(*samples_per_code))?, rate, "ramp")
        }
        Source::Prbs7 {
            seed: prbs_seed,
            bits,
            amplitude,
        } => {
            if !(amplitude.is_finite() && *amplitude > 0.0 && *amplitude <= 1.0) {
                return Err(CliError::config(scenario_path, "prbs7 amplitude must lie in (0, 1]"));
            }
            let mut symbols = prbs_symbols(*prbs_seed, *bits, *amplitude)?;
            if let Some(taps) = &ffe {
                let out = apply_ffe(&symbols, taps);
                clipped = out.clipped;
                symbols = out.samples;
            }
            jitter_groups = PRBS_JITTER_GROUPS;
            let rate = clock_file.as_ref().map_or(DEFAULT_SAMPLE_RATE, |c| c.sample_rate);
            (pack_image(quantize(&symbols)?.codes())?, rate, "prbs7")
        }
    };
    let clock = match clock_file {
        Some(c) => {
            if (c.sample_rate - sample_rate).abs() > 1e-9 * sample_rate {
                return Err(CliError::config(
                    scenario_path,
                    format!(
                        "clock sample rate {} GHz differs from program sample rate {} GHz",
                        c.sample_rate / 1e9,
                        sample_rate / 1e9
                    ),
                ));
            }
            c
        }
        None => ClockConfig {
            rng_seed: seed,
            ..ClockConfig::ideal(sample_rate)
        },
    };
    if let Some(t) = &sc.tones_ghz {
        tones = t.iter().map(|f| f * 1e9).collect();
    }

    let seq = match &sc.sequencer {
        Some(s) => s.for_image(&image),
        None => SequencerConfig::whole(&image),
    };
    let out = run_datapath(&image, &seq, &clock, &dac, sc.oversample)?;
    let (trace, gain) = match &channel {
        Some(ch) => (ch.filter_trace(&out.trace, sc.oversample), ch.dc_gain()),
        None => (out.trace, 1.0),
    };

    let table = build_level_table(&dac);
    let input = AnalysisInput {
        trace: &trace,
        oversample: sc.oversample,
        symbol_rate: sample_rate,
        threshold: gain * 0.5 * (table.level(0) + table.level(255)),
        full_scale: gain * 0.5 * (table.level(255) - table.level(0)),
        tones,
        record_length: sc.record_length,
        thd_harmonics: sc.thd_harmonics,
        signal_guard_bins: sc.signal_guard_bins,
        supply_v: sc.supply_v,
        jitter_groups,
        ramp_samples_per_code: ramp_spc,
    };
    let analysed = run_analyses(&sc.analyses, &input)?;

    let report = json!({
        "tool": "awgsim",
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": hasher.finish(),
        "rng_seed": seed,
        "source": source,
        "sample_rate_ghz": sample_rate / 1e9,
        "samples": out.codes.len(),
        "oversample": sc.oversample,
        "ffe_clipped_samples": clipped,
        "analyses": analysed.blocks,
    });

    let out_dir = match (out_dir, &sc.output_dir) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) => base.join(d),
        (None, None) => PathBuf::from(DEFAULT_OUT_DIR),
    };
    create_dir(&out_dir)?;
    write_file(&out_dir.join("trace.csv"), trace.to_csv())?;
    for (name, csv) in &analysed.files {
        write_file(&out_dir.join(name), csv)?;
    }
    write_file(&out_dir.join("report.json"), report_text(&report))?;
    Ok(SimOutcome { out_dir, report })
}
