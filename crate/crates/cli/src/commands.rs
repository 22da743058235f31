// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use awgsim::analysis::CLOCK_PHASES;
use awgsim::bench::{measure_prbs, PrbsBench};
use awgsim::dacmodel::AnalogTrace;
use awgsim::equalizer::{isi_report, solve_ffe};
use awgsim::patgen::{unpack_image, SramImage};
use awgsim::wavec::compile;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::analyses::{run_analyses, AnalysisInput};
use crate::config::{load_channel, load_program, load_taps, read_bytes, AnalysisKind, ConfigHasher};
use crate::error::{CliError, Result};
use crate::simulate::{create_dir, report_text, simulate, write_file, SimOutcome, DEFAULT_OUT_DIR};

fn out_dir_or_default(out_dir: Option<&Path>) -> PathBuf {
    out_dir.map_or_else(|| PathBuf::from(DEFAULT_OUT_DIR), Path::to_path_buf)
}

fn output_path(explicit: Option<&Path>, out_dir: Option<&Path>, name: &str) -> Result<PathBuf> {
    match explicit {
        Some(p) => Ok(p.to_path_buf()),
        None => {
            let dir = out_dir_or_default(out_dir);
            create_dir(&dir)?;
            Ok(dir.join(name))
        }
    }
}

/// Compiles a pulse program into an image file. Returns the summary line.
pub fn cmd_compile(
    program: &Path,
    ffe: Option<&Path>,
    output: Option<&Path>,
    out_dir: Option<&Path>,
) -> Result<String> {
    let mut hasher = ConfigHasher::default();
    let prog = load_program(program, &mut hasher)?;
    let taps = ffe.map(|p| load_taps(p, &mut hasher)).transpose()?;
    let compiled = compile(&prog, taps.as_ref())?;
    let path = output_path(output, out_dir, "program.img")?;
    write_file(&path, compiled.image.to_file_bytes())?;
    let mut line = format!(
        "{} samples ({} after padding), occupancy {:.2}%",
        compiled.codes.len(),
        compiled.image.sample_count(),
        100.0 * compiled.image.occupancy()
    );
    if compiled.clipped > 0 {
        line.push_str(&format!(", {} samples clipped by FFE", compiled.clipped));
    }
    Ok(line)
}

pub fn cmd_disasm(image: &Path, output: Option<&Path>, out_dir: Option<&Path>) -> Result<String> {
    let bytes = read_bytes(image)?;
    let img = SramImage::from_file_bytes(&bytes).map_err(|e| CliError::config(image, e))?;
    let samples = unpack_image(&img);
    let mut csv = String::from("index,code\n");
    for (i, c) in samples.iter().enumerate() {
        csv.push_str(&format!("{i},{c}\n"));
    }
    let path = output_path(output, out_dir, "samples.csv")?;
    write_file(&path, csv)?;
    Ok(format!("{} samples written to {}", samples.len(), path.display()))
}

/// Deterministic jitter below this is float noise, in seconds.
const DJ_FLOOR: f64 = 1e-15;

/// Solves FFE taps for a channel and predicts the PRBS7 DJ change on the
/// reference 20 GS/s bench.
pub fn cmd_ffe_train(
    channel: &Path,
    n_taps: usize,
    main_tap: usize,
    output: Option<&Path>,
    out_dir: Option<&Path>,
) -> Result<String> {
    let mut hasher = ConfigHasher::default();
    let ch = load_channel(channel, &mut hasher)?;
    let taps = solve_ffe(&ch, n_taps, main_tap)?;
    let isi = isi_report(&ch, &taps);

    let bench = PrbsBench::reference();
    let raw = measure_prbs(&bench, &ch, None)?;
    let eq = measure_prbs(&bench, &ch, Some(&taps))?;
    let dj_reduction = if raw.jitter.deterministic > DJ_FLOOR {
        Some(1.0 - eq.jitter.deterministic / raw.jitter.deterministic)
    } else {
        None
    };

    let path = output_path(output, out_dir, "taps.json")?;
    write_file(
        &path,
        report_text(&serde_json::to_value(&taps).expect("taps serialize")),
    )?;
    let summary = json!({
        "config_hash": hasher.finish(),
        "taps": taps.taps,
        "main_tap_index": taps.main_tap_index,
        "residual_isi": isi.residual_isi,
        "unequalized_isi": isi.unequalized_isi,
        "peak_cursor_reduction": isi.reduction(),
        "unequalized_dj_ps": raw.jitter.deterministic * 1e12,
        "equalized_dj_ps": eq.jitter.deterministic * 1e12,
        "predicted_dj_reduction": dj_reduction,
        "ffe_clipped_samples": eq.clipped,
    });
    let summary_path = path.with_file_name("ffe_summary.json");
    write_file(&summary_path, report_text(&summary))?;

    let taps_text: Vec<String> = taps.taps.iter().map(|t| format!("{t:.6}")).collect();
    let dj = match dj_reduction {
        Some(r) => format!("{:.1}%", 100.0 * r),
        None => "n/a (channel adds no DJ)".into(),
    };
    Ok(format!(
        "taps [{}] main {}\nresidual ISI {:.4} (unequalized {:.4}), largest cursor reduced {:.1}%\npredicted DJ reduction {} ({:.3} ps -> {:.3} ps)",
        taps_text.join(", "),
        taps.main_tap_index,
        isi.residual_isi,
        isi.unequalized_isi,
        100.0 * isi.reduction(),
        dj,
        raw.jitter.deterministic * 1e12,
        eq.jitter.deterministic * 1e12,
    ))
}

/// Parses a `time_s,voltage_v` trace file.
pub fn read_trace_csv(path: &Path) -> Result<AnalogTrace> {
    let text = String::from_utf8(read_bytes(path)?).map_err(|e| CliError::config(path, e))?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let parse = |c: Option<&str>| c.and_then(|s| s.trim().parse::<f64>().ok());
        match (parse(cols.next()), parse(cols.next())) {
            (Some(t), Some(v)) => {
                times.push(t);
                values.push(v);
            }
            _ => {
                return Err(CliError::config(
                    path,
                    format!("line {}: expected time_s,voltage_v", n + 1),
                ))
            }
        }
    }
    if times.len() < 2 {
        return Err(CliError::config(path, "trace needs at least two samples"));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(CliError::config(path, "time column must increase"));
    }
    Ok(AnalogTrace::new(values, dt))
}

#[derive(Debug, Clone, Default)]
pub struct AnalyzeArgs {
    pub analyses: Vec<AnalysisKind>,
    pub symbol_rate_ghz: f64,
    pub tones_ghz: Vec<f64>,
    pub record_length: Option<usize>,
    pub threshold_v: Option<f64>,
    pub full_scale_v: Option<f64>,
    pub supply_v: f64,
    pub thd_harmonics: usize,
    pub signal_guard_bins: usize,
    pub jitter_groups: Option<usize>,
    pub ramp_samples_per_code: Option<usize>,
}

/// Re-runs the metric suite on a saved trace.
pub fn cmd_analyze(trace_path: &Path, args: &AnalyzeArgs, out_dir: Option<&Path>, seed: u64) -> Result<Value> {
    let mut hasher = ConfigHasher::default();
    let trace = read_trace_csv(trace_path)?;
    hasher.add("trace", trace_path.to_string_lossy().as_bytes());
    if !(args.symbol_rate_ghz > 0.0) {
        return Err(CliError::Config("--symbol-rate-ghz must be positive".into()));
    }
    let symbol_rate = args.symbol_rate_ghz * 1e9;
    let oversample = ((1.0 / symbol_rate) / trace.sample_period).round() as usize;
    if oversample == 0 {
        return Err(CliError::Config(
            "trace is sampled more coarsely than the symbol rate".into(),
        ));
    }
    let lo = trace.samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = trace.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let input = AnalysisInput {
        trace: &trace,
        oversample,
        symbol_rate,
        threshold: args.threshold_v.unwrap_or(0.5 * (lo + hi)),
        full_scale: args.full_scale_v.map_or(0.5 * (hi - lo), |v| 0.5 * v),
        tones: args.tones_ghz.iter().map(|f| f * 1e9).collect(),
        record_length: args.record_length,
        thd_harmonics: args.thd_harmonics,
        signal_guard_bins: args.signal_guard_bins,
        supply_v: args.supply_v,
        jitter_groups: args.jitter_groups.unwrap_or(CLOCK_PHASES),
        ramp_samples_per_code: args.ramp_samples_per_code,
    };
    let analysed = run_analyses(&args.analyses, &input)?;
    let report = json!({
        "tool": "awgsim",
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": hasher.finish(),
        "rng_seed": seed,
        "samples": trace.len(),
        "analyses": analysed.blocks,
    });
    let dir = out_dir_or_default(out_dir);
    create_dir(&dir)?;
    for (name, csv) in &analysed.files {
        write_file(&dir.join(name), csv)?;
    }
    write_file(&dir.join("analysis.json"), report_text(&report))?;
    Ok(report)
}

/// Output directory for scenario `index` of a batch, keyed by file stem.
fn batch_dirs(scenarios: &[PathBuf], base: &Path) -> Vec<PathBuf> {
    let mut seen = std::collections::BTreeMap::<String, usize>::new();
    scenarios
        .iter()
        .map(|p| {
            let stem = p
                .file_stem()
                .map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned());
            let n = seen.entry(stem.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                base.join(stem)
            } else {
                base.join(format!("{stem}-{n}"))
            }
        })
        .collect()
}

/// Runs scenarios, `jobs` at a time. A single scenario writes straight into
/// `out_dir`; a batch gives each scenario its own subdirectory.
pub fn cmd_simulate(
    scenarios: &[PathBuf],
    out_dir: Option<&Path>,
    seed: Option<u64>,
    jobs: usize,
) -> Vec<Result<SimOutcome>> {
    if scenarios.len() == 1 {
        return vec![simulate(&scenarios[0], out_dir, seed)];
    }
    let dirs = batch_dirs(scenarios, &out_dir_or_default(out_dir));
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(p) => p,
        Err(e) => return vec![Err(CliError::Runtime(e.to_string()))],
    };
    pool.install(|| {
        scenarios
            .par_iter()
            .zip(dirs.par_iter())
            .map(|(s, d)| simulate(s, Some(d), seed))
            .collect()
    })
}
