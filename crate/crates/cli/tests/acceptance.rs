// SPDX-License-Identifier: Apache-2.0

//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails. Run with `--nocapture` to see the table.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use awgsim::analysis::{
    im3, inl_dnl, jitter_decompose, power_model, sfdr, snap_to_bin, sndr, spectrum, thd, SpectrumOptions,
    MIN_SAMPLE_RATE, MIN_SUPPLY, OPERATING_MAX_SAMPLE_RATE, OPERATING_MAX_SUPPLY,
};
use awgsim::bench::{
    decode_codes, measure_prbs, measure_ramp_levels, ramp_codes, run_datapath, sample_at_ui_centers, PrbsBench,
};
use awgsim::clocktree::{derive_edges, ClockConfig};
use awgsim::dacmodel::{build_level_table, thermometer_encode, AnalogTrace, DacConfig, NOMINAL_WEIGHTS, SEGMENT_COUNT};
use awgsim::equalizer::{solve_ffe, ChannelModel};
use awgsim::patgen::{pack_image, SequencerConfig, SramImage, MAX_SAMPLES, PAD_CODE};
use awgsim::wavec::{compile, Envelope, ProgramFile, PulseProgram, PulseSegment};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_awgsim");

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn awgsim(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("spawn awgsim")
}

fn coherent(parts: &[(f64, usize)], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            parts
                .iter()
                .map(|&(a, k)| a * (2.0 * PI * (k * i) as f64 / n as f64).sin())
                .sum()
        })
        .collect()
}

fn trace(samples: Vec<f64>, fs: f64) -> AnalogTrace {
    AnalogTrace::new(samples, 1.0 / fs)
}

fn datapath_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);
    let mut mismatches = 0usize;
    for _ in 0..1000 {
        let len = rng.random_range(1..=MAX_SAMPLES);
        let codes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        let image = pack_image(&codes).unwrap();
        let out = decode_codes(&image, &SequencerConfig::whole(&image)).unwrap();
        mismatches += codes.iter().zip(&out).filter(|(a, b)| a != b).count();
        mismatches += out[len..].iter().filter(|&&c| c != PAD_CODE).count();
        mismatches += out.len().abs_diff(len.div_ceil(32) * 32);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && secs < 10.0,
        format!("{mismatches} mismatches over 1000 images in {secs:.2} s"),
    )
}

fn code_sum() -> Outcome {
    let bad = (0..=255u8)
        .filter(|&c| thermometer_encode(c).nominal_sum() != c as u32)
        .count();
    outcome(bad == 0, format!("{bad} of 256 codes disagree"))
}

/// Level of `code` from the segment weights, with its own unary/binary split.
fn oracle_level(code: u8, m: &[f64; SEGMENT_COUNT], fs: f64) -> f64 {
    let mut sum = 0.0;
    for u in 0..(code >> 6) as usize {
        sum += NOMINAL_WEIGHTS[u] as f64 * (1.0 + m[u]);
    }
    for bit in 0..6 {
        if code & (1 << bit) != 0 {
            sum += (1u32 << bit) as f64 * (1.0 + m[8 - bit]);
        }
    }
    fs * sum / 255.0
}

fn static_linearity() -> Outcome {
    let ideal = inl_dnl(&build_level_table(&DacConfig::ideal(1.0))).unwrap();
    let zero_ok = ideal.max_abs_inl() == 0.0 && ideal.max_abs_dnl() == 0.0;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let mut dac = DacConfig::ideal(rng.random_range(0.5..1.5));
        for m in dac.weight_mismatch.iter_mut() {
            *m = rng.random_range(-0.05..0.05);
        }
        let r = inl_dnl(&build_level_table(&dac)).unwrap();
        let lv: Vec<f64> = (0..=255u8)
            .map(|c| oracle_level(c, &dac.weight_mismatch, dac.full_scale_voltage))
            .collect();
        let lsb = (lv[255] - lv[0]) / 255.0;
        for c in 0..256 {
            let inl = (lv[c] - lv[0] - c as f64 * lsb) / lsb;
            worst = worst.max((r.inl[c] - inl).abs() / inl.abs().max(1.0));
        }
        for c in 0..255 {
            let dnl = (lv[c + 1] - lv[c]) / lsb - 1.0;
            worst = worst.max((r.dnl[c] - dnl).abs() / dnl.abs().max(1.0));
        }
    }

    let mut dac = DacConfig::ideal(1.0);
    dac.weight_mismatch = [0.004, -0.003, 0.002, -0.01, 0.01, 0.0, 0.02, -0.02, 0.05];
    dac.output_rise_time = 15e-12;
    let image = pack_image(&ramp_codes(64)).unwrap();
    let out = run_datapath(
        &image,
        &SequencerConfig::whole(&image),
        &ClockConfig::ideal(20e9),
        &dac,
        8,
    )
    .unwrap();
    let cal = inl_dnl(&measure_ramp_levels(&out.trace, 64, 8).unwrap()).unwrap();
    let (inl, dnl) = (cal.max_abs_inl(), cal.max_abs_dnl());
    outcome(
        zero_ok && worst <= 1e-12 && inl < 2.0 && dnl < 1.0,
        format!("ideal exact {zero_ok}, oracle deviation {worst:.1e}, calibrated INL {inl:.3} / DNL {dnl:.3} LSB"),
    )
}

/// Full-scale 8-bit sine at bin 267 of 4096 played through the datapath.
fn quantized_sine() -> (awgsim::analysis::Spectrum, f64) {
    let fs = 20e9;
    let n = 4096;
    let f = 267.0 * fs / n as f64;
    let seg = PulseSegment::carrier(Envelope::Square, 1.0, n as f64 / fs, f, 0.0);
    let c = compile(
        &PulseProgram {
            segments: vec![seg],
            sample_rate: fs,
        },
        None,
    )
    .unwrap();
    let out = run_datapath(
        &c.image,
        &SequencerConfig::whole(&c.image),
        &ClockConfig::ideal(fs),
        &DacConfig::ideal(1.0),
        8,
    )
    .unwrap();
    let opts = SpectrumOptions {
        full_scale: 0.5,
        tones: vec![f],
    };
    (spectrum(&sample_at_ui_centers(&out.trace, 8, n), n, &opts).unwrap(), f)
}

fn quantization_noise() -> Outcome {
    let (s, f) = quantized_sine();
    let v = sndr(&s, &[s.bin_of(f).unwrap()]).unwrap();
    outcome((v - 49.92).abs() <= 0.5, format!("SNDR {v:.3} dB"))
}

fn cubic_im3(alpha: f64, a: f64) -> f64 {
    let fs = 20.48e9;
    let n = 4096;
    let x = coherent(&[(a, 1020), (a, 1060)], n);
    let y: Vec<f64> = x.iter().map(|v| v + alpha * v.powi(3)).collect();
    let opts = SpectrumOptions {
        full_scale: 1.0,
        tones: vec![5.1e9, 5.3e9],
    };
    im3(&spectrum(&trace(y, fs), n, &opts).unwrap(), 5.1e9, 5.3e9).unwrap()
}

fn im3_analytics() -> Outcome {
    let a = 0.4;
    let forward = cubic_im3(0.01, a);
    // product (3/4) a A^3 over tone A (1 + (9/4) a A^2), solved for -33 dBc
    let r = 10f64.powf(-33.0 / 20.0);
    let alpha = r / (a * a * (0.75 - 2.25 * r));
    let inverted = cubic_im3(alpha, a);
    outcome(
        (forward + 58.4).abs() <= 1.0 && (inverted + 33.0).abs() <= 1.0,
        format!("alpha 0.01: {forward:.2} dBc; alpha {alpha:.4}: {inverted:.2} dBc"),
    )
}

fn constructed_spur() -> Outcome {
    let n = 4096;
    let x = coherent(&[(0.5, 267), (0.005, 1001)], n);
    let s = spectrum(
        &trace(x, 20e9),
        n,
        &SpectrumOptions {
            full_scale: 0.5,
            tones: vec![],
        },
    )
    .unwrap();
    let v = sfdr(&s, &[267]).unwrap();
    outcome((v - 40.0).abs() <= 0.1, format!("SFDR {v:.4} dB"))
}

fn thd_analytic() -> Outcome {
    let fs = 20e9;
    let n = 4096;
    let f = 267.0 * fs / n as f64;
    let y: Vec<f64> = coherent(&[(1.0, 267)], n).iter().map(|v| v + 0.02 * v * v).collect();
    let s = spectrum(
        &trace(y, fs),
        n,
        &SpectrumOptions {
            full_scale: 1.0,
            tones: vec![f],
        },
    )
    .unwrap();
    let analytic = thd(&s, f, 5).unwrap();
    let (q, fq) = quantized_sine();
    let quantized = thd(&q, fq, 5).unwrap();
    outcome(
        (analytic - 1.0).abs() <= 0.05 && quantized < 2.0,
        format!("second-order term {analytic:.4}%, quantized sine {quantized:.4}%"),
    )
}

fn jitter_closure() -> Outcome {
    let start = Instant::now();
    let mut cfg = ClockConfig::ideal(20e9);
    cfg.rj_sigma = 0.221e-12;
    cfg.duty_cycle_error = 0.0125;
    cfg.quadrature_error = 0.014;
    cfg.rng_seed = 2024;
    let dj_in = cfg.deterministic_pk_pk();
    let edges = derive_edges(100_000, &cfg).unwrap();
    let r = jitter_decompose(&edges.edge_times, edges.nominal_period).unwrap();
    let rj_err = (r.random_sigma / cfg.rj_sigma - 1.0).abs();
    let dj_err = (r.deterministic / dj_in - 1.0).abs();

    let clean = derive_edges(100_000, &ClockConfig::ideal(20e9)).unwrap();
    let floor = jitter_decompose(&clean.edge_times, clean.nominal_period).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        (dj_in - 1.95e-12).abs() < 1e-18 && rj_err <= 0.1 && dj_err <= 0.1 && floor.total < 1e-15 && secs < 30.0,
        format!(
            "RJ {:.4} ps ({:.1}%), DJ {:.4} ps ({:.1}%), floor TJ {:.2e} s, {secs:.2} s",
            r.random_sigma * 1e12,
            100.0 * rj_err,
            r.deterministic * 1e12,
            100.0 * dj_err,
            floor.total
        ),
    )
}

fn ffe_efficacy() -> Outcome {
    let bench = PrbsBench::reference();
    let ch = ChannelModel::reference();
    let raw = measure_prbs(&bench, &ch, None).unwrap();
    let eq = measure_prbs(&bench, &ch, Some(&solve_ffe(&ch, 5, 0).unwrap())).unwrap();
    let ratio = eq.jitter.deterministic / raw.jitter.deterministic;
    outcome(
        ratio <= 0.65,
        format!(
            "DJ {:.3} ps -> {:.3} ps, ratio {ratio:.3}, {} clipped",
            raw.jitter.deterministic * 1e12,
            eq.jitter.deterministic * 1e12,
            eq.clipped
        ),
    )
}

fn power() -> Outcome {
    let lo = power_model(2e9, 0.6).unwrap().total_mw;
    let hi = power_model(34e9, 1.0).unwrap().total_mw;
    let cal = power_model(14e9, 0.8).unwrap();
    let share = cal.digital_mw / cal.total_mw;
    let (mut pq_min, mut pq_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=36 {
        let f = MIN_SAMPLE_RATE + (OPERATING_MAX_SAMPLE_RATE - MIN_SAMPLE_RATE) * i as f64 / 36.0;
        for j in 0..=20 {
            let v = MIN_SUPPLY + (OPERATING_MAX_SUPPLY - MIN_SUPPLY) * j as f64 / 20.0;
            let p = power_model(f, v).unwrap().per_qubit_mw;
            pq_min = pq_min.min(p);
            pq_max = pq_max.max(p);
        }
    }
    outcome(
        lo == 40.0 && hi == 140.0 && (share - 0.2).abs() <= 0.02 && pq_min >= 2.0 && pq_max <= 4.0,
        format!(
            "corners {lo} / {hi} mW, digital share {:.1}%, per qubit {pq_min:.3}..{pq_max:.3} mW",
            100.0 * share
        ),
    )
}

fn two_tone_pipeline() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let prog_path = scenarios().join("two_tone.json");
    let img = tmp.path().join("two_tone.img");
    let csv = tmp.path().join("two_tone.csv");
    assert!(
        awgsim(&["compile", prog_path.to_str().unwrap(), "-o", img.to_str().unwrap()])
            .status
            .success()
    );
    assert!(awgsim(&["disasm", img.to_str().unwrap(), "-o", csv.to_str().unwrap()])
        .status
        .success());

    let image = SramImage::from_file_bytes(&fs::read(&img).unwrap()).unwrap();
    let program: ProgramFile = serde_json::from_slice(&fs::read(&prog_path).unwrap()).unwrap();
    let program = program.into_program().unwrap();
    let compiled = compile(&program, None).unwrap();
    let disasm: Vec<u8> = fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let n = compiled.codes.len();
    let round_trip =
        image == compiled.image && disasm[..n] == compiled.codes.0[..] && disasm[n..].iter().all(|&c| c == PAD_CODE);

    let fs_ = program.sample_rate;
    let out = run_datapath(
        &image,
        &SequencerConfig::whole(&image),
        &ClockConfig::ideal(fs_),
        &DacConfig::ideal(1.0),
        8,
    )
    .unwrap();
    let record = 1 << n.ilog2();
    let tones = vec![snap_to_bin(5.1e9, fs_, record), snap_to_bin(5.3e9, fs_, record)];
    let opts = SpectrumOptions {
        full_scale: 0.5,
        tones: tones.clone(),
    };
    let s = spectrum(&sample_at_ui_centers(&out.trace, 8, n), record, &opts).unwrap();
    let mut by_level: Vec<usize> = (1..s.len()).collect();
    by_level.sort_by(|a, b| s.amplitudes[*b].total_cmp(&s.amplitudes[*a]));
    let mut peaks = [by_level[0], by_level[1]];
    peaks.sort();
    let declared = [s.bin_of(tones[0]).unwrap(), s.bin_of(tones[1]).unwrap()];
    let spacing = s.frequency(peaks[1]) - s.frequency(peaks[0]);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        n <= MAX_SAMPLES && round_trip && peaks == declared && (spacing - 200e6).abs() < 1.0 && secs < 60.0,
        format!(
            "{n} samples, round trip {round_trip}, peaks at bins {peaks:?} (declared {declared:?}), spacing {:.1} MHz, {secs:.2} s",
            spacing / 1e6
        ),
    )
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut same = true;
    let mut names = Vec::new();
    for sc in ["clock_4k_scenario.json", "two_tone_scenario.json"] {
        let path = scenarios().join(sc);
        let mut reports: Vec<Vec<u8>> = Vec::new();
        for run in ["first", "second"] {
            let dir = tmp.path().join(sc).join(run);
            let o = awgsim(&[
                "simulate",
                path.to_str().unwrap(),
                "--seed",
                "11",
                "--out-dir",
                dir.to_str().unwrap(),
            ]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            reports.push(fs::read(dir.join("report.json")).unwrap());
        }
        let v: Value = serde_json::from_slice(&reports[0]).unwrap();
        same &= reports[0] == reports[1] && v["rng_seed"] == 11;
        names.push(sc.trim_end_matches(".json"));
    }
    outcome(same, format!("reports byte-identical: {same} ({})", names.join(", ")))
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 12] = [
        ("datapath identity", datapath_identity),
        ("thermometer code sum", code_sum),
        ("static linearity", static_linearity),
        ("quantization noise", quantization_noise),
        ("IM3 analytics", im3_analytics),
        ("constructed spur", constructed_spur),
        ("THD analytic", thd_analytic),
        ("jitter closure", jitter_closure),
        ("FFE efficacy", ffe_efficacy),
        ("power model", power),
        ("two-tone pipeline", two_tone_pipeline),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    println!();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} {:>2} {name}: {}", i + 1, o.detail);
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
