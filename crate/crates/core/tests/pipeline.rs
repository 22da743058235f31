// SPDX-License-Identifier: Apache-2.0

use awgsim::analysis::{
    eye_opening, im3, inl_dnl, jitter_decompose, sfdr, snap_to_bin, sndr, spectrum, SpectrumOptions,
};
use awgsim::bench::{measure_prbs, measure_ramp_levels, ramp_codes, run_datapath, sample_at_ui_centers, PrbsBench};
use awgsim::clocktree::{derive_edges, ClockConfig};
use awgsim::dacmodel::{build_level_table, DacConfig};
use awgsim::equalizer::{solve_ffe, ChannelModel};
use awgsim::patgen::{pack_image, unpack_image, SequencerConfig};
use awgsim::wavec::{compile, Envelope, PulseProgram, PulseSegment, Tone};

#[test]
fn jitter_closure_against_clock_injection() {
    let mut cfg = ClockConfig::ideal(20e9);
    cfg.rj_sigma = 0.3e-12;
    cfg.duty_cycle_error = 0.02;
    cfg.quadrature_error = 0.01;
    cfg.rng_seed = 99;
    let edges = derive_edges(100_000, &cfg).unwrap();
    let r = jitter_decompose(&edges.edge_times, edges.nominal_period).unwrap();
    assert!((r.random_sigma / cfg.rj_sigma - 1.0).abs() < 0.1, "{r:?}");
    assert!((r.deterministic / cfg.deterministic_pk_pk() - 1.0).abs() < 0.1, "{r:?}");
}

#[test]
fn ramp_through_datapath_gives_linearity() {
    let codes = ramp_codes(64);
    let image = pack_image(&codes).unwrap();
    let mut dac = DacConfig::ideal(1.0);
    dac.weight_mismatch = [0.004, -0.003, 0.002, -0.01, 0.01, 0.0, 0.02, -0.02, 0.05];
    dac.output_rise_time = 15e-12;
    let out = run_datapath(
        &image,
        &SequencerConfig::whole(&image),
        &ClockConfig::ideal(20e9),
        &dac,
        8,
    )
    .unwrap();
    let measured = inl_dnl(&measure_ramp_levels(&out.trace, 64, 8).unwrap()).unwrap();
    let oracle = inl_dnl(&build_level_table(&dac)).unwrap();
    for c in 0..256 {
        assert!((measured.inl[c] - oracle.inl[c]).abs() < 1e-6, "code {c}");
    }
    assert!(measured.max_abs_inl() < 2.0 && measured.max_abs_dnl() < 1.0);
}

#[test]
fn two_tone_program_lands_on_bins() {
    let fs = 20.48e9;
    let seg = PulseSegment::fdma(
        Envelope::Square,
        1.0,
        200e-9,
        vec![
            Tone {
                amplitude: 0.45,
                frequency: 5.1e9,
                phase: 0.0,
            },
            Tone {
                amplitude: 0.45,
                frequency: 5.3e9,
                phase: 0.0,
            },
        ],
    );
    let c = compile(
        &PulseProgram {
            segments: vec![seg],
            sample_rate: fs,
        },
        None,
    )
    .unwrap();
    assert_eq!(c.codes.len(), 4096);
    assert_eq!(unpack_image(&c.image), c.codes.0);
    let dac = DacConfig::ideal(1.0);
    let out = run_datapath(
        &c.image,
        &SequencerConfig::whole(&c.image),
        &ClockConfig::ideal(fs),
        &dac,
        8,
    )
    .unwrap();
    let sampled = sample_at_ui_centers(&out.trace, 8, 4096);
    let opts = SpectrumOptions {
        full_scale: 0.5,
        tones: vec![5.1e9, 5.3e9],
    };
    let s = spectrum(&sampled, 4096, &opts).unwrap();
    assert_eq!(s.bin_of(5.1e9).unwrap(), 1020);
    assert_eq!(s.bin_of(5.3e9).unwrap(), 1060);
    let peak = (1..s.len())
        .max_by(|a, b| s.amplitudes[*a].total_cmp(&s.amplitudes[*b]))
        .unwrap();
    assert!(peak == 1020 || peak == 1060);
    assert!(im3(&s, 5.1e9, 5.3e9).unwrap() < -40.0);
    assert!(sfdr(&s, &[1020, 1060]).unwrap() > 35.0);
}

#[test]
fn quantized_sine_sndr() {
    let fs = 20e9;
    let n = 4096;
    let f = snap_to_bin(1.3e9, fs, n) + fs / n as f64;
    assert_eq!((f / (fs / n as f64)).round() as usize, 267);
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
    let s = spectrum(
        &sample_at_ui_centers(&out.trace, 8, n),
        n,
        &SpectrumOptions {
            full_scale: 0.5,
            tones: vec![f],
        },
    )
    .unwrap();
    let k = s.bin_of(f).unwrap();
    let v = sndr(&s, &[k]).unwrap();
    assert!((v - 49.92).abs() < 0.5, "sndr {v}");
}

#[test]
fn channel_closes_and_ffe_reopens_the_eye() {
    let bench = PrbsBench::reference();
    let clean = measure_prbs(&bench, &ChannelModel::identity(), None).unwrap();
    let ch = ChannelModel::reference();
    let raw = measure_prbs(&bench, &ch, None).unwrap();
    let eq = measure_prbs(&bench, &ch, Some(&solve_ffe(&ch, 5, 0).unwrap())).unwrap();
    let ui = bench.clock.period();
    let gain = ch.dc_gain();
    // compare in units of the channel's own swing
    assert!(raw.eye.vertical / gain < clean.eye.vertical);
    assert!(eq.eye.horizontal > raw.eye.horizontal);
    assert!(eq.jitter.deterministic <= 0.65 * raw.jitter.deterministic);
    assert_eq!(eq.clipped, 0);
    let direct = eye_opening(&raw.trace, ui, gain * 0.5).unwrap();
    assert_eq!(direct, raw.eye);
}
