// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use awgsim_cli::commands::{cmd_analyze, cmd_compile, cmd_disasm, cmd_ffe_train, cmd_simulate, AnalyzeArgs};
use awgsim_cli::config::AnalysisKind;
use awgsim_cli::CliError;
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "awgsim", version, about = "Cryogenic AWG behavioral simulator")]
struct Cli {
    /// RNG seed; overrides the scenario's rng_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for generated files.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Scenarios simulated concurrently in batch mode.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compile a pulse program into a pattern-memory image.
    Compile {
        program: PathBuf,
        /// FFE taps to pre-distort the waveform with.
        #[arg(long)]
        ffe: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run one or more scenario files end to end.
    Simulate {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Solve least-squares FFE taps for a channel.
    FfeTrain {
        channel: PathBuf,
        #[arg(long, default_value_t = 5)]
        taps: usize,
        #[arg(long, default_value_t = 0)]
        main: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Re-run metrics on a saved trace CSV.
    Analyze {
        trace: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        analyses: Vec<AnalysisKind>,
        #[arg(long)]
        symbol_rate_ghz: f64,
        #[arg(long, value_delimiter = ',')]
        tones_ghz: Vec<f64>,
        #[arg(long)]
        record_length: Option<usize>,
        #[arg(long)]
        threshold_v: Option<f64>,
        /// Code-0 to code-255 output span.
        #[arg(long)]
        full_scale_v: Option<f64>,
        #[arg(long, default_value_t = 0.8)]
        supply_v: f64,
        #[arg(long, default_value_t = 5)]
        thd_harmonics: usize,
        /// Bins beside each tone that sfdr and sndr count as signal
        #[arg(long, default_value_t = 0)]
        signal_guard_bins: usize,
        #[arg(long)]
        jitter_groups: Option<usize>,
        #[arg(long)]
        ramp_samples_per_code: Option<usize>,
    },
    /// Dump an image file as one code per sample.
    Disasm {
        image: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_dir = cli.out_dir.as_deref();
    let result = match cli.command {
        Command::Compile { program, ffe, output } => cmd_compile(&program, ffe.as_deref(), output.as_deref(), out_dir),
        Command::Disasm { image, output } => cmd_disasm(&image, output.as_deref(), out_dir),
        Command::FfeTrain {
            channel,
            taps,
            main,
            output,
        } => cmd_ffe_train(&channel, taps, main, output.as_deref(), out_dir),
        Command::Analyze {
            trace,
            analyses,
            symbol_rate_ghz,
            tones_ghz,
            record_length,
            threshold_v,
            full_scale_v,
            supply_v,
            thd_harmonics,
            signal_guard_bins,
            jitter_groups,
            ramp_samples_per_code,
        } => {
            let args = AnalyzeArgs {
                analyses,
                symbol_rate_ghz,
                tones_ghz,
                record_length,
                threshold_v,
                full_scale_v,
                supply_v,
                thd_harmonics,
                signal_guard_bins,
                jitter_groups,
                ramp_samples_per_code,
            };
            cmd_analyze(&trace, &args, out_dir, cli.seed.unwrap_or(0))
                .map(|r| serde_json::to_string_pretty(&r["analyses"]).unwrap_or_default())
        }
        Command::Simulate { scenarios } => {
            let results = cmd_simulate(&scenarios, out_dir, cli.seed, cli.jobs);
            let mut code = 0;
            for (path, r) in scenarios.iter().zip(results) {
                match r {
                    Ok(o) => println!(
                        "{}: report written to {}",
                        path.display(),
                        o.out_dir.join("report.json").display()
                    ),
                    Err(e) => {
                        eprintln!("error: {}: {e}", path.display());
                        code = code.max(e.exit_code());
                    }
                }
            }
            return ExitCode::from(code);
        }
    };
    match result {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}
