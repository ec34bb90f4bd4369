//! `hhtmotion`: decompose dance motions into IMFs, analyze them against a
//! beat grid, and edit them back into BVH.

mod commands;
mod error;
mod manifest;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use commands::{AnalyzeArgs, BeatsArgs, BlendArgs, DecomposeArgs, SpectrumArgs};
use error::{code, CliError, CliResult};
use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "hhtmotion", version, about = "Hilbert-Huang analysis and editing of motion capture")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decompose BVH channels into IMFs and a trend.
    Decompose(DecomposeArgs),
    /// Build a beat grid from music or a fixed tempo.
    Beats(BeatsArgs),
    /// Weighted average frequencies, Fibonacci relations and a summary.
    Analyze(AnalyzeArgs),
    /// Hilbert spectrum as CSV.
    Spectrum(SpectrumArgs),
    /// Edit archive A with components of archive B and write a BVH.
    Blend(BlendArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
struct ReplayArgs {
    manifest: PathBuf,
}

fn parse(argv: &[String]) -> CliResult<Cli> {
    let full = std::iter::once(manifest::TOOL.to_string()).chain(argv.iter().cloned());
    Cli::try_parse_from(full).map_err(|e| match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
            CliError::new(0, e.to_string())
        }
        _ => CliError::usage(e.to_string()),
    })
}

fn run(argv: &[String]) -> CliResult<()> {
    match parse(argv)?.command {
        Command::Decompose(a) => commands::decompose(&a, argv),
        Command::Beats(a) => commands::beats(&a, argv),
        Command::Analyze(a) => commands::analyze(&a, argv),
        Command::Spectrum(a) => commands::spectrum(&a, argv),
        Command::Blend(a) => commands::blend_cmd(&a, argv),
        Command::Replay(a) => {
            let text = fs::read_to_string(&a.manifest).map_err(|e| CliError::io(&a.manifest, e))?;
            let recorded: RunManifest = serde_json::from_str(&text)
                .map_err(|e| CliError::new(code::PARSE, format!("{}: {e}", a.manifest.display())))?;
            if recorded.args.first().is_some_and(|c| c == "replay") {
                return Err(CliError::usage("a manifest cannot replay another replay"));
            }
            recorded.verify_inputs()?;
            run(&recorded.args)
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match run(&argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.code == 0 => {
            print!("{}", e.message);
            ExitCode::SUCCESS
        }
        Err(e) => {
            let text = e.message.trim_end();
            if e.code == code::USAGE && text.starts_with("error:") {
                eprintln!("{text}");
            } else {
                eprintln!("error: {text}");
            }
            ExitCode::from(e.code)
        }
    }
}
