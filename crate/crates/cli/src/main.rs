// SPDX-License-Identifier: Apache-2.0

//! `qdmd`: generate benchmark series, fit and forecast them with Hankel DMD,
//! and run the analysis studies. Every run writes a manifest next to its
//! outputs.

mod analyze;
mod config;
mod error;
mod forecast;
mod generate;
mod manifest;
mod study;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{AnalyzeArgs, ForecastArgs, GenerateArgs, RecipeFile, StudyArgs};
use error::Result;

#[derive(Debug, Parser)]
#[command(name = "qdmd", version, about = "Hankel-DMD forecasting of quantum many-body time series")]
struct Cli {
    /// TOML recipe; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; relative paths in the configuration resolve here.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Cap on worker threads (rayon and BLAS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Master seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a benchmark series (exact chain correlator or exact diagonalisation).
    Generate(GenerateArgs),
    /// Fit a DMD model to a series and forecast it.
    Forecast(ForecastArgs),
    /// Spectra, peak tables, envelope exponents and noise estimates.
    Analyze(AnalyzeArgs),
    /// Error, noise-calibration, entanglement, GPR and cutoff studies.
    Study(StudyArgs),
}

/// OpenBLAS 0.3.20 picks AVX-512 kernels whose divide-and-conquer SVD is
/// wrong on large matrices. The core type is read when the library loads, so
/// the process restarts itself with it pinned.
#[cfg(all(unix, target_arch = "x86_64"))]
fn pin_blas_kernels(threads: Option<usize>) {
    use std::os::unix::process::CommandExt;
    if std::env::var_os("OPENBLAS_CORETYPE").is_some() || !std::is_x86_feature_detected!("avx512f") {
        return;
    }
    let Ok(exe) = std::env::current_exe() else { return };
    let mut cmd = std::process::Command::new(exe);
    cmd.args(std::env::args_os().skip(1)).env("OPENBLAS_CORETYPE", "Haswell");
    if let Some(t) = threads {
        cmd.env("OPENBLAS_NUM_THREADS", t.to_string());
    }
    let err = cmd.exec();
    eprintln!("warning: could not restart with OPENBLAS_CORETYPE set ({err}); continuing");
}

#[cfg(not(all(unix, target_arch = "x86_64")))]
fn pin_blas_kernels(_threads: Option<usize>) {}

fn run(cli: Cli) -> Result<PathBuf> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| error::CliError::config(format!("--threads {n}: {e}")))?;
    }
    let recipe = match &cli.config {
        Some(p) => RecipeFile::load(p)?,
        None => RecipeFile::default(),
    };
    let seed = cli.seed.or(recipe.seed).unwrap_or(0);
    let run = manifest::Run::new(cli.out.clone(), seed, cli.threads)?;
    match &cli.command {
        Command::Generate(a) => generate::run(run, config::overlay(recipe.generate, a)?),
        Command::Forecast(a) => forecast::run(run, config::overlay(recipe.forecast, a)?),
        Command::Analyze(a) => analyze::run(run, config::overlay(recipe.analyze, a)?),
        Command::Study(a) => study::run(run, config::overlay(recipe.study, a)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    pin_blas_kernels(cli.threads);
    match run(cli) {
        Ok(manifest) => {
            println!("wrote {}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qdmd: {e}");
            ExitCode::from(e.class.exit_code() as u8)
        }
    }
}
