//! Command-line front end for the `pnppds` restoration library.

pub mod bench;
pub mod commands;
pub mod config;
pub mod imageio;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::commands::{parse_shape, CheckArgs};
use crate::config::{DenoiserChoice, RunConfig};

/// Convergent primal-dual plug-and-play image restoration.
#[derive(Debug, Parser)]
#[command(name = "pnppds", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Blur or mask an image and add noise; writes the observation and a
    /// `<out>.json` sidecar describing the forward model.
    Degrade {
        input: PathBuf,
        #[command(flatten)]
        run: RunConfig,
    },
    /// Restore an observation written by `degrade`.
    ///
    /// Exit status: 0 converged, 2 iteration cap, 3 diverged, 4 rejected by
    /// the convergence conditions, 1 any other error.
    Restore {
        observation: PathBuf,
        #[command(flatten)]
        run: RunConfig,
    },
    /// Sample pairs and check the firm nonexpansiveness of a denoiser;
    /// exits 0 iff the largest ratio stays within the tolerance.
    CheckDenoiser {
        /// identity | dct-threshold[:t] | scaled:f | external
        #[arg(long, default_value = "identity")]
        denoiser: DenoiserChoice,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Test image shape, WxH or WxHxC.
        #[arg(long, default_value = "16x16", value_parser = parse_shape)]
        shape: pnppds_core::Shape,
        /// Pass iff the largest ratio is at most 1 + tolerance.
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
        /// Where to write the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Same as --out.
        #[arg(long, conflicts_with = "out")]
        report: Option<PathBuf>,
    },
    /// Print the exact circular-convolution norm of a kernel and a
    /// power-iteration estimate.
    Opnorm {
        #[arg(long)]
        kernel: String,
        /// Image grid, WxH.
        #[arg(long, default_value = "256x256", value_parser = parse_shape)]
        shape: pnppds_core::Shape,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Answer denoise requests on stdin/stdout with a built-in denoiser, for
    /// testing `exec:` endpoints.
    #[command(hide = true)]
    Serve {
        #[arg(long, default_value = "identity")]
        denoiser: DenoiserChoice,
    },
    /// Degrade and restore a test image under a sweep of settings.
    Bench {
        /// Clean image; a synthetic one is used when absent.
        input: Option<PathBuf>,
        /// Side of the synthetic image.
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[command(flatten)]
        run: RunConfig,
    },
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Degrade { input, run } => commands::degrade(&input, run),
        Command::Restore { observation, run } => commands::restore(&observation, run),
        Command::CheckDenoiser {
            denoiser,
            endpoint,
            pairs,
            seed,
            shape,
            tolerance,
            out,
            report,
        } => {
            let args = CheckArgs {
                denoiser,
                endpoint,
                pairs,
                seed,
                shape,
                tolerance,
                out: out.or(report),
            };
            Ok(commands::check_denoiser(&args)?.0)
        }
        Command::Opnorm { kernel, shape, iters, seed } => {
            let (exact, estimate) = commands::opnorm(&kernel, shape, iters, seed)?;
            println!("exact {exact:.12}");
            println!("power {estimate:.12}");
            println!("relative difference {:.3e}", (estimate - exact).abs() / exact);
            Ok(0)
        }
        Command::Serve { denoiser } => {
            commands::serve_stdio(&denoiser)?;
            Ok(0)
        }
        Command::Bench { input, size, run } => {
            bench::bench(input.as_deref(), size, run)?;
            Ok(0)
        }
    }
}
