//! `jscsi`: exponent curves, bound reports and exact small-blocklength
//! simulation for a source with decoder side information over a DMC.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use jscsi_cli::{parse_scenario, CliError, DecoderChoice, ReportOptions};

#[derive(Parser)]
#[command(
    name = "jscsi",
    version,
    about = "Error exponents for joint source-channel coding with side information"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecoderArg {
    Mmi,
    Map,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Emit e_L, e_U, E_r, E_sp and both sums on a rate grid as CSV.
    Curves {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        rate_step: Option<f64>,
    },
    /// Summarize capacity, critical rate, bounds, matching and separation.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        rate_step: Option<f64>,
        /// Also run the nested optimization over compositions.
        #[arg(long)]
        nested: bool,
        /// Fail with exit code 4 unless one input is optimal at every rate.
        #[arg(long)]
        flat: bool,
    },
    /// Exact error probabilities of random composition codes.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, value_enum, default_value_t = DecoderArg::Both)]
        decoder: DecoderArg,
    },
    /// Curves of the reference scenario with H(A|B), capacity and critical rate.
    ReproduceFig1 {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        rate_step: Option<f64>,
    },
    /// Curves of the reference scenario with both minima and the separate-coding exponent.
    ReproduceFig2 {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        rate_step: Option<f64>,
    },
}

fn emit(text: &str, out: Option<PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Curves {
            config,
            out,
            rate_step,
        } => {
            let s = parse_scenario(&config)?;
            emit(&jscsi_cli::curves(&s, rate_step)?, out)
        }
        Command::Report {
            config,
            out,
            rate_step,
            nested,
            flat,
        } => {
            let s = parse_scenario(&config)?;
            let opts = ReportOptions {
                nested,
                flat,
                rate_step,
            };
            emit(&jscsi_cli::report(&s, opts)?, out)
        }
        Command::Simulate {
            config,
            out,
            n,
            seeds,
            decoder,
        } => {
            let s = parse_scenario(&config)?;
            let choice = match decoder {
                DecoderArg::Mmi => DecoderChoice::Mmi,
                DecoderArg::Map => DecoderChoice::Map,
                DecoderArg::Both => DecoderChoice::Both,
            };
            emit(&jscsi_cli::simulate(&s, n, seeds, choice)?, out)
        }
        Command::ReproduceFig1 { out, rate_step } => {
            emit(&jscsi_cli::reproduce_fig1(rate_step)?, out)
        }
        Command::ReproduceFig2 { out, rate_step } => {
            emit(&jscsi_cli::reproduce_fig2(rate_step)?, out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
