//! `volentropy`: fit GARCH-family models, compute histogram entropies, and
//! simulate return paths.
//!
//! Exit codes: 0 on success, 1 on bad input or arguments, 2 when a fit
//! fails or does not converge.

mod entropy;
mod fit;
mod format;
mod input;
mod manifest;
mod simulate;

use std::io::{ErrorKind, Write};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use volentropy::ColumnMapping;

#[derive(Debug, Parser)]
#[command(name = "volentropy", version, about = "Volatility models and entropy of return series")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Aligned plain text.
    Text,
    /// JSON document at full precision.
    Tree,
}

#[derive(Debug, clap::Args)]
pub struct GlobalArgs {
    /// Input files, comma-separated; `-` reads stdin.
    #[arg(long, global = true, value_delimiter = ',')]
    input: Vec<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value = "date")]
    date_col: String,
    /// Value column; `close` for prices, `return` with --returns.
    #[arg(long, global = true)]
    price_col: Option<String>,
    /// Inputs already hold returns.
    #[arg(long, global = true)]
    returns: bool,
}

impl GlobalArgs {
    fn value_col(&self) -> String {
        self.price_col.clone().unwrap_or_else(|| if self.returns { "return" } else { "close" }.into())
    }

    fn mapping(&self) -> ColumnMapping {
        ColumnMapping::new(self.date_col.clone(), self.value_col())
    }

    fn inputs(&self) -> Result<Vec<String>> {
        let paths: Vec<String> = self.input.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        if paths.is_empty() {
            bail!("--input is required");
        }
        Ok(paths)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit GARCH, IGARCH and FIGARCH models by maximum likelihood.
    Fit(fit::FitArgs),
    /// Shannon, Rényi and Tsallis entropies of return histograms.
    Entropy(entropy::EntropyArgs),
    /// Simulate a return path and write it as `date,return` CSV.
    Simulate(simulate::SimulateArgs),
}

/// Writes report text to stdout; a closed pipe ends output quietly.
pub fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() == ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

/// Parses a comma-separated list.
pub fn parse_list<T>(raw: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: std::error::Error + Send + Sync + 'static,
{
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().with_context(|| format!("bad list item '{s}'")))
        .collect()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Fit(args) => fit::run(&cli.global, args),
        Command::Entropy(args) => entropy::run(&cli.global, args),
        Command::Simulate(args) => simulate::run(&cli.global, args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
