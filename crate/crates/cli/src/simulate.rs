use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde_json::json;
use volentropy::simulate::{simulate_path, SimConfig, DEFAULT_BURN_IN};
use volentropy::volmodel::DEFAULT_TRUNCATION;
use volentropy::{ModelFamily, ParamVector};

use crate::manifest::RunManifest;
use crate::{emit, Format, GlobalArgs};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// garch, igarch or figarch.
    #[arg(long)]
    family: ModelFamily,
    #[arg(long)]
    omega: f64,
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    /// Fractional difference; required for figarch, implied for the others.
    #[arg(long, allow_hyphen_values = true)]
    d: Option<f64>,
    /// Student-t degrees of freedom; Gaussian innovations when absent.
    #[arg(long)]
    nu: Option<f64>,
    /// Number of returns to emit.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
    truncation: usize,
    /// Output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn run(global: &GlobalArgs, args: &SimulateArgs) -> Result<ExitCode> {
    let d = match (args.family, args.d) {
        (ModelFamily::Figarch, None) => bail!("figarch needs --d"),
        (_, Some(d)) => d,
        (ModelFamily::Garch, None) => 0.0,
        (ModelFamily::Igarch, None) => 1.0,
    };
    let params = ParamVector { omega: args.omega, alpha: args.alpha, beta: args.beta, d, nu: args.nu };
    let config = SimConfig {
        burn_in: args.burn_in,
        horizon: args.truncation,
        ..SimConfig::new(args.family, params, args.n, global.seed)
    };
    let path = simulate_path(&config)?;

    match &args.output {
        Some(file) => {
            let f = File::create(file).with_context(|| format!("creating {}", file.display()))?;
            let mut w = BufWriter::new(f);
            path.series.write_csv(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            path.series.write_csv(&mut w)?;
            w.flush()?;
        }
    }

    let manifest = RunManifest::new(
        "simulate",
        Vec::new(),
        json!({
            "family": args.family,
            "params": params,
            "n": args.n,
            "burn_in": args.burn_in,
            "truncation": args.truncation,
            "output": args.output.as_ref().map(|p| p.display().to_string()),
        }),
        global.seed,
    );
    let text = match global.format {
        Format::Tree => format!("{}\n", serde_json::to_string_pretty(&json!({ "manifest": manifest }))?),
        Format::Text => manifest.text_header(),
    };
    // keep stdout clean when it carries the data
    if args.output.is_some() {
        emit(&text)?;
    } else {
        eprint!("{text}");
    }
    Ok(ExitCode::SUCCESS)
}
