use std::f64::consts::LN_2;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;
use serde_json::json;
use volentropy::entropy::{entropy_report, grid_warnings, EntropyReport};

use crate::format::{fmt_g, Table};
use crate::manifest::RunManifest;
use crate::{emit, input, parse_list, Format, GlobalArgs};

#[derive(Debug, Args)]
pub struct EntropyArgs {
    /// Histogram cells; defaults to ceil(sqrt(n)) per series or window.
    #[arg(long)]
    bins: Option<usize>,
    /// Rényi orders, comma-separated.
    #[arg(long, default_value = "1.4,1.45,1.5")]
    alpha: String,
    /// Tsallis indices, comma-separated.
    #[arg(long, default_value = "1.4,1.45,1.5")]
    q: String,
    /// Report Shannon and Rényi values in bits instead of nats.
    #[arg(long)]
    bits: bool,
    /// Window length for a rolling entropy series.
    #[arg(long)]
    window: Option<usize>,
    /// Offset between window starts; defaults to the window length.
    #[arg(long, requires = "window")]
    step: Option<usize>,
}

#[derive(Serialize)]
struct SeriesEntropy {
    series: String,
    report: EntropyReport,
}

#[derive(Serialize)]
struct WindowEntropy {
    series: String,
    start: String,
    end: String,
    report: EntropyReport,
}

/// Log-based estimators are rescaled for `--bits`; Tsallis has no log base.
fn rescale(mut r: EntropyReport, bits: bool) -> EntropyReport {
    if bits {
        r.shannon /= LN_2;
        for (_, v) in &mut r.renyi {
            *v /= LN_2;
        }
    }
    r
}

pub fn run(global: &GlobalArgs, args: &EntropyArgs) -> Result<ExitCode> {
    let alphas: Vec<f64> = parse_list(&args.alpha)?;
    let qs: Vec<f64> = parse_list(&args.q)?;
    if alphas.is_empty() || qs.is_empty() {
        bail!("--alpha and --q need at least one value each");
    }
    if args.bins == Some(0) {
        bail!("--bins must be >= 1");
    }
    if args.window == Some(0) || args.step == Some(0) {
        bail!("--window and --step must be >= 1");
    }
    for w in grid_warnings(&qs) {
        eprintln!("warning: {w}");
    }
    let inputs = input::load_all(&global.inputs()?, &global.mapping(), global.returns)?;
    let units = if args.bits { "bits" } else { "nats" };

    let manifest = RunManifest::new(
        "entropy",
        inputs.iter().map(|i| i.digest.clone()).collect(),
        json!({
            "bins": args.bins,
            "alpha": alphas,
            "q": qs,
            "units": units,
            "window": args.window,
            "step": args.step,
            "returns": global.returns,
            "date_col": global.date_col,
            "price_col": global.value_col(),
        }),
        global.seed,
    );

    let Some(window) = args.window else {
        let mut reports = Vec::new();
        for loaded in &inputs {
            let s = &loaded.series;
            let report =
                entropy_report(&s.returns, args.bins, &alphas, &qs).with_context(|| format!("series {}", s.id))?;
            reports.push(SeriesEntropy { series: s.id.clone(), report: rescale(report, args.bits) });
        }
        match global.format {
            Format::Tree => {
                let doc = json!({ "manifest": manifest, "units": units, "entropies": reports });
                emit(&format!("{}\n", serde_json::to_string_pretty(&doc)?))?;
            }
            Format::Text => {
                emit(&manifest.text_header())?;
                emit(&render_grid(&reports, units))?;
            }
        }
        return Ok(ExitCode::SUCCESS);
    };

    let step = args.step.unwrap_or(window);
    let mut windows = Vec::new();
    for loaded in &inputs {
        let s = &loaded.series;
        if window > s.len() {
            bail!("series {}: window {window} exceeds its {} observations", s.id, s.len());
        }
        for start in (0..=s.len() - window).step_by(step) {
            let part = s.window(start, window);
            let report = entropy_report(&part.returns, args.bins, &alphas, &qs)
                .with_context(|| format!("series {} window starting {}", s.id, part.dates[0]))?;
            windows.push(WindowEntropy {
                series: s.id.clone(),
                start: part.dates[0].to_string(),
                end: part.dates[window - 1].to_string(),
                report: rescale(report, args.bits),
            });
        }
    }
    match global.format {
        Format::Tree => {
            let doc = json!({ "manifest": manifest, "units": units, "windows": windows });
            emit(&format!("{}\n", serde_json::to_string_pretty(&doc)?))?;
        }
        Format::Text => {
            emit(&manifest.text_header())?;
            emit(&render_windows(&windows, &alphas, &qs, units))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn render_grid(reports: &[SeriesEntropy], units: &str) -> String {
    let mut header = vec!["Entropies".to_string(), "Index (α/q)".to_string()];
    header.extend(reports.iter().map(|r| r.series.clone()));
    let mut table = Table::new(header, 2);

    let mut row = vec!["Shannon".to_string(), "-".to_string()];
    row.extend(reports.iter().map(|r| fmt_g(r.report.shannon)));
    table.push(row);
    table.rule();
    let first = &reports[0].report;
    for (i, (alpha, _)) in first.renyi.iter().enumerate() {
        let mut row = vec![if i == 0 { "Renyi" } else { "" }.to_string(), fmt_g(*alpha)];
        row.extend(reports.iter().map(|r| fmt_g(r.report.renyi[i].1)));
        table.push(row);
    }
    table.rule();
    for (i, (q, _)) in first.tsallis.iter().enumerate() {
        let mut row = vec![if i == 0 { "Tsallis" } else { "" }.to_string(), fmt_g(*q)];
        row.extend(reports.iter().map(|r| fmt_g(r.report.tsallis[i].1)));
        table.push(row);
    }
    table.rule();
    let mut row = vec!["Bins".to_string(), "-".to_string()];
    row.extend(reports.iter().map(|r| r.report.bins.to_string()));
    table.push(row);
    let mut row = vec!["N".to_string(), "-".to_string()];
    row.extend(reports.iter().map(|r| r.report.n_obs.to_string()));
    table.push(row);

    let mut out = table.render();
    out.push_str(&format!("Shannon and Renyi in {units}; Tsallis is unitless\n"));
    out
}

fn render_windows(windows: &[WindowEntropy], alphas: &[f64], qs: &[f64], units: &str) -> String {
    let mut header: Vec<String> = ["Series", "Start", "End", "Bins", "Shannon"].map(String::from).to_vec();
    header.extend(alphas.iter().map(|a| format!("Renyi({})", fmt_g(*a))));
    header.extend(qs.iter().map(|q| format!("Tsallis({})", fmt_g(*q))));
    let mut table = Table::new(header, 3);
    for w in windows {
        let mut row =
            vec![w.series.clone(), w.start.clone(), w.end.clone(), w.report.bins.to_string(), fmt_g(w.report.shannon)];
        row.extend(w.report.renyi.iter().map(|(_, v)| fmt_g(*v)));
        row.extend(w.report.tsallis.iter().map(|(_, v)| fmt_g(*v)));
        table.push(row);
    }
    let mut out = table.render();
    out.push_str(&format!("Shannon and Renyi in {units}; Tsallis is unitless\n"));
    out
}
