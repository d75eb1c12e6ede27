use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::Args;
use serde::Serialize;
use serde_json::json;
use volentropy::estimate::{persistence_check, PersistenceCheck, PERSISTENCE_THRESHOLD};
use volentropy::{fit, FitConfig, FitResult, Innovation, ModelFamily};

use crate::format::{fmt_g, Table};
use crate::manifest::RunManifest;
use crate::{emit, input, parse_list, Format, GlobalArgs};

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Model families to fit, comma-separated.
    #[arg(long, default_value = "garch,igarch,figarch")]
    family: String,
    /// Innovation law: gaussian or student.
    #[arg(long, default_value = "student")]
    innovation: String,
    /// Lags kept in the fractional ARCH expansion.
    #[arg(long, default_value_t = volentropy::volmodel::DEFAULT_TRUNCATION)]
    truncation: usize,
    /// Jittered restarts after the first start.
    #[arg(long, default_value_t = 2)]
    restarts: usize,
    /// Hold d fixed in FIGARCH fits (strictly between 0 and 1).
    #[arg(long)]
    d_fixed: Option<f64>,
}

#[derive(Serialize)]
struct FitEntry {
    series: String,
    family: ModelFamily,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    persistence: Option<PersistenceCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl FitEntry {
    fn ok(&self) -> bool {
        self.fit.as_ref().is_some_and(|f| f.converged)
    }
}

pub fn run(global: &GlobalArgs, args: &FitArgs) -> Result<ExitCode> {
    let families: Vec<ModelFamily> = parse_list(&args.family)?;
    if families.is_empty() {
        bail!("--family needs at least one of garch, igarch, figarch");
    }
    let innovation: Innovation = args.innovation.parse()?;
    if let Some(d) = args.d_fixed {
        if d == 1.0 {
            bail!("--d-fixed 1 turns FIGARCH into IGARCH; use --family igarch instead");
        }
        if d == 0.0 {
            bail!("--d-fixed 0 turns FIGARCH into GARCH; use --family garch instead");
        }
        if !families.contains(&ModelFamily::Figarch) {
            bail!("--d-fixed only applies to --family figarch");
        }
        if !(0.0..1.0).contains(&d) {
            bail!("d must lie in [0,1] (got --d-fixed {d})");
        }
    }
    let inputs = input::load_all(&global.inputs()?, &global.mapping(), global.returns)?;

    let mut entries = Vec::new();
    for loaded in &inputs {
        for &family in &families {
            let config = FitConfig {
                innovation,
                horizon: args.truncation,
                restarts: args.restarts,
                seed: global.seed,
                fixed_d: args.d_fixed.filter(|_| family == ModelFamily::Figarch),
                ..FitConfig::new(family)
            };
            let entry = match fit(&loaded.series, &config) {
                Ok(f) => FitEntry {
                    series: loaded.series.id.clone(),
                    family,
                    persistence: (family == ModelFamily::Garch).then(|| persistence_check(&f)),
                    fit: Some(f),
                    error: None,
                },
                Err(e) => FitEntry {
                    series: loaded.series.id.clone(),
                    family,
                    fit: None,
                    persistence: None,
                    error: Some(e.to_string()),
                },
            };
            entries.push(entry);
        }
    }

    let manifest = RunManifest::new(
        "fit",
        inputs.iter().map(|i| i.digest.clone()).collect(),
        json!({
            "family": families,
            "innovation": innovation,
            "truncation": args.truncation,
            "restarts": args.restarts,
            "d_fixed": args.d_fixed,
            "returns": global.returns,
            "date_col": global.date_col,
            "price_col": global.value_col(),
        }),
        global.seed,
    );
    match global.format {
        Format::Tree => {
            let doc = json!({ "manifest": manifest, "fits": entries });
            emit(&format!("{}\n", serde_json::to_string_pretty(&doc)?))?;
        }
        Format::Text => {
            let series: Vec<String> = inputs.iter().map(|i| i.series.id.clone()).collect();
            emit(&manifest.text_header())?;
            emit(&render_text(&series, &families, &entries))?;
        }
    }
    Ok(if entries.iter().all(FitEntry::ok) { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

enum Row {
    Coef(&'static str),
    LogLik,
    Converged,
}

impl Row {
    /// Parameters a family does not estimate render as `-`.
    fn cell(&self, f: &FitResult) -> String {
        match self {
            Row::Coef(name) => f
                .estimate(name)
                .map(|e| format!("{}{}", fmt_g(e.value), e.significance.stars()))
                .unwrap_or_else(|| match *name {
                    "d" if f.family == ModelFamily::Figarch => format!("{} (fixed)", fmt_g(f.params.d)),
                    _ => "-".into(),
                }),
            Row::LogLik => fmt_g(f.loglik),
            Row::Converged => if f.converged { "yes" } else { "no" }.into(),
        }
    }
}

fn render_text(series: &[String], families: &[ModelFamily], entries: &[FitEntry]) -> String {
    let lookup = |s: &str, f: ModelFamily| entries.iter().find(|e| e.series == s && e.family == f);
    let mut header = vec!["Coef.".to_string(), "Series".to_string()];
    header.extend(families.iter().map(|f| f.name().to_string()));
    let mut table = Table::new(header, 2);

    let blocks = [
        ("ω", Row::Coef("omega")),
        ("α", Row::Coef("alpha")),
        ("β", Row::Coef("beta")),
        ("d", Row::Coef("d")),
        ("Student", Row::Coef("nu")),
        ("Log-L", Row::LogLik),
        ("Converged", Row::Converged),
    ];
    for (b, (label, kind)) in blocks.iter().enumerate() {
        if b > 0 {
            table.rule();
        }
        for (i, s) in series.iter().enumerate() {
            let mut row = vec![if i == 0 { label.to_string() } else { String::new() }, s.clone()];
            for &family in families {
                let text = match lookup(s, family) {
                    Some(FitEntry { fit: Some(f), .. }) => kind.cell(f),
                    _ => "failed".into(),
                };
                row.push(text);
            }
            table.push(row);
        }
    }

    let mut out = table.render();
    out.push_str("** significant at the 1% level, * at the 5% level\n");
    for e in entries {
        let tag = format!("{} {}", e.series, e.family);
        if let Some(err) = &e.error {
            out.push_str(&format!("{tag}: failed: {err}\n"));
            continue;
        }
        let Some(f) = &e.fit else { continue };
        if !f.converged {
            out.push_str(&format!("{tag}: did not converge (gradient norm {})\n", fmt_g(f.diagnostics.grad_norm)));
        }
        if !f.diagnostics.hessian_pd {
            out.push_str(&format!("{tag}: Hessian not positive definite; standard errors unavailable\n"));
        }
        if f.diagnostics.d_boundary_suspect {
            out.push_str(&format!("{tag}: d = {} is near the boundary of (0,1)\n", fmt_g(f.params.d)));
        }
        if f.diagnostics.near_gaussian {
            out.push_str(&format!("{tag}: ν = {} is close to Gaussian\n", fmt_g(f.params.nu.unwrap_or(f64::NAN))));
        }
        if let Some(p) = e.persistence.as_ref().filter(|p| p.flagged) {
            let se = p.stderr.map(|s| format!(" (s.e. {})", fmt_g(s))).unwrap_or_default();
            out.push_str(&format!(
                "{tag}: α+β = {}{se} exceeds {PERSISTENCE_THRESHOLD}; persistence suggests fitting IGARCH and FIGARCH\n",
                fmt_g(p.sum)
            ));
        }
    }
    out
}
