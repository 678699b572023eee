//! The plot manifest: one entry per completed run, naming its CSV, the x
//! and y columns, reference slope lines and the figure to produce.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::runner::SUMMARY_FILE;
use super::CliError;

/// File name of the manifest inside the results directory.
pub const MANIFEST_FILE: &str = "plot_manifest.json";

/// One plotted quantity: a CSV column, optionally inverted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub column: String,
    /// Plot `1 / column` instead of `column`.
    pub reciprocal: bool,
    pub label: String,
}

/// A dashed line of fixed slope drawn next to a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSlope {
    pub series: String,
    pub slope: f64,
    pub label: String,
}

/// A shaded region between two slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBand {
    pub series: String,
    pub lo: f64,
    pub hi: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotEntry {
    /// CSV path relative to the manifest.
    pub csv: String,
    pub x_column: String,
    pub y: Vec<Series>,
    pub reference_slopes: Vec<ReferenceSlope>,
    pub reference_bands: Vec<ReferenceBand>,
    /// Rows with `x < fit_x_min` are excluded from slope fits.
    pub fit_x_min: f64,
    pub title: String,
    pub figure: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotManifest {
    pub entries: Vec<PlotEntry>,
    /// Runs whose CSV was missing, with the reason.
    pub skipped: Vec<String>,
}

fn series(column: &str, reciprocal: bool, label: &str) -> Series {
    Series {
        column: column.into(),
        reciprocal,
        label: label.into(),
    }
}

fn slope(series: &str, slope: f64, label: &str) -> ReferenceSlope {
    ReferenceSlope {
        series: series.into(),
        slope,
        label: label.into(),
    }
}

/// Entry for one summary, or `None` when the run produced no CSV.
fn entry_for(summary: &Value, rel_dir: &str) -> Option<PlotEntry> {
    let kind = summary.get("kind")?.as_str()?;
    let csv = summary.get("csv")?.as_str()?;
    let geometry = summary.get("geometry").and_then(Value::as_str).unwrap_or("unknown");
    let label = summary.get("label").and_then(Value::as_str).unwrap_or("unclassified");
    let fit_x_min = summary.get("fit_k_min").and_then(Value::as_f64).unwrap_or(0.0);
    let path = if rel_dir.is_empty() { csv.to_string() } else { format!("{rel_dir}/{csv}") };
    let stem = if rel_dir.is_empty() { kind.to_string() } else { format!("{}_{kind}", rel_dir.replace('/', "_")) };
    let mut e = PlotEntry {
        csv: path,
        x_column: "k".into(),
        y: Vec::new(),
        reference_slopes: Vec::new(),
        reference_bands: Vec::new(),
        fit_x_min,
        title: format!("{kind} on {geometry}"),
        figure: format!("{stem}.png"),
    };
    let sweep_series = || {
        vec![
            series("sigma_max", false, "sigma_max"),
            series("sigma_min", true, "inverse_norm"),
            series("cond", false, "cond"),
            series("norm_S", false, "norm_S"),
            series("norm_Dp", false, "norm_Dp"),
        ]
    };
    match kind {
        "sweep" => {
            e.y = sweep_series();
            if label == "star_shaped_ball" && geometry == "circle" {
                e.reference_slopes = vec![
                    slope("cond", 1.0 / 3.0, "k^(1/3)"),
                    slope("sigma_max", 1.0 / 3.0, "k^(1/3)"),
                    slope("inverse_norm", 0.0, "k^0"),
                    slope("norm_S", -2.0 / 3.0, "k^(-2/3)"),
                    slope("norm_Dp", 1.0 / 6.0, "k^(1/6)"),
                ];
            } else if label == "parallel_trapping" {
                e.reference_bands.push(ReferenceBand {
                    series: "inverse_norm".into(),
                    lo: 1.0,
                    hi: 2.0,
                    label: "k to k^2".into(),
                });
                e.reference_slopes.push(slope("cond", 1.5, "k^(3/2)"));
            }
        }
        "quasimode" => {
            e.y = vec![
                series("residual", false, "residual"),
                series("lower_bound", false, "lower_bound"),
                series("sigma_min", true, "inverse_norm"),
            ];
            e.reference_slopes.push(slope("residual", -1.0, "k^(-1)"));
            e.reference_slopes.push(slope("lower_bound", 1.0, "k"));
        }
        "coercivity" => {
            e.y = vec![series("coercivity_probe", false, "coercivity_probe"), series("sigma_min", true, "inverse_norm")];
            e.reference_slopes.push(slope("coercivity_probe", -1.0, "k^(-1)"));
            e.reference_slopes.push(slope("inverse_norm", 0.0, "k^0"));
        }
        "scatter" => {
            e.y = vec![series("neumann_norm", false, "neumann_norm")];
            e.reference_slopes.push(slope("neumann_norm", 2.0, "k^2"));
        }
        _ => return None,
    }
    Some(e)
}

/// Summaries in `dir` and its immediate subdirectories, sorted by path.
fn find_summaries(dir: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let mut found = Vec::new();
    if dir.join(SUMMARY_FILE).is_file() {
        found.push((String::new(), dir.join(SUMMARY_FILE)));
    }
    let mut subs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subs.sort();
    for s in subs {
        let f = s.join(SUMMARY_FILE);
        if f.is_file() {
            let name = s.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            found.push((name, f));
        }
    }
    Ok(found)
}

/// Build the manifest for the runs under `dir`. Runs whose CSV is missing
/// are skipped with a warning on stderr.
pub fn build_manifest(dir: &Path) -> Result<PlotManifest, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Config(format!("results directory {} does not exist", dir.display())));
    }
    let summaries = find_summaries(dir)?;
    if summaries.is_empty() {
        return Err(CliError::Config(format!("results directory {} holds no completed runs", dir.display())));
    }
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (rel, path) in summaries {
        let text = fs::read_to_string(&path)?;
        let summary: Value = serde_json::from_str(&text)?;
        let Some(entry) = entry_for(&summary, &rel) else {
            continue;
        };
        if !dir.join(&entry.csv).is_file() {
            let msg = format!("{}: CSV {} is missing", path.display(), entry.csv);
            eprintln!("warning: skipping {msg}");
            skipped.push(msg);
            continue;
        }
        entries.push(entry);
    }
    Ok(PlotManifest { entries, skipped })
}

/// Build the manifest and write it to `dir/plot_manifest.json`.
pub fn emit_plot_manifest(dir: &Path) -> Result<(PathBuf, PlotManifest), CliError> {
    let m = build_manifest(dir)?;
    let path = dir.join(MANIFEST_FILE);
    let mut s = serde_json::to_string_pretty(&m)?;
    s.push('\n');
    fs::write(&path, s)?;
    Ok((path, m))
}
