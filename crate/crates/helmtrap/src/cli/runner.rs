//! Execute one experiment and write its artifacts: a CSV per the module
//! schemas, `summary.json` with fitted slopes and verdicts, and `run.log`
//! with mesh sizes and runtimes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::geometry::{classify, classify_strongly_r0r1, point_in_polygon, r_gamma, Boundary, Point, TrappingClass};
use crate::layer_ops::MeshParams;
use crate::morawetz::{build_cutoff, c_chi, cutoff_invariants, epsilon0, q_param, threshold_constants, vector_field_z};
use crate::quasimode::{build_quasimode, quasimode_report_on, QuasimodeError, QuasimodeReport, QUASIMODE_CSV_COLUMNS};
use crate::scattering::{scattered_field, solve_soundsoft_on, IncidentWave, ScatteringError, SCATTER_CSV_HEADER};
use crate::spectra::{
    class_label, fit_growth, k_sweep_with, summarize_vs_predictions, sweep_csv_row, GrowthFit, SweepResult, FIT_K_MIN,
    SWEEP_CSV_HEADER,
};

use super::config::{ConstantsConfig, ExperimentConfig, ExperimentKind, FieldGrid, IdentitiesConfig, ScatterConfig};
use super::identities::run_identities;
use super::CliError;

/// Name of the per-run summary file.
pub const SUMMARY_FILE: &str = "summary.json";
/// Name of the copy of the effective config written next to the results.
pub const CONFIG_FILE: &str = "config.toml";
/// Boundary samples used by the classifier.
const CLASSIFY_SAMPLES: usize = 4000;

/// What a completed run left on disk.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub summary: Value,
    /// Human-readable lines for stdout.
    pub report: Vec<String>,
}

/// Accumulates `run.log`.
struct RunLog {
    start: Instant,
    text: String,
}

impl RunLog {
    fn new(cfg: &ExperimentConfig) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "kind = {}", cfg.kind.name());
        let _ = writeln!(
            text,
            "mesh: ppw = {}, corner_depth = {}, max_nodes = {}",
            cfg.mesh.ppw, cfg.mesh.corner_depth, cfg.mesh.max_nodes
        );
        RunLog { start: Instant::now(), text }
    }

    fn line(&mut self, s: impl AsRef<str>) {
        let _ = writeln!(self.text, "[{:9.2}s] {}", self.start.elapsed().as_secs_f64(), s.as_ref());
    }

    fn write(&mut self, dir: &Path, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
        self.line("done");
        let path = dir.join("run.log");
        fs::write(&path, &self.text)?;
        files.push(path);
        Ok(())
    }
}

fn write_json<T: Serialize>(path: PathBuf, value: &T, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(&path, s)?;
    files.push(path);
    Ok(())
}

fn write_csv(path: PathBuf, header: &[&str], rows: &[Vec<String>], files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    files.push(path);
    Ok(())
}

fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

/// Fit over the records with `k >= FIT_K_MIN`, or `None` when too few.
fn fit_from(ks: &[f64], values: &[f64]) -> Option<GrowthFit> {
    let (k, v): (Vec<f64>, Vec<f64>) = ks.iter().zip(values).filter(|(k, _)| **k >= FIT_K_MIN).map(|(a, b)| (*a, *b)).unzip();
    fit_growth(&k, &v).ok()
}

/// Run `cfg` and write its artifacts into `cfg.output_dir`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let (b, ks) = cfg.validate()?;
    cfg.prepare_output()?;
    // the effective config, so the directory alone reproduces the run
    let used = cfg.output_dir.join(CONFIG_FILE);
    fs::write(&used, cfg.to_toml()?)?;
    let mut outcome = match cfg.kind {
        ExperimentKind::Sweep | ExperimentKind::Quasimode | ExperimentKind::Coercivity => run_sweep(cfg, &b, &ks),
        ExperimentKind::Scatter => run_scatter(cfg, &b, &ks),
        ExperimentKind::Constants => run_constants(cfg, &b),
        ExperimentKind::GeometryCheck => run_geometry_check(cfg, &b),
        ExperimentKind::Identities => run_identities_kind(cfg),
    }?;
    outcome.files.insert(0, used);
    Ok(outcome)
}

fn csv_name(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Quasimode => "quasimode.csv",
        ExperimentKind::Coercivity => "coercivity.csv",
        ExperimentKind::Scatter => "scatter.csv",
        _ => "sweep.csv",
    }
}

fn run_sweep(cfg: &ExperimentConfig, b: &Boundary, ks: &[f64]) -> Result<RunOutcome, CliError> {
    let dir = &cfg.output_dir;
    let mut log = RunLog::new(cfg);
    let with_quasimode = cfg.kind != ExperimentKind::Sweep;
    let mut reports: Vec<Option<QuasimodeReport>> = Vec::new();
    let mut last = Instant::now();
    let mut lines = Vec::new();
    let outcome = k_sweep_with(b, ks, cfg.eta.coefficient, MeshParams::from(cfg.mesh), |step| {
        let mut rep = None;
        if with_quasimode {
            match build_quasimode(step.mesh, b, step.record.k) {
                Ok(phi) => {
                    rep = Some(quasimode_report_on(step.a_prime, step.mesh, &phi).map_err(|e| match e {
                        QuasimodeError::Spectra(s) => s,
                        other => crate::spectra::SpectraError::Lapack(other.to_string()),
                    })?)
                }
                Err(QuasimodeError::NoFacing(_)) => {}
                Err(QuasimodeError::Spectra(s)) => return Err(s),
                Err(e) => return Err(crate::spectra::SpectraError::Lapack(e.to_string())),
            }
        }
        reports.push(rep);
        let r = step.record;
        let msg = format!(
            "k = {:.6} n_nodes = {} sigma_max = {:.6e} sigma_min = {:.6e} seconds = {:.2}",
            r.k,
            r.n_nodes,
            r.sigma_max,
            r.sigma_min,
            last.elapsed().as_secs_f64()
        );
        lines.push(msg);
        last = Instant::now();
        Ok(())
    });
    for l in &lines {
        log.line(l);
    }
    let (result, error) = match outcome {
        Ok(r) => (r, None),
        Err(abort) => (abort.partial, Some(abort.error)),
    };
    reports.truncate(result.records.len());
    let mut files = Vec::new();
    let mut header: Vec<&str> = SWEEP_CSV_HEADER.to_vec();
    if with_quasimode {
        header.extend(QUASIMODE_CSV_COLUMNS);
    }
    let rows: Vec<Vec<String>> = result
        .records
        .iter()
        .zip(&reports)
        .map(|(rec, q)| {
            let mut row = sweep_csv_row(&result, rec);
            if with_quasimode {
                match q {
                    Some(q) => row.extend([fmt_f(q.phi_norm), fmt_f(q.residual), fmt_f(q.lower_bound), fmt_f(q.coercivity_probe)]),
                    None => row.extend(std::iter::repeat_n(String::new(), 4)),
                }
            }
            row
        })
        .collect();
    let csv = csv_name(cfg.kind);
    write_csv(dir.join(csv), &header, &rows, &mut files)?;
    let summary = sweep_summary(cfg, &result, &reports, error.as_ref().map(|e| e.to_string()));
    write_json(dir.join(SUMMARY_FILE), &summary, &mut files)?;
    if let Some(e) = &error {
        log.line(format!("aborted: {e}"));
    }
    log.write(dir, &mut files)?;
    if let Some(e) = error {
        return Err(e.into());
    }
    let mut report = vec![format!("{} on {} ({}): {} wavenumbers", cfg.kind.name(), result.geometry, class_label(&result.class), result.records.len())];
    if let Some(s) = &result.slopes {
        report.push(format!(
            "slopes: sigma_max {:.3}, inverse_norm {:.3}, cond {:.3}, norm_S {:.3}, norm_Dp {:.3}",
            s.sigma_max.slope, s.inverse_norm.slope, s.cond.slope, s.norm_s.slope, s.norm_dp.slope
        ));
    }
    for g in summarize_vs_predictions(std::slice::from_ref(&result)) {
        for q in &g.quantities {
            let (Some(w), Some(f)) = (&q.window, &q.fit) else { continue };
            let edge = |e: Option<f64>| e.map_or("-".to_string(), |v| format!("{v:.3}"));
            report.push(format!(
                "  {:<13} slope {:>7.3} window [{}, {}]: {:?} ({})",
                q.quantity,
                f.slope,
                edge(w.lo),
                edge(w.hi),
                q.verdict,
                w.statement
            ));
        }
    }
    Ok(RunOutcome { files, summary, report })
}

fn sweep_summary(cfg: &ExperimentConfig, result: &SweepResult, reports: &[Option<QuasimodeReport>], error: Option<String>) -> Value {
    let ks = result.ks();
    let mut v = json!({
        "kind": cfg.kind.name(),
        "csv": csv_name(cfg.kind),
        "geometry": result.geometry,
        "label": class_label(&result.class),
        "class": result.class,
        "eta_coefficient": result.eta_coefficient,
        "fit_k_min": FIT_K_MIN,
        "records": result.records.len(),
        "slopes": result.slopes,
        "predictions": summarize_vs_predictions(std::slice::from_ref(result)),
        "error": error,
    });
    if cfg.kind != ExperimentKind::Sweep {
        let qs: Vec<(f64, QuasimodeReport)> = ks.iter().zip(reports).filter_map(|(k, q)| q.map(|q| (*k, q))).collect();
        let qk: Vec<f64> = qs.iter().map(|x| x.0).collect();
        let series = |f: fn(&QuasimodeReport) -> f64| qs.iter().map(|x| f(&x.1)).collect::<Vec<f64>>();
        let worst_ratio = result
            .records
            .iter()
            .zip(reports)
            .filter_map(|(r, q)| q.map(|q| q.lower_bound * r.sigma_min))
            .fold(f64::NEG_INFINITY, f64::max);
        v["quasimode"] = json!({
            "applicable": !qs.is_empty(),
            "residual_fit": fit_from(&qk, &series(|q| q.residual)),
            "lower_bound_fit": fit_from(&qk, &series(|q| q.lower_bound)),
            "coercivity_probe_fit": fit_from(&qk, &series(|q| q.coercivity_probe)),
            "max_lower_bound_times_sigma_min": if qs.is_empty() { None } else { Some(worst_ratio) },
        });
    }
    v
}

/// Total field on a grid as `x y re im` lines; points inside the
/// obstacle or within two panel lengths of it are written as NaN.
fn field_dump(
    b: &Boundary,
    mesh: &crate::layer_ops::Mesh,
    sol: &crate::scattering::SoundSoftSolution,
    g: &FieldGrid,
) -> Result<String, CliError> {
    let polys: Vec<Vec<Point>> = b.loops.iter().map(|l| l.polyline(2048)).collect();
    let pts: Vec<Point> = (0..g.ny)
        .flat_map(|j| {
            (0..g.nx).map(move |i| {
                [
                    g.xmin + (g.xmax - g.xmin) * i as f64 / (g.nx - 1) as f64,
                    g.ymin + (g.ymax - g.ymin) * j as f64 / (g.ny - 1) as f64,
                ]
            })
        })
        .collect();
    let vals: Vec<Option<num_complex::Complex64>> = pts
        .par_iter()
        .map(|x| {
            if polys.iter().any(|p| point_in_polygon(*x, p)) {
                return Ok(None);
            }
            match scattered_field(mesh, sol, *x) {
                Ok((u, _)) => Ok(Some(sol.wave.value(*x) + u)),
                Err(ScatteringError::TooClose(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, ScatteringError>>()?;
    let mut s = String::from("# x y re_u im_u\n");
    for (x, v) in pts.iter().zip(vals) {
        let (re, im) = v.map_or((f64::NAN, f64::NAN), |u| (u.re, u.im));
        let _ = writeln!(s, "{:?} {:?} {:?} {:?}", x[0], x[1], re, im);
    }
    Ok(s)
}

fn run_scatter(cfg: &ExperimentConfig, b: &Boundary, ks: &[f64]) -> Result<RunOutcome, CliError> {
    let dir = &cfg.output_dir;
    let sc = cfg.scatter.unwrap_or(ScatterConfig::default());
    let mut log = RunLog::new(cfg);
    let mut files = Vec::new();
    let mut rows = Vec::new();
    let mut norms = Vec::new();
    let mut error = None;
    for (i, &k) in ks.iter().enumerate() {
        let t = Instant::now();
        let w = IncidentWave::from_angle(sc.direction_angle, k);
        let step = solve_soundsoft_on(b, &w, cfg.eta.coefficient * k, MeshParams::from(cfg.mesh))
            .map_err(CliError::from)
            .and_then(|(mesh, sol)| {
                if let Some(g) = &sc.field {
                    let path = dir.join(format!("field_{i:03}.txt"));
                    fs::write(&path, field_dump(b, &mesh, &sol, g)?)?;
                    files.push(path);
                }
                Ok((mesh.len(), sol))
            });
        match step {
            Ok((n, sol)) => {
                log.line(format!(
                    "k = {k:.6} n_nodes = {n} neumann_norm = {:.6e} residual = {:.2e} seconds = {:.2}",
                    sol.neumann_norm,
                    sol.residual,
                    t.elapsed().as_secs_f64()
                ));
                rows.push(vec![fmt_f(k), fmt_f(sol.neumann_norm)]);
                norms.push(sol.neumann_norm);
            }
            Err(e) => {
                log.line(format!("aborted at k = {k}: {e}"));
                error = Some(e);
                break;
            }
        }
    }
    write_csv(dir.join("scatter.csv"), &SCATTER_CSV_HEADER, &rows, &mut files)?;
    let done = &ks[..norms.len()];
    let fit = fit_from(done, &norms);
    let summary = json!({
        "kind": "scatter",
        "csv": "scatter.csv",
        "geometry": b.label(),
        "label": class_label(&classify(b, CLASSIFY_SAMPLES)),
        "eta_coefficient": cfg.eta.coefficient,
        "direction_angle": sc.direction_angle,
        "fit_k_min": FIT_K_MIN,
        "records": norms.len(),
        "neumann_norm_fit": fit,
        "error": error.as_ref().map(|e| e.to_string()),
    });
    write_json(dir.join(SUMMARY_FILE), &summary, &mut files)?;
    log.write(dir, &mut files)?;
    if let Some(e) = error {
        return Err(e);
    }
    let mut report = vec![format!("scatter on {}: {} wavenumbers", b.label(), norms.len())];
    if let Some(f) = fit {
        report.push(format!("neumann_norm slope {:.3} (+- {:.3})", f.slope, f.half_width));
    }
    Ok(RunOutcome { files, summary, report })
}

/// The constants table for one profile.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantsTable {
    pub r0: f64,
    pub r1: f64,
    pub radii_from_geometry: bool,
    pub eps: f64,
    pub eps0: f64,
    pub c_chi: f64,
    pub q: f64,
    pub m_alpha: f64,
    pub r_star: f64,
    pub k_threshold: f64,
    pub invariants: crate::morawetz::CutoffInvariants,
    /// `min Z.n` over boundary samples, when the radii come from the geometry.
    pub z_dot_n_min: Option<f64>,
    pub resolvent: Vec<[f64; 3]>,
}

/// Compute the constants table of `cc` on boundary `b`.
pub fn constants_table(b: &Boundary, cc: &ConstantsConfig) -> Result<ConstantsTable, CliError> {
    let from_geometry = cc.r0.is_none() || cc.r1.is_none();
    let (r0, r1) = match (cc.r0, cc.r1) {
        (Some(a), Some(c)) => (a, c),
        _ => {
            let w = classify_strongly_r0r1(b, CLASSIFY_SAMPLES)
                .ok_or_else(|| CliError::Config(format!("{} is not strongly (R0, R1); give constants.r0 and r1", b.label())))?;
            w.representative(r_gamma(b))
        }
    };
    let eps0 = epsilon0(r0, r1)?;
    let p = build_cutoff(r0, r1, cc.eps_fraction * eps0)?;
    let inv = cutoff_invariants(&p, 10_000);
    let c = c_chi(&p);
    let q = q_param(c)?;
    let mc = threshold_constants(&p, q)?;
    let z_dot_n_min = from_geometry.then(|| {
        b.samples(10_000)
            .iter()
            .map(|s| {
                let z = vector_field_z(&p, s.x);
                z[0] * s.n[0] + z[1] * s.n[1]
            })
            .fold(f64::INFINITY, f64::min)
    });
    let resolvent = cc
        .evaluate_k
        .iter()
        .zip(&cc.evaluate_r)
        .map(|(&k, &r)| [k, r, mc.resolvent_constant(k, r)])
        .collect();
    Ok(ConstantsTable {
        r0,
        r1,
        radii_from_geometry: from_geometry,
        eps: p.eps,
        eps0,
        c_chi: c,
        q,
        m_alpha: mc.m_alpha_big,
        r_star: mc.r_star,
        k_threshold: mc.k_threshold,
        invariants: inv,
        z_dot_n_min,
        resolvent,
    })
}

fn run_constants(cfg: &ExperimentConfig, b: &Boundary) -> Result<RunOutcome, CliError> {
    let dir = &cfg.output_dir;
    let mut log = RunLog::new(cfg);
    let cc = cfg.constants.clone().unwrap_or_default();
    let t = constants_table(b, &cc)?;
    log.line(format!("constants for R0 = {}, R1 = {}", t.r0, t.r1));
    let mut files = Vec::new();
    write_json(dir.join("constants.json"), &t, &mut files)?;
    let summary = json!({ "kind": "constants", "csv": null, "constants": t });
    write_json(dir.join(SUMMARY_FILE), &summary, &mut files)?;
    log.write(dir, &mut files)?;
    let mut report = vec![
        format!("{:<14}{:>22}", "quantity", "value"),
        format!("{:<14}{:>22.12}", "R0", t.r0),
        format!("{:<14}{:>22.12}", "R1", t.r1),
        format!("{:<14}{:>22.12e}", "eps", t.eps),
        format!("{:<14}{:>22.12}", "c_chi", t.c_chi),
        format!("{:<14}{:>22.12}", "q", t.q),
        format!("{:<14}{:>22.12e}", "M_alpha", t.m_alpha),
        format!("{:<14}{:>22.12}", "R*", t.r_star),
        format!("{:<14}{:>22.12e}", "k_threshold", t.k_threshold),
    ];
    for [k, r, v] in &t.resolvent {
        report.push(format!("resolvent_constant(k = {k}, R = {r}) = {v:.12e}"));
    }
    report.push(format!("cutoff invariants at {} radii: {}", t.invariants.samples, if t.invariants.holds() { "hold" } else { "VIOLATED" }));
    if let Some(z) = t.z_dot_n_min {
        report.push(format!("min Z.n on the boundary: {z:.3e}"));
    }
    let z_ok = t.z_dot_n_min.is_none_or(|z| z >= -1e-10);
    if !(t.invariants.holds() && z_ok && t.k_threshold.is_finite()) {
        return Err(CliError::Numerical("constants pipeline violated an invariant; see constants.json".into()));
    }
    Ok(RunOutcome { files, summary, report })
}

fn run_geometry_check(cfg: &ExperimentConfig, b: &Boundary) -> Result<RunOutcome, CliError> {
    let dir = &cfg.output_dir;
    let mut log = RunLog::new(cfg);
    let class = classify(b, CLASSIFY_SAMPLES);
    let window = classify_strongly_r0r1(b, CLASSIFY_SAMPLES);
    let rg = r_gamma(b);
    let chosen = window.map(|w| w.representative(rg));
    // independent re-run at ten times the density must admit the same radii
    let reverified = chosen.map(|(r0, r1)| {
        classify_strongly_r0r1(b, 10 * CLASSIFY_SAMPLES).is_some_and(|w| w.r0_min <= r0 * (1.0 + 1e-12) && r1 <= w.r1_max * (1.0 + 1e-12))
    });
    log.line(format!("classified {} as {}", b.label(), class_label(&class)));
    let info = json!({
        "geometry": b.label(),
        "label": class_label(&class),
        "class": class,
        "r_gamma": rg,
        "total_length": b.total_length(),
        "corner_count": b.corner_count(),
        "radii_window": window,
        "representative_radii": chosen,
        "reverified_at_10x": reverified,
        "parallel_gap": b.meta.parallel_gap,
        "facing": b.meta.facing,
    });
    let mut files = Vec::new();
    write_json(dir.join("geometry.json"), &info, &mut files)?;
    let summary = json!({ "kind": "geometry-check", "csv": null, "geometry": info });
    write_json(dir.join(SUMMARY_FILE), &summary, &mut files)?;
    log.write(dir, &mut files)?;
    let mut report = vec![format!("geometry: {}", b.label())];
    match chosen {
        Some((r0, r1)) => report.push(format!("classification: strongly_r0r1 with R0 = {r0:.6}, R1 = {r1:.6}")),
        None => report.push("classification: not strongly (R0, R1)".into()),
    }
    match &class {
        TrappingClass::ParallelTrapping { a, .. } => report.push(format!("parallel trapping: a = {a}")),
        other => report.push(format!("class: {}", class_label(other))),
    }
    if reverified == Some(false) {
        return Err(CliError::Numerical("classification failed re-verification at 10x sample density".into()));
    }
    Ok(RunOutcome { files, summary, report })
}

fn run_identities_kind(cfg: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let dir = &cfg.output_dir;
    let mut log = RunLog::new(cfg);
    let ic: IdentitiesConfig = cfg.identities.unwrap_or_default();
    let rep = run_identities(&ic)?;
    let mut report = vec![format!("identity suite, seed {}", rep.seed)];
    for s in &rep.suites {
        let line = format!(
            "{:<30} {:>4} trials, {} failures, worst {:.6e} ({})",
            s.name, s.trials, s.failures, s.worst, s.criterion
        );
        log.line(&line);
        report.push(line);
    }
    let mut files = Vec::new();
    write_json(dir.join("identities.json"), &rep, &mut files)?;
    let summary = json!({ "kind": "identities", "csv": null, "passed": rep.passed(), "identities": rep });
    write_json(dir.join(SUMMARY_FILE), &summary, &mut files)?;
    log.write(dir, &mut files)?;
    if !rep.passed() {
        return Err(CliError::Numerical("identity suite failed; see identities.json".into()));
    }
    Ok(RunOutcome { files, summary, report })
}
