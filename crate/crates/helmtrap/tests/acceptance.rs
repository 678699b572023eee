//! End-to-end acceptance run. Each criterion prints one PASS or FAIL line
//! with the measured values; the report is also written to
//! `$CARGO_TARGET_TMPDIR/acceptance_report.txt`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use helmtrap::cli::config::{ConstantsConfig, IdentitiesConfig};
use helmtrap::cli::identities::run_identities;
use helmtrap::cli::runner::constants_table;
use helmtrap::geometry::{make_geometry, Boundary, GeometrySpec};
use helmtrap::layer_ops::{assemble_combined, build_mesh, circle_eigenvalues, MeshParams, OperatorKind};
use helmtrap::quasimode::{build_quasimode, quasimode_report_on, QuasimodeReport};
use helmtrap::scattering::{circle_neumann_series, solve_soundsoft, solve_soundsoft_on, IncidentWave};
use helmtrap::spectra::{fit_growth, k_sweep, k_sweep_with, log_grid, operator_extremes, quantized_ks, singular_values};

/// Largest mode index used for the infimum and supremum of the circle symbol.
const ORACLE_MODES: usize = 20_000;

struct Report {
    lines: Vec<String>,
    failed: Vec<usize>,
}

impl Report {
    fn record(&mut self, n: usize, pass: bool, detail: String) {
        let line = format!("criterion {n:>2} {}: {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push(line);
        if !pass {
            self.failed.push(n);
        }
    }
}

fn circle() -> Boundary {
    make_geometry(&GeometrySpec::Circle {
        radius: 1.0,
        center: [0.0, 0.0],
    })
    .unwrap()
}

fn two_squares() -> Boundary {
    make_geometry(&GeometrySpec::TwoSquares { side: 1.0, gap: 0.5 }).unwrap()
}

fn params(ppw: f64) -> MeshParams {
    MeshParams {
        ppw,
        ..MeshParams::default()
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Extremes of `|lambda_n|` over all modes up to `ORACLE_MODES`.
fn circle_oracle(k: f64) -> (f64, f64) {
    let modes = circle_eigenvalues(k, k, 1.0, ORACLE_MODES).unwrap();
    let m = modes.iter().map(|m| m.a.norm());
    (m.clone().fold(0.0, f64::max), m.fold(f64::INFINITY, f64::min))
}

fn circle_oracle_agreement(rep: &mut Report) {
    let t = Instant::now();
    let b = circle();
    let mut worst: f64 = 0.0;
    let mut detail = String::new();
    for k in [5.0, 20.0] {
        let mesh = build_mesh(&b, k, params(30.0)).unwrap();
        let a = assemble_combined(OperatorKind::Ap, k, k, &mesh).unwrap();
        let (smax, smin) = operator_extremes(&a).unwrap();
        let (omax, omin) = circle_oracle(k);
        let (e1, e2) = (rel(smax, omax), rel(smin, omin));
        worst = worst.max(e1).max(e2);
        let _ = write!(
            detail,
            "k={k}: sigma_max {smax:.10} vs {omax:.10} (rel {e1:.1e}), sigma_min {smin:.10} vs {omin:.10} (rel {e2:.1e}); "
        );
    }
    let secs = t.elapsed().as_secs_f64();
    let _ = write!(detail, "worst rel {worst:.1e} (need <= 1e-6), {secs:.1}s (need <= 60s)");
    rep.record(1, worst <= 1e-6 && secs <= 60.0, detail);
}

fn circle_sweep(rep: &mut Report) {
    let b = circle();
    let ks = log_grid(10.0, 80.0, 12);
    let r = k_sweep(&b, &ks, 1.0, MeshParams::default()).unwrap();
    let s = r.slopes.clone().unwrap();
    let inv = s.inverse_norm.slope;
    let cond = s.cond.slope;
    let ok2 = r.records.len() == 12 && (-0.15..=0.15).contains(&inv) && (cond - 1.0 / 3.0).abs() <= 0.1;
    rep.record(
        2,
        ok2,
        format!(
            "circle, 12 k in [10, 80]: 1/sigma_min slope {inv:.4} (need [-0.15, 0.15]), cond slope {cond:.4} (need [0.2333, 0.4333])"
        ),
    );
    let ns = s.norm_s.slope;
    let nd = s.norm_dp.slope;
    let ok3 = (ns + 2.0 / 3.0).abs() <= 0.15 && (nd - 1.0 / 6.0).abs() <= 0.1;
    rep.record(
        3,
        ok3,
        format!("||S_k|| slope {ns:.4} (need [-0.8167, -0.5167]), ||D'_k|| slope {nd:.4} (need [0.0667, 0.2667])"),
    );
}

/// Criteria 4, 5 and 9 share one sweep of two_squares along `k = m pi / 0.5`.
fn trapping_sweep(rep: &mut Report) {
    let t = Instant::now();
    let b = two_squares();
    let ks = quantized_ks(0.5, 2, 12);
    let mut quasi: Vec<QuasimodeReport> = Vec::new();
    let mut neumann: Vec<f64> = Vec::new();
    let mut scatter_error = None;
    let r = k_sweep_with(&b, &ks, 1.0, MeshParams::default(), |step| {
        let phi = build_quasimode(step.mesh, &b, step.record.k).unwrap();
        let q = quasimode_report_on(step.a_prime, step.mesh, &phi).unwrap();
        quasi.push(q);
        match solve_soundsoft(step.a_prime, step.mesh, &IncidentWave::from_angle(0.0, step.record.k)) {
            Ok(s) => neumann.push(s.neumann_norm),
            Err(e) => scatter_error = Some(e.to_string()),
        }
        eprintln!(
            "  two_squares k={:.4} N={} sigma_min={:.6} residual={:.4} neumann={:.4} ({:.0}s)",
            step.record.k,
            step.record.n_nodes,
            step.record.sigma_min,
            q.residual,
            neumann.last().copied().unwrap_or(f64::NAN),
            t.elapsed().as_secs_f64()
        );
        Ok(())
    })
    .unwrap();
    let secs = t.elapsed().as_secs_f64();
    let s = r.slopes.clone().unwrap();
    let (inv, cond) = (s.inverse_norm.slope, s.cond.slope);
    let n_max = r.records.iter().map(|r| r.n_nodes).max().unwrap_or(0);
    let sigmas: Vec<String> = r.records.iter().map(|r| format!("{:.4}", r.sigma_min)).collect();
    rep.record(
        4,
        (0.7..=2.0).contains(&inv) && cond >= 1.2 && secs <= 1800.0,
        format!(
            "two_squares m=2..12: 1/sigma_min slope {inv:.4} (need [0.7, 2.0]), cond slope {cond:.4} (need >= 1.2), N_max {n_max}, {secs:.0}s (need <= 1800s); sigma_min [{}]",
            sigmas.join(", ")
        ),
    );

    let res: Vec<f64> = quasi.iter().map(|q| q.residual).collect();
    let res_fit = fit_growth(&ks, &res).unwrap();
    let bound_ok = quasi
        .iter()
        .zip(&r.records)
        .all(|(q, rec)| q.lower_bound <= (1.0 / rec.sigma_min) * (1.0 + 1e-6));
    let worst_ratio = quasi
        .iter()
        .zip(&r.records)
        .map(|(q, rec)| q.lower_bound * rec.sigma_min)
        .fold(0.0, f64::max);
    let shown: Vec<String> = res.iter().map(|v| format!("{v:.4}")).collect();
    rep.record(
        5,
        res_fit.slope <= -0.8 && bound_ok,
        format!(
            "residual slope {:.4} (need <= -0.8); max lower_bound * sigma_min {worst_ratio:.6} (need <= 1 + 1e-6); residuals [{}]",
            res_fit.slope,
            shown.join(", ")
        ),
    );

    let circle_err = circle_series_error(5.0);
    match scatter_error {
        Some(e) => rep.record(9, false, format!("scattering solve failed: {e}")),
        None => {
            let f = fit_growth(&ks, &neumann).unwrap();
            rep.record(
                9,
                f.slope <= 2.1 && circle_err <= 1e-5,
                format!(
                    "||d_n u^t|| slope {:.4} (need <= 2.1); circle series rel error at k=5 {circle_err:.2e} (need <= 1e-5)",
                    f.slope
                ),
            );
        }
    }
}

/// Relative L2 error of the computed Neumann trace on the unit circle
/// against the Fourier series solution.
fn circle_series_error(k: f64) -> f64 {
    let b = circle();
    let (mesh, sol) = solve_soundsoft_on(&b, &IncidentWave::from_angle(0.0, k), k, params(30.0)).unwrap();
    let exact: Vec<_> = mesh
        .nodes
        .iter()
        .map(|x| circle_neumann_series(k, 1.0, 0.0, x[1].atan2(x[0])).unwrap())
        .collect();
    let diff: Vec<_> = sol.density.iter().zip(&exact).map(|(a, b)| a - b).collect();
    mesh.l2_norm(&diff) / mesh.l2_norm(&exact)
}

fn coercivity(rep: &mut Report) {
    let b = make_geometry(&GeometrySpec::default_u_cavity()).unwrap();
    let a = b.meta.facing.unwrap().gap();
    let ks = quantized_ks(a, 13, 37).into_iter().step_by(6).collect::<Vec<_>>();
    let mut probes = Vec::new();
    let r = k_sweep_with(&b, &ks, 1.0, MeshParams::default(), |step| {
        let phi = build_quasimode(step.mesh, &b, step.record.k).unwrap();
        let q = quasimode_report_on(step.a_prime, step.mesh, &phi).unwrap();
        probes.push(q.coercivity_probe);
        Ok(())
    })
    .unwrap();
    let pf = fit_growth(&ks, &probes).unwrap();
    let inv = r.slopes.clone().unwrap().inverse_norm.slope;
    let shown: Vec<String> = probes.iter().map(|v| format!("{v:.4}")).collect();
    let kshown: Vec<String> = ks.iter().map(|v| format!("{v:.2}")).collect();
    rep.record(
        6,
        pf.slope <= -0.7 && inv <= 0.2,
        format!(
            "u_cavity a={a}, k [{}]: probe slope {:.4} (need <= -0.7), 1/sigma_min slope {inv:.4} (need <= 0.2); probes [{}]",
            kshown.join(", "),
            pf.slope,
            shown.join(", ")
        ),
    );
}

fn identities(rep: &mut Report) {
    let r = run_identities(&IdentitiesConfig::default()).unwrap();
    let parts: Vec<String> = r
        .suites
        .iter()
        .map(|s| format!("{} {}/{} ok, worst {:.3e}", s.name, s.trials - s.failures, s.trials, s.worst))
        .collect();
    let counts_ok = r.suites[0].trials == 20 && r.suites[1].trials == 20 && r.suites[2].trials == 100 && r.suites[3].trials == 20;
    rep.record(7, r.passed() && counts_ok, parts.join("; "));
}

fn constants(rep: &mut Report) {
    let sq = two_squares();
    let fixed = constants_table(&sq, &ConstantsConfig::default()).unwrap();
    let classified = constants_table(
        &sq,
        &ConstantsConfig {
            r0: None,
            r1: None,
            ..ConstantsConfig::default()
        },
    )
    .unwrap();
    let zn = classified.z_dot_n_min.unwrap();
    let eps_ok = (fixed.eps - 0.5 * fixed.eps0).abs() <= 1e-15 * fixed.eps0;
    let pass = eps_ok
        && fixed.invariants.samples >= 10_000
        && fixed.invariants.holds()
        && fixed.c_chi < 4.0
        && fixed.q > 0.0
        && fixed.k_threshold.is_finite()
        && zn >= -1e-10;
    rep.record(
        8,
        pass,
        format!(
            "(R0,R1)=(1,1.4), eps=eps0/2={:.6e}: invariants {} at {} radii, c_chi {:.6}, q {:.6}, k_threshold {:.6e}; two_squares (R0,R1)=({:.4},{:.4}) min Z.n {zn:.3e} (need >= -1e-10)",
            fixed.eps,
            if fixed.invariants.holds() { "hold" } else { "violated" },
            fixed.invariants.samples,
            fixed.c_chi,
            fixed.q,
            fixed.k_threshold,
            classified.r0,
            classified.r1
        ),
    );
}

/// All singular values at `k` for ppw 30 and 60; returns the largest
/// relative change over the reported pair (sigma_max, sigma_min).
fn self_convergence_pair(b: &Boundary, k: f64, depth: u32) -> (f64, f64, [f64; 4]) {
    let run = |ppw: f64| {
        let mesh = build_mesh(
            b,
            k,
            MeshParams {
                ppw,
                corner_depth: depth,
                ..MeshParams::default()
            },
        )
        .unwrap();
        let a = assemble_combined(OperatorKind::Ap, k, k, &mesh).unwrap();
        let s = singular_values(a.matrix).unwrap();
        (s[0], *s.last().unwrap())
    };
    let (x1, n1) = run(30.0);
    let (x2, n2) = run(60.0);
    (rel(x1, x2), rel(n1, n2), [x1, x2, n1, n2])
}

fn self_convergence(rep: &mut Report) {
    let k = 40.0;
    let (cmax, cmin, cv) = self_convergence_pair(&circle(), k, MeshParams::default().corner_depth);
    let (smax, smin, sv) = self_convergence_pair(&two_squares(), k, 12);
    let pass = cmax <= 1e-6 && cmin <= 1e-6 && smax <= 1e-4 && smin <= 1e-4;
    rep.record(
        10,
        pass,
        format!(
            "k=40, ppw 30->60: circle sigma_max {:.10}->{:.10} (rel {cmax:.1e}), sigma_min {:.10}->{:.10} (rel {cmin:.1e}) (need <= 1e-6); two_squares depth 12 sigma_max {:.8}->{:.8} (rel {smax:.1e}), sigma_min {:.8}->{:.8} (rel {smin:.1e}) (need <= 1e-4)",
            cv[0], cv[1], cv[2], cv[3], sv[0], sv[1], sv[2], sv[3]
        ),
    );
}

#[test]
fn acceptance_criteria() {
    let mut rep = Report {
        lines: Vec::new(),
        failed: Vec::new(),
    };
    circle_oracle_agreement(&mut rep);
    circle_sweep(&mut rep);
    identities(&mut rep);
    constants(&mut rep);
    coercivity(&mut rep);
    self_convergence(&mut rep);
    trapping_sweep(&mut rep);
    rep.lines.sort_by_key(|l| l[10..12].trim().parse::<usize>().unwrap_or(0));
    let text = rep.lines.join("\n") + "\n";
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance_report.txt");
    std::fs::write(&path, &text).unwrap();
    println!("\n{text}report written to {}", path.display());
    rep.failed.sort_unstable();
    assert!(rep.failed.is_empty(), "criteria failed: {:?}\n{text}", rep.failed);
}

#[test]
fn quantized_sequence_matches_the_gap() {
    let ks = quantized_ks(0.5, 2, 12);
    assert_eq!(ks.len(), 11);
    assert!((ks[0] - 4.0 * PI).abs() < 1e-12);
    assert!((ks[10] - 24.0 * PI).abs() < 1e-12);
}
