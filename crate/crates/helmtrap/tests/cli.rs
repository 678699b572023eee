use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use proptest::prelude::*;
use serde_json::Value;

use helmtrap::cli::config::{
    ConstantsConfig, EtaRule, ExperimentConfig, ExperimentKind, FieldGrid, IdentitiesConfig, MeshConfig, ScatterConfig,
    WavenumberSpec,
};
use helmtrap::cli::manifest::{build_manifest, emit_plot_manifest, MANIFEST_FILE};
use helmtrap::cli::runner::{constants_table, run, SUMMARY_FILE};
use helmtrap::cli::{CliError, EXIT_CONFIG, EXIT_NUMERICAL};
use helmtrap::geometry::{make_geometry, GeometrySpec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_helmtrap"))
}

fn circle_sweep(dir: &Path, values: Vec<f64>) -> ExperimentConfig {
    ExperimentConfig {
        wavenumbers: Some(WavenumberSpec::Explicit { values }),
        output_dir: dir.to_path_buf(),
        ..ExperimentConfig::default_for(ExperimentKind::Sweep)
    }
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> PathBuf {
    let p = dir.join("input.toml");
    fs::write(&p, cfg.to_toml().unwrap()).unwrap();
    p
}

fn kind_strategy() -> impl Strategy<Value = ExperimentKind> {
    prop_oneof![
        Just(ExperimentKind::Sweep),
        Just(ExperimentKind::Quasimode),
        Just(ExperimentKind::Coercivity),
        Just(ExperimentKind::Scatter),
        Just(ExperimentKind::Constants),
        Just(ExperimentKind::GeometryCheck),
        Just(ExperimentKind::Identities),
    ]
}

fn geometry_strategy() -> impl Strategy<Value = GeometrySpec> {
    prop_oneof![
        (0.1..10.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(radius, x, y)| GeometrySpec::Circle { radius, center: [x, y] }),
        (0.1..3.0f64, 0.1..2.0f64).prop_map(|(side, gap)| GeometrySpec::TwoSquares { side, gap }),
        (0.1..3.0f64, 0.1..2.0f64).prop_map(|(radius, gap)| GeometrySpec::TwoDiscs { radius, gap }),
        prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 3..8)
            .prop_map(|v| GeometrySpec::Polygon { vertices: v.into_iter().map(|(x, y)| [x, y]).collect() }),
        Just(GeometrySpec::default_u_cavity()),
        Just(GeometrySpec::default_elliptic_cavity()),
    ]
}

fn wavenumber_strategy() -> impl Strategy<Value = Option<WavenumberSpec>> {
    prop_oneof![
        Just(None),
        prop::collection::vec(1.0..500.0f64, 1..6).prop_map(|values| Some(WavenumberSpec::Explicit { values })),
        (1.0..50.0f64, 50.0..500.0f64, 2usize..40).prop_map(|(kmin, kmax, count)| Some(WavenumberSpec::LogGrid { kmin, kmax, count })),
        (1u32..10, 10u32..40, 1u32..5).prop_map(|(m_min, m_max, m_step)| Some(WavenumberSpec::Quantized { m_min, m_max, m_step })),
    ]
}

fn config_strategy() -> impl Strategy<Value = ExperimentConfig> {
    let field = prop::option::of((-3.0..0.0f64, 0.1..3.0f64, 2usize..50).prop_map(|(lo, hi, n)| FieldGrid {
        xmin: lo,
        xmax: hi,
        ymin: lo,
        ymax: hi,
        nx: n,
        ny: n + 1,
    }));
    let scatter = prop::option::of((0.0..6.3f64, field).prop_map(|(direction_angle, field)| ScatterConfig { direction_angle, field }));
    let constants = prop::option::of(
        (prop::option::of(0.5..2.0f64), 0.01..1.0f64, prop::collection::vec(1.0..100.0f64, 0..4)).prop_map(|(r0, eps_fraction, ks)| {
            ConstantsConfig {
                r0,
                r1: r0.map(|r| 1.4 * r),
                eps_fraction,
                evaluate_r: vec![2.0; ks.len()],
                evaluate_k: ks,
            }
        }),
    );
    let identities = prop::option::of((0u64..i64::MAX as u64, 1usize..200).prop_map(|(seed, n)| IdentitiesConfig {
        seed,
        morawetz_fields: n,
        friedrichs_fields: 2 * n,
        flux_superpositions: n + 1,
    }));
    (
        kind_strategy(),
        geometry_strategy(),
        -3.0..3.0f64,
        wavenumber_strategy(),
        (10.0..80.0f64, 0u32..20, 100usize..20000),
        scatter,
        constants,
        identities,
        "[a-z][a-z0-9_/]{0,20}",
    )
        .prop_map(|(kind, geometry, eta, wavenumbers, (ppw, corner_depth, max_nodes), scatter, constants, identities, dir)| {
            ExperimentConfig {
                kind,
                output_dir: PathBuf::from(dir),
                geometry,
                eta: EtaRule { coefficient: eta },
                wavenumbers,
                mesh: MeshConfig {
                    ppw,
                    corner_depth,
                    max_nodes,
                },
                scatter,
                constants,
                identities,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn config_text_round_trips_byte_for_byte(cfg in config_strategy()) {
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml().unwrap(), text);
    }
}

#[test]
fn builtin_configs_round_trip_for_every_kind() {
    for kind in [
        ExperimentKind::Sweep,
        ExperimentKind::Quasimode,
        ExperimentKind::Coercivity,
        ExperimentKind::Scatter,
        ExperimentKind::Constants,
        ExperimentKind::GeometryCheck,
        ExperimentKind::Identities,
    ] {
        let cfg = ExperimentConfig::default_for(kind);
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap().to_toml().unwrap(), text, "{kind:?}");
        cfg.validate().unwrap_or_else(|e| panic!("{kind:?}: {e}"));
    }
}

#[test]
fn hand_written_config_parses_with_defaults() {
    let text = r#"
kind = "quasimode"
output_dir = "out"

[geometry]
type = "two_squares"
side = 1.0
gap = 0.5

[wavenumbers]
mode = "quantized"
m_min = 2
m_max = 4
"#;
    let cfg = ExperimentConfig::from_toml(text).unwrap();
    assert_eq!(cfg.eta.coefficient, 1.0);
    assert_eq!(cfg.mesh, MeshConfig::default());
    let (_, ks) = cfg.validate().unwrap();
    let want: Vec<f64> = (2..=4).map(|m| m as f64 * std::f64::consts::PI / 0.5).collect();
    assert_eq!(ks.len(), 3);
    for (a, b) in ks.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12 * b);
    }
}

#[test]
fn parse_errors_name_the_line_and_field() {
    let text = "kind = \"sweep\"\noutput_dir = \"x\"\nbogus = 1\n[geometry]\ntype = \"circle\"\nradius = 1.0\n";
    let e = ExperimentConfig::from_toml(text).unwrap_err();
    let msg = e.to_string();
    assert!(matches!(e, CliError::Config(_)));
    assert!(msg.contains("bogus"), "{msg}");
    assert!(msg.contains("line 3"), "{msg}");
}

#[test]
fn validation_rejects_each_broken_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let good = circle_sweep(dir.path(), vec![5.0, 10.0]);
    good.validate().unwrap();
    let mut c = good.clone();
    c.mesh.ppw = 9.0;
    assert!(matches!(c.validate(), Err(CliError::Config(_))));
    let c = circle_sweep(dir.path(), vec![0.5, 10.0]);
    assert!(matches!(c.validate(), Err(CliError::Config(_))));
    let c = circle_sweep(dir.path(), vec![10.0, 5.0]);
    assert!(matches!(c.validate(), Err(CliError::Config(_))));
    let mut c = good.clone();
    c.eta.coefficient = 0.0;
    assert!(matches!(c.validate(), Err(CliError::Config(_))));
    let mut c = good.clone();
    c.wavenumbers = None;
    assert!(matches!(c.validate(), Err(CliError::Config(_))));
    // quantized wavenumbers need facing walls
    let mut c = good;
    c.wavenumbers = Some(WavenumberSpec::Quantized { m_min: 1, m_max: 3, m_step: 1 });
    assert!(matches!(c.validate(), Err(CliError::Config(_))));
}

#[test]
fn unwritable_output_directory_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain_file");
    fs::write(&file, b"x").unwrap();
    let cfg = circle_sweep(&file.join("sub"), vec![5.0]);
    assert!(matches!(run(&cfg), Err(CliError::Config(_))));
}

#[test]
fn binary_exit_codes_follow_the_error_class() {
    let dir = tempfile::tempdir().unwrap();
    // unparsable config
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "kind = \"sweep\"\n").unwrap();
    let st = bin().args(["sweep", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(st.code(), Some(EXIT_CONFIG));
    // kind mismatch between file and subcommand
    let cfg = circle_sweep(&dir.path().join("o"), vec![5.0]);
    let p = write_config(dir.path(), &cfg);
    let st = bin().args(["quasimode", "--config"]).arg(&p).status().unwrap();
    assert_eq!(st.code(), Some(EXIT_CONFIG));
    // node cap exceeded is reported as a config error with a hint
    let mut cfg = circle_sweep(&dir.path().join("o"), vec![200.0]);
    cfg.mesh.max_nodes = 100;
    let p = write_config(dir.path(), &cfg);
    let out = bin().args(["sweep", "--config"]).arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    // --seed outside the identity suite
    let st = bin().args(["sweep", "--seed", "3", "--out"]).arg(dir.path().join("o")).status().unwrap();
    assert_eq!(st.code(), Some(EXIT_CONFIG));
    // plot manifest on an empty directory
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let st = bin().arg("plot-manifest").arg(&empty).status().unwrap();
    assert_eq!(st.code(), Some(EXIT_CONFIG));
    assert_eq!(CliError::Numerical(String::new()).exit_code(), EXIT_NUMERICAL);
}

#[test]
fn geometry_check_prints_classification_of_two_squares() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().arg("geometry-check").arg("--out").arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("classification: strongly_r0r1"), "{text}");
    assert!(text.contains("parallel trapping: a = 0.5"), "{text}");
    let g: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("geometry.json")).unwrap()).unwrap();
    assert_eq!(g["label"], "parallel_trapping");
    assert_eq!(g["parallel_gap"], 0.5);
    assert_eq!(g["reverified_at_10x"], true);
    let (r0, r1) = (g["class"]["r0"].as_f64().unwrap(), g["class"]["r1"].as_f64().unwrap());
    assert!(r0 < r1);
}

#[test]
fn constants_table_for_the_reference_radii() {
    let b = make_geometry(&GeometrySpec::TwoSquares { side: 1.0, gap: 0.5 }).unwrap();
    let t = constants_table(&b, &ConstantsConfig::default()).unwrap();
    assert_eq!((t.r0, t.r1), (1.0, 1.4));
    assert!(t.invariants.holds());
    assert!(t.c_chi < 4.0 && t.q > 0.0);
    assert!(t.k_threshold.is_finite() && t.k_threshold > 0.0);
    let dir = tempfile::tempdir().unwrap();
    let out = bin().arg("constants").arg("--out").arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("k_threshold"), "{text}");
}

#[test]
fn identities_subcommand_honours_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run_with = |seed: &str, sub: &str| {
        let d = dir.path().join(sub);
        let out = bin().args(["identities", "--seed", seed, "--out"]).arg(&d).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read_to_string(d.join("identities.json")).unwrap()
    };
    let a = run_with("11", "a");
    let b = run_with("11", "b");
    let c = run_with("12", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.contains("\"seed\": 11"));
}

#[test]
fn reruns_write_identical_csv_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = circle_sweep(&dir.path().join("s"), vec![5.0, 8.0, 12.0]);
    let p = write_config(dir.path(), &cfg);
    let st = bin().args(["sweep", "--threads", "1", "--config"]).arg(&p).status().unwrap();
    assert!(st.success());
    let first = fs::read(dir.path().join("s/sweep.csv")).unwrap();
    let st = bin().args(["sweep", "--config"]).arg(&p).status().unwrap();
    assert!(st.success());
    let second = fs::read(dir.path().join("s/sweep.csv")).unwrap();
    assert_eq!(first, second);
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("geometry,label,k,eta,n_nodes,sigma_max,sigma_min,cond,norm_S,norm_Dp\n"));
    assert_eq!(text.lines().count(), 4);
    // the copied config reproduces the run
    let used = fs::read_to_string(dir.path().join("s/config.toml")).unwrap();
    assert_eq!(used, cfg.to_toml().unwrap());
}

#[test]
fn manifest_lists_sweeps_and_skips_missing_csvs() {
    let dir = tempfile::tempdir().unwrap();
    run(&circle_sweep(&dir.path().join("circle"), vec![10.0, 14.0, 20.0])).unwrap();
    let qm = ExperimentConfig {
        wavenumbers: Some(WavenumberSpec::Quantized { m_min: 2, m_max: 3, m_step: 1 }),
        output_dir: dir.path().join("qm"),
        ..ExperimentConfig::default_for(ExperimentKind::Quasimode)
    };
    run(&qm).unwrap();
    run(&circle_sweep(&dir.path().join("lost"), vec![10.0])).unwrap();
    fs::remove_file(dir.path().join("lost/sweep.csv")).unwrap();

    let (path, m) = emit_plot_manifest(dir.path()).unwrap();
    assert_eq!(path, dir.path().join(MANIFEST_FILE));
    assert_eq!(m.entries.len(), 2);
    assert_eq!(m.skipped.len(), 1);
    assert!(m.skipped[0].contains("lost"));

    let circle = m.entries.iter().find(|e| e.csv == "circle/sweep.csv").unwrap();
    let cond = circle.reference_slopes.iter().find(|s| s.series == "cond").unwrap();
    assert!((cond.slope - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(circle.x_column, "k");

    let q = m.entries.iter().find(|e| e.csv == "qm/quasimode.csv").unwrap();
    let r = q.reference_slopes.iter().find(|s| s.series == "residual").unwrap();
    assert_eq!(r.slope, -1.0);

    // every referenced column exists in the CSV header
    for e in &m.entries {
        let text = fs::read_to_string(dir.path().join(&e.csv)).unwrap();
        let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
        assert!(header.contains(&e.x_column.as_str()));
        for s in &e.y {
            assert!(header.contains(&s.column.as_str()), "{} lacks {}", e.csv, s.column);
        }
    }
}

#[test]
fn manifest_needs_completed_runs() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(build_manifest(dir.path()), Err(CliError::Config(_))));
    assert!(matches!(build_manifest(&dir.path().join("absent")), Err(CliError::Config(_))));
    // a summary on its own directory level is found too
    run(&circle_sweep(dir.path(), vec![10.0])).unwrap();
    assert!(dir.path().join(SUMMARY_FILE).is_file());
    assert_eq!(build_manifest(dir.path()).unwrap().entries.len(), 1);
}
