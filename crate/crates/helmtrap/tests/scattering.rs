use helmtrap::geometry::*;
use helmtrap::layer_ops::*;
use helmtrap::scattering::*;
use num_complex::Complex64 as C;
use std::f64::consts::PI;

fn params(ppw: f64) -> MeshParams {
    MeshParams { ppw, ..MeshParams::default() }
}

fn unit_circle() -> Boundary {
    make_geometry(&GeometrySpec::Circle { radius: 1.0, center: [0.0, 0.0] }).unwrap()
}

#[test]
fn incident_trace_properties() {
    let b = make_geometry(&GeometrySpec::TwoSquares { side: 1.0, gap: 0.5 }).unwrap();
    let k = 9.0;
    let mesh = build_mesh(&b, k, params(30.0)).unwrap();
    let w = IncidentWave::from_angle(0.3, k);
    for x in &mesh.nodes {
        assert!((w.value(*x).norm() - 1.0).abs() < 1e-14);
    }
    // centred difference along the normal, O(h^2)
    let h = 1e-4;
    for (x, n) in mesh.nodes.iter().zip(&mesh.normals).step_by(37) {
        let p = [x[0] + h * n[0], x[1] + h * n[1]];
        let m = [x[0] - h * n[0], x[1] - h * n[1]];
        let fd = (w.value(p) - w.value(m)) / (2.0 * h);
        assert!((fd - w.normal_derivative(*x, *n)).norm() < 1e-6 * k);
    }
    let f = plane_wave_trace(&w, k, &mesh).unwrap();
    assert!(mesh.l2_norm(&f) <= 2.0 * k * b.total_length().sqrt());
    assert!(matches!(plane_wave_trace(&w, 0.0, &mesh), Err(ScatteringError::ZeroEta)));
    assert!(matches!(IncidentWave::new([1.0, 1.0], k), Err(ScatteringError::BadDirection(_))));
}

#[test]
fn circle_neumann_trace_matches_series() {
    let k = 5.0;
    let (mesh, sol) = solve_soundsoft_on(&unit_circle(), &IncidentWave::from_angle(0.0, k), k, params(30.0)).unwrap();
    assert!(sol.residual <= SOLVE_TOLERANCE);
    let exact: Vec<C> = mesh
        .nodes
        .iter()
        .map(|x| circle_neumann_series(k, 1.0, 0.0, x[1].atan2(x[0])).unwrap())
        .collect();
    let diff: Vec<C> = sol.density.iter().zip(&exact).map(|(a, b)| a - b).collect();
    let rel = mesh.l2_norm(&diff) / mesh.l2_norm(&exact);
    assert!(rel < 1e-5, "{rel:e}");
}

#[test]
fn circle_series_obeys_the_boundary_condition() {
    for &k in &[1.0, 5.0, 20.0] {
        for t in [0.0, 1.0, 2.5] {
            let u = circle_field_series(k, 1.0, 0.4, 1.0, t).unwrap();
            assert!(u.norm() < 1e-10, "k {k}: {u}");
        }
    }
}

#[test]
fn circle_field_matches_series_at_exterior_points() {
    let k = 5.0;
    let angle = 0.7;
    let (mesh, sol) = solve_soundsoft_on(&unit_circle(), &IncidentWave::from_angle(angle, k), k, params(30.0)).unwrap();
    let pts: Vec<Point> = (0..50)
        .map(|i| {
            let r = 1.5 + 0.1 * (i % 10) as f64;
            let t = 2.0 * PI * i as f64 / 50.0;
            [r * t.cos(), r * t.sin()]
        })
        .collect();
    let vals = evaluate_field(&mesh, &sol, &pts).unwrap();
    for (p, v) in pts.iter().zip(&vals) {
        let r = p[0].hypot(p[1]);
        let exact = circle_field_series(k, 1.0, angle, r, p[1].atan2(p[0])).unwrap();
        assert!((v - exact).norm() <= 1e-4 * exact.norm().max(1.0), "{p:?}: {v} vs {exact}");
    }
}

#[test]
fn scattered_field_is_outgoing_and_loses_energy() {
    let k = 5.0;
    let (mesh, sol) = solve_soundsoft_on(&unit_circle(), &IncidentWave::from_angle(0.0, k), k, params(30.0)).unwrap();
    let d20 = radiation_defect(&mesh, &sol, 20.0, 0.9).unwrap();
    let d40 = radiation_defect(&mesh, &sol, 40.0, 0.9).unwrap();
    let ratio = d20 / d40;
    assert!((2.3..=3.5).contains(&ratio), "ratio {ratio}");
    let flux = energy_flux(&mesh, &sol, 2.0).unwrap();
    assert!(flux.re <= 1e-8 * flux.norm(), "{flux}");
    assert!(flux.im > 0.0);
}

#[test]
fn deep_shadow_is_dark_at_high_frequency() {
    let k = 40.0;
    let b = unit_circle();
    let (mesh, sol) = solve_soundsoft_on(&b, &IncidentWave::from_angle(0.0, k), k, params(30.0)).unwrap();
    let panel = mesh.panels[0].length;
    let x = [1.0 + 3.0 * panel, 0.0];
    let u = evaluate_field(&mesh, &sol, &[x]).unwrap()[0];
    let exact = circle_field_series(k, 1.0, 0.0, x[0], 0.0).unwrap();
    assert!((u - exact).norm() < 1e-4);
    assert!(u.norm() < 0.1, "|u| = {}", u.norm());
}

#[test]
fn points_near_the_boundary_are_rejected() {
    let k = 5.0;
    let (mesh, sol) = solve_soundsoft_on(&unit_circle(), &IncidentWave::from_angle(0.0, k), k, params(30.0)).unwrap();
    assert!(matches!(evaluate_field(&mesh, &sol, &[[1.01, 0.0]]), Err(ScatteringError::TooClose(_))));
}

#[test]
fn refinement_changes_the_neumann_norm_little() {
    let b = make_geometry(&GeometrySpec::TwoSquares { side: 1.0, gap: 0.5 }).unwrap();
    let k = 4.0 * PI;
    let w = IncidentWave::from_angle(0.0, k);
    let (_, a) = solve_soundsoft_on(&b, &w, k, params(30.0)).unwrap();
    let (_, c) = solve_soundsoft_on(&b, &w, k, params(60.0)).unwrap();
    let rel = (a.neumann_norm - c.neumann_norm).abs() / c.neumann_norm;
    assert!(rel <= 1e-4, "{rel:e}");
}
