use helmtrap::geometry::*;
use helmtrap::layer_ops::*;
use helmtrap::quadrature::adaptive_integrate;
use helmtrap::quasimode::*;
use helmtrap::spectra::*;
use num_complex::Complex64 as C;
use std::f64::consts::PI;

fn params(ppw: f64) -> MeshParams {
    MeshParams { ppw, ..MeshParams::default() }
}

fn squares() -> Boundary {
    make_geometry(&GeometrySpec::TwoSquares { side: 1.0, gap: 0.5 }).unwrap()
}

#[test]
fn bump_is_compactly_supported_and_even() {
    assert_eq!(bump(1.0), 0.0);
    assert_eq!(bump(-1.3), 0.0);
    assert!((bump(0.0) - (-1f64).exp()).abs() < 1e-16);
    for t in [0.1, 0.5, 0.9, 0.999] {
        assert_eq!(bump(t), bump(-t));
        assert!(bump(t) > 0.0);
    }
}

#[test]
fn density_norm_matches_exact_integral() {
    // ||phi||^2 = 2 h int_{-1}^{1} bump(t)^2 dt with h the bump half-width
    let b = squares();
    let f = b.meta.facing.unwrap();
    let h = BUMP_FRACTION * 0.5 * (f.hi - f.lo);
    let exact = (2.0 * h * adaptive_integrate(&|t: f64| bump(t).powi(2), -1.0, 1.0, 1e-14)).sqrt();
    for ppw in [30.0, 60.0] {
        for m in [2u32, 5] {
            let k = quantized_ks(0.5, m, m)[0];
            let mesh = build_mesh(&b, k, params(ppw)).unwrap();
            let phi = build_quasimode(&mesh, &b, k).unwrap();
            assert!((phi.norm - exact).abs() <= 1e-6 * exact, "ppw {ppw} m {m}: {} vs {exact}", phi.norm);
        }
    }
}

#[test]
fn phases_and_support() {
    let b = squares();
    for m in 2u32..6 {
        let k = quantized_ks(0.5, m, m)[0];
        let mesh = build_mesh(&b, k, params(30.0)).unwrap();
        let phi = build_quasimode(&mesh, &b, k).unwrap();
        let ratio = phi.phases[1] / phi.phases[0];
        let expected = -(-1f64).powi(m as i32);
        assert!((ratio - C::new(expected, 0.0)).norm() < 1e-12);
        assert!((phi.phases[0].norm() - 1.0).abs() < 1e-15 && (phi.phases[1].norm() - 1.0).abs() < 1e-15);
        for (i, v) in phi.values.iter().enumerate() {
            let x = mesh.nodes[i];
            let on_wall = (x[0] - 1.0).abs() < 1e-12 || (x[0] - 1.5).abs() < 1e-12;
            let in_bump = (x[1] - phi.center).abs() < phi.half_width;
            if !(on_wall && in_bump) {
                assert_eq!(*v, C::new(0.0, 0.0), "nonzero off the walls at {x:?}");
            }
        }
        // supported inside the overlap of the facing faces
        assert!(phi.center - phi.half_width > phi.segments.lo && phi.center + phi.half_width < phi.segments.hi);
    }
}

#[test]
fn geometry_without_walls_is_rejected() {
    let b = make_geometry(&GeometrySpec::Circle { radius: 1.0, center: [0.0, 0.0] }).unwrap();
    let mesh = build_mesh(&b, 4.0, params(30.0)).unwrap();
    assert!(matches!(build_quasimode(&mesh, &b, 4.0), Err(QuasimodeError::NoFacing(_))));
}

#[test]
fn lower_bound_never_exceeds_inverse_norm() {
    let b = squares();
    for m in [2u32, 3] {
        let k = quantized_ks(0.5, m, m)[0];
        let mesh = build_mesh(&b, k, params(30.0)).unwrap();
        let phi = build_quasimode(&mesh, &b, k).unwrap();
        let (_, _, a) = norms_and_combined(&mesh, k).unwrap();
        let rep = quasimode_report_on(&a, &mesh, &phi).unwrap();
        let (_, smin) = operator_extremes(&a).unwrap();
        assert!(rep.lower_bound <= (1.0 / smin) * (1.0 + 1e-12), "m {m}: {} vs {}", rep.lower_bound, 1.0 / smin);
        assert!((rep.residual * rep.lower_bound - 1.0).abs() < 1e-14);
    }
}

#[test]
fn quasimode_residual_is_smaller_on_the_resonant_sequence() {
    // At these k the beam between the walls still diffracts (a xi^2 / 2k is
    // of order one across the bump spectrum), so the gain is modest.
    let b = squares();
    let k = quantized_ks(0.5, 4, 4)[0];
    let on = quasimode_residual(&b, k, k, params(30.0)).unwrap();
    let off = quasimode_residual(&b, k + PI, k + PI, params(30.0)).unwrap();
    assert!(on.residual < off.residual, "{} vs {}", on.residual, off.residual);
}

#[test]
fn facing_walls_carry_panel_breakpoints_at_the_bump_support() {
    let b = squares();
    let (c, h) = b.meta.facing.unwrap().bump_window();
    let mesh = build_mesh(&b, 10.0, params(30.0)).unwrap();
    for wall_x in [1.0, 1.5] {
        let ends: Vec<f64> = mesh
            .panels
            .iter()
            .filter(|p| {
                let a = b.loops[p.loop_index].arcs[p.arc_index].point(0.5);
                (a[0] - wall_x).abs() < 1e-12
            })
            .flat_map(|p| {
                let arc = &b.loops[p.loop_index].arcs[p.arc_index];
                [arc.point(p.t0)[1], arc.point(p.t1)[1]]
            })
            .collect();
        for y in [c - h, c, c + h] {
            assert!(ends.iter().any(|e| (e - y).abs() < 1e-12), "no breakpoint at x2 = {y} on x1 = {wall_x}");
        }
    }
}

#[test]
fn coercivity_probe_two_ways_agree() {
    let b = make_geometry(&GeometrySpec::default_u_cavity()).unwrap();
    let k = 4.0 * PI / 4.0 * 3.0;
    let mesh = build_mesh(&b, k, MeshParams { corner_depth: 8, ..params(30.0) }).unwrap();
    let phi = build_quasimode(&mesh, &b, k).unwrap();
    let (_, _, a) = norms_and_combined(&mesh, k).unwrap();
    let rep = quasimode_report_on(&a, &mesh, &phi).unwrap();
    // scaled matrix-vector product then the l2 inner product
    let sw = mesh.sqrt_weights();
    let psi: Vec<C> = phi.values.iter().zip(&sw).map(|(v, s)| v * s).collect();
    let apsi = a.apply(&psi);
    let direct: C = apsi.iter().zip(&psi).map(|(x, y)| x * y.conj()).sum();
    let probe = direct.norm() / (phi.norm * phi.norm);
    assert!((probe - rep.coercivity_probe).abs() <= 1e-10 * probe.max(1e-300));
}
