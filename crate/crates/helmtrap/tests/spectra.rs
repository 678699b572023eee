use helmtrap::geometry::*;
use helmtrap::layer_ops::*;
use helmtrap::spectra::*;
use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;
use num_complex::Complex64 as C;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use std::f64::consts::PI;

fn params(ppw: f64) -> MeshParams {
    MeshParams { ppw, ..MeshParams::default() }
}

fn random_matrix(rng: &mut rand::rngs::StdRng, n: usize) -> Array2<C> {
    Array2::from_shape_fn((n, n), |_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn adjoint_apply(m: &Array2<C>, x: &Array1<C>) -> Array1<C> {
    m.t().mapv(|v| v.conj()).dot(x)
}

/// `(sigma_max, sigma_min)` by power iteration on `M^* M` and on its inverse.
fn power_extremes(m: &Array2<C>) -> (f64, f64) {
    let n = m.nrows();
    let mh = m.t().mapv(|v| v.conj());
    let mut x = Array1::from_iter((0..n).map(|i| C::new(1.0 + i as f64 * 0.1, 0.2)));
    let mut big = 0.0;
    for _ in 0..20000 {
        let y = adjoint_apply(m, &m.dot(&x));
        let nrm = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let xn = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let new = (nrm / xn).sqrt();
        x = y / C::new(nrm, 0.0);
        if (new - big).abs() <= 1e-15 * new {
            big = new;
            break;
        }
        big = new;
    }
    let mut x = Array1::from_iter((0..n).map(|i| C::new(0.3, 1.0 - i as f64 * 0.05)));
    let mut small = 0.0;
    for _ in 0..20000 {
        // (M^* M)^{-1} x = M^{-1} M^{-*} x
        let z = mh.solve(&x).unwrap();
        let y = m.solve(&z).unwrap();
        let nrm = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let xn = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let new = (xn / nrm).sqrt();
        x = y / C::new(nrm, 0.0);
        if (new - small).abs() <= 1e-15 * new {
            small = new;
            break;
        }
        small = new;
    }
    (big, small)
}

#[test]
fn identity_and_diagonal_extremes() {
    let id = DiscreteOperator::custom(Array2::eye(5).mapv(|v: f64| C::new(v, 0.0)));
    assert_eq!(operator_extremes(&id).unwrap(), (1.0, 1.0));
    let mut d = Array2::zeros((2, 2));
    d[(0, 0)] = C::new(2.0, 0.0);
    d[(1, 1)] = C::new(0.5, 0.0);
    let (a, b) = operator_extremes(&DiscreteOperator::custom(d)).unwrap();
    assert!((a - 2.0).abs() < 1e-15 && (b - 0.5).abs() < 1e-15);
}

#[test]
fn singular_and_unscaled_operators_are_rejected() {
    let mut m = Array2::zeros((3, 3));
    m[(0, 0)] = C::new(1.0, 0.0);
    m[(1, 1)] = C::new(1.0, 0.0);
    assert!(matches!(
        operator_extremes(&DiscreteOperator::custom(m)),
        Err(SpectraError::Singular { .. })
    ));
    let b = make_geometry(&GeometrySpec::Circle { radius: 1.0, center: [0.0, 0.0] }).unwrap();
    let mesh = build_mesh(&b, 2.0, params(30.0)).unwrap();
    let s = assemble(OperatorKind::S, 2.0, &mesh).unwrap();
    assert!(matches!(operator_extremes(&s), Err(SpectraError::NotScaled)));
}

#[test]
fn svd_extremes_agree_with_power_iteration() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    for trial in 0..10 {
        let n = 6 + trial;
        let m = random_matrix(&mut rng, n);
        let (pmax, pmin) = power_extremes(&m);
        let (smax, smin) = operator_extremes(&DiscreteOperator::custom(m.clone())).unwrap();
        assert!((pmax - smax).abs() <= 1e-8 * smax, "{pmax} vs {smax}");
        assert!((pmin - smin).abs() <= 1e-8 * smin, "{pmin} vs {smin}");
        let lz = largest_singular_value(&m, 1e-14).unwrap();
        assert!((lz - smax).abs() <= 1e-10 * smax, "lanczos {lz} vs {smax}");
    }
}

#[test]
fn lanczos_norm_matches_svd_on_layer_operators() {
    let b = make_geometry(&GeometrySpec::TwoSquares { side: 1.0, gap: 0.5 }).unwrap();
    let mesh = build_mesh(&b, 8.0, params(30.0)).unwrap();
    for kind in [OperatorKind::S, OperatorKind::Dp] {
        let op = assemble(kind, 8.0, &mesh).unwrap().scaled();
        let l = largest_singular_value(&op.matrix, 1e-12).unwrap();
        let s = singular_values(op.matrix.clone()).unwrap()[0];
        assert!((l - s).abs() <= 1e-9 * s, "{kind:?}: {l} vs {s}");
    }
}

#[test]
fn circle_combined_operator_norm_matches_symbol_maximum() {
    let k = 5.0;
    let b = make_geometry(&GeometrySpec::Circle { radius: 1.0, center: [0.0, 0.0] }).unwrap();
    let mesh = build_mesh(&b, k, params(30.0)).unwrap();
    let a = assemble_combined(OperatorKind::Ap, k, k, &mesh).unwrap();
    let (smax, smin) = operator_extremes(&a).unwrap();
    let modes = circle_eigenvalues(k, k, 1.0, mesh.len() / 2).unwrap();
    let omax = modes.iter().map(|m| m.a.norm()).fold(0.0, f64::max);
    assert!((smax - omax).abs() <= 1e-6 * omax, "{smax} vs {omax}");
    // the infimum over all modes is 1/2, approached only as n -> infinity
    assert!(smin > 0.49 && smin < 0.51);
}

#[test]
fn combined_variants_share_the_norm_on_cornered_boundaries() {
    // Corner-localised singular values of the Nystrom A and A' differ by a
    // few percent (they approximate the corner essential spectrum and drift
    // with corner depth); the operator norm is unaffected.
    let b = make_geometry(&GeometrySpec::TwoSquares { side: 1.0, gap: 0.5 }).unwrap();
    let k = 2.0 * PI;
    let mesh = build_mesh(&b, k, MeshParams { corner_depth: 8, ..params(30.0) }).unwrap();
    let sp = singular_values(assemble_combined(OperatorKind::Ap, k, k, &mesh).unwrap().matrix).unwrap();
    let sa = singular_values(assemble_combined(OperatorKind::A, k, k, &mesh).unwrap().matrix).unwrap();
    for i in 0..3 {
        assert!((sp[i] - sa[i]).abs() <= 1e-6 * sp[0], "{i}: {} vs {}", sp[i], sa[i]);
    }
}

#[test]
fn combined_variants_share_singular_values_on_smooth_curves() {
    let b = make_geometry(&GeometrySpec::TwoDiscs { radius: 1.0, gap: 0.5 }).unwrap();
    let k = 6.0;
    let mesh = build_mesh(&b, k, params(30.0)).unwrap();
    let sp = singular_values(assemble_combined(OperatorKind::Ap, k, k, &mesh).unwrap().matrix).unwrap();
    let sa = singular_values(assemble_combined(OperatorKind::A, k, k, &mesh).unwrap().matrix).unwrap();
    for (x, y) in sp.iter().zip(&sa) {
        assert!((x - y).abs() <= 1e-8 * sp[0], "{x} vs {y}");
    }
}

#[test]
fn scaling_changes_singular_values_but_not_eigenvalue_sums() {
    let b = make_geometry(&GeometrySpec::TwoSquares { side: 1.0, gap: 0.5 }).unwrap();
    let mesh = build_mesh(&b, 3.0, params(30.0)).unwrap();
    let s = assemble(OperatorKind::S, 3.0, &mesh).unwrap();
    let scaled = s.clone().scaled();
    // similar matrices: equal traces of powers
    let tr = |m: &Array2<C>| -> (C, C) { (m.diag().sum(), m.dot(m).diag().sum()) };
    let (a1, a2) = tr(&s.matrix);
    let (b1, b2) = tr(&scaled.matrix);
    assert!((a1 - b1).norm() < 1e-12 * a1.norm());
    assert!((a2 - b2).norm() < 1e-10 * a2.norm());
    let su = singular_values(s.matrix).unwrap();
    let ss = singular_values(scaled.matrix).unwrap();
    assert!((su[0] - ss[0]).abs() > 1e-3 * ss[0], "graded weights must change singular values");
}

#[test]
fn quantized_wavenumbers() {
    let q = quantized_ks(0.5, 1, 3);
    let exact = [2.0 * PI, 4.0 * PI, 6.0 * PI];
    for (a, b) in q.iter().zip(exact) {
        assert!((a - b).abs() < 1e-14 * b);
    }
    assert!((quantized_ks(1.0, 2, 2)[0] - 2.0 * PI).abs() < 1e-15);
    let q = quantized_ks(0.7, 1, 20);
    for w in q.windows(2) {
        assert!((w[1] - w[0] - PI / 0.7).abs() < 1e-12);
    }
}

#[test]
fn log_grid_endpoints_and_ratio() {
    let g = log_grid(10.0, 80.0, 12);
    assert_eq!(g.len(), 12);
    assert!((g[0] - 10.0).abs() < 1e-12 && g[11] == 80.0);
    let r = g[1] / g[0];
    for w in g.windows(2) {
        assert!((w[1] / w[0] - r).abs() < 1e-12);
    }
}

#[test]
fn fit_growth_examples() {
    let ks: Vec<f64> = (1..=8).map(|i| 5.0 * i as f64).collect();
    let sq: Vec<f64> = ks.iter().map(|k| k * k).collect();
    let f = fit_growth(&ks, &sq).unwrap();
    assert!((f.slope - 2.0).abs() < 1e-12 && f.half_width < 1e-10);
    let c = fit_growth(&ks, &vec![7.0; ks.len()]).unwrap();
    assert!(c.slope.abs() < 1e-12 && (c.intercept - 7f64.ln()).abs() < 1e-12);
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    let noisy: Vec<f64> = ks.iter().map(|k| k.cbrt() * (1.0 + 0.01 * rng.gen_range(-1.0..1.0))).collect();
    let n = fit_growth(&ks, &noisy).unwrap();
    assert!((n.slope - 1.0 / 3.0).abs() < 0.05);
    assert!(matches!(fit_growth(&ks[..3], &sq[..3]), Err(SpectraError::TooFewPoints(3))));
    let mut bad = sq.clone();
    bad[2] = 0.0;
    assert!(matches!(fit_growth(&ks, &bad), Err(SpectraError::NonPositive(_))));
}

#[test]
fn empty_sweep_is_empty_and_sweeps_are_deterministic() {
    let b = make_geometry(&GeometrySpec::Circle { radius: 1.0, center: [0.0, 0.0] }).unwrap();
    let r = k_sweep(&b, &[], 1.0, params(30.0)).unwrap();
    assert!(r.records.is_empty() && r.slopes.is_none());
    let ks = [1.0, 2.0, 3.0, 4.0];
    let rows = |r: &SweepResult| r.records.iter().map(|x| sweep_csv_row(r, x).join(",")).collect::<Vec<_>>();
    let a = k_sweep(&b, &ks, 1.0, params(30.0)).unwrap();
    let c = k_sweep(&b, &ks, 1.0, params(30.0)).unwrap();
    assert_eq!(rows(&a), rows(&c));
    for rec in &a.records {
        assert!((rec.cond - rec.sigma_max / rec.sigma_min).abs() <= 1e-15 * rec.cond);
    }
    assert!(matches!(k_sweep(&b, &[2.0, 1.0], 1.0, params(30.0)), Err(SweepAbort { error: SpectraError::Unordered, .. })));
}

#[test]
fn aborted_sweep_keeps_partial_results() {
    let b = make_geometry(&GeometrySpec::Circle { radius: 1.0, center: [0.0, 0.0] }).unwrap();
    let small = MeshParams { max_nodes: 200, ..params(30.0) };
    match k_sweep(&b, &[1.0, 2.0, 50.0], 1.0, small) {
        Err(SweepAbort { partial, error }) => {
            assert_eq!(partial.records.len(), 2);
            assert!(matches!(error, SpectraError::Layer(LayerError::TooLarge { .. })));
        }
        Ok(_) => panic!("sweep should have stopped at the node cap"),
    }
}

#[test]
fn table_windows_and_verdicts() {
    let fit = |slope| GrowthFit { slope, intercept: 0.0, half_width: 0.0, points: 12 };
    let slopes = |inv, cond| SweepSlopes {
        sigma_max: fit(0.33),
        inverse_norm: fit(inv),
        cond: fit(cond),
        norm_s: fit(-0.66),
        norm_dp: fit(0.17),
    };
    let circle = SweepResult {
        geometry: "circle".into(),
        class: TrappingClass::StarShapedBall { radius: 1.0 },
        eta_coefficient: 1.0,
        records: vec![],
        slopes: Some(slopes(0.0, 0.3)),
    };
    let squares = SweepResult {
        geometry: "two_squares".into(),
        class: TrappingClass::ParallelTrapping { r0: 1.58, r1: 3.0, a: 0.5 },
        eta_coefficient: 1.0,
        records: vec![],
        slopes: Some(slopes(0.5, 2.5)),
    };
    let other = SweepResult {
        geometry: "polygon".into(),
        class: TrappingClass::Unclassified,
        eta_coefficient: 1.0,
        records: vec![],
        slopes: Some(slopes(0.5, 2.5)),
    };
    let rep = summarize_vs_predictions(&[circle, squares, other]);
    let cond = &rep[0].quantities[2];
    let w = cond.window.as_ref().unwrap();
    assert!((w.lo.unwrap() - (1.0 / 3.0 - 0.1)).abs() < 1e-15 && (w.hi.unwrap() - (1.0 / 3.0 + 0.1)).abs() < 1e-15);
    assert!(rep[0].quantities.iter().all(|q| q.verdict == Verdict::Pass));
    let inv = &rep[1].quantities[1];
    assert_eq!((inv.window.as_ref().unwrap().lo, inv.window.as_ref().unwrap().hi), (Some(0.7), Some(2.0)));
    // below a lower bound that holds only along some sequence: inconclusive
    assert_eq!(inv.verdict, Verdict::Inconclusive);
    assert_eq!(rep[1].quantities[2].verdict, Verdict::Pass);
    assert!(rep[2].quantities.iter().all(|q| q.verdict == Verdict::NoPrediction && q.window.is_none()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fit_recovers_exact_power_laws(p in -2.0f64..3.0, c in 0.1f64..10.0, k0 in 1.0f64..20.0) {
        let ks: Vec<f64> = (0..6).map(|i| k0 * 1.5f64.powi(i)).collect();
        let v: Vec<f64> = ks.iter().map(|k| c * k.powf(p)).collect();
        let f = fit_growth(&ks, &v).unwrap();
        prop_assert!((f.slope - p).abs() < 1e-10);
        prop_assert!((f.intercept - c.ln()).abs() < 1e-9);
    }

    #[test]
    fn singular_values_are_sorted_and_bound_the_rayleigh_quotient(seed in 0u64..1000) {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let m = random_matrix(&mut rng, 7);
        let s = singular_values(m.clone()).unwrap();
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let x = Array1::from_iter((0..7).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
        let ratio = m.dot(&x).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() / x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(ratio <= s[0] * (1.0 + 1e-12) && ratio >= s[6] * (1.0 - 1e-12));
    }
}
