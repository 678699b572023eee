//! Singular-value extraction, wavenumber sweeps, growth-rate fits, and the
//! comparison of fitted exponents against the predicted rates.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use ndarray_linalg::{EighInto, SVDInplace, UPLO};
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{classify, Boundary, TrappingClass};
use crate::layer_ops::{assemble_set, build_mesh, DiscreteOperator, LayerError, Mesh, MeshParams, OperatorKind, Want};

/// Fits use only records with `k` at or above this value.
pub const FIT_K_MIN: f64 = 10.0;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("operator must be l2-scaled before taking singular values")]
    NotScaled,
    #[error("numerically singular matrix: sigma_min = {sigma_min:e}, sigma_max = {sigma_max:e}")]
    Singular { sigma_max: f64, sigma_min: f64 },
    #[error("LAPACK failure: {0}")]
    Lapack(String),
    #[error("fit needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("fit values must be positive and finite, got {0}")]
    NonPositive(f64),
    #[error("wavenumbers must be strictly increasing")]
    Unordered,
    #[error("coupling coefficient must be nonzero")]
    ZeroEta,
    #[error(transparent)]
    Layer(#[from] LayerError),
}

pub type Result<T> = std::result::Result<T, SpectraError>;

/// All singular values of a dense matrix, in decreasing order. Consumes the
/// matrix to avoid a second dense copy.
pub fn singular_values(mut m: Array2<C>) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let (_, s, _) = m.svd_inplace(false, false).map_err(|e| SpectraError::Lapack(e.to_string()))?;
    Ok(s.to_vec())
}

fn check_extremes(s: &[f64]) -> Result<(f64, f64)> {
    let smax = s.first().copied().unwrap_or(0.0);
    let smin = s.last().copied().unwrap_or(0.0);
    if !(smin >= 1e3 * f64::EPSILON * smax) || smax == 0.0 {
        return Err(SpectraError::Singular {
            sigma_max: smax,
            sigma_min: smin,
        });
    }
    Ok((smax, smin))
}

/// `(sigma_max, sigma_min)` by a full dense SVD of an l2-scaled operator.
pub fn operator_extremes(op: &DiscreteOperator) -> Result<(f64, f64)> {
    if !op.l2_scaled {
        return Err(SpectraError::NotScaled);
    }
    check_extremes(&singular_values(op.matrix.clone())?)
}

/// As [`operator_extremes`], but consumes the operator.
pub fn operator_extremes_into(op: DiscreteOperator) -> Result<(f64, f64)> {
    if !op.l2_scaled {
        return Err(SpectraError::NotScaled);
    }
    check_extremes(&singular_values(op.matrix)?)
}

fn matvec(m: &Array2<C>, x: &[C], out: &mut [C]) {
    for (o, row) in out.iter_mut().zip(m.rows()) {
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

fn matvec_adjoint(m: &Array2<C>, x: &[C], out: &mut [C]) {
    out.iter_mut().for_each(|v| *v = C::new(0.0, 0.0));
    for (row, xi) in m.rows().into_iter().zip(x) {
        for (o, a) in out.iter_mut().zip(row.iter()) {
            *o += a.conj() * xi;
        }
    }
}

fn norm(v: &[C]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value by Lanczos on `M^* M` with full
/// reorthogonalisation, stopped when the Ritz residual of the top value is
/// below `rel_tol` relative. The start vector is fixed, so results are
/// deterministic.
pub fn largest_singular_value(m: &Array2<C>, rel_tol: f64) -> Result<f64> {
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return Ok(0.0);
    }
    let max_iter = n.min(300);
    let mut q: Vec<Vec<C>> = Vec::with_capacity(max_iter + 1);
    let mut v: Vec<C> = (0..n).map(|j| C::new(1.0 + 0.5 * (j as f64 * 0.7).sin(), 0.3 * (j as f64 * 1.3).cos())).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|a| *a /= nv);
    q.push(v);
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut mv = vec![C::new(0.0, 0.0); m.nrows()];
    let mut w = vec![C::new(0.0, 0.0); n];
    let mut theta = 0.0;
    for it in 0..max_iter {
        matvec(m, &q[it], &mut mv);
        matvec_adjoint(m, &mv, &mut w);
        let a: f64 = q[it].iter().zip(&w).map(|(x, y)| (x.conj() * y).re).sum();
        alpha.push(a);
        // two passes of classical Gram-Schmidt against all previous vectors
        for _ in 0..2 {
            for qj in &q {
                let c: C = qj.iter().zip(&w).map(|(x, y)| x.conj() * y).sum();
                w.iter_mut().zip(qj).for_each(|(y, x)| *y -= c * x);
            }
        }
        let b = norm(&w);
        let t = Array2::from_shape_fn((it + 1, it + 1), |(i, j)| {
            if i == j {
                alpha[i]
            } else if i + 1 == j || j + 1 == i {
                beta[i.min(j)]
            } else {
                0.0
            }
        });
        let (vals, vecs): (Array1<f64>, Array2<f64>) = t.eigh_into(UPLO::Lower).map_err(|e| SpectraError::Lapack(e.to_string()))?;
        theta = vals[it];
        let resid = b * vecs[(it, it)].abs();
        if resid <= rel_tol * theta || b <= 1e-300 || it + 1 == max_iter {
            break;
        }
        beta.push(b);
        q.push(w.iter().map(|y| y / b).collect());
    }
    Ok(theta.max(0.0).sqrt())
}

/// `{m pi / a : m in m_lo..=m_hi}`, the wavenumbers resonant with a gap `a > 0`.
pub fn quantized_ks(a: f64, m_lo: u32, m_hi: u32) -> Vec<f64> {
    assert!(a > 0.0, "gap must be positive");
    (m_lo..=m_hi).map(|m| m as f64 * PI / a).collect()
}

/// `count` logarithmically spaced wavenumbers from `kmin` to `kmax`.
pub fn log_grid(kmin: f64, kmax: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![kmin],
        _ => {
            let (a, b) = (kmin.ln(), kmax.ln());
            (0..count)
                .map(|i| {
                    if i + 1 == count {
                        kmax
                    } else {
                        (a + (b - a) * i as f64 / (count - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// One wavenumber of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub k: f64,
    pub eta: f64,
    pub n_nodes: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub cond: f64,
    pub norm_s: f64,
    pub norm_dp: f64,
}

/// Least-squares line through `(log k, log value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub slope: f64,
    pub intercept: f64,
    /// Twice the standard error of the slope.
    pub half_width: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSlopes {
    pub sigma_max: GrowthFit,
    pub inverse_norm: GrowthFit,
    pub cond: GrowthFit,
    pub norm_s: GrowthFit,
    pub norm_dp: GrowthFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub geometry: String,
    pub class: TrappingClass,
    /// `eta = eta_coefficient * k`.
    pub eta_coefficient: f64,
    pub records: Vec<SweepRecord>,
    pub slopes: Option<SweepSlopes>,
}

impl SweepResult {
    pub fn ks(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.k).collect()
    }

    /// Fit all growth rates over records with `k >= FIT_K_MIN`.
    pub fn fit(&mut self) {
        let recs: Vec<&SweepRecord> = self.records.iter().filter(|r| r.k >= FIT_K_MIN).collect();
        let ks: Vec<f64> = recs.iter().map(|r| r.k).collect();
        let f = |g: &dyn Fn(&SweepRecord) -> f64| fit_growth(&ks, &recs.iter().map(|r| g(r)).collect::<Vec<_>>()).ok();
        self.slopes = (|| {
            Some(SweepSlopes {
                sigma_max: f(&|r| r.sigma_max)?,
                inverse_norm: f(&|r| 1.0 / r.sigma_min)?,
                cond: f(&|r| r.cond)?,
                norm_s: f(&|r| r.norm_s)?,
                norm_dp: f(&|r| r.norm_dp)?,
            })
        })();
    }
}

/// A sweep stopped by an error, with the records computed before it.
#[derive(Debug)]
pub struct SweepAbort {
    pub partial: SweepResult,
    pub error: SpectraError,
}

/// Everything computed at one wavenumber, handed to sweep observers before
/// the matrices are dropped.
pub struct SweepStep<'a> {
    pub mesh: &'a Mesh,
    /// Scaled `A'_{k,eta}`.
    pub a_prime: &'a DiscreteOperator,
    pub record: &'a SweepRecord,
}

/// Assemble `S_k` and `D'_k` on `mesh`, returning `(||S||, ||D'||, A')`
/// with `A'` scaled. Peak memory is two dense matrices.
pub fn norms_and_combined(mesh: &Mesh, eta: f64) -> Result<(f64, f64, DiscreteOperator)> {
    if eta == 0.0 {
        return Err(SpectraError::ZeroEta);
    }
    let k = mesh.k;
    let mut mats = assemble_set(k, mesh, Want { s: true, dp: true, d: false })?;
    let mut dp = mats.pop().expect("D'");
    let mut s = mats.pop().expect("S");
    let sw = mesh.sqrt_weights();
    let scale = |m: &mut Array2<C>| {
        for ((i, j), v) in m.indexed_iter_mut() {
            *v *= sw[i] / sw[j];
        }
    };
    scale(&mut s);
    scale(&mut dp);
    let norm_s = largest_singular_value(&s, 1e-12)?;
    let norm_dp = largest_singular_value(&dp, 1e-12)?;
    // the similarity commutes with 1/2 I + D' - i eta S, so combine scaled pieces
    let ie = C::new(0.0, eta);
    dp.zip_mut_with(&s, |a, b| *a -= ie * b);
    drop(s);
    for i in 0..dp.nrows() {
        dp[(i, i)] += 0.5;
    }
    let op = DiscreteOperator {
        matrix: dp,
        kind: OperatorKind::Ap,
        k,
        eta: Some(eta),
        l2_scaled: true,
        weights: mesh.weights.clone(),
    };
    Ok((norm_s, norm_dp, op))
}

/// Sweep `ks` on `b` with `eta = eta_coefficient * k`, rebuilding the mesh
/// at every `k`. `observe` sees each step before its matrices are dropped.
pub fn k_sweep_with<F>(
    b: &Boundary,
    ks: &[f64],
    eta_coefficient: f64,
    params: MeshParams,
    mut observe: F,
) -> std::result::Result<SweepResult, SweepAbort>
where
    F: FnMut(&SweepStep) -> Result<()>,
{
    let mut result = SweepResult {
        geometry: b.label().to_string(),
        class: classify(b, 4000),
        eta_coefficient,
        records: Vec::new(),
        slopes: None,
    };
    if ks.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SweepAbort {
            partial: result,
            error: SpectraError::Unordered,
        });
    }
    for &k in ks {
        let step = (|| -> Result<()> {
            let eta = eta_coefficient * k;
            let mesh = build_mesh(b, k, params)?;
            let (norm_s, norm_dp, a) = norms_and_combined(&mesh, eta)?;
            let (sigma_max, sigma_min) = operator_extremes(&a)?;
            let record = SweepRecord {
                k,
                eta,
                n_nodes: mesh.len(),
                sigma_max,
                sigma_min,
                cond: sigma_max / sigma_min,
                norm_s,
                norm_dp,
            };
            observe(&SweepStep {
                mesh: &mesh,
                a_prime: &a,
                record: &record,
            })?;
            result.records.push(record);
            Ok(())
        })();
        if let Err(error) = step {
            result.fit();
            return Err(SweepAbort { partial: result, error });
        }
    }
    result.fit();
    Ok(result)
}

/// [`k_sweep_with`] without an observer.
pub fn k_sweep(b: &Boundary, ks: &[f64], eta_coefficient: f64, params: MeshParams) -> std::result::Result<SweepResult, SweepAbort> {
    k_sweep_with(b, ks, eta_coefficient, params, |_| Ok(()))
}

/// Least-squares fit of `log value = slope log k + intercept`.
pub fn fit_growth(ks: &[f64], values: &[f64]) -> Result<GrowthFit> {
    let n = ks.len().min(values.len());
    if n < 4 {
        return Err(SpectraError::TooFewPoints(n));
    }
    for &v in ks.iter().chain(values) {
        if !(v > 0.0) || !v.is_finite() {
            return Err(SpectraError::NonPositive(v));
        }
    }
    let x: Vec<f64> = ks[..n].iter().map(|k| k.ln()).collect();
    let y: Vec<f64> = values[..n].iter().map(|v| v.ln()).collect();
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let se = (rss / (nf - 2.0) / sxx).sqrt();
    Ok(GrowthFit {
        slope,
        intercept,
        half_width: 2.0 * se,
        points: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Outside a window whose violated side is only a lower bound that holds
    /// along some unbounded sequence.
    Inconclusive,
    NoPrediction,
}

/// Predicted exponent window for one fitted quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub center: Option<f64>,
    /// The lower edge is a lower bound valid only for some sequences of `k`.
    pub lo_is_sequence_bound: bool,
    pub statement: String,
}

impl Window {
    fn new(lo: Option<f64>, hi: Option<f64>, center: Option<f64>, seq: bool, statement: &str) -> Self {
        Window {
            lo,
            hi,
            center,
            lo_is_sequence_bound: seq,
            statement: statement.into(),
        }
    }

    pub fn judge(&self, slope: f64) -> Verdict {
        if self.hi.is_some_and(|h| slope > h) {
            return Verdict::Fail;
        }
        if self.lo.is_some_and(|l| slope < l) {
            return if self.lo_is_sequence_bound { Verdict::Inconclusive } else { Verdict::Fail };
        }
        Verdict::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityReport {
    pub quantity: String,
    pub fit: Option<GrowthFit>,
    pub window: Option<Window>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub geometry: String,
    pub class: TrappingClass,
    pub quantities: Vec<QuantityReport>,
}

/// Predicted windows for `(sigma_max, inverse_norm, cond, norm_s, norm_dp)`.
pub fn predicted_windows(class: &TrappingClass, geometry: &str) -> [Option<Window>; 5] {
    match class {
        TrappingClass::StarShapedBall { .. } => {
            let smooth = geometry == "circle";
            [
                smooth.then(|| Window::new(Some(1.0 / 3.0 - 0.1), Some(1.0 / 3.0 + 0.1), Some(1.0 / 3.0), false, "||A'|| ~ k^(1/3) on the ball")),
                Some(Window::new(Some(-0.15), Some(0.15), Some(0.0), false, "||(A')^-1|| <~ 1 (nontrapping)")),
                smooth.then(|| Window::new(Some(1.0 / 3.0 - 0.1), Some(1.0 / 3.0 + 0.1), Some(1.0 / 3.0), false, "cond(A') ~ k^(1/3) on the ball")),
                smooth.then(|| Window::new(Some(-2.0 / 3.0 - 0.15), Some(-2.0 / 3.0 + 0.15), Some(-2.0 / 3.0), false, "||S_k|| ~ k^(-2/3) on the circle")),
                smooth.then(|| Window::new(Some(1.0 / 6.0 - 0.1), Some(1.0 / 6.0 + 0.1), Some(1.0 / 6.0), false, "||D'_k|| ~ k^(1/6) on the circle")),
            ]
        }
        TrappingClass::ParallelTrapping { .. } => [
            None,
            Some(Window::new(Some(0.7), Some(2.0), None, true, "k <~ ||(A')^-1|| <~ k^2 along k = m pi / a")),
            Some(Window::new(Some(1.2), None, None, true, "k^(3/2) <~ cond(A') along k = m pi / a")),
            None,
            None,
        ],
        TrappingClass::StronglyR0R1 { .. } | TrappingClass::R0R1 { .. } => [
            None,
            Some(Window::new(None, Some(2.5), None, false, "||(A')^-1|| <~ k^(2+beta), beta <= 1/2")),
            None,
            None,
            None,
        ],
        TrappingClass::Unclassified => [None, None, None, None, None],
    }
}

/// Fitted slopes next to the predicted windows, one report per sweep.
pub fn summarize_vs_predictions(results: &[SweepResult]) -> Vec<GeometryReport> {
    results
        .iter()
        .map(|r| {
            let windows = predicted_windows(&r.class, &r.geometry);
            let fits = r.slopes.as_ref().map(|s| [s.sigma_max, s.inverse_norm, s.cond, s.norm_s, s.norm_dp]);
            let names = ["sigma_max", "inverse_norm", "cond", "norm_S", "norm_Dp"];
            let quantities = names
                .iter()
                .enumerate()
                .map(|(i, name)| {
                    let fit = fits.map(|f| f[i]);
                    let window = windows[i].clone();
                    let verdict = match (&fit, &window) {
                        (Some(f), Some(w)) => w.judge(f.slope),
                        _ => Verdict::NoPrediction,
                    };
                    QuantityReport {
                        quantity: name.to_string(),
                        fit,
                        window,
                        verdict,
                    }
                })
                .collect();
            GeometryReport {
                geometry: r.geometry.clone(),
                class: r.class.clone(),
                quantities,
            }
        })
        .collect()
}

/// Column names of the sweep CSV.
pub const SWEEP_CSV_HEADER: [&str; 10] = [
    "geometry", "label", "k", "eta", "n_nodes", "sigma_max", "sigma_min", "cond", "norm_S", "norm_Dp",
];

/// The class tag written in the `label` column.
pub fn class_label(c: &TrappingClass) -> &'static str {
    match c {
        TrappingClass::StarShapedBall { .. } => "star_shaped_ball",
        TrappingClass::StronglyR0R1 { .. } => "strongly_r0r1",
        TrappingClass::R0R1 { .. } => "r0r1",
        TrappingClass::ParallelTrapping { .. } => "parallel_trapping",
        TrappingClass::Unclassified => "unclassified",
    }
}

/// CSV row fields for one record; floats use the shortest round-trip form.
pub fn sweep_csv_row(result: &SweepResult, r: &SweepRecord) -> Vec<String> {
    vec![
        result.geometry.clone(),
        class_label(&result.class).to_string(),
        format!("{:?}", r.k),
        format!("{:?}", r.eta),
        r.n_nodes.to_string(),
        format!("{:?}", r.sigma_max),
        format!("{:?}", r.sigma_min),
        format!("{:?}", r.cond),
        format!("{:?}", r.norm_s),
        format!("{:?}", r.norm_dp),
    ]
}
