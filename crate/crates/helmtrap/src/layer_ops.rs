//! Panel Nystrom discretisation of the single layer `S_k`, the double layer
//! `D_k`, its adjoint `D'_k`, and the combined-field operators on `L^2(Gamma)`.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Arc, ArcShape, Boundary, Point};
use crate::quadrature::PanelRule;
use crate::special_functions::{bessel_jy01, bessel_jy_sequence, scaled_product, SpecialError, EULER_GAMMA};

/// Gauss-Legendre points per panel.
pub const PANEL_ORDER: usize = 16;
/// Default cap on the number of quadrature nodes.
pub const DEFAULT_MAX_NODES: usize = 12_000;
/// Largest admissible `panel length * k`.
pub const MAX_PANEL_K: f64 = 4.0;
/// Panels across the quasimode bump support on each facing wall.
pub const BUMP_PANELS: usize = 4;
/// Bernstein-ellipse parameter above which plain Gauss is used for a panel.
const NEAR_RHO: f64 = 3.5;

#[derive(Debug, Error)]
pub enum LayerError {
    #[error("mesh too large: {nodes} nodes exceeds the cap of {cap}; lower kmax or ppw")]
    TooLarge { nodes: usize, cap: usize },
    #[error("invalid mesh parameters: {0}")]
    InvalidParams(String),
    #[error("wavenumber must be positive, got {0}")]
    BadWavenumber(f64),
    #[error("coupling parameter eta must be nonzero")]
    ZeroEta,
    #[error("singular quadrature breakdown: panel length * k = {0:.3} exceeds {MAX_PANEL_K}")]
    PanelTooLong(f64),
    #[error("n_max = {0} too large for the Bessel recurrence")]
    NMaxTooLarge(usize),
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error("dump i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed matrix dump: {0}")]
    BadDump(String),
}

pub type Result<T> = std::result::Result<T, LayerError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshParams {
    /// Points per wavelength.
    pub ppw: f64,
    /// Dyadic refinement levels toward each corner.
    pub corner_depth: u32,
    pub max_nodes: usize,
}

impl Default for MeshParams {
    fn default() -> Self {
        MeshParams {
            ppw: 30.0,
            corner_depth: 12,
            max_nodes: DEFAULT_MAX_NODES,
        }
    }
}

/// A panel: the parameter interval `[t0, t1]` of one arc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub loop_index: usize,
    pub arc_index: usize,
    pub t0: f64,
    pub t1: f64,
    pub length: f64,
    pub flat: bool,
}

/// Composite Gauss-Legendre discretisation of a boundary. Node `i` lies on
/// panel `i / PANEL_ORDER`.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub boundary: Boundary,
    pub panels: Vec<Panel>,
    pub nodes: Vec<Point>,
    pub normals: Vec<Point>,
    /// Arclength quadrature weights.
    pub weights: Vec<f64>,
    /// `|dy/ds|` with `s` the panel parameter in `[-1, 1]`.
    pub speeds: Vec<f64>,
    pub curvature: Vec<f64>,
    pub k: f64,
    pub params: MeshParams,
    pub rule: PanelRule,
}

impl Mesh {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn panel_t(&self, p: &Panel, s: f64) -> f64 {
        p.t0 + 0.5 * (s + 1.0) * (p.t1 - p.t0)
    }

    /// Point, derivative with respect to `s`, and outward normal.
    fn panel_eval(&self, p: &Panel, s: f64) -> (Point, Point, Point) {
        let arc = &self.boundary.loops[p.loop_index].arcs[p.arc_index];
        let t = self.panel_t(p, s);
        let d = arc.d1(t);
        let h = 0.5 * (p.t1 - p.t0);
        (arc.point(t), [d[0] * h, d[1] * h], arc.normal(t))
    }

    /// Largest `panel length * k`.
    pub fn max_panel_k(&self) -> f64 {
        self.panels.iter().map(|p| p.length).fold(0.0, f64::max) * self.k
    }

    /// `sqrt(w_i)` for the symmetric L^2 scaling.
    pub fn sqrt_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.sqrt()).collect()
    }

    /// `L^2(Gamma)` norm of nodal values.
    pub fn l2_norm(&self, v: &[C]) -> f64 {
        v.iter().zip(&self.weights).map(|(a, w)| a.norm_sqr() * w).sum::<f64>().sqrt()
    }
}

/// Breakpoints of the panels on one arc.
fn arc_breakpoints(n_base: usize, start_corner: bool, end_corner: bool, depth: u32) -> Vec<f64> {
    let mut bp: Vec<f64> = (0..=n_base).map(|i| i as f64 / n_base as f64).collect();
    let target = 2f64.powi(-(depth as i32));
    if start_corner {
        while bp[1] - bp[0] > target * (1.0 + 1e-12) {
            let mid = 0.5 * (bp[0] + bp[1]);
            bp.insert(1, mid);
        }
    }
    if end_corner {
        loop {
            let n = bp.len();
            if bp[n - 1] - bp[n - 2] <= target * (1.0 + 1e-12) {
                break;
            }
            let mid = 0.5 * (bp[n - 2] + bp[n - 1]);
            bp.insert(n - 1, mid);
        }
    }
    bp
}

/// Breakpoints splitting the quasimode bump support into `BUMP_PANELS`
/// panels when `arc` lies on one of the facing walls of `b`.
fn bump_breakpoints(b: &Boundary, arc: &Arc) -> Vec<f64> {
    let (Some(f), ArcShape::Line { a, b: e }) = (b.meta.facing, &arc.shape) else {
        return Vec::new();
    };
    let n = arc.normal(0.5);
    let on_wall = |x: f64, sign: f64| (a[0] - x).abs() < 1e-12 && (e[0] - x).abs() < 1e-12 && (n[0] - sign).abs() < 1e-12;
    if !(on_wall(f.a1, 1.0) || on_wall(f.a2, -1.0)) {
        return Vec::new();
    }
    let (c, h) = f.bump_window();
    (0..=BUMP_PANELS)
        .map(|i| (c - h + 2.0 * h * i as f64 / BUMP_PANELS as f64 - a[1]) / (e[1] - a[1]))
        .filter(|t| *t > 1e-12 && *t < 1.0 - 1e-12)
        .collect()
}

/// Merge extra breakpoints into a sorted list, dropping near-duplicates.
fn merge_breakpoints(mut bp: Vec<f64>, extra: &[f64]) -> Vec<f64> {
    if extra.is_empty() {
        return bp;
    }
    bp.extend_from_slice(extra);
    bp.sort_by(|x, y| x.total_cmp(y));
    bp.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
    bp
}

/// Panels per arc: enough for `ppw` points per wavelength, for
/// `panel length * k <= MAX_PANEL_K`, and at least 4 on curved arcs. Panels
/// touching a corner are bisected toward it until their length is at most
/// `(arc length) 2^-corner_depth`. On the facing walls of a trapping
/// geometry the quasimode bump support gets its own panels.
pub fn build_mesh(b: &Boundary, k: f64, params: MeshParams) -> Result<Mesh> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(LayerError::BadWavenumber(k));
    }
    if !(params.ppw >= 10.0) {
        return Err(LayerError::InvalidParams(format!("ppw must be at least 10, got {}", params.ppw)));
    }
    if b.corner_count() > 0 && params.corner_depth < 6 {
        return Err(LayerError::InvalidParams(format!(
            "corner_depth must be at least 6 when corners exist, got {}",
            params.corner_depth
        )));
    }
    let rule = PanelRule::new(PANEL_ORDER);
    let mut panels = Vec::new();
    for (li, l) in b.loops.iter().enumerate() {
        let na = l.arcs.len();
        for (ai, arc) in l.arcs.iter().enumerate() {
            let len = arc.length();
            let by_ppw = (params.ppw * k * len / (2.0 * PI * PANEL_ORDER as f64)).ceil();
            let by_k = (k * len / MAX_PANEL_K * (1.0 + 1e-9)).ceil();
            let min = if arc.is_flat() { 1.0 } else { 4.0 };
            let n_base = by_ppw.max(by_k).max(min) as usize;
            let bp = arc_breakpoints(n_base, l.corner[ai], l.corner[(ai + 1) % na], params.corner_depth);
            let bp = merge_breakpoints(bp, &bump_breakpoints(b, arc));
            for w in bp.windows(2) {
                panels.push(Panel {
                    loop_index: li,
                    arc_index: ai,
                    t0: w[0],
                    t1: w[1],
                    length: arc.length_between(w[0], w[1]),
                    flat: arc.is_flat(),
                });
            }
        }
    }
    let n = panels.len() * PANEL_ORDER;
    if n > params.max_nodes {
        return Err(LayerError::TooLarge {
            nodes: n,
            cap: params.max_nodes,
        });
    }
    let mut nodes = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut speeds = Vec::with_capacity(n);
    let mut curvature = Vec::with_capacity(n);
    for p in &panels {
        let arc = &b.loops[p.loop_index].arcs[p.arc_index];
        let h = 0.5 * (p.t1 - p.t0);
        for (s, w) in rule.nodes.iter().zip(&rule.weights) {
            let t = p.t0 + (s + 1.0) * h;
            let sp = arc.speed(t) * h;
            nodes.push(arc.point(t));
            normals.push(arc.normal(t));
            speeds.push(sp);
            weights.push(w * sp);
            curvature.push(arc.curvature(t));
        }
    }
    Ok(Mesh {
        boundary: b.clone(),
        panels,
        nodes,
        normals,
        weights,
        speeds,
        curvature,
        k,
        params,
        rule,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    S,
    D,
    Dp,
    A,
    Ap,
    Custom,
}

impl OperatorKind {
    fn code(self) -> u8 {
        match self {
            OperatorKind::S => 0,
            OperatorKind::D => 1,
            OperatorKind::Dp => 2,
            OperatorKind::A => 3,
            OperatorKind::Ap => 4,
            OperatorKind::Custom => 5,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => OperatorKind::S,
            1 => OperatorKind::D,
            2 => OperatorKind::Dp,
            3 => OperatorKind::A,
            4 => OperatorKind::Ap,
            5 => OperatorKind::Custom,
            _ => return None,
        })
    }
}

/// Dense operator matrix. When `l2_scaled`, entry `(i, j)` is
/// `sqrt(w_i) a_ij / sqrt(w_j)`, where `a_ij` acts on nodal density values.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub matrix: Array2<C>,
    pub kind: OperatorKind,
    pub k: f64,
    pub eta: Option<f64>,
    pub l2_scaled: bool,
    /// Quadrature weights of the generating mesh.
    pub weights: Vec<f64>,
}

impl DiscreteOperator {
    /// Wrap an arbitrary matrix, treated as already acting on `l^2`.
    pub fn custom(matrix: Array2<C>) -> Self {
        let n = matrix.nrows();
        DiscreteOperator {
            matrix,
            kind: OperatorKind::Custom,
            k: 0.0,
            eta: None,
            l2_scaled: true,
            weights: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// The symmetric `sqrt(w)` scaling (no-op if already scaled).
    pub fn scaled(mut self) -> Self {
        if !self.l2_scaled {
            let sw: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
            for ((i, j), v) in self.matrix.indexed_iter_mut() {
                *v *= sw[i] / sw[j];
            }
            self.l2_scaled = true;
        }
        self
    }

    /// Undo the `sqrt(w)` scaling (no-op if already unscaled).
    pub fn unscaled(mut self) -> Self {
        if self.l2_scaled && self.kind != OperatorKind::Custom {
            let sw: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
            for ((i, j), v) in self.matrix.indexed_iter_mut() {
                *v *= sw[j] / sw[i];
            }
            self.l2_scaled = false;
        }
        self
    }

    /// Apply the matrix to a vector.
    pub fn apply(&self, x: &[C]) -> Vec<C> {
        self.matrix
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Kernel values for `S`, `D'` and `D` at one target/source pair, split into
/// the coefficient `L` of `log|s - s'|` and the full value.
#[derive(Clone, Copy)]
struct KernelParts {
    full: [C; 3],
    log: [f64; 3],
}

#[inline]
fn kernels(k: f64, x: Point, nx: Point, y: Point, ny: Point) -> KernelParts {
    let d = [x[0] - y[0], x[1] - y[1]];
    let r = d[0].hypot(d[1]);
    let b = bessel_jy01(k * r).expect("kernel evaluation at a valid separation");
    let h0 = C::new(b.j0, b.y0);
    let h1 = C::new(b.j1, b.y1);
    let cx = (nx[0] * d[0] + nx[1] * d[1]) / r;
    let cy = (ny[0] * d[0] + ny[1] * d[1]) / r;
    let s = C::new(0.0, 0.25) * h0;
    let dp = C::new(0.0, -0.25 * k * cx) * h1;
    let dd = C::new(0.0, 0.25 * k * cy) * h1;
    KernelParts {
        full: [s, dp, dd],
        log: [-b.j0 / (2.0 * PI), k * b.j1 * cx / (2.0 * PI), -k * b.j1 * cy / (2.0 * PI)],
    }
}

/// Which of `S`, `D'`, `D` to assemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Want {
    pub s: bool,
    pub dp: bool,
    pub d: bool,
}

/// Bernstein-ellipse parameter of `x` relative to the chord from `a` to `b`.
pub(crate) fn bernstein_rho(x: Point, a: Point, b: Point) -> f64 {
    let den = C::new(b[0] - a[0], b[1] - a[1]);
    let z = C::new(2.0 * x[0] - a[0] - b[0], 2.0 * x[1] - a[1] - b[1]) / den;
    let w = (z * z - 1.0).sqrt();
    (z + w).norm().max((z - w).norm())
}

/// Integrate the three kernels against the Lagrange basis of panel `p` for
/// target `x`, subdividing `[lo, hi]` until each piece is far from `x`.
#[allow(clippy::too_many_arguments)]
fn near_panel(
    mesh: &Mesh,
    p: &Panel,
    x: Point,
    nx: Point,
    lo: f64,
    hi: f64,
    depth: u32,
    out: &mut [[C; PANEL_ORDER]; 3],
    basis: &mut [f64; PANEL_ORDER],
) {
    let (a, _, _) = mesh.panel_eval(p, lo);
    let (b, _, _) = mesh.panel_eval(p, hi);
    let rho = bernstein_rho(x, a, b);
    if rho < NEAR_RHO && depth < 50 {
        let mid = 0.5 * (lo + hi);
        near_panel(mesh, p, x, nx, lo, mid, depth + 1, out, basis);
        near_panel(mesh, p, x, nx, mid, hi, depth + 1, out, basis);
        return;
    }
    let h = 0.5 * (hi - lo);
    let k = mesh.k;
    for (sn, wn) in mesh.rule.nodes.iter().zip(&mesh.rule.weights) {
        let s = 0.5 * (lo + hi) + h * sn;
        let (y, dy, ny) = mesh.panel_eval(p, s);
        let sp = dy[0].hypot(dy[1]);
        let kp = kernels(k, x, nx, y, ny);
        mesh.rule.lagrange(s, basis);
        let w = wn * h * sp;
        for j in 0..PANEL_ORDER {
            let f = w * basis[j];
            for m in 0..3 {
                out[m][j] += kp.full[m] * f;
            }
        }
    }
}

/// Row `i` of the unscaled `S`, `D'`, `D` matrices.
fn assemble_row(mesh: &Mesh, i: usize, want: Want, rows: &mut [&mut [C]]) {
    let n_per = PANEL_ORDER;
    let k = mesh.k;
    let x = mesh.nodes[i];
    let nx = mesh.normals[i];
    let pi_idx = i / n_per;
    let il = i % n_per;
    let self_panel = &mesh.panels[pi_idx];
    let mut acc = [[C::new(0.0, 0.0); PANEL_ORDER]; 3];
    let mut basis = [0.0; PANEL_ORDER];
    for (q, p) in mesh.panels.iter().enumerate() {
        let base = q * n_per;
        if q == pi_idx {
            // product integration of the log part, plain Gauss for the rest
            let lw = &mesh.rule.log_weights[il];
            for jl in 0..n_per {
                let j = base + jl;
                let sp = mesh.speeds[j];
                let gw = mesh.rule.weights[jl];
                let mut vals = [C::new(0.0, 0.0); 3];
                if jl == il {
                    let kappa = mesh.curvature[i];
                    vals[0] = (C::new(0.0, 0.25) - (0.5 * k * sp).ln() / (2.0 * PI) - EULER_GAMMA / (2.0 * PI)) * gw
                        - lw[jl] / (2.0 * PI);
                    let dlim = if p.flat { 0.0 } else { -kappa / (4.0 * PI) };
                    vals[1] = C::new(dlim * gw, 0.0);
                    vals[2] = C::new(dlim * gw, 0.0);
                } else {
                    let kp = kernels(k, x, nx, mesh.nodes[j], mesh.normals[j]);
                    let lnd = (mesh.rule.nodes[il] - mesh.rule.nodes[jl]).abs().ln();
                    for m in 0..3 {
                        if m > 0 && p.flat {
                            continue;
                        }
                        let smooth = kp.full[m] - kp.log[m] * lnd;
                        vals[m] = smooth * gw + kp.log[m] * lw[jl];
                    }
                }
                for m in 0..3 {
                    acc[m][jl] = vals[m] * sp;
                }
            }
        } else {
            let dist = {
                let c = mesh.nodes[base + n_per / 2];
                (x[0] - c[0]).hypot(x[1] - c[1])
            };
            let near = dist < 3.0 * p.length && {
                let (a, _, _) = mesh.panel_eval(p, -1.0);
                let (b, _, _) = mesh.panel_eval(p, 1.0);
                bernstein_rho(x, a, b) < NEAR_RHO
            };
            if near {
                acc = [[C::new(0.0, 0.0); PANEL_ORDER]; 3];
                near_panel(mesh, p, x, nx, -1.0, 1.0, 0, &mut acc, &mut basis);
            } else {
                for jl in 0..n_per {
                    let j = base + jl;
                    let kp = kernels(k, x, nx, mesh.nodes[j], mesh.normals[j]);
                    for m in 0..3 {
                        acc[m][jl] = kp.full[m] * mesh.weights[j];
                    }
                }
            }
            // a flat panel on the same straight arc as the target sees no double layer
            if p.flat
                && self_panel.flat
                && p.loop_index == self_panel.loop_index
                && p.arc_index == self_panel.arc_index
            {
                for jl in 0..n_per {
                    acc[1][jl] = C::new(0.0, 0.0);
                    acc[2][jl] = C::new(0.0, 0.0);
                }
            }
        }
        let mut slot = 0;
        for (m, on) in [want.s, want.dp, want.d].iter().enumerate() {
            if *on {
                rows[slot][base..base + n_per].copy_from_slice(&acc[m]);
                slot += 1;
            }
        }
    }
}

/// Unscaled `S`, `D'`, `D` matrices (those requested), in that order.
pub fn assemble_set(k: f64, mesh: &Mesh, want: Want) -> Result<Vec<Array2<C>>> {
    if !(k > 0.0) {
        return Err(LayerError::BadWavenumber(k));
    }
    if (k - mesh.k).abs() > 1e-14 * k {
        return Err(LayerError::InvalidParams(format!(
            "mesh built for k = {} but assembly requested at k = {k}",
            mesh.k
        )));
    }
    let pk = mesh.max_panel_k();
    if pk > MAX_PANEL_K {
        return Err(LayerError::PanelTooLong(pk));
    }
    let n = mesh.len();
    let count = [want.s, want.dp, want.d].iter().filter(|b| **b).count();
    let mut mats: Vec<Array2<C>> = (0..count).map(|_| Array2::zeros((n, n))).collect();
    {
        let mut slices: Vec<&mut [C]> = mats.iter_mut().map(|m| m.as_slice_mut().expect("standard layout")).collect();
        let mut row_sets: Vec<Vec<&mut [C]>> = (0..n).map(|_| Vec::with_capacity(count)).collect();
        for s in slices.drain(..) {
            for (i, chunk) in s.chunks_mut(n).enumerate() {
                row_sets[i].push(chunk);
            }
        }
        row_sets.par_iter_mut().enumerate().for_each(|(i, rows)| {
            assemble_row(mesh, i, want, rows);
        });
    }
    Ok(mats)
}

/// Assemble one of `S`, `D'`, `D` on the mesh (unscaled).
pub fn assemble(kind: OperatorKind, k: f64, mesh: &Mesh) -> Result<DiscreteOperator> {
    let want = match kind {
        OperatorKind::S => Want { s: true, dp: false, d: false },
        OperatorKind::Dp => Want { s: false, dp: true, d: false },
        OperatorKind::D => Want { s: false, dp: false, d: true },
        _ => return Err(LayerError::InvalidParams(format!("assemble does not build {kind:?}"))),
    };
    let m = assemble_set(k, mesh, want)?.pop().expect("one matrix");
    Ok(DiscreteOperator {
        matrix: m,
        kind,
        k,
        eta: None,
        l2_scaled: false,
        weights: mesh.weights.clone(),
    })
}

/// `1/2 I + K - i eta S` from unscaled pieces, returned with `sqrt(w)` scaling.
pub fn combine(mut k_part: Array2<C>, s: &Array2<C>, eta: f64, kind: OperatorKind, k: f64, mesh: &Mesh) -> DiscreteOperator {
    let ie = C::new(0.0, eta);
    k_part.zip_mut_with(s, |a, b| *a -= ie * b);
    for i in 0..k_part.nrows() {
        k_part[(i, i)] += 0.5;
    }
    DiscreteOperator {
        matrix: k_part,
        kind,
        k,
        eta: Some(eta),
        l2_scaled: false,
        weights: mesh.weights.clone(),
    }
    .scaled()
}

/// `A'_{k,eta} = 1/2 I + D'_k - i eta S_k` or `A_{k,eta} = 1/2 I + D_k - i eta S_k`,
/// with the symmetric `sqrt(w)` scaling applied.
pub fn assemble_combined(variant: OperatorKind, k: f64, eta: f64, mesh: &Mesh) -> Result<DiscreteOperator> {
    if eta == 0.0 || !eta.is_finite() {
        return Err(LayerError::ZeroEta);
    }
    let want = match variant {
        OperatorKind::Ap => Want { s: true, dp: true, d: false },
        OperatorKind::A => Want { s: true, dp: false, d: true },
        _ => return Err(LayerError::InvalidParams(format!("combined variant must be A or Ap, got {variant:?}"))),
    };
    let mut mats = assemble_set(k, mesh, want)?;
    let kp = mats.pop().expect("double layer part");
    let s = mats.pop().expect("single layer part");
    Ok(combine(kp, &s, eta, variant, k, mesh))
}

/// Fourier symbols of `S_k`, `D'_k` and `A'_{k,eta}` on the circle of radius `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CircleMode {
    pub n: usize,
    pub s: C,
    pub dp: C,
    pub a: C,
}

/// Eigenvalues of `A'_{k,eta}` on the circle for `n = 0..=n_max` (modes
/// `+n` and `-n` coincide):
/// `s_n = (i pi R/2) J_n H_n`, `d_n = (i pi k R/4)(J_n H_n' + J_n' H_n)`,
/// `lambda_n = 1/2 + d_n - i eta s_n`, all at `kR`.
pub fn circle_eigenvalues(k: f64, eta: f64, r: f64, n_max: usize) -> Result<Vec<CircleMode>> {
    if !(k > 0.0) {
        return Err(LayerError::BadWavenumber(k));
    }
    if !(r > 0.0) {
        return Err(LayerError::InvalidParams(format!("radius must be positive, got {r}")));
    }
    if n_max > 200_000 {
        return Err(LayerError::NMaxTooLarge(n_max));
    }
    let x = k * r;
    let (j, y) = bessel_jy_sequence(x, n_max + 1)?;
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let nf = n as f64;
        // derivatives from J_n' = J_{n-1} - (n/x) J_n, with J_{-1} = -J_1
        let (jm, ym, sgn) = if n == 0 { (j[1], y[1], -1.0) } else { (j[n - 1], y[n - 1], 1.0) };
        let jj = scaled_product(j[n], j[n]);
        let jy = scaled_product(j[n], y[n]);
        let j_jm = sgn * scaled_product(j[n], jm);
        let j_ym = sgn * scaled_product(j[n], ym);
        let jm_y = sgn * scaled_product(jm, y[n]);
        // J H = J^2 + i J Y
        let jh = C::new(jj, jy);
        // J H' + J' H = 2 J J' + i (J Y' + J' Y)
        let jjp = j_jm - nf / x * jj;
        let cross = j_ym + jm_y - 2.0 * nf / x * jy;
        let sym = C::new(2.0 * jjp, cross);
        let s = C::new(0.0, 0.5 * PI * r) * jh;
        let dp = C::new(0.0, 0.25 * PI * k * r) * sym;
        let a = C::new(0.5, 0.0) + dp - C::new(0.0, eta) * s;
        out.push(CircleMode { n, s, dp, a });
    }
    Ok(out)
}

const DUMP_MAGIC: &[u8; 8] = b"HTOPMAT1";

/// Write `op` as: magic, u64 dimension, f64 k, f64 eta (NaN if none),
/// u8 kind, u8 scaled flag, then row-major (re, im) f64 pairs, all
/// little-endian.
pub fn write_matrix_dump(path: &Path, op: &DiscreteOperator) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(DUMP_MAGIC)?;
    f.write_all(&(op.dim() as u64).to_le_bytes())?;
    f.write_all(&op.k.to_le_bytes())?;
    f.write_all(&op.eta.unwrap_or(f64::NAN).to_le_bytes())?;
    f.write_all(&[op.kind.code(), op.l2_scaled as u8])?;
    for v in op.matrix.iter() {
        f.write_all(&v.re.to_le_bytes())?;
        f.write_all(&v.im.to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

/// Read a dump written by [`write_matrix_dump`]. Weights are not stored and
/// come back as ones.
pub fn read_matrix_dump(path: &Path) -> Result<DiscreteOperator> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(LayerError::BadDump("bad magic".into()));
    }
    let mut b8 = [0u8; 8];
    f.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    f.read_exact(&mut b8)?;
    let k = f64::from_le_bytes(b8);
    f.read_exact(&mut b8)?;
    let eta = f64::from_le_bytes(b8);
    let mut b2 = [0u8; 2];
    f.read_exact(&mut b2)?;
    let kind = OperatorKind::from_code(b2[0]).ok_or_else(|| LayerError::BadDump(format!("kind code {}", b2[0])))?;
    let mut data = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        f.read_exact(&mut b8)?;
        let re = f64::from_le_bytes(b8);
        f.read_exact(&mut b8)?;
        data.push(C::new(re, f64::from_le_bytes(b8)));
    }
    let matrix = Array2::from_shape_vec((n, n), data).map_err(|e| LayerError::BadDump(e.to_string()))?;
    Ok(DiscreteOperator {
        matrix,
        kind,
        k,
        eta: if eta.is_nan() { None } else { Some(eta) },
        l2_scaled: b2[1] != 0,
        weights: vec![1.0; n],
    })
}
