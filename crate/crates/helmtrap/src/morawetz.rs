//! The radial cutoff `chi`, the multiplier `(Z, beta, alpha)`, the explicit
//! constants of the resolvent estimate, and pointwise checks of the
//! Morawetz, Morawetz-Ludwig, Friedrichs and radiation inequalities.

use num_complex::Complex64 as C;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{golden_min, ratio_threshold, Point};
use crate::quadrature::adaptive_integrate;
use crate::special_functions::{fundamental_solution, fundamental_solution_grad, SpecialError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MorawetzError {
    #[error("infeasible radii: need R1 > e^(1/4) R0, got R0 = {r0}, R1 = {r1}")]
    InfeasibleRadii { r0: f64, r1: f64 },
    #[error("invalid cutoff width eps = {eps}; must lie in (0, {eps0}]")]
    InvalidEpsilon { eps: f64, eps0: f64 },
    #[error("c_chi = {0} outside [0, 4)")]
    CChiOutOfRange(f64),
    #[error("no radius R* in (R0, R1) satisfies m_alpha(R*) <= q/(128 R0^2); try a smaller eps or a larger R1/R0")]
    NoFeasibleRStar,
    #[error("grid too coarse: {0} cells across B_2R, need at least 64")]
    GridTooCoarse(usize),
    #[error("grid does not cover B_(sqrt(13) R)")]
    GridTooSmall,
    #[error("source at distance {dist} is outside B_(R/2) with R = {r}")]
    SourceOutside { dist: f64, r: f64 },
    #[error(transparent)]
    Special(#[from] SpecialError),
}

pub type Result<T> = std::result::Result<T, MorawetzError>;

/// `eps0 = (R1 - R0 e^{1/4}) / (e^{1/4} + 1)`: the widest admissible ramp.
pub fn epsilon0(r0: f64, r1: f64) -> Result<f64> {
    let e = ratio_threshold();
    if !(r0 > 0.0) || !(r1 >= e * r0) {
        return Err(MorawetzError::InfeasibleRadii { r0, r1 });
    }
    Ok(((r1 - r0 * e) / (e + 1.0)).max(0.0))
}

/// Quintic smoothstep `t^3 (10 - 15 t + 6 t^2)` and its first two derivatives.
fn smoothstep(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let t2 = t * t;
    (
        t2 * t * (10.0 - 15.0 * t + 6.0 * t2),
        30.0 * t2 * (1.0 - t) * (1.0 - t),
        60.0 * t * (1.0 - t) * (1.0 - 2.0 * t),
    )
}

/// Chebyshev interpolant on `[a, b]`.
#[derive(Debug, Clone)]
struct Chebyshev {
    a: f64,
    b: f64,
    coef: Vec<f64>,
}

impl Chebyshev {
    fn fit<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> Self {
        let pi = std::f64::consts::PI;
        let vals: Vec<f64> = (0..n)
            .map(|j| {
                let th = pi * (j as f64 + 0.5) / n as f64;
                f(0.5 * (a + b) + 0.5 * (b - a) * th.cos())
            })
            .collect();
        let coef = (0..n)
            .map(|m| {
                let s: f64 = (0..n)
                    .map(|j| vals[j] * (pi * m as f64 * (j as f64 + 0.5) / n as f64).cos())
                    .sum();
                s * if m == 0 { 1.0 } else { 2.0 } / n as f64
            })
            .collect();
        Chebyshev { a, b, coef }
    }

    fn eval(&self, x: f64) -> f64 {
        let u = (2.0 * x - self.a - self.b) / (self.b - self.a);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coef.iter().skip(1).rev() {
            let b0 = 2.0 * u * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        u * b1 - b2 + self.coef[0]
    }
}

/// The radial cutoff `chi(r) = (1/I) int_{R0}^r p(s)/s ds`, where `p` is a
/// C^2 plateau bump with smoothstep ramps of width `eps`.
#[derive(Debug, Clone)]
pub struct CutoffProfile {
    pub r0: f64,
    pub r1: f64,
    pub eps: f64,
    /// Normalising integral `I = int_{R0}^{R1} p(s)/s ds`.
    pub integral: f64,
    ramp_in: Chebyshev,
    ramp_out: Chebyshev,
    /// `int p/s` over the rising ramp.
    g_in: f64,
    /// `log((R1 - eps)/(R0 + eps))`.
    g_plateau: f64,
}

/// Build `chi` for radii `r0 < r1` and ramp width `0 < eps <= eps0`.
pub fn build_cutoff(r0: f64, r1: f64, eps: f64) -> Result<CutoffProfile> {
    let eps0 = epsilon0(r0, r1)?;
    if !(eps > 0.0 && eps <= eps0 * (1.0 + 1e-14)) {
        return Err(MorawetzError::InvalidEpsilon { eps, eps0 });
    }
    let p_in = move |s: f64| smoothstep((s - r0) / eps).0 / s;
    let p_out = move |s: f64| smoothstep((r1 - s) / eps).0 / s;
    let cum_in = move |r: f64| if r <= r0 { 0.0 } else { adaptive_integrate(&p_in, r0, r, 1e-13) };
    let cum_out = move |r: f64| {
        if r <= r1 - eps {
            0.0
        } else {
            adaptive_integrate(&p_out, r1 - eps, r, 1e-13)
        }
    };
    let ramp_in = Chebyshev::fit(cum_in, r0, r0 + eps, 40);
    let ramp_out = Chebyshev::fit(cum_out, r1 - eps, r1, 40);
    let g_in = cum_in(r0 + eps);
    let g_out = cum_out(r1);
    let g_plateau = ((r1 - eps) / (r0 + eps)).ln();
    Ok(CutoffProfile {
        r0,
        r1,
        eps,
        integral: g_in + g_plateau + g_out,
        ramp_in,
        ramp_out,
        g_in,
        g_plateau,
    })
}

impl CutoffProfile {
    /// The plateau bump `p` with its first two derivatives.
    pub fn bump(&self, r: f64) -> (f64, f64, f64) {
        if r <= self.r0 || r >= self.r1 {
            return (0.0, 0.0, 0.0);
        }
        if r < self.r0 + self.eps {
            let (p, dp, ddp) = smoothstep((r - self.r0) / self.eps);
            return (p, dp / self.eps, ddp / (self.eps * self.eps));
        }
        if r > self.r1 - self.eps {
            let (p, dp, ddp) = smoothstep((self.r1 - r) / self.eps);
            return (p, -dp / self.eps, ddp / (self.eps * self.eps));
        }
        (1.0, 0.0, 0.0)
    }

    pub fn chi(&self, r: f64) -> f64 {
        if r <= self.r0 {
            return 0.0;
        }
        if r >= self.r1 {
            return 1.0;
        }
        let g = if r < self.r0 + self.eps {
            self.ramp_in.eval(r)
        } else if r <= self.r1 - self.eps {
            self.g_in + (r / (self.r0 + self.eps)).ln()
        } else {
            self.g_in + self.g_plateau + self.ramp_out.eval(r)
        };
        (g / self.integral).clamp(0.0, 1.0)
    }

    /// `(chi, chi', chi'', chi''')` at `r > 0`.
    pub fn derivatives(&self, r: f64) -> [f64; 4] {
        let (p, dp, ddp) = self.bump(r);
        let i = self.integral;
        [
            self.chi(r),
            p / (i * r),
            (dp / r - p / (r * r)) / i,
            (ddp / r - 2.0 * dp / (r * r) + 2.0 * p / (r * r * r)) / i,
        ]
    }
}

/// `c_chi = sup_r r chi'(r)` by a dense scan refined with golden section.
pub fn c_chi(p: &CutoffProfile) -> f64 {
    let f = |r: f64| -r * p.derivatives(r)[1];
    let n = 20_000;
    let h = (p.r1 - p.r0) / n as f64;
    let mut best = (0.0, p.r0);
    for i in 0..=n {
        let r = p.r0 + i as f64 * h;
        let v = -f(r);
        if v > best.0 {
            best = (v, r);
        }
    }
    let lo = (best.1 - h).max(p.r0);
    let hi = (best.1 + h).min(p.r1);
    let r = golden_min(&f, lo, hi, 1e-14);
    best.0.max(-f(r))
}

/// Outcome of sampling the cutoff invariants on a radial grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffInvariants {
    pub samples: usize,
    /// `chi(R0) = 0` and `chi(R1) = 1` exactly.
    pub endpoints_exact: bool,
    /// `0 < chi < 1` at every interior sample.
    pub strictly_between: bool,
    pub monotone: bool,
    /// `chi = 0` below `R0` and `chi = 1` above `R1` at sampled exterior radii.
    pub constant_outside: bool,
    /// Largest sampled `r chi'(r)`.
    pub max_r_chi_prime: f64,
    /// Smallest sampled `r chi'(r)`.
    pub min_r_chi_prime: f64,
}

impl CutoffInvariants {
    pub fn holds(&self) -> bool {
        self.endpoints_exact
            && self.strictly_between
            && self.monotone
            && self.constant_outside
            && self.min_r_chi_prime >= 0.0
            && self.max_r_chi_prime < 4.0
    }
}

/// Sample `chi` at `samples` interior radii of `(R0, R1)` and on either side.
pub fn cutoff_invariants(p: &CutoffProfile, samples: usize) -> CutoffInvariants {
    let mut out = CutoffInvariants {
        samples,
        endpoints_exact: p.chi(p.r0) == 0.0 && p.chi(p.r1) == 1.0,
        strictly_between: true,
        monotone: true,
        constant_outside: true,
        max_r_chi_prime: f64::NEG_INFINITY,
        min_r_chi_prime: f64::INFINITY,
    };
    let mut prev = 0.0;
    for m in 1..=samples {
        let r = p.r0 + (p.r1 - p.r0) * m as f64 / (samples + 1) as f64;
        let d = p.derivatives(r);
        out.strictly_between &= d[0] > 0.0 && d[0] < 1.0;
        out.monotone &= d[0] >= prev;
        prev = d[0];
        out.max_r_chi_prime = out.max_r_chi_prime.max(r * d[1]);
        out.min_r_chi_prime = out.min_r_chi_prime.min(r * d[1]);
    }
    for m in 0..=100 {
        let below = p.r0 * m as f64 / 100.0;
        let above = p.r1 * (1.0 + m as f64 / 100.0);
        out.constant_outside &= p.chi(below) == 0.0 && p.chi(above) == 1.0;
    }
    out
}

/// `q = (4 - c_chi) / 8`.
pub fn q_param(c_chi: f64) -> Result<f64> {
    if !(0.0..4.0).contains(&c_chi) {
        return Err(MorawetzError::CChiOutOfRange(c_chi));
    }
    Ok((4.0 - c_chi) / 8.0)
}

fn radius(x: Point) -> f64 {
    x[0].hypot(x[1])
}

/// `Z(x) = e_2 x_2 (1 - chi) + x chi`, which in two dimensions is `(x1 chi, x2)`.
pub fn vector_field_z(p: &CutoffProfile, x: Point) -> [f64; 2] {
    [x[0] * p.chi(radius(x)), x[1]]
}

/// Derivative matrix `D[i][j] = d_i Z_j`.
pub fn vector_field_z_jacobian(p: &CutoffProfile, x: Point) -> [[f64; 2]; 2] {
    let r = radius(x);
    let d = p.derivatives(r);
    let g = if r > 0.0 { d[1] / r } else { 0.0 };
    [[d[0] + x[0] * x[0] * g, 0.0], [x[0] * x[1] * g, 1.0]]
}

/// `(alpha, Delta alpha)` for the multiplier built from `p` and `q`.
pub fn alpha_and_laplacian(p: &CutoffProfile, q: f64, x: Point) -> (f64, f64) {
    let r = radius(x);
    if r <= p.r0 {
        return (0.5, 0.0);
    }
    let [chi, d1, d2, d3] = p.derivatives(r);
    let x1s = x[0] * x[0];
    let x2s = x[1] * x[1];
    let two_alpha = 1.0 + (1.0 - q) * chi + x1s * d1 / r;
    let two_lap = d1 * (-q / r + 3.0 * x2s / (r * r * r)) + d2 * (4.0 - q - 3.0 * x2s / (r * r)) + d3 * x1s / r;
    (0.5 * two_alpha, 0.5 * two_lap)
}

fn alpha_gradient(p: &CutoffProfile, q: f64, x: Point) -> [f64; 2] {
    let r = radius(x);
    if r <= p.r0 {
        return [0.0, 0.0];
    }
    let [_, d1, d2, _] = p.derivatives(r);
    // 2 alpha = 1 + (1-q) chi + x1^2 g(r) with g = chi'/r
    let g = d1 / r;
    let dg = d2 / r - d1 / (r * r);
    let radial = (1.0 - q) * d1 + x[0] * x[0] * dg;
    [
        0.5 * (radial * x[0] / r + 2.0 * x[0] * g),
        0.5 * (radial * x[1] / r),
    ]
}

/// Sup over the circle `|x| = r` of `Delta alpha`. The expression is affine
/// in `x2^2 / r^2`, so the sup is attained on an axis.
fn lap_alpha_sup_on_circle(p: &CutoffProfile, q: f64, r: f64) -> f64 {
    alpha_and_laplacian(p, q, [r, 0.0]).1.max(alpha_and_laplacian(p, q, [0.0, r]).1)
}

/// `m_alpha(r) = sup_{B_r} Delta alpha`, by a radial scan.
pub fn m_alpha(p: &CutoffProfile, q: f64, r: f64) -> f64 {
    if r <= p.r0 {
        return 0.0;
    }
    let top = r.min(p.r1);
    let n = 4096;
    let mut best: f64 = 0.0;
    for i in 0..=n {
        let s = p.r0 + (top - p.r0) * i as f64 / n as f64;
        best = best.max(lap_alpha_sup_on_circle(p, q, s));
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiplierConstants {
    pub r0: f64,
    pub r1: f64,
    pub eps: f64,
    pub c_chi: f64,
    pub q: f64,
    /// `M_alpha = m_alpha(R)` for any `R >= R1`.
    pub m_alpha_big: f64,
    pub r_star: f64,
    /// `m_alpha(R*)`.
    pub m_alpha_r_star: f64,
    /// `sup |alpha|` over `B_R` for any `R >= R1`.
    pub alpha_sup: f64,
    pub k_threshold: f64,
    /// Dimension, fixed to 2.
    pub d: u32,
}

impl MultiplierConstants {
    /// The full bracket `2 q^2 R0^2/81 + 128 R0^2 (k^2 R^2 + |alpha|^2) + 4 R^2 + R1^2`.
    pub fn resolvent_constant(&self, k: f64, r: f64) -> f64 {
        2.0 * self.q * self.q * self.r0 * self.r0 / 81.0
            + 128.0 * self.r0 * self.r0 * (k * k * r * r + self.alpha_sup * self.alpha_sup)
            + 4.0 * r * r
            + self.r1 * self.r1
    }
}

/// All explicit constants of the resolvent estimate for profile `p` and `q`.
pub fn threshold_constants(p: &CutoffProfile, q: f64) -> Result<MultiplierConstants> {
    let c = c_chi(p);
    let bound = q / (128.0 * p.r0 * p.r0);
    // running sup of the angular sup, on a fine radial grid
    let n = 2048 * 8;
    let h = (p.r1 - p.r0) / n as f64;
    let mut running: f64 = 0.0;
    let mut first_bad = None;
    let mut alpha_sup: f64 = 0.5;
    for i in 0..=n {
        let s = p.r0 + i as f64 * h;
        let v = lap_alpha_sup_on_circle(p, q, s);
        running = running.max(v);
        if first_bad.is_none() && running > bound {
            first_bad = Some(i);
        }
        alpha_sup = alpha_sup.max(alpha_and_laplacian(p, q, [s, 0.0]).0);
    }
    let m_big = running;
    let r_star = match first_bad {
        None => p.r1 - h,
        Some(0) => return Err(MorawetzError::NoFeasibleRStar),
        Some(i) => {
            // bisect the first crossing of the angular sup through the bound
            let (mut lo, mut hi) = (p.r0 + (i - 1) as f64 * h, p.r0 + i as f64 * h);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if lap_alpha_sup_on_circle(p, q, mid) > bound {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            lo
        }
    };
    if r_star <= p.r0 {
        return Err(MorawetzError::NoFeasibleRStar);
    }
    let m_r_star = m_alpha(p, q, r_star);
    let chi_star = p.chi(r_star);
    let chi_2r0 = p.chi(2.0 * p.r0);
    let k2 = (4.0 * m_big / (q * chi_star)).max(9.0 / (4.0 * p.r0 * p.r0 * chi_2r0));
    Ok(MultiplierConstants {
        r0: p.r0,
        r1: p.r1,
        eps: p.eps,
        c_chi: c,
        q,
        m_alpha_big: m_big,
        r_star,
        m_alpha_r_star: m_r_star,
        alpha_sup,
        k_threshold: k2.sqrt(),
        d: 2,
    })
}

/// A complex field with analytic gradient and Laplacian.
pub trait TestField {
    fn value(&self, x: Point) -> C;
    fn grad(&self, x: Point) -> [C; 2];
    fn laplacian(&self, x: Point) -> C;
}

/// `e^{i k x.d}`.
#[derive(Debug, Clone, Copy)]
pub struct PlaneWave {
    pub k: f64,
    pub dir: [f64; 2],
}

impl TestField for PlaneWave {
    fn value(&self, x: Point) -> C {
        C::from_polar(1.0, self.k * (x[0] * self.dir[0] + x[1] * self.dir[1]))
    }
    fn grad(&self, x: Point) -> [C; 2] {
        let v = self.value(x) * C::i() * self.k;
        [v * self.dir[0], v * self.dir[1]]
    }
    fn laplacian(&self, x: Point) -> C {
        -self.value(x) * self.k * self.k * (self.dir[0].powi(2) + self.dir[1].powi(2))
    }
}

/// Complex cubic `sum c_ab x1^a x2^b` over `a + b <= 3`, coefficients in
/// the order 1, x1, x2, x1^2, x1 x2, x2^2, x1^3, x1^2 x2, x1 x2^2, x2^3.
#[derive(Debug, Clone, Copy)]
pub struct Cubic {
    pub c: [C; 10],
}

const CUBIC_POWERS: [(i32, i32); 10] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];

fn mono(x: f64, a: i32) -> f64 {
    if a < 0 {
        0.0
    } else {
        x.powi(a)
    }
}

impl TestField for Cubic {
    fn value(&self, x: Point) -> C {
        CUBIC_POWERS.iter().zip(&self.c).map(|(&(a, b), c)| c * mono(x[0], a) * mono(x[1], b)).sum()
    }
    fn grad(&self, x: Point) -> [C; 2] {
        let gx = CUBIC_POWERS
            .iter()
            .zip(&self.c)
            .map(|(&(a, b), c)| c * a as f64 * mono(x[0], a - 1) * mono(x[1], b))
            .sum();
        let gy = CUBIC_POWERS
            .iter()
            .zip(&self.c)
            .map(|(&(a, b), c)| c * b as f64 * mono(x[0], a) * mono(x[1], b - 1))
            .sum();
        [gx, gy]
    }
    fn laplacian(&self, x: Point) -> C {
        CUBIC_POWERS
            .iter()
            .zip(&self.c)
            .map(|(&(a, b), c)| {
                c * ((a * (a - 1)) as f64 * mono(x[0], a - 2) * mono(x[1], b)
                    + (b * (b - 1)) as f64 * mono(x[0], a) * mono(x[1], b - 2))
            })
            .sum()
    }
}

/// Superposition `sum a_j Phi_k(x, y_j)` of outgoing point sources.
#[derive(Debug, Clone)]
pub struct PointSources {
    pub k: f64,
    pub sources: Vec<(Point, C)>,
}

impl TestField for PointSources {
    fn value(&self, x: Point) -> C {
        self.sources
            .iter()
            .map(|(y, a)| a * fundamental_solution(self.k, x, *y).expect("evaluation away from sources"))
            .sum()
    }
    fn grad(&self, x: Point) -> [C; 2] {
        let mut g = [C::new(0.0, 0.0); 2];
        for (y, a) in &self.sources {
            let d = fundamental_solution_grad(self.k, x, *y).expect("evaluation away from sources");
            g[0] += a * d[0];
            g[1] += a * d[1];
        }
        g
    }
    fn laplacian(&self, x: Point) -> C {
        -self.value(x) * self.k * self.k
    }
}

/// Real multiplier data `(Z, alpha)` with derivatives.
pub trait Multiplier {
    fn z(&self, x: Point) -> [f64; 2];
    /// `D[i][j] = d_i Z_j`.
    fn dz(&self, x: Point) -> [[f64; 2]; 2];
    fn alpha(&self, x: Point) -> f64;
    fn grad_alpha(&self, x: Point) -> [f64; 2];
    fn lap_alpha(&self, x: Point) -> f64;
}

/// `Z = x` with constant `alpha`.
#[derive(Debug, Clone, Copy)]
pub struct RadialMultiplier {
    pub alpha: f64,
}

impl Multiplier for RadialMultiplier {
    fn z(&self, x: Point) -> [f64; 2] {
        x
    }
    fn dz(&self, _x: Point) -> [[f64; 2]; 2] {
        [[1.0, 0.0], [0.0, 1.0]]
    }
    fn alpha(&self, _x: Point) -> f64 {
        self.alpha
    }
    fn grad_alpha(&self, _x: Point) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn lap_alpha(&self, _x: Point) -> f64 {
        0.0
    }
}

/// The cutoff-built multiplier `Z = (x1 chi, x2)` with its `alpha`.
#[derive(Debug, Clone)]
pub struct ProfileMultiplier {
    pub profile: CutoffProfile,
    pub q: f64,
}

impl Multiplier for ProfileMultiplier {
    fn z(&self, x: Point) -> [f64; 2] {
        vector_field_z(&self.profile, x)
    }
    fn dz(&self, x: Point) -> [[f64; 2]; 2] {
        vector_field_z_jacobian(&self.profile, x)
    }
    fn alpha(&self, x: Point) -> f64 {
        alpha_and_laplacian(&self.profile, self.q, x).0
    }
    fn grad_alpha(&self, x: Point) -> [f64; 2] {
        alpha_gradient(&self.profile, self.q, x)
    }
    fn lap_alpha(&self, x: Point) -> f64 {
        alpha_and_laplacian(&self.profile, self.q, x).1
    }
}

fn centered_divergence<F: Fn(Point) -> [f64; 2]>(f: F, x: Point, h: f64) -> f64 {
    let fx = (f([x[0] + h, x[1]])[0] - f([x[0] - h, x[1]])[0]) / (2.0 * h);
    let fy = (f([x[0], x[1] + h])[1] - f([x[0], x[1] - h])[1]) / (2.0 * h);
    fx + fy
}

fn abs2(g: &[C; 2]) -> f64 {
    g[0].norm_sqr() + g[1].norm_sqr()
}

/// `|LHS - RHS|` of the Morawetz identity at `x` for constant `beta`, with
/// the divergence term taken by centered differences of step `h`.
pub fn morawetz_residual(v: &dyn TestField, m: &dyn Multiplier, k: f64, beta: f64, x: Point, h: f64) -> f64 {
    let zv = |y: Point| -> C {
        let z = m.z(y);
        let g = v.grad(y);
        g[0] * z[0] + g[1] * z[1] - C::i() * k * beta * v.value(y) + m.alpha(y) * v.value(y)
    };
    let flux = |y: Point| -> [f64; 2] {
        let g = v.grad(y);
        let u = v.value(y);
        let w = zv(y).conj();
        let e = k * k * u.norm_sqr() - abs2(&g);
        let z = m.z(y);
        let ga = m.grad_alpha(y);
        [
            2.0 * (w * g[0]).re + e * z[0] - ga[0] * u.norm_sqr(),
            2.0 * (w * g[1]).re + e * z[1] - ga[1] * u.norm_sqr(),
        ]
    };
    let u = v.value(x);
    let g = v.grad(x);
    let lv = v.laplacian(x) + u * k * k;
    let lhs = 2.0 * (zv(x).conj() * lv).re;
    let d = m.dz(x);
    let div_z = d[0][0] + d[1][1];
    let mut quad = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            quad += d[i][j] * (g[i] * g[j].conj()).re;
        }
    }
    let e = k * k * u.norm_sqr() - abs2(&g);
    let rhs = centered_divergence(flux, x, h) + (2.0 * m.alpha(x) - div_z) * e - 2.0 * quad + m.lap_alpha(x) * u.norm_sqr();
    (lhs - rhs).abs()
}

fn ml_multiplier(v: &dyn TestField, k: f64, alpha: f64, y: Point) -> C {
    let g = v.grad(y);
    let r = radius(y);
    g[0] * y[0] + g[1] * y[1] - C::i() * k * r * v.value(y) + alpha * v.value(y)
}

/// Non-divergence side `P(v)` of the Morawetz-Ludwig identity, assuming
/// `L v = 0`: `(1 - 2 alpha)(k^2|v|^2 - |grad v|^2) + |grad v|^2 - |v_r|^2 + |v_r - i k v|^2`.
pub fn morawetz_ludwig_p(v: &dyn TestField, k: f64, alpha: f64, x: Point) -> f64 {
    let u = v.value(x);
    let g = v.grad(x);
    let r = radius(x);
    let vr = (g[0] * x[0] + g[1] * x[1]) / r;
    let e = k * k * u.norm_sqr() - abs2(&g);
    -(2.0 * alpha - 1.0) * e + (abs2(&g) - vr.norm_sqr()) + (vr - C::i() * k * u).norm_sqr()
}

/// `|LHS - RHS|` of the Morawetz-Ludwig identity at `x != 0`.
pub fn morawetz_ludwig_residual(v: &dyn TestField, k: f64, alpha: f64, x: Point, h: f64) -> f64 {
    let flux = |y: Point| -> [f64; 2] {
        let g = v.grad(y);
        let w = ml_multiplier(v, k, alpha, y).conj();
        let e = k * k * v.value(y).norm_sqr() - abs2(&g);
        [2.0 * (w * g[0]).re + e * y[0], 2.0 * (w * g[1]).re + e * y[1]]
    };
    let u = v.value(x);
    let g = v.grad(x);
    let r = radius(x);
    let vr = (g[0] * x[0] + g[1] * x[1]) / r;
    let lv = v.laplacian(x) + u * k * k;
    let lhs = 2.0 * (ml_multiplier(v, k, alpha, x).conj() * lv).re;
    let e = k * k * u.norm_sqr() - abs2(&g);
    let rhs = centered_divergence(flux, x, h) + (2.0 * alpha - 1.0) * e
        - (abs2(&g) - vr.norm_sqr())
        - (vr - C::i() * k * u).norm_sqr();
    (lhs - rhs).abs()
}

/// Real field sampled at `(x0 + i h, y0 + j h)`, row-major in `j`.
#[derive(Debug, Clone)]
pub struct GridField {
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl GridField {
    /// Sample `f` on a square grid of half-width `half` with `n` points per side.
    pub fn sample<F: Fn(Point) -> f64>(f: F, half: f64, n: usize) -> Self {
        let h = 2.0 * half / (n - 1) as f64;
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                values.push(f([-half + i as f64 * h, -half + j as f64 * h]));
            }
        }
        GridField {
            x0: -half,
            y0: -half,
            h,
            nx: n,
            ny: n,
            values,
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }
}

/// Both sides of the Friedrichs-type inequality
/// `int_{B_2R} |v|^2 <= 8 int_{B_sqrt13R \ B_2R} |v|^2 + 4 R^2 int_{B_sqrt13R} |d_2 v|^2`
/// by midpoint-weighted grid sums, with `d_2 v` by centered differences.
pub fn friedrichs_check(v: &GridField, r: f64) -> Result<(f64, f64)> {
    let cells = (4.0 * r / v.h).floor() as usize;
    if cells < 64 {
        return Err(MorawetzError::GridTooCoarse(cells));
    }
    let outer = 13f64.sqrt() * r;
    let x1 = v.x0 + (v.nx - 1) as f64 * v.h;
    let y1 = v.y0 + (v.ny - 1) as f64 * v.h;
    if v.x0 > -outer - v.h || v.y0 > -outer - v.h || x1 < outer + v.h || y1 < outer + v.h {
        return Err(MorawetzError::GridTooSmall);
    }
    let area = v.h * v.h;
    let (mut lhs, mut ann, mut grad) = (0.0, 0.0, 0.0);
    for j in 1..v.ny - 1 {
        for i in 1..v.nx - 1 {
            let p = [v.x0 + i as f64 * v.h, v.y0 + j as f64 * v.h];
            let rr = radius(p);
            if rr >= outer {
                continue;
            }
            let val = v.at(i, j);
            if rr < 2.0 * r {
                lhs += val * val * area;
            } else {
                ann += val * val * area;
            }
            let d2 = (v.at(i, j + 1) - v.at(i, j - 1)) / (2.0 * v.h);
            grad += d2 * d2 * area;
        }
    }
    Ok((lhs, 8.0 * ann + 4.0 * r * r * grad))
}

/// Result of the flux check on the circle `|x| = R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxCheck {
    /// `Re int ubar u_r ds`.
    pub re_flux: f64,
    /// `Im int ubar u_r ds`, the outgoing energy flux.
    pub im_flux: f64,
    /// `R int (|u_r|^2 - |grad_S u|^2 + k^2|u|^2) - 2kR Im int ubar u_r + Re int ubar u_r`.
    pub lhs_21: f64,
}

/// Radiation inequalities on `|x| = R` for point sources inside `B_{R/2}`,
/// by the trapezoid rule.
pub fn radiating_flux_check(u: &PointSources, r: f64) -> Result<FluxCheck> {
    for (y, _) in &u.sources {
        let d = radius(*y);
        if d >= 0.5 * r {
            return Err(MorawetzError::SourceOutside { dist: d, r });
        }
    }
    let n = ((8.0 * u.k * r) as usize).max(512);
    let ds = 2.0 * std::f64::consts::PI * r / n as f64;
    let (mut re, mut im, mut energy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let th = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        let (s, c) = th.sin_cos();
        let x = [r * c, r * s];
        let val = u.value(x);
        let g = u.grad(x);
        let ur = g[0] * c + g[1] * s;
        let us = -g[0] * s + g[1] * c;
        let f = val.conj() * ur;
        re += f.re * ds;
        im += f.im * ds;
        energy += (ur.norm_sqr() - us.norm_sqr() + u.k * u.k * val.norm_sqr()) * ds;
    }
    Ok(FluxCheck {
        re_flux: re,
        im_flux: im,
        lhs_21: r * energy - 2.0 * u.k * r * im + re,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_ends() {
        assert_eq!(smoothstep(0.0), (0.0, 0.0, 0.0));
        assert_eq!(smoothstep(1.0), (1.0, 0.0, 0.0));
        let (v, d, _) = smoothstep(0.5);
        assert!((v - 0.5).abs() < 1e-15 && (d - 1.875).abs() < 1e-14);
    }

    #[test]
    fn chebyshev_reproduces_smooth_function() {
        let c = Chebyshev::fit(|x: f64| (2.0 * x).sin(), 0.3, 1.1, 30);
        for i in 0..50 {
            let x = 0.3 + 0.8 * i as f64 / 49.0;
            assert!((c.eval(x) - (2.0 * x).sin()).abs() < 1e-14);
        }
    }
}
