//! Sound-soft plane-wave scattering through `A' (d_n u) = d_n u^i - i eta u^i`,
//! field evaluation by the single-layer representation, and circle series.

use std::f64::consts::PI;

use ndarray::Array1;
use ndarray_linalg::Solve;
use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Boundary, Point};
use crate::layer_ops::{bernstein_rho, build_mesh, DiscreteOperator, LayerError, Mesh, MeshParams};
use crate::special_functions::{bessel_jy_sequence, fundamental_solution, fundamental_solution_grad, Scaled, SpecialError};
use crate::spectra::{norms_and_combined, singular_values, SpectraError};

/// Smallest Bernstein-ellipse parameter of an evaluation point relative to
/// any panel; 16-point Gauss then converges like `FIELD_RHO^-32`.
pub const FIELD_RHO: f64 = 2.0;
/// Required relative residual of the dense solve.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ScatteringError {
    #[error("incident direction must be a unit vector, got {0:?}")]
    BadDirection([f64; 2]),
    #[error("coupling parameter eta must be nonzero")]
    ZeroEta,
    #[error("near-singular system: relative residual {residual:e}, sigma_min about {sigma_min:e}")]
    NearSingular { residual: f64, sigma_min: f64 },
    #[error("evaluation point {0:?} is too close to the boundary for panel quadrature")]
    TooClose(Point),
    #[error("operator is not the scaled A' on this mesh")]
    Mismatch,
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Special(#[from] SpecialError),
}

pub type Result<T> = std::result::Result<T, ScatteringError>;

/// `u^i(x) = exp(i k x . d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncidentWave {
    pub direction: [f64; 2],
    pub k: f64,
}

impl IncidentWave {
    pub fn new(direction: [f64; 2], k: f64) -> Result<Self> {
        if (direction[0].hypot(direction[1]) - 1.0).abs() > 1e-12 {
            return Err(ScatteringError::BadDirection(direction));
        }
        Ok(IncidentWave { direction, k })
    }

    /// Direction `(cos angle, sin angle)`.
    pub fn from_angle(angle: f64, k: f64) -> Self {
        IncidentWave {
            direction: [angle.cos(), angle.sin()],
            k,
        }
    }

    pub fn value(&self, x: Point) -> C {
        C::new(0.0, self.k * (x[0] * self.direction[0] + x[1] * self.direction[1])).exp()
    }

    pub fn normal_derivative(&self, x: Point, n: Point) -> C {
        C::new(0.0, self.k * (n[0] * self.direction[0] + n[1] * self.direction[1])) * self.value(x)
    }
}

/// Nodal values of `d_n u^i - i eta u^i`.
pub fn plane_wave_trace(w: &IncidentWave, eta: f64, mesh: &Mesh) -> Result<Vec<C>> {
    if eta == 0.0 {
        return Err(ScatteringError::ZeroEta);
    }
    Ok(mesh
        .nodes
        .iter()
        .zip(&mesh.normals)
        .map(|(x, n)| w.normal_derivative(*x, *n) - C::new(0.0, eta) * w.value(*x))
        .collect())
}

/// Neumann trace of the total field and the achieved residual.
#[derive(Debug, Clone, PartialEq)]
pub struct SoundSoftSolution {
    pub wave: IncidentWave,
    pub eta: f64,
    /// Nodal values of `d_n^+ u^t`.
    pub density: Vec<C>,
    pub residual: f64,
    /// `||d_n^+ u^t||` in `L^2(Gamma)`.
    pub neumann_norm: f64,
}

/// Dense LU solve of the scaled system `A' v = f`.
pub fn solve_soundsoft(op: &DiscreteOperator, mesh: &Mesh, w: &IncidentWave) -> Result<SoundSoftSolution> {
    if !op.l2_scaled || op.dim() != mesh.len() || op.weights != mesh.weights {
        return Err(ScatteringError::Mismatch);
    }
    let eta = op.eta.ok_or(ScatteringError::Mismatch)?;
    let f = plane_wave_trace(w, eta, mesh)?;
    let sw = mesh.sqrt_weights();
    let rhs = Array1::from_iter(f.iter().zip(&sw).map(|(v, s)| v * s));
    let near_singular = |residual: f64| -> ScatteringError {
        let sigma_min = singular_values(op.matrix.clone())
            .ok()
            .and_then(|s| s.last().copied())
            .unwrap_or(f64::NAN);
        ScatteringError::NearSingular { residual, sigma_min }
    };
    let psi = match op.matrix.solve(&rhs) {
        Ok(p) => p,
        Err(_) => return Err(near_singular(f64::INFINITY)),
    };
    let r = op.matrix.dot(&psi) - &rhs;
    let residual = r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() / rhs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if !(residual <= SOLVE_TOLERANCE) {
        return Err(near_singular(residual));
    }
    let density: Vec<C> = psi.iter().zip(&sw).map(|(v, s)| v / s).collect();
    let neumann_norm = mesh.l2_norm(&density);
    Ok(SoundSoftSolution {
        wave: *w,
        eta,
        density,
        residual,
        neumann_norm,
    })
}

/// Build the mesh and `A'`, then solve.
pub fn solve_soundsoft_on(b: &Boundary, w: &IncidentWave, eta: f64, params: MeshParams) -> Result<(Mesh, SoundSoftSolution)> {
    let mesh = build_mesh(b, w.k, params)?;
    let (_, _, op) = norms_and_combined(&mesh, eta)?;
    let sol = solve_soundsoft(&op, &mesh, w)?;
    Ok((mesh, sol))
}

fn check_far(mesh: &Mesh, x: Point) -> Result<()> {
    for p in &mesh.panels {
        let arc = &mesh.boundary.loops[p.loop_index].arcs[p.arc_index];
        if bernstein_rho(x, arc.point(p.t0), arc.point(p.t1)) < FIELD_RHO {
            return Err(ScatteringError::TooClose(x));
        }
    }
    Ok(())
}

/// Scattered field `u^s(x) = -int Phi_k(x, y) d_n u^t(y) ds(y)` and its
/// gradient.
pub fn scattered_field(mesh: &Mesh, sol: &SoundSoftSolution, x: Point) -> Result<(C, [C; 2])> {
    check_far(mesh, x)?;
    let k = sol.wave.k;
    let mut u = C::new(0.0, 0.0);
    let mut g = [C::new(0.0, 0.0); 2];
    for ((y, v), w) in mesh.nodes.iter().zip(&sol.density).zip(&mesh.weights) {
        let c = v * w;
        u -= fundamental_solution(k, x, *y)? * c;
        let d = fundamental_solution_grad(k, x, *y)?;
        g[0] -= d[0] * c;
        g[1] -= d[1] * c;
    }
    Ok((u, g))
}

/// Total field `u^t = u^i + u^s` at each point.
pub fn evaluate_field(mesh: &Mesh, sol: &SoundSoftSolution, points: &[Point]) -> Result<Vec<C>> {
    points
        .par_iter()
        .map(|x| Ok(sol.wave.value(*x) + scattered_field(mesh, sol, *x)?.0))
        .collect()
}

/// `|(d_r - i k) u^s|` at distance `r` along the ray in direction `angle`.
pub fn radiation_defect(mesh: &Mesh, sol: &SoundSoftSolution, r: f64, angle: f64) -> Result<f64> {
    let dir = [angle.cos(), angle.sin()];
    let (u, g) = scattered_field(mesh, sol, [r * dir[0], r * dir[1]])?;
    let ur = g[0] * dir[0] + g[1] * dir[1];
    Ok((ur - C::new(0.0, sol.wave.k) * u).norm())
}

/// `int_{|x| = R} conj(u^s) d_r u^s ds` by the trapezoid rule.
pub fn energy_flux(mesh: &Mesh, sol: &SoundSoftSolution, radius: f64) -> Result<C> {
    let m = ((4.0 * sol.wave.k * radius) as usize).max(128);
    let h = 2.0 * PI / m as f64;
    let terms: Vec<C> = (0..m)
        .into_par_iter()
        .map(|j| {
            let t = j as f64 * h;
            let dir = [t.cos(), t.sin()];
            let (u, g) = scattered_field(mesh, sol, [radius * dir[0], radius * dir[1]])?;
            Ok(u.conj() * (g[0] * dir[0] + g[1] * dir[1]))
        })
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum::<C>() * h * radius)
}

/// Complex number `m 2^e` with a shared binary exponent.
#[derive(Clone, Copy)]
struct ScaledC {
    m: C,
    e: i64,
}

impl ScaledC {
    fn hankel(j: Scaled, y: Scaled) -> Self {
        let e = if j.mantissa == 0.0 { y.exponent } else { j.exponent.max(y.exponent) };
        let re = Scaled { mantissa: j.mantissa, exponent: j.exponent - e }.value();
        let im = Scaled { mantissa: y.mantissa, exponent: y.exponent - e }.value();
        ScaledC { m: C::new(re, im), e }
    }

    fn real(j: Scaled) -> Self {
        ScaledC {
            m: C::new(j.mantissa, 0.0),
            e: j.exponent,
        }
    }

    fn mul(self, o: ScaledC) -> Self {
        ScaledC { m: self.m * o.m, e: self.e + o.e }
    }

    fn div(self, o: ScaledC) -> Self {
        ScaledC { m: self.m / o.m, e: self.e - o.e }
    }

    fn value(self) -> C {
        let f = |v: f64| Scaled { mantissa: v, exponent: self.e }.value();
        C::new(f(self.m.re), f(self.m.im))
    }
}

fn series_terms(x: f64) -> usize {
    (x + 12.0 * x.cbrt() + 40.0) as usize
}

/// `i^n` for integer `n >= 0`.
fn i_pow(n: usize) -> C {
    match n % 4 {
        0 => C::new(1.0, 0.0),
        1 => C::new(0.0, 1.0),
        2 => C::new(-1.0, 0.0),
        _ => C::new(0.0, -1.0),
    }
}

/// Neumann trace of the total field on the sound-soft circle of radius `R`
/// centred at the origin, at polar angle `theta`:
/// `d_n u^t = -(2i/(pi R)) sum_n i^n exp(i n (theta - alpha)) / H_n(kR)`.
pub fn circle_neumann_series(k: f64, radius: f64, incident_angle: f64, theta: f64) -> Result<C> {
    let x = k * radius;
    let n_max = series_terms(x);
    let (j, y) = bessel_jy_sequence(x, n_max)?;
    let mut acc = C::new(0.0, 0.0);
    for n in 0..=n_max {
        let h = ScaledC::hankel(j[n], y[n]);
        let inv = ScaledC { m: C::new(1.0, 0.0), e: 0 }.div(h).value();
        let c = 2.0 * (n as f64 * (theta - incident_angle)).cos();
        let weight = if n == 0 { 1.0 } else { c };
        acc += i_pow(n) * inv * weight;
    }
    Ok(C::new(0.0, -2.0 / (PI * radius)) * acc)
}

/// Total field outside the sound-soft circle at polar point `(r, theta)`:
/// `u^t = sum_n i^n (J_n(kr) - J_n(kR) H_n(kr) / H_n(kR)) exp(i n (theta - alpha))`.
pub fn circle_field_series(k: f64, radius: f64, incident_angle: f64, r: f64, theta: f64) -> Result<C> {
    let n_max = series_terms(k * r);
    let (jr, yr) = bessel_jy_sequence(k * r, n_max)?;
    let (ja, ya) = bessel_jy_sequence(k * radius, n_max)?;
    let mut acc = C::new(0.0, 0.0);
    for n in 0..=n_max {
        let hr = ScaledC::hankel(jr[n], yr[n]);
        let ha = ScaledC::hankel(ja[n], ya[n]);
        let scat = ScaledC::real(ja[n]).mul(hr).div(ha).value();
        let term = C::new(jr[n].value(), 0.0) - scat;
        let weight = if n == 0 { 1.0 } else { 2.0 * (n as f64 * (theta - incident_angle)).cos() };
        acc += i_pow(n) * term * weight;
    }
    Ok(acc)
}

/// Column names of the scattering CSV.
pub const SCATTER_CSV_HEADER: [&str; 2] = ["k", "neumann_norm"];
