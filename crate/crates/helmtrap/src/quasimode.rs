//! The two-wall quasimode density that certifies growth of `||(A')^-1||`
//! along `k = m pi / a`, and the coercivity probe `(A' phi, phi)`.

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::geometry::BUMP_FRACTION;
use crate::geometry::{Boundary, FacingSegments};
use crate::layer_ops::{DiscreteOperator, Mesh, MeshParams};
use crate::spectra::{norms_and_combined, SpectraError};

#[derive(Debug, Error)]
pub enum QuasimodeError {
    #[error("geometry {0} records no facing flat segments")]
    NoFacing(String),
    #[error("no mesh nodes found on the facing segment at x1 = {0}")]
    EmptySegment(f64),
    #[error("operator is not the scaled A' on this mesh")]
    Mismatch,
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Layer(#[from] crate::layer_ops::LayerError),
}

pub type Result<T> = std::result::Result<T, QuasimodeError>;

/// `exp(-1/(1 - t^2))` on `|t| < 1`, zero outside.
pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// Nodal values of `phi = c_j bump((x2 - center)/half_width)` on the facing
/// segment `{x1 = a_j}`, zero elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasimodeDensity {
    pub values: Vec<C>,
    pub segments: FacingSegments,
    pub center: f64,
    pub half_width: f64,
    /// `c_1 = 1`, `c_2 = -exp(i k a)`.
    pub phases: [C; 2],
    /// `||phi||` in `L^2(Gamma)`.
    pub norm: f64,
}

/// Indices of nodes on `{x1 = a}` whose normal is `sign * e1`.
fn segment_nodes(mesh: &Mesh, a: f64, sign: f64) -> Vec<usize> {
    let tol = 1e-12 * (1.0 + a.abs());
    (0..mesh.len())
        .filter(|&i| (mesh.nodes[i][0] - a).abs() <= tol && (mesh.normals[i][0] - sign).abs() < 1e-12)
        .collect()
}

/// Build the density on `mesh` for wavenumber `k`.
pub fn build_quasimode(mesh: &Mesh, b: &Boundary, k: f64) -> Result<QuasimodeDensity> {
    let f = b.meta.facing.ok_or_else(|| QuasimodeError::NoFacing(b.label().to_string()))?;
    let (center, half_width) = f.bump_window();
    let phases = [C::new(1.0, 0.0), -C::new(0.0, k * f.gap()).exp()];
    let mut values = vec![C::new(0.0, 0.0); mesh.len()];
    for (j, (a, sign)) in [(f.a1, 1.0), (f.a2, -1.0)].into_iter().enumerate() {
        let idx = segment_nodes(mesh, a, sign);
        if idx.is_empty() {
            return Err(QuasimodeError::EmptySegment(a));
        }
        for i in idx {
            values[i] = phases[j] * bump((mesh.nodes[i][1] - center) / half_width);
        }
    }
    let norm = mesh.l2_norm(&values);
    Ok(QuasimodeDensity {
        values,
        segments: f,
        center,
        half_width,
        phases,
        norm,
    })
}

/// Residual ratio and the lower bound it certifies for `||(A')^-1||`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasimodeReport {
    pub k: f64,
    pub eta: f64,
    pub phi_norm: f64,
    /// `||A' phi|| / ||phi||`.
    pub residual: f64,
    /// `||phi|| / ||A' phi||`.
    pub lower_bound: f64,
    /// `|(A' phi, phi)| / ||phi||^2`.
    pub coercivity_probe: f64,
}

fn check_operator(op: &DiscreteOperator, mesh: &Mesh) -> Result<()> {
    if !op.l2_scaled || op.dim() != mesh.len() || op.weights != mesh.weights {
        return Err(QuasimodeError::Mismatch);
    }
    Ok(())
}

/// `A' phi` as nodal values, from the scaled `A'` on the same mesh.
pub fn apply_unscaled(op: &DiscreteOperator, mesh: &Mesh, phi: &[C]) -> Result<Vec<C>> {
    check_operator(op, mesh)?;
    let sw = mesh.sqrt_weights();
    let psi: Vec<C> = phi.iter().zip(&sw).map(|(v, s)| v * s).collect();
    Ok(op.apply(&psi).iter().zip(&sw).map(|(v, s)| v / s).collect())
}

/// Residual, lower bound and coercivity probe for `phi` under the scaled
/// `A'` assembled on `mesh`.
pub fn quasimode_report_on(op: &DiscreteOperator, mesh: &Mesh, phi: &QuasimodeDensity) -> Result<QuasimodeReport> {
    let image = apply_unscaled(op, mesh, &phi.values)?;
    let image_norm = mesh.l2_norm(&image);
    let inner: C = image
        .iter()
        .zip(&phi.values)
        .zip(&mesh.weights)
        .map(|((a, p), w)| a * p.conj() * w)
        .sum();
    Ok(QuasimodeReport {
        k: mesh.k,
        eta: op.eta.unwrap_or(f64::NAN),
        phi_norm: phi.norm,
        residual: image_norm / phi.norm,
        lower_bound: phi.norm / image_norm,
        coercivity_probe: inner.norm() / (phi.norm * phi.norm),
    })
}

/// Assemble `A'_{k,eta}` on a fresh mesh and evaluate the quasimode there.
pub fn quasimode_residual(b: &Boundary, k: f64, eta: f64, params: MeshParams) -> Result<QuasimodeReport> {
    let mesh = crate::layer_ops::build_mesh(b, k, params)?;
    let phi = build_quasimode(&mesh, b, k)?;
    let (_, _, op) = norms_and_combined(&mesh, eta)?;
    quasimode_report_on(&op, &mesh, &phi)
}

/// `|(A' phi, phi)_Gamma| / ||phi||^2` for the two-wall density. Requires
/// facing segments whose normals point into the gap between them.
pub fn coercivity_probe(b: &Boundary, k: f64, eta: f64, params: MeshParams) -> Result<f64> {
    Ok(quasimode_residual(b, k, eta, params)?.coercivity_probe)
}

/// Column names appended to the sweep CSV.
pub const QUASIMODE_CSV_COLUMNS: [&str; 4] = ["phi_norm", "residual", "lower_bound", "coercivity_probe"];
