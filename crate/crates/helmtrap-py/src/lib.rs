//! Python bindings: special functions, the circle symbol, geometry
//! classification, operator sweeps, quasimodes, scattering and full
//! experiment runs. Geometries are passed as JSON objects with a `type` tag,
//! for example `{"type": "two_squares", "side": 1.0, "gap": 0.5}`.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use helmtrap_core::cli::config::{ConstantsConfig, ExperimentConfig};
use helmtrap_core::cli::runner::{constants_table, run};
use helmtrap_core::cli::CliError;
use helmtrap_core::geometry::{classify, make_geometry, Boundary, GeometrySpec};
use helmtrap_core::layer_ops::MeshParams;
use helmtrap_core::quasimode::quasimode_residual;
use helmtrap_core::scattering::{solve_soundsoft_on, IncidentWave};
use helmtrap_core::spectra::{class_label, k_sweep};

/// Boundary samples used by `classify_geometry`.
const CLASSIFY_SAMPLES: usize = 4000;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn cli_err(e: CliError) -> PyErr {
    match e {
        CliError::Numerical(_) => runtime_err(e),
        _ => value_err(e),
    }
}

fn boundary(geometry: &str) -> PyResult<Boundary> {
    let spec: GeometrySpec = serde_json::from_str(geometry).map_err(value_err)?;
    make_geometry(&spec).map_err(value_err)
}

fn mesh_params(ppw: f64, corner_depth: u32) -> MeshParams {
    MeshParams {
        ppw,
        corner_depth,
        ..MeshParams::default()
    }
}

/// Hankel function of the first kind `H_n^(1)(x)` for `n` in {0, 1}.
#[pyfunction]
fn hankel1(order: u8, x: f64) -> PyResult<Complex64> {
    helmtrap_core::special_functions::hankel1(order, x).map_err(value_err)
}

/// Fundamental solution `(i/4) H_0^(1)(k |x - y|)`.
#[pyfunction]
fn fundamental_solution(k: f64, x: [f64; 2], y: [f64; 2]) -> PyResult<Complex64> {
    helmtrap_core::special_functions::fundamental_solution(k, x, y).map_err(value_err)
}

/// Eigenvalues of the combined-field operator on the circle of radius `radius`
/// for modes `0..=n_max`.
#[pyfunction]
fn circle_eigenvalues(k: f64, eta: f64, radius: f64, n_max: usize) -> PyResult<Vec<Complex64>> {
    let modes = helmtrap_core::layer_ops::circle_eigenvalues(k, eta, radius, n_max).map_err(value_err)?;
    Ok(modes.into_iter().map(|m| m.a).collect())
}

/// Trapping class label and the JSON form of the full classification.
#[pyfunction]
fn classify_geometry(geometry: &str) -> PyResult<(String, String)> {
    let b = boundary(geometry)?;
    let c = classify(&b, CLASSIFY_SAMPLES);
    let json = serde_json::to_string(&c).map_err(runtime_err)?;
    Ok((class_label(&c).to_string(), json))
}

/// One dict per wavenumber with `k, eta, n_nodes, sigma_max, sigma_min,
/// cond, norm_S, norm_Dp`; `eta = eta_coefficient * k`.
#[pyfunction]
#[pyo3(signature = (geometry, ks, eta_coefficient = 1.0, ppw = 30.0, corner_depth = 12))]
fn sweep<'py>(
    py: Python<'py>,
    geometry: &str,
    ks: Vec<f64>,
    eta_coefficient: f64,
    ppw: f64,
    corner_depth: u32,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let b = boundary(geometry)?;
    let params = mesh_params(ppw, corner_depth);
    let result = py
        .detach(|| k_sweep(&b, &ks, eta_coefficient, params))
        .map_err(|a| runtime_err(a.error))?;
    result
        .records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("k", r.k)?;
            d.set_item("eta", r.eta)?;
            d.set_item("n_nodes", r.n_nodes)?;
            d.set_item("sigma_max", r.sigma_max)?;
            d.set_item("sigma_min", r.sigma_min)?;
            d.set_item("cond", r.cond)?;
            d.set_item("norm_S", r.norm_s)?;
            d.set_item("norm_Dp", r.norm_dp)?;
            Ok(d)
        })
        .collect()
}

/// Quasimode residual, certified resolvent lower bound and coercivity probe
/// on a geometry with facing walls.
#[pyfunction]
#[pyo3(signature = (geometry, k, eta_coefficient = 1.0, ppw = 30.0, corner_depth = 12))]
fn quasimode<'py>(
    py: Python<'py>,
    geometry: &str,
    k: f64,
    eta_coefficient: f64,
    ppw: f64,
    corner_depth: u32,
) -> PyResult<Bound<'py, PyDict>> {
    let b = boundary(geometry)?;
    let params = mesh_params(ppw, corner_depth);
    let r = py
        .detach(|| quasimode_residual(&b, k, eta_coefficient * k, params))
        .map_err(runtime_err)?;
    let d = PyDict::new(py);
    d.set_item("k", r.k)?;
    d.set_item("eta", r.eta)?;
    d.set_item("phi_norm", r.phi_norm)?;
    d.set_item("residual", r.residual)?;
    d.set_item("lower_bound", r.lower_bound)?;
    d.set_item("coercivity_probe", r.coercivity_probe)?;
    Ok(d)
}

/// `L^2` norm of the Neumann trace of the total field for a plane wave
/// incident along `(cos angle, sin angle)` on a sound-soft obstacle.
#[pyfunction]
#[pyo3(signature = (geometry, k, angle = 0.0, eta_coefficient = 1.0, ppw = 30.0, corner_depth = 12))]
fn neumann_norm(
    py: Python<'_>,
    geometry: &str,
    k: f64,
    angle: f64,
    eta_coefficient: f64,
    ppw: f64,
    corner_depth: u32,
) -> PyResult<f64> {
    let b = boundary(geometry)?;
    let params = mesh_params(ppw, corner_depth);
    let w = IncidentWave::from_angle(angle, k);
    let (_, sol) = py
        .detach(|| solve_soundsoft_on(&b, &w, eta_coefficient * k, params))
        .map_err(runtime_err)?;
    Ok(sol.neumann_norm)
}

/// Least-squares fit of `log value = slope log k + intercept`, returning
/// `(slope, intercept, half_width)`.
#[pyfunction]
fn fit_growth(ks: Vec<f64>, values: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let f = helmtrap_core::spectra::fit_growth(&ks, &values).map_err(value_err)?;
    Ok((f.slope, f.intercept, f.half_width))
}

/// Cutoff and threshold constants for radii `(r0, r1)` and ramp width
/// `eps_fraction * epsilon_0`, as the JSON form of the constants table.
#[pyfunction]
#[pyo3(signature = (r0, r1, eps_fraction = 0.5))]
fn constants(r0: f64, r1: f64, eps_fraction: f64) -> PyResult<String> {
    let cc = ConstantsConfig {
        r0: Some(r0),
        r1: Some(r1),
        eps_fraction,
        evaluate_k: Vec::new(),
        evaluate_r: Vec::new(),
    };
    // the radii are given, so the boundary only names the run
    let b = make_geometry(&GeometrySpec::Circle {
        radius: r0,
        center: [0.0, 0.0],
    })
    .map_err(value_err)?;
    let t = constants_table(&b, &cc).map_err(cli_err)?;
    serde_json::to_string(&t).map_err(runtime_err)
}

/// Run the experiment described by a TOML config and return the report lines.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &str) -> PyResult<Vec<String>> {
    let cfg = ExperimentConfig::from_toml(config).map_err(cli_err)?;
    let out = py.detach(|| run(&cfg)).map_err(cli_err)?;
    Ok(out.report)
}

#[pymodule]
fn helmtrap(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(hankel1, m)?)?;
    m.add_function(wrap_pyfunction!(fundamental_solution, m)?)?;
    m.add_function(wrap_pyfunction!(circle_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(classify_geometry, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(quasimode, m)?)?;
    m.add_function(wrap_pyfunction!(neumann_norm, m)?)?;
    m.add_function(wrap_pyfunction!(fit_growth, m)?)?;
    m.add_function(wrap_pyfunction!(constants, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
