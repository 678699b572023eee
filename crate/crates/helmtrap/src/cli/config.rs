//! TOML experiment configuration. One file fully determines a run, and
//! `to_toml(from_toml(s))` reproduces `to_toml` output byte for byte.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::{make_geometry, Boundary, GeometrySpec};
use crate::layer_ops::{MeshParams, DEFAULT_MAX_NODES};
use crate::spectra::{log_grid, quantized_ks};

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Sweep,
    Quasimode,
    Coercivity,
    Scatter,
    Constants,
    GeometryCheck,
    Identities,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Quasimode => "quasimode",
            ExperimentKind::Coercivity => "coercivity",
            ExperimentKind::Scatter => "scatter",
            ExperimentKind::Constants => "constants",
            ExperimentKind::GeometryCheck => "geometry-check",
            ExperimentKind::Identities => "identities",
        }
    }

    /// Kinds that loop over a wavenumber list.
    pub fn needs_wavenumbers(self) -> bool {
        matches!(
            self,
            ExperimentKind::Sweep | ExperimentKind::Quasimode | ExperimentKind::Coercivity | ExperimentKind::Scatter
        )
    }
}

/// `eta = coefficient * k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaRule {
    pub coefficient: f64,
}

impl Default for EtaRule {
    fn default() -> Self {
        EtaRule { coefficient: 1.0 }
    }
}

fn is_one(v: &u32) -> bool {
    *v == 1
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum WavenumberSpec {
    Explicit {
        values: Vec<f64>,
    },
    LogGrid {
        kmin: f64,
        kmax: f64,
        count: usize,
    },
    /// `k = m pi / a` with `a` the gap between the facing walls.
    Quantized {
        m_min: u32,
        m_max: u32,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        m_step: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub ppw: f64,
    pub corner_depth: u32,
    pub max_nodes: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        let d = MeshParams::default();
        MeshConfig {
            ppw: d.ppw,
            corner_depth: d.corner_depth,
            max_nodes: DEFAULT_MAX_NODES,
        }
    }
}

impl From<MeshConfig> for MeshParams {
    fn from(m: MeshConfig) -> Self {
        MeshParams {
            ppw: m.ppw,
            corner_depth: m.corner_depth,
            max_nodes: m.max_nodes,
        }
    }
}

/// Rectangle of evaluation points for the field dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldGrid {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterConfig {
    /// Incident direction `(cos angle, sin angle)`.
    pub direction_angle: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldGrid>,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        ScatterConfig {
            direction_angle: 0.0,
            field: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    /// Radii of the cutoff; taken from the geometry classification when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
    /// Ramp width as a fraction of `epsilon_0`.
    pub eps_fraction: f64,
    /// Points `(k, R)` at which the resolvent constant is tabulated.
    pub evaluate_k: Vec<f64>,
    pub evaluate_r: Vec<f64>,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        ConstantsConfig {
            r0: Some(1.0),
            r1: Some(1.4),
            eps_fraction: 0.5,
            evaluate_k: vec![10.0, 40.0],
            evaluate_r: vec![2.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitiesConfig {
    pub seed: u64,
    pub morawetz_fields: usize,
    pub friedrichs_fields: usize,
    pub flux_superpositions: usize,
}

impl Default for IdentitiesConfig {
    fn default() -> Self {
        IdentitiesConfig {
            seed: 2024,
            morawetz_fields: 20,
            friedrichs_fields: 100,
            flux_superpositions: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub output_dir: PathBuf,
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub eta: EtaRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavenumbers: Option<WavenumberSpec>,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scatter: Option<ScatterConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identities: Option<IdentitiesConfig>,
}

impl ExperimentConfig {
    /// Parse TOML; errors carry the line and the offending field.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config parse error: {e}")))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("config serialise error: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Built-in run for each subcommand when no file is given.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let base = |geometry: GeometrySpec, wavenumbers: Option<WavenumberSpec>| ExperimentConfig {
            kind,
            output_dir: PathBuf::from("results").join(kind.name()),
            geometry,
            eta: EtaRule::default(),
            wavenumbers,
            mesh: MeshConfig::default(),
            scatter: None,
            constants: None,
            identities: None,
        };
        let squares = GeometrySpec::TwoSquares { side: 1.0, gap: 0.5 };
        let quantized = |m_min, m_max, m_step| Some(WavenumberSpec::Quantized { m_min, m_max, m_step });
        match kind {
            ExperimentKind::Sweep => base(
                GeometrySpec::Circle {
                    radius: 1.0,
                    center: [0.0, 0.0],
                },
                Some(WavenumberSpec::LogGrid {
                    kmin: 10.0,
                    kmax: 80.0,
                    count: 12,
                }),
            ),
            ExperimentKind::Quasimode => base(squares, quantized(2, 12, 1)),
            ExperimentKind::Coercivity => base(GeometrySpec::default_u_cavity(), quantized(13, 37, 6)),
            ExperimentKind::Scatter => ExperimentConfig {
                scatter: Some(ScatterConfig::default()),
                ..base(squares, quantized(2, 12, 1))
            },
            ExperimentKind::Constants => ExperimentConfig {
                constants: Some(ConstantsConfig::default()),
                ..base(squares, None)
            },
            ExperimentKind::GeometryCheck => base(squares, None),
            ExperimentKind::Identities => ExperimentConfig {
                identities: Some(IdentitiesConfig::default()),
                ..base(squares, None)
            },
        }
    }

    /// Check the invariants that do not need any numerics, build the
    /// boundary, and expand the wavenumber list.
    pub fn validate(&self) -> Result<(Boundary, Vec<f64>), CliError> {
        let b = make_geometry(&self.geometry).map_err(|e| CliError::Config(format!("geometry: {e}")))?;
        if !(self.mesh.ppw >= 10.0) {
            return Err(CliError::Config(format!("mesh.ppw must be at least 10, got {}", self.mesh.ppw)));
        }
        if !(self.eta.coefficient.is_finite() && self.eta.coefficient != 0.0) {
            return Err(CliError::Config(format!(
                "eta.coefficient must be finite and nonzero, got {}",
                self.eta.coefficient
            )));
        }
        let ks = match (&self.wavenumbers, self.kind.needs_wavenumbers()) {
            (None, true) => return Err(CliError::Config(format!("kind {} needs a [wavenumbers] table", self.kind.name()))),
            (None, false) => Vec::new(),
            (Some(spec), _) => expand_wavenumbers(spec, &b)?,
        };
        if let Some(&k) = ks.iter().find(|k| !(**k >= 1.0) || !k.is_finite()) {
            return Err(CliError::Config(format!("wavenumbers must satisfy k >= 1, got {k}")));
        }
        if ks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CliError::Config("wavenumbers must be strictly increasing".into()));
        }
        if let Some(c) = &self.constants {
            if !(c.eps_fraction > 0.0 && c.eps_fraction <= 1.0) {
                return Err(CliError::Config(format!("constants.eps_fraction must lie in (0, 1], got {}", c.eps_fraction)));
            }
            if c.evaluate_k.len() != c.evaluate_r.len() {
                return Err(CliError::Config("constants.evaluate_k and evaluate_r must have equal length".into()));
            }
        }
        if let Some(f) = self.scatter.and_then(|s| s.field) {
            if !(f.xmax > f.xmin && f.ymax > f.ymin && f.nx >= 2 && f.ny >= 2) {
                return Err(CliError::Config("scatter.field needs xmax > xmin, ymax > ymin and nx, ny >= 2".into()));
            }
        }
        Ok((b, ks))
    }

    /// Create the output directory and check that it accepts files.
    pub fn prepare_output(&self) -> Result<(), CliError> {
        let dir = &self.output_dir;
        std::fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("output directory {}: {e}", dir.display())))?;
        let probe = dir.join(".write_probe");
        std::fs::write(&probe, b"").map_err(|e| CliError::Config(format!("output directory {} is not writable: {e}", dir.display())))?;
        std::fs::remove_file(&probe).map_err(|e| CliError::Io(e.to_string()))?;
        Ok(())
    }
}

/// The explicit wavenumber list of `spec` on boundary `b`.
pub fn expand_wavenumbers(spec: &WavenumberSpec, b: &Boundary) -> Result<Vec<f64>, CliError> {
    match spec {
        WavenumberSpec::Explicit { values } => {
            if values.is_empty() {
                return Err(CliError::Config("wavenumbers.values is empty".into()));
            }
            Ok(values.clone())
        }
        WavenumberSpec::LogGrid { kmin, kmax, count } => {
            if !(*kmin >= 1.0) {
                return Err(CliError::Config(format!("wavenumbers.kmin must be at least 1, got {kmin}")));
            }
            if !(kmax > kmin) || *count < 2 {
                return Err(CliError::Config("log grid needs kmax > kmin and count >= 2".into()));
            }
            Ok(log_grid(*kmin, *kmax, *count))
        }
        WavenumberSpec::Quantized { m_min, m_max, m_step } => {
            let a = b
                .meta
                .parallel_gap
                .or(b.meta.facing.map(|f| f.gap()))
                .ok_or_else(|| CliError::Config(format!("quantized wavenumbers need facing walls; {} has none", b.label())))?;
            if *m_min < 1 || m_max < m_min || *m_step < 1 {
                return Err(CliError::Config("quantized wavenumbers need 1 <= m_min <= m_max and m_step >= 1".into()));
            }
            let all = quantized_ks(a, *m_min, *m_max);
            Ok(all.into_iter().step_by(*m_step as usize).collect())
        }
    }
}
