//! Experiment configuration: schema, parsing with field paths, and content hashing.

use std::path::{Path, PathBuf};

use kahler_lab::energy::PathShape;
use kahler_lab::flow::{FlowMode, Scheme};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::model::{Mode, ModelSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-12
}

fn default_max_iter() -> usize {
    80
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self { tol: default_tol(), max_iter: default_max_iter() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    #[serde(default = "default_mode")]
    pub mode: FlowMode,
    pub horizon: f64,
    pub dt: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    pub probes: Vec<f64>,
    #[serde(default)]
    pub checkpoint_interval: Option<f64>,
}

fn default_mode() -> FlowMode {
    FlowMode::Reduced
}

fn default_scheme() -> Scheme {
    Scheme::SemiImplicit
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyKind {
    /// `K_{omega,theta}(phi)` on the product with `omega = chi + t omega0`, `t = t_list[0]`.
    Mabuchi,
    /// Small-`t` expansion with a base and a fiber potential.
    Adjunction,
    /// Small-`t` expansion of a base potential on a surface.
    Surface,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySpec {
    pub kind: EnergyKind,
    /// Base potential.
    #[serde(default)]
    pub phi: Vec<Mode>,
    /// Product potential; projected to fiber mean zero.
    #[serde(default)]
    pub psi: Vec<Mode>,
    pub t_list: Vec<f64>,
    #[serde(default = "default_nodes")]
    pub path_nodes: usize,
    /// Twist `theta = theta_scale omega0` for the plain evaluation.
    #[serde(default)]
    pub theta_scale: f64,
}

fn default_nodes() -> usize {
    24
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub model: ModelSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub flow: Option<FlowSpec>,
    #[serde(default)]
    pub energy: Option<EnergySpec>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    /// Parses JSON, reporting schema violations with the path of the offending field.
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| CliError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn sha256(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: &str| Err(CliError::Schema { path: path.into(), message: message.into() });
        if !(self.solver.tol > 0.0) {
            return bad("solver.tol", "must be positive");
        }
        if self.model.fiber_tau[1] <= 0.0 {
            return bad("model.fiber_tau", "imaginary part must be positive");
        }
        if let Some(f) = &self.flow {
            if !(f.dt > 0.0) {
                return bad("flow.dt", "must be positive");
            }
            if !(f.horizon >= 0.0) {
                return bad("flow.horizon", "must be nonnegative");
            }
            if f.probes.iter().any(|p| !(*p >= 0.0 && *p <= f.horizon)) {
                return bad("flow.probes", "probe times must lie in [0, horizon]");
            }
        }
        if let Some(e) = &self.energy {
            if e.t_list.is_empty() || e.t_list.iter().any(|t| !(*t > 0.0)) {
                return bad("energy.t_list", "needs positive parameters");
            }
            if e.path_nodes == 0 {
                return bad("energy.path_nodes", "must be positive");
            }
        }
        Ok(())
    }

    pub fn flow_spec(&self) -> Result<&FlowSpec> {
        self.flow.as_ref().ok_or_else(|| CliError::Config(format!("scenario `{}` has no flow section", self.scenario)))
    }

    pub fn energy_spec(&self) -> Result<&EnergySpec> {
        self.energy.as_ref().ok_or_else(|| CliError::Config(format!("scenario `{}` has no energy section", self.scenario)))
    }
}

/// Shape used for the second path in energy evaluations.
pub const SECOND_PATH: PathShape = PathShape::Cubic;

/// Parses a comma-separated probe list.
pub fn parse_probes(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| CliError::Schema { path: "probes".into(), message: format!("`{p}` is not a number") }))
        .collect()
}
