//! Experiment configuration: structured TOML with schema validation.
//!
//! The lattice table uses exactly the keys `dim, sites, dx,
//! particles[{mass, charge}], levels, dA, hbar, c, eta, periodic,
//! max_configs`.

use anyhow::{bail, Context, Result};
use edlab_core::lattice::{LatticeSpec, Particle, DEFAULT_MAX_CONFIGS};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeToml {
    pub dim: usize,
    pub sites: usize,
    pub dx: f64,
    #[serde(default)]
    pub particles: Vec<ParticleToml>,
    pub levels: usize,
    #[serde(rename = "dA")]
    pub da: f64,
    pub hbar: f64,
    pub c: f64,
    pub eta: f64,
    #[serde(default = "default_true")]
    pub periodic: bool,
    #[serde(default = "default_max_configs")]
    pub max_configs: u64,
}

fn default_true() -> bool {
    true
}

fn default_max_configs() -> u64 {
    DEFAULT_MAX_CONFIGS
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParticleToml {
    pub mass: f64,
    pub charge: f64,
}

impl LatticeToml {
    pub fn to_spec(&self) -> LatticeSpec {
        LatticeSpec {
            dim: self.dim,
            sites: self.sites,
            dx: self.dx,
            particles: self
                .particles
                .iter()
                .map(|p| Particle { mass: p.mass, charge: p.charge })
                .collect(),
            levels: self.levels,
            da: self.da,
            hbar: self.hbar,
            c: self.c,
            eta: self.eta,
            periodic: self.periodic,
            max_configs: self.max_configs,
        }
    }

    pub fn from_spec(spec: &LatticeSpec) -> Self {
        LatticeToml {
            dim: spec.dim,
            sites: spec.sites,
            dx: spec.dx,
            particles: spec
                .particles
                .iter()
                .map(|p| ParticleToml { mass: p.mass, charge: p.charge })
                .collect(),
            levels: spec.levels,
            da: spec.da,
            hbar: spec.hbar,
            c: spec.c,
            eta: spec.eta,
            periodic: spec.periodic,
            max_configs: spec.max_configs,
        }
    }
}

/// How the initial wave function is prepared.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialStateToml {
    /// point-mass | gaussian-packet | eigenstate-index | file
    #[serde(default = "default_kind")]
    pub kind: String,
    /// point-mass: flat configuration index.
    pub index: Option<usize>,
    /// gaussian-packet parameters.
    pub z_center: Option<Vec<f64>>,
    pub z_sigma: Option<f64>,
    pub momentum: Option<Vec<f64>>,
    pub a_center: Option<f64>,
    pub a_sigma: Option<f64>,
    /// eigenstate-index: which eigenvector of the Hamiltonian.
    pub eigenstate: Option<usize>,
    /// file: path to a serialized state.
    pub path: Option<String>,
    /// Project onto the physical (gauge-invariant) subspace after building.
    #[serde(default)]
    pub project: bool,
}

fn default_kind() -> String {
    "gaussian-packet".to_string()
}

impl Default for InitialStateToml {
    fn default() -> Self {
        InitialStateToml {
            kind: default_kind(),
            index: None,
            z_center: None,
            z_sigma: None,
            momentum: None,
            a_center: None,
            a_sigma: None,
            eigenstate: None,
            path: None,
            project: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub lattice: LatticeToml,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub samples: Option<usize>,
    pub out: Option<String>,
    #[serde(default)]
    pub initial_state: InitialStateToml,
    /// Tolerance overrides; every check uses its documented default unless
    /// overridden here by name.
    #[serde(default)]
    pub tolerances: std::collections::BTreeMap<String, f64>,
}

fn default_seed() -> u64 {
    0
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg = Self::from_toml_str(&text)?;
        Ok((cfg, text))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            // toml errors carry line/column spans
            anyhow::anyhow!("config parse error: {e}")
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !crate::recipes::EXPERIMENTS.iter().any(|(n, _)| *n == self.experiment) {
            bail!(
                "unknown experiment '{}'; known: {}",
                self.experiment,
                crate::recipes::EXPERIMENTS
                    .iter()
                    .map(|(n, _)| *n)
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        }
        let spec = self.lattice.to_spec();
        spec.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                bail!("dt must be positive, got {dt}");
            }
        }
        if let Some(path) = &self.initial_state.path {
            if self.initial_state.kind == "file" && !Path::new(path).exists() {
                bail!("initial_state.path does not exist: {path}");
            }
        }
        match self.initial_state.kind.as_str() {
            "point-mass" | "gaussian-packet" | "eigenstate-index" | "file" => {}
            other => bail!("unknown initial_state.kind '{other}'"),
        }
        Ok(())
    }

    pub fn tol(&self, name: &str, default: f64) -> f64 {
        *self.tolerances.get(name).unwrap_or(&default)
    }

    /// FNV-1a hash of the raw config text (manifest provenance).
    pub fn content_hash(text: &str) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in text.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}
