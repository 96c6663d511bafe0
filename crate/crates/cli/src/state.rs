//! Initial-state recipes and state (de)serialization.
//!
//! States serialize as JSON with the lattice fingerprint embedded, either as
//! paired real arrays `(rho, phi)` or as an interleaved complex array.

use anyhow::{bail, Context, Result};
use edlab_core::dense::eigh_hermitian;
use edlab_core::ephase::{from_wavefunction, to_wavefunction};
use edlab_core::gauge::project_physical;
use edlab_core::lattice::ConfigSpace;
use edlab_core::linalg;
use edlab_core::operator::KernelOperator;
use edlab_core::C64;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

use crate::config::InitialStateToml;

#[derive(Debug, Serialize, Deserialize)]
pub struct StateFile {
    pub spec_fingerprint: String,
    /// Either rho+phi or psi_interleaved must be present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<f64>>,
    /// `[re0, im0, re1, im1, ...]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_interleaved: Option<Vec<f64>>,
}

pub fn save_state(path: &Path, space: &ConfigSpace, psi: &[C64]) -> Result<()> {
    let (rho, phi) = from_wavefunction(psi, space.spec.hbar);
    let file = StateFile {
        spec_fingerprint: format!("{:016x}", space.spec.fingerprint()),
        rho: Some(rho),
        phi: Some(phi),
        psi_interleaved: Some(psi.iter().flat_map(|z| [z.re, z.im]).collect()),
    };
    std::fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn load_state(path: &Path, space: &ConfigSpace) -> Result<Vec<C64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading state {}", path.display()))?;
    let file: StateFile = serde_json::from_str(&text)?;
    let expect = format!("{:016x}", space.spec.fingerprint());
    if file.spec_fingerprint != expect {
        bail!(
            "state file fingerprint {} does not match lattice {}",
            file.spec_fingerprint,
            expect
        );
    }
    if let Some(interleaved) = file.psi_interleaved {
        if interleaved.len() != 2 * space.len() {
            bail!("state length mismatch");
        }
        return Ok(interleaved
            .chunks_exact(2)
            .map(|c| C64::new(c[0], c[1]))
            .collect());
    }
    match (file.rho, file.phi) {
        (Some(rho), Some(phi)) if rho.len() == space.len() && phi.len() == space.len() => {
            Ok(to_wavefunction(&rho, &phi, space.spec.hbar))
        }
        _ => bail!("state file carries neither psi nor matching (rho, phi)"),
    }
}

/// Minimal-image distance on a ring of `n` cells.
fn ring_dist(a: f64, b: f64, period: f64) -> f64 {
    let mut d = (a - b) % period;
    if d > period / 2.0 {
        d -= period;
    }
    if d < -period / 2.0 {
        d += period;
    }
    d
}

/// Build the initial wave function from a recipe.
pub fn build_initial_state(
    space: &Arc<ConfigSpace>,
    recipe: &InitialStateToml,
    h_for_eigenstate: Option<&KernelOperator>,
) -> Result<Vec<C64>> {
    let spec = &space.spec;
    let k = space.len();
    let mut psi: Vec<C64> = match recipe.kind.as_str() {
        "point-mass" => {
            let idx = recipe.index.unwrap_or(0);
            if idx >= k {
                bail!("point-mass index {idx} out of range (K = {k})");
            }
            let mut v = vec![C64::new(0.0, 0.0); k];
            v[idx] = C64::new(1.0, 0.0);
            v
        }
        "gaussian-packet" => {
            let z_sigma = recipe.z_sigma.unwrap_or(1.0);
            let a_sigma = recipe.a_sigma.unwrap_or(spec.amplitude_period() / 4.0);
            let a_center = recipe.a_center.unwrap_or(0.0);
            let z_center = recipe
                .z_center
                .clone()
                .unwrap_or_else(|| vec![0.0; spec.z_coords()]);
            if z_center.len() != spec.z_coords() {
                bail!("z_center needs {} entries", spec.z_coords());
            }
            let momentum = recipe
                .momentum
                .clone()
                .unwrap_or_else(|| vec![0.0; spec.z_coords()]);
            if momentum.len() != spec.z_coords() {
                bail!("momentum needs {} entries", spec.z_coords());
            }
            let z_period = spec.sites as f64 * spec.dx;
            let a_period = spec.amplitude_period();
            let mut v = vec![C64::new(0.0, 0.0); k];
            for (i, out) in v.iter_mut().enumerate() {
                let mut log_amp = 0.0;
                let mut phase = 0.0;
                for coord in 0..spec.z_coords() {
                    let z = space.z_digit(i, coord) as f64 * spec.dx;
                    let d = ring_dist(z, z_center[coord], z_period);
                    log_amp -= d * d / (4.0 * z_sigma * z_sigma);
                    phase += momentum[coord] * z / spec.hbar;
                }
                for dof in 0..spec.a_coords() {
                    let a = space.a_value(i, dof);
                    let d = ring_dist(a, a_center, a_period);
                    log_amp -= d * d / (4.0 * a_sigma * a_sigma);
                }
                *out = C64::new(0.0, phase).exp() * log_amp.exp();
            }
            v
        }
        "eigenstate-index" => {
            let which = recipe.eigenstate.unwrap_or(0);
            let h = h_for_eigenstate
                .ok_or_else(|| anyhow::anyhow!("eigenstate recipe needs a Hamiltonian"))?;
            let dense = h
                .to_dense()
                .map_err(|e| anyhow::anyhow!("eigenstate recipe: {e}"))?;
            let (_vals, vecs) =
                eigh_hermitian(k, &dense).map_err(|e| anyhow::anyhow!("{e}"))?;
            if which >= vecs.len() {
                bail!("eigenstate index {which} out of range");
            }
            vecs[which].clone()
        }
        "file" => {
            let path = recipe
                .path
                .as_ref()
                .ok_or_else(|| anyhow::anyhow!("file recipe needs a path"))?;
            load_state(Path::new(path), space)?
        }
        other => bail!("unknown initial state kind '{other}'"),
    };
    let n = linalg::normalize_c(&mut psi);
    if n == 0.0 {
        bail!("initial state recipe produced the zero vector");
    }
    if recipe.project {
        let (projected, _report) =
            project_physical(space, &psi, 1e-8).map_err(|e| anyhow::anyhow!("{e}"))?;
        psi = projected;
    }
    Ok(psi)
}
