//! Finite truncation of the ontic configuration space and its discrete
//! calculus.
//!
//! A configuration is `(z, A)`: each of `N` particles sits on a site of a
//! periodic cubic lattice with `Ls` sites per dimension (`D` dimensions), and
//! every (site, component) pair carries one vector-potential amplitude
//! `A_a(x) = level * dA` on a cyclic grid of `M` levels (period `M * dA`).
//! The configuration count is `K = Ls^(N*D) * M^(D*Ls^D)`.
//!
//! Discretization conventions used everywhere downstream:
//! - configuration-space sums use the counting measure, spatial sums carry
//!   the cell volume `dx^D`;
//! - the functional derivative `delta/delta A_ax` becomes
//!   `(1/dx^D) * d/dA_ax` with a cyclic central difference of spacing `dA`;
//! - particle derivatives `d/dz_n^a` are cyclic central differences of
//!   spacing `dx`;
//! - spatial gradient is a forward difference, `spatial_div` is its exact
//!   negative adjoint (backward difference), so summation by parts holds to
//!   round-off on the periodic lattice; the curl is built from forward
//!   differences, making `curl(grad) = 0` and `div_forward(curl) = 0` exact.

use crate::error::{EdError, Result};
use crate::math;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// One particle species entry: mass and Heaviside-Lorentz charge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub mass: f64,
    pub charge: f64,
}

/// Full discretization and physical-constants record; the single source of
/// truth for a model instance.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    /// Spatial dimension, 1..=3.
    pub dim: usize,
    /// Sites per dimension.
    pub sites: usize,
    /// Lattice spacing.
    pub dx: f64,
    /// Particles (mass, charge).
    pub particles: Vec<Particle>,
    /// Field-amplitude levels per (site, component) degree of freedom.
    pub levels: usize,
    /// Amplitude spacing; the grid is cyclic with period `levels * da`.
    pub da: f64,
    pub hbar: f64,
    pub c: f64,
    pub eta: f64,
    /// Spatial boundary. Only periodic lattices are supported.
    pub periodic: bool,
    /// Hard cap on the configuration count.
    pub max_configs: u64,
}

pub const DEFAULT_MAX_CONFIGS: u64 = 1 << 23;

impl LatticeSpec {
    /// Validate all invariants. Every constructor of derived objects calls
    /// this first.
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(EdError::InvalidSpec(format!("dim must be 1..=3, got {}", self.dim)));
        }
        if self.sites < 1 {
            return Err(EdError::InvalidSpec(String::from("sites must be >= 1")));
        }
        if self.levels < 2 {
            return Err(EdError::InvalidSpec(String::from("levels must be >= 2")));
        }
        for (field, v) in [
            ("dx", self.dx),
            ("dA", self.da),
            ("hbar", self.hbar),
            ("c", self.c),
            ("eta", self.eta),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(EdError::InvalidSpec(format!("{field} must be positive, got {v}")));
            }
        }
        for (n, p) in self.particles.iter().enumerate() {
            if !(p.mass > 0.0) || !p.mass.is_finite() {
                return Err(EdError::InvalidSpec(format!(
                    "particle {n}: mass must be positive, got {}",
                    p.mass
                )));
            }
            if !p.charge.is_finite() {
                return Err(EdError::InvalidSpec(format!("particle {n}: charge must be finite")));
            }
        }
        if !self.periodic {
            return Err(EdError::InvalidSpec(String::from(
                "open boundaries are not supported; set periodic = true",
            )));
        }
        Ok(())
    }

    pub fn num_particles(&self) -> usize {
        self.particles.len()
    }

    /// Total number of spatial sites `Ls^D`.
    pub fn num_sites(&self) -> usize {
        self.sites.pow(self.dim as u32)
    }

    /// Number of particle coordinates `N * D`.
    pub fn z_coords(&self) -> usize {
        self.num_particles() * self.dim
    }

    /// Number of field degrees of freedom `D * Ls^D`.
    pub fn a_coords(&self) -> usize {
        self.dim * self.num_sites()
    }

    /// Spatial cell volume `dx^D`.
    pub fn cell_volume(&self) -> f64 {
        math::powi(self.dx, self.dim as i32)
    }

    /// Amplitude-grid period `M * dA`.
    pub fn amplitude_period(&self) -> f64 {
        self.levels as f64 * self.da
    }

    /// Exact configuration count as a wide integer.
    pub fn config_count(&self) -> u128 {
        let z = (self.sites as u128).pow(self.z_coords() as u32);
        let a = (self.levels as u128).pow(self.a_coords() as u32);
        z.saturating_mul(a)
    }

    /// `q_n * dx * dA * M / (2 pi hbar c)` per particle. When this is an
    /// integer the hop phases are well defined on the cyclic amplitude grid
    /// and the discrete gauge group acts exactly; experiments that rely on
    /// exact gauge identities should pick `dA` accordingly.
    pub fn charge_commensurability(&self) -> Vec<f64> {
        self.particles
            .iter()
            .map(|p| {
                p.charge * self.dx * self.da * self.levels as f64
                    / (2.0 * core::f64::consts::PI * self.hbar * self.c)
            })
            .collect()
    }

    /// Stable fingerprint of the spec (FNV-1a over a canonical rendering),
    /// embedded in serialized states for compatibility checks.
    pub fn fingerprint(&self) -> u64 {
        let mut repr = format!(
            "dim={};sites={};dx={:.17e};levels={};dA={:.17e};hbar={:.17e};c={:.17e};eta={:.17e};periodic={};",
            self.dim, self.sites, self.dx, self.levels, self.da, self.hbar, self.c, self.eta, self.periodic
        );
        for p in &self.particles {
            repr.push_str(&format!("m={:.17e},q={:.17e};", p.mass, p.charge));
        }
        let mut h: u64 = 0xcbf29ce484222325;
        for b in repr.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }

    /// Flat site index from per-dimension coordinates (little-endian).
    pub fn site_index(&self, coords: &[usize]) -> usize {
        let mut idx = 0;
        for d in (0..self.dim).rev() {
            idx = idx * self.sites + coords[d];
        }
        idx
    }

    /// Per-dimension coordinates of a flat site index.
    pub fn site_coords(&self, site: usize) -> Vec<usize> {
        let mut s = site;
        let mut out = vec![0; self.dim];
        for c in out.iter_mut() {
            *c = s % self.sites;
            s /= self.sites;
        }
        out
    }

    /// Site shifted by `step` cells along dimension `d` (cyclic).
    pub fn site_shift(&self, site: usize, d: usize, step: isize) -> usize {
        let stride = self.sites.pow(d as u32) as isize;
        let coord = (site as isize / stride) % self.sites as isize;
        let new = (coord + step).rem_euclid(self.sites as isize);
        (site as isize + (new - coord) * stride) as usize
    }

    /// Flat field-dof index for component `a` at `site`: `a * Ls^D + site`.
    pub fn a_dof(&self, a: usize, site: usize) -> usize {
        a * self.num_sites() + site
    }
}

/// A single ontic configuration: particle positions (flat site index per
/// (particle, direction) is *not* stored; positions are per-dimension
/// coordinates) and one amplitude level per field degree of freedom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OnticConfig {
    /// Particle coordinates, `z[n * D + a]` in `[0, Ls)`.
    pub z: Vec<u32>,
    /// Amplitude levels, `a_levels[a * Ls^D + site]` in `[0, M)`.
    pub a_levels: Vec<u32>,
}

/// Enumeration and indexing of the finite configuration space: a bijection
/// between `[0, K)` and configurations, plus digit/stride accessors used by
/// all operators (no full decode needed on hot paths).
#[derive(Debug, Clone)]
pub struct ConfigSpace {
    pub spec: LatticeSpec,
    size: usize,
    /// Strides of the particle coordinates, length `N*D`.
    z_strides: Vec<usize>,
    /// Strides of the field dofs, length `D*Ls^D`.
    a_strides: Vec<usize>,
}

/// Build the indexer for a validated spec, rejecting oversized spaces.
pub fn build_config_space(spec: &LatticeSpec) -> Result<ConfigSpace> {
    spec.validate()?;
    let k = spec.config_count();
    if k > spec.max_configs as u128 || k > usize::MAX as u128 {
        return Err(EdError::Capacity {
            configs: k,
            cap: spec.max_configs,
        });
    }
    let mut z_strides = vec![0usize; spec.z_coords()];
    let mut stride = 1usize;
    for s in z_strides.iter_mut() {
        *s = stride;
        stride *= spec.sites;
    }
    let mut a_strides = vec![0usize; spec.a_coords()];
    for s in a_strides.iter_mut() {
        *s = stride;
        stride *= spec.levels;
    }
    Ok(ConfigSpace {
        spec: spec.clone(),
        size: k as usize,
        z_strides,
        a_strides,
    })
}

impl ConfigSpace {
    /// Number of configurations `K`.
    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn check_len<T>(&self, v: &[T]) -> Result<()> {
        if v.len() != self.size {
            return Err(EdError::LengthMismatch {
                expected: self.size,
                got: v.len(),
            });
        }
        Ok(())
    }

    pub fn encode(&self, cfg: &OnticConfig) -> Result<usize> {
        let spec = &self.spec;
        if cfg.z.len() != spec.z_coords() || cfg.a_levels.len() != spec.a_coords() {
            return Err(EdError::IndexOutOfRange(format!(
                "config has {} z-coords and {} field dofs; expected {} and {}",
                cfg.z.len(),
                cfg.a_levels.len(),
                spec.z_coords(),
                spec.a_coords()
            )));
        }
        let mut idx = 0usize;
        for (j, &digit) in cfg.z.iter().enumerate() {
            if digit as usize >= spec.sites {
                return Err(EdError::IndexOutOfRange(format!("z coord {j} = {digit}")));
            }
            idx += digit as usize * self.z_strides[j];
        }
        for (j, &digit) in cfg.a_levels.iter().enumerate() {
            if digit as usize >= spec.levels {
                return Err(EdError::IndexOutOfRange(format!("field level {j} = {digit}")));
            }
            idx += digit as usize * self.a_strides[j];
        }
        Ok(idx)
    }

    pub fn decode(&self, idx: usize) -> OnticConfig {
        let spec = &self.spec;
        let mut z = vec![0u32; spec.z_coords()];
        for (j, d) in z.iter_mut().enumerate() {
            *d = ((idx / self.z_strides[j]) % spec.sites) as u32;
        }
        let mut a_levels = vec![0u32; spec.a_coords()];
        for (j, d) in a_levels.iter_mut().enumerate() {
            *d = ((idx / self.a_strides[j]) % spec.levels) as u32;
        }
        OnticConfig { z, a_levels }
    }

    /// Particle-coordinate digit of config `idx` (coordinate `n*D + a`).
    #[inline]
    pub fn z_digit(&self, idx: usize, coord: usize) -> usize {
        (idx / self.z_strides[coord]) % self.spec.sites
    }

    /// Flat spatial site of particle `n` in config `idx`.
    #[inline]
    pub fn particle_site(&self, idx: usize, n: usize) -> usize {
        let d = self.spec.dim;
        let mut site = 0usize;
        for a in (0..d).rev() {
            site = site * self.spec.sites + self.z_digit(idx, n * d + a);
        }
        site
    }

    /// Amplitude level of field dof `dof` in config `idx`.
    #[inline]
    pub fn a_level(&self, idx: usize, dof: usize) -> usize {
        (idx / self.a_strides[dof]) % self.spec.levels
    }

    /// Index stride of field dof `dof` (block iteration in operators).
    #[inline]
    pub fn a_stride(&self, dof: usize) -> usize {
        self.a_strides[dof]
    }

    /// Amplitude value (representative in `[0, M*dA)`) of field dof `dof`.
    #[inline]
    pub fn a_value(&self, idx: usize, dof: usize) -> f64 {
        self.a_level(idx, dof) as f64 * self.spec.da
    }

    /// Config with particle coordinate `coord` stepped by `step` (cyclic).
    #[inline]
    pub fn shift_z(&self, idx: usize, coord: usize, step: isize) -> usize {
        let ls = self.spec.sites as isize;
        let old = self.z_digit(idx, coord) as isize;
        let new = (old + step).rem_euclid(ls);
        (idx as isize + (new - old) * self.z_strides[coord] as isize) as usize
    }

    /// Config with field dof `dof` stepped by `step` levels (cyclic).
    /// Also reports how many times the representative wrapped (+1 per
    /// upward wrap, -1 per downward wrap).
    #[inline]
    pub fn shift_a(&self, idx: usize, dof: usize, step: isize) -> (usize, i32) {
        let m = self.spec.levels as isize;
        let old = self.a_level(idx, dof) as isize;
        let raw = old + step;
        let new = raw.rem_euclid(m);
        let wraps = ((raw - new) / m) as i32;
        (
            (idx as isize + (new - old) * self.a_strides[dof] as isize) as usize,
            wraps,
        )
    }

    /// Symmetrized field value seen by a particle at `site` along `a`: the
    /// mean of the two `a`-links touching the site,
    /// `(A_a(site) + A_a(site - e_a)) / 2`. Pairing this with central
    /// differences keeps the combination `d_na phi - beta_n A` exactly
    /// invariant under forward-difference gauge shifts.
    #[inline]
    pub fn site_averaged_a(&self, idx: usize, a: usize, site: usize) -> f64 {
        let spec = &self.spec;
        let back = spec.site_shift(site, a, -1);
        0.5 * (self.a_value(idx, spec.a_dof(a, site)) + self.a_value(idx, spec.a_dof(a, back)))
    }

    /// Central-difference derivative in particle coordinate `(n, a)`:
    /// `(f(z + e) - f(z - e)) / (2 dx)` with cyclic wraparound.
    pub fn particle_derivative(&self, f: &[f64], n: usize, a: usize) -> Result<Vec<f64>> {
        self.check_len(f)?;
        let spec = &self.spec;
        if n >= spec.num_particles() || a >= spec.dim {
            return Err(EdError::IndexOutOfRange(format!("particle {n}, direction {a}")));
        }
        let coord = n * spec.dim + a;
        let inv = 1.0 / (2.0 * spec.dx);
        let mut out = vec![0.0; self.size];
        for (i, o) in out.iter_mut().enumerate() {
            let up = self.shift_z(i, coord, 1);
            let dn = self.shift_z(i, coord, -1);
            *o = (f[up] - f[dn]) * inv;
        }
        Ok(out)
    }

    /// Discretized functional derivative `delta f / delta A_ax`:
    /// `(1/dx^D)` times the cyclic central difference over the amplitude
    /// grid at `(site, a)`.
    pub fn field_derivative(&self, f: &[f64], site: usize, a: usize) -> Result<Vec<f64>> {
        self.check_len(f)?;
        let spec = &self.spec;
        if site >= spec.num_sites() || a >= spec.dim {
            return Err(EdError::IndexOutOfRange(format!("site {site}, component {a}")));
        }
        let dof = spec.a_dof(a, site);
        let inv = 1.0 / (2.0 * spec.da * spec.cell_volume());
        let mut out = vec![0.0; self.size];
        for (i, o) in out.iter_mut().enumerate() {
            let (up, _) = self.shift_a(i, dof, 1);
            let (dn, _) = self.shift_a(i, dof, -1);
            *o = (f[up] - f[dn]) * inv;
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Spatial calculus on per-site arrays.
//
// Scalar fields: Vec<f64> of length Ls^D. Vector fields: Vec<f64> of length
// D * Ls^D with layout [a * Ls^D + site], matching the field-dof layout.
// ---------------------------------------------------------------------------

/// Forward-difference gradient of a per-site scalar; output is a vector field.
pub fn spatial_grad(spec: &LatticeSpec, f: &[f64]) -> Result<Vec<f64>> {
    let ns = spec.num_sites();
    if f.len() != ns {
        return Err(EdError::LengthMismatch { expected: ns, got: f.len() });
    }
    let mut out = vec![0.0; spec.dim * ns];
    for a in 0..spec.dim {
        for site in 0..ns {
            let up = spec.site_shift(site, a, 1);
            out[a * ns + site] = (f[up] - f[site]) / spec.dx;
        }
    }
    Ok(out)
}

/// Backward-difference divergence — the exact negative adjoint of
/// [`spatial_grad`] under the lattice inner product `sum_x dx^D`.
pub fn spatial_div(spec: &LatticeSpec, field: &[f64]) -> Result<Vec<f64>> {
    let ns = spec.num_sites();
    if field.len() != spec.dim * ns {
        return Err(EdError::LengthMismatch { expected: spec.dim * ns, got: field.len() });
    }
    let mut out = vec![0.0; ns];
    for a in 0..spec.dim {
        for site in 0..ns {
            let back = spec.site_shift(site, a, -1);
            out[site] += (field[a * ns + site] - field[a * ns + back]) / spec.dx;
        }
    }
    Ok(out)
}

/// Forward-difference divergence. Paired with [`spatial_curl`] this gives the
/// exact discrete absence of magnetic monopoles, `div_f(curl_f A) = 0`.
pub fn spatial_div_forward(spec: &LatticeSpec, field: &[f64]) -> Result<Vec<f64>> {
    let ns = spec.num_sites();
    if field.len() != spec.dim * ns {
        return Err(EdError::LengthMismatch { expected: spec.dim * ns, got: field.len() });
    }
    let mut out = vec![0.0; ns];
    for a in 0..spec.dim {
        for site in 0..ns {
            let up = spec.site_shift(site, a, 1);
            out[site] += (field[a * ns + up] - field[a * ns + site]) / spec.dx;
        }
    }
    Ok(out)
}

/// Forward-difference curl. In D=3 the output is a vector field; in D=2 it is
/// the scalar `d1 A2 - d2 A1`. D=1 has no curl.
pub fn spatial_curl(spec: &LatticeSpec, field: &[f64]) -> Result<Vec<f64>> {
    let ns = spec.num_sites();
    if field.len() != spec.dim * ns {
        return Err(EdError::LengthMismatch { expected: spec.dim * ns, got: field.len() });
    }
    let fwd = |g: &[f64], comp: usize, site: usize, d: usize| -> f64 {
        let up = spec.site_shift(site, d, 1);
        (g[comp * ns + up] - g[comp * ns + site]) / spec.dx
    };
    match spec.dim {
        1 => Err(EdError::InvalidSpec(String::from("curl requires D >= 2"))),
        2 => {
            let mut out = vec![0.0; ns];
            for (site, o) in out.iter_mut().enumerate() {
                *o = fwd(field, 1, site, 0) - fwd(field, 0, site, 1);
            }
            Ok(out)
        }
        _ => {
            let mut out = vec![0.0; 3 * ns];
            for site in 0..ns {
                out[site] = fwd(field, 2, site, 1) - fwd(field, 1, site, 2);
                out[ns + site] = fwd(field, 0, site, 2) - fwd(field, 2, site, 0);
                out[2 * ns + site] = fwd(field, 1, site, 0) - fwd(field, 0, site, 1);
            }
            Ok(out)
        }
    }
}

/// Adjoint of [`spatial_curl`] under `sum_x dx^D`: maps a D=2 scalar (or D=3
/// vector) back to a vector field using backward differences. This is the
/// curl that appears in the Ampère-Maxwell law on the lattice.
pub fn spatial_curl_adjoint(spec: &LatticeSpec, field: &[f64]) -> Result<Vec<f64>> {
    let ns = spec.num_sites();
    let bwd = |g: &[f64], comp: usize, site: usize, d: usize| -> f64 {
        let back = spec.site_shift(site, d, -1);
        (g[comp * ns + site] - g[comp * ns + back]) / spec.dx
    };
    match spec.dim {
        1 => Err(EdError::InvalidSpec(String::from("curl requires D >= 2"))),
        2 => {
            if field.len() != ns {
                return Err(EdError::LengthMismatch { expected: ns, got: field.len() });
            }
            // adjoint of d1 A2 - d2 A1: component 0 gets +d2_b B, component 1 gets -d1_b B
            let mut out = vec![0.0; 2 * ns];
            for site in 0..ns {
                out[site] = bwd(field, 0, site, 1);
                out[ns + site] = -bwd(field, 0, site, 0);
            }
            Ok(out)
        }
        _ => {
            if field.len() != 3 * ns {
                return Err(EdError::LengthMismatch { expected: 3 * ns, got: field.len() });
            }
            let mut out = vec![0.0; 3 * ns];
            for site in 0..ns {
                out[site] = bwd(field, 2, site, 1) - bwd(field, 1, site, 2);
                out[ns + site] = bwd(field, 0, site, 2) - bwd(field, 2, site, 0);
                out[2 * ns + site] = bwd(field, 1, site, 0) - bwd(field, 0, site, 1);
            }
            Ok(out)
        }
    }
}

/// `div_b(grad_f(f))` — the standard (2D+1)-point lattice Laplacian.
pub fn spatial_laplacian(spec: &LatticeSpec, f: &[f64]) -> Result<Vec<f64>> {
    spatial_div(spec, &spatial_grad(spec, f)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(dim: usize, sites: usize, n: usize, levels: usize) -> LatticeSpec {
        LatticeSpec {
            dim,
            sites,
            dx: 1.0,
            particles: vec![Particle { mass: 1.0, charge: 1.0 }; n],
            levels,
            da: 1.0,
            hbar: 1.0,
            c: 1.0,
            eta: 1.0,
            periodic: true,
            max_configs: DEFAULT_MAX_CONFIGS,
        }
    }

    #[test]
    fn config_counts_match_hand_counting() {
        assert_eq!(build_config_space(&small_spec(1, 2, 1, 2)).unwrap().len(), 8);
        assert_eq!(build_config_space(&small_spec(1, 3, 1, 3)).unwrap().len(), 81);
        assert_eq!(build_config_space(&small_spec(2, 2, 0, 2)).unwrap().len(), 256);
    }

    #[test]
    fn capacity_error_reports_k() {
        let mut spec = small_spec(2, 3, 1, 3);
        spec.max_configs = 100;
        match build_config_space(&spec) {
            Err(EdError::Capacity { configs, cap }) => {
                assert_eq!(cap, 100);
                assert_eq!(configs, 9u128 * 3u128.pow(18));
            }
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn encode_decode_roundtrip_exhaustive() {
        for spec in [small_spec(1, 3, 1, 3), small_spec(2, 2, 1, 2), small_spec(1, 2, 2, 3)] {
            let space = build_config_space(&spec).unwrap();
            for idx in 0..space.len() {
                let cfg = space.decode(idx);
                assert_eq!(space.encode(&cfg).unwrap(), idx);
            }
        }
    }

    #[test]
    fn digit_accessors_agree_with_decode() {
        let space = build_config_space(&small_spec(2, 2, 2, 2)).unwrap();
        for idx in (0..space.len()).step_by(7) {
            let cfg = space.decode(idx);
            for j in 0..space.spec.z_coords() {
                assert_eq!(space.z_digit(idx, j), cfg.z[j] as usize);
            }
            for dof in 0..space.spec.a_coords() {
                assert_eq!(space.a_level(idx, dof), cfg.a_levels[dof] as usize);
            }
        }
    }

    #[test]
    fn shift_wraps_cyclically() {
        let space = build_config_space(&small_spec(1, 3, 1, 3)).unwrap();
        for idx in 0..space.len() {
            let thrice = space.shift_z(space.shift_z(space.shift_z(idx, 0, 1), 0, 1), 0, 1);
            assert_eq!(thrice, idx);
            let (mut j, mut wraps) = (idx, 0);
            for _ in 0..3 {
                let (jj, w) = space.shift_a(j, 0, 1);
                j = jj;
                wraps += w;
            }
            assert_eq!(j, idx);
            assert_eq!(wraps, 1);
        }
    }

    #[test]
    fn particle_derivative_constant_and_linear() {
        let space = build_config_space(&small_spec(1, 3, 1, 3)).unwrap();
        let constant = vec![2.5; space.len()];
        let d = space.particle_derivative(&constant, 0, 0).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));

        // linearity
        let f: Vec<f64> = (0..space.len()).map(|i| (i % 7) as f64).collect();
        let g: Vec<f64> = (0..space.len()).map(|i| ((i * 3) % 5) as f64).collect();
        let sum: Vec<f64> = f.iter().zip(&g).map(|(a, b)| 2.0 * a + 3.0 * b).collect();
        let df = space.particle_derivative(&f, 0, 0).unwrap();
        let dg = space.particle_derivative(&g, 0, 0).unwrap();
        let dsum = space.particle_derivative(&sum, 0, 0).unwrap();
        for i in 0..space.len() {
            assert!((dsum[i] - 2.0 * df[i] - 3.0 * dg[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn particle_derivative_of_sine_matches_cosine() {
        // Ls = 8, f(z) = sin(2 pi z / Ls); central difference has the exact
        // symbol sin(theta)/dx with theta = 2 pi / Ls, i.e. relative error
        // |1 - sin(theta)/theta| = O(dx^2) against the analytic cosine.
        let mut spec = small_spec(1, 8, 1, 2);
        spec.max_configs = 1 << 23;
        let space = build_config_space(&spec).unwrap();
        let theta = 2.0 * core::f64::consts::PI / 8.0;
        let f: Vec<f64> = (0..space.len())
            .map(|i| math::sin(theta * space.z_digit(i, 0) as f64))
            .collect();
        let d = space.particle_derivative(&f, 0, 0).unwrap();
        let bound = (1.0 - math::sin(theta) / theta).abs() * theta + 1e-12;
        let mut max_err = 0.0f64;
        for i in 0..space.len() {
            let analytic = theta * math::cos(theta * space.z_digit(i, 0) as f64);
            max_err = max_err.max((d[i] - analytic).abs());
        }
        assert!(max_err <= bound, "max_err {max_err} vs bound {bound}");
        // and the discrete symbol itself is exact:
        for i in 0..space.len() {
            let exact = math::sin(theta) * math::cos(theta * space.z_digit(i, 0) as f64);
            assert!((d[i] - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn field_derivative_constant_and_quadratic() {
        let space = build_config_space(&small_spec(1, 2, 0, 5)).unwrap();
        let constant = vec![1.0; space.len()];
        let d = space.field_derivative(&constant, 0, 0).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));

        // f = sum_x dx^D A(x,a)^2 => delta f / delta A = 2 A exactly away
        // from the cyclic wrap (central difference is exact on quadratics).
        let vol = space.spec.cell_volume();
        let f: Vec<f64> = (0..space.len())
            .map(|i| {
                (0..space.spec.a_coords())
                    .map(|dof| vol * space.a_value(i, dof) * space.a_value(i, dof))
                    .sum()
            })
            .collect();
        let d = space.field_derivative(&f, 1, 0).unwrap();
        let dof = space.spec.a_dof(0, 1);
        for i in 0..space.len() {
            let lvl = space.a_level(i, dof);
            if lvl == 0 || lvl == space.spec.levels - 1 {
                continue; // wrap rows see the cyclic representative jump
            }
            assert!((d[i] - 2.0 * space.a_value(i, dof)).abs() < 1e-12);
        }
    }

    #[test]
    fn field_derivative_product_rule_second_order() {
        // smooth periodic functions of the amplitude value; the central
        // difference obeys the product rule to O(dA^2).
        let mut spec = small_spec(1, 1, 0, 16);
        spec.da = 2.0 * core::f64::consts::PI / 16.0;
        let space = build_config_space(&spec).unwrap();
        let period = spec.amplitude_period();
        let w = 2.0 * core::f64::consts::PI / period;
        let f: Vec<f64> = (0..space.len()).map(|i| math::sin(w * space.a_value(i, 0))).collect();
        let g: Vec<f64> = (0..space.len()).map(|i| math::cos(w * space.a_value(i, 0))).collect();
        let fg: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a * b).collect();
        let dfg = space.field_derivative(&fg, 0, 0).unwrap();
        let df = space.field_derivative(&f, 0, 0).unwrap();
        let dg = space.field_derivative(&g, 0, 0).unwrap();
        let scale = w / spec.cell_volume();
        let tol = scale * w * w * spec.da * spec.da; // O(dA^2) with curvature factor
        for i in 0..space.len() {
            let leibniz = f[i] * dg[i] + g[i] * df[i];
            assert!((dfg[i] - leibniz).abs() <= tol, "{} vs {}", dfg[i], leibniz);
        }
    }

    #[test]
    fn mixed_partials_commute() {
        let space = build_config_space(&small_spec(1, 3, 1, 3)).unwrap();
        let f: Vec<f64> = (0..space.len()).map(|i| math::sin(0.37 * i as f64)).collect();
        let zx = space
            .field_derivative(&space.particle_derivative(&f, 0, 0).unwrap(), 1, 0)
            .unwrap();
        let xz = space
            .particle_derivative(&space.field_derivative(&f, 1, 0).unwrap(), 0, 0)
            .unwrap();
        for i in 0..space.len() {
            assert!((zx[i] - xz[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn grad_div_adjoint_and_laplacian() {
        let spec = small_spec(3, 4, 0, 2);
        let ns = spec.num_sites();
        let f: Vec<f64> = (0..ns).map(|i| math::sin(0.71 * i as f64)).collect();
        let g: Vec<f64> = (0..3 * ns).map(|i| math::cos(0.53 * i as f64)).collect();
        let grad_f = spatial_grad(&spec, &f).unwrap();
        let div_g = spatial_div(&spec, &g).unwrap();
        let vol = spec.cell_volume();
        let lhs: f64 = (0..3 * ns).map(|i| vol * g[i] * grad_f[i]).sum();
        let rhs: f64 = (0..ns).map(|i| -vol * f[i] * div_g[i]).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));

        // div(grad f) equals the (2D+1)-point stencil exactly
        let lap = spatial_laplacian(&spec, &f).unwrap();
        for site in 0..ns {
            let mut stencil = -(2.0 * 3.0) * f[site];
            for d in 0..3 {
                stencil += f[spec.site_shift(site, d, 1)] + f[spec.site_shift(site, d, -1)];
            }
            stencil /= spec.dx * spec.dx;
            assert!((lap[site] - stencil).abs() < 1e-12);
        }
    }

    #[test]
    fn div_forward_of_curl_vanishes_and_curl_of_grad_vanishes() {
        let spec = small_spec(3, 3, 0, 2);
        let ns = spec.num_sites();
        let a: Vec<f64> = (0..3 * ns).map(|i| math::sin(1.3 * i as f64 + 0.2)).collect();
        let b = spatial_curl(&spec, &a).unwrap();
        let div_b = spatial_div_forward(&spec, &b).unwrap();
        for v in div_b {
            assert!(v.abs() < 1e-12);
        }
        let f: Vec<f64> = (0..ns).map(|i| math::cos(0.9 * i as f64)).collect();
        let curl_grad = spatial_curl(&spec, &spatial_grad(&spec, &f).unwrap()).unwrap();
        for v in curl_grad {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn curl_adjoint_pairing() {
        for dim in [2usize, 3] {
            let spec = small_spec(dim, 3, 0, 2);
            let ns = spec.num_sites();
            let a: Vec<f64> = (0..dim * ns).map(|i| math::sin(0.61 * i as f64)).collect();
            let blen = if dim == 2 { ns } else { 3 * ns };
            let b: Vec<f64> = (0..blen).map(|i| math::cos(0.41 * i as f64 + 1.0)).collect();
            let curl_a = spatial_curl(&spec, &a).unwrap();
            let adj_b = spatial_curl_adjoint(&spec, &b).unwrap();
            let lhs: f64 = curl_a.iter().zip(&b).map(|(x, y)| x * y).sum();
            let rhs: f64 = a.iter().zip(&adj_b).map(|(x, y)| x * y).sum();
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0), "dim {dim}");
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = small_spec(1, 2, 1, 2);
        s.dim = 4;
        assert!(s.validate().is_err());
        let mut s = small_spec(1, 2, 1, 2);
        s.levels = 1;
        assert!(s.validate().is_err());
        let mut s = small_spec(1, 2, 1, 2);
        s.dx = 0.0;
        assert!(s.validate().is_err());
        let mut s = small_spec(1, 2, 1, 2);
        s.periodic = false;
        assert!(s.validate().is_err());
        let mut s = small_spec(1, 2, 1, 2);
        s.particles[0].mass = -1.0;
        assert!(s.validate().is_err());
    }
}
