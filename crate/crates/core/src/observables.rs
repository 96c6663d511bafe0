//! Charge and current densities, expected fields, Maxwell residuals,
//! Helmholtz decomposition, the periodic Poisson solver, and the
//! standard-form Hamiltonian split.
//!
//! Conventions:
//! - `rho_e(x) = <sum_n q_n 1[z_n = x]> / dx^D`; on the periodic lattice the
//!   Gauss sector carries the neutralizing background
//!   `rho_bar = sum_n q_n / (Ls^D dx^D)` (a lattice divergence sums to zero,
//!   so `div E = rho_e` is insoluble for a charged sector without it);
//! - two current observables: the phase-gradient form (the current velocity
//!   weighted by the charge density) and the bond form derived from the
//!   exact hop algebra, whose backward divergence reproduces
//!   `-(1/ i hbar) <[rho_e, H]>` to round-off;
//! - expected `A` comes in a linear mean (enters the Ehrenfest relations)
//!   and a circular mean (exactly covariant under cyclic gauge shifts);
//!   `B = curl A` with the forward curl, so `div_f B = 0` identically.

use crate::ephase::EpistemicState;
use crate::error::{EdError, Result};
use crate::evolution::{current_velocity, magnetic_energy_diag};
use crate::lattice::{
    spatial_curl, spatial_curl_adjoint, spatial_div, spatial_grad, spatial_laplacian, ConfigSpace,
};
use crate::linalg;
use crate::math;
use crate::operator::{KernelOperator, KineticForm, OpTag, OpTerm};
use crate::C64;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

/// Expected field data extracted from one state.
#[derive(Debug, Clone)]
pub struct FieldExpectation {
    /// Linear mean of the vector potential per dof `[a * Ls^D + site]`.
    pub a_lin: Vec<f64>,
    /// Circular mean of the vector potential (defined mod `M dA`).
    pub a_circ: Vec<f64>,
    /// Expected electric field per dof.
    pub e: Vec<f64>,
    /// `curl a_lin`: scalar per site in D=2, vector in D=3, absent in D=1.
    pub b: Option<Vec<f64>>,
    /// Charge density per site (background not subtracted).
    pub rho_e: Vec<f64>,
    /// Phase-gradient current density per dof.
    pub j_e: Vec<f64>,
}

/// Which current observable to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurrentKind {
    /// Charge density times the current velocity read off the phase
    /// differences of `psi` (branch-safe for moderate gradients).
    PhaseGradient,
    /// Bond (hop) current matched to the kinetic form; exactly
    /// divergence-consistent with the charge commutator.
    Bond(KineticForm),
}

/// Expected charge density per site: `sum_cfg |psi|^2 sum_n q_n 1[z_n=x] / dx^D`.
pub fn charge_density(space: &ConfigSpace, psi: &[C64]) -> Result<Vec<f64>> {
    space.check_len(psi)?;
    let spec = &space.spec;
    let mut out = vec![0.0; spec.num_sites()];
    let inv_vol = 1.0 / spec.cell_volume();
    for (i, amp) in psi.iter().enumerate() {
        let w = amp.norm_sqr();
        if w == 0.0 {
            continue;
        }
        for n in 0..spec.num_particles() {
            out[space.particle_site(i, n)] += w * spec.particles[n].charge * inv_vol;
        }
    }
    Ok(out)
}

/// Phase-gradient current density:
/// `J^a(x) = sum_cfg rho q_n 1[z_n=x]/dx^D * v_n^a` with
/// `v_n^a = (1/m)(hbar arg(psi_up conj(psi_dn))/(2 dx) - beta_n A_bar)`.
pub fn current_density_phase(space: &ConfigSpace, psi: &[C64]) -> Result<Vec<f64>> {
    space.check_len(psi)?;
    let spec = &space.spec;
    let ns = spec.num_sites();
    let d = spec.dim;
    let mut out = vec![0.0; d * ns];
    let inv_vol = 1.0 / spec.cell_volume();
    for (i, amp) in psi.iter().enumerate() {
        let w = amp.norm_sqr();
        if w == 0.0 {
            continue;
        }
        for n in 0..spec.num_particles() {
            let q = spec.particles[n].charge;
            if q == 0.0 {
                continue;
            }
            let m = spec.particles[n].mass;
            let beta = q / spec.c;
            let site = space.particle_site(i, n);
            for a in 0..d {
                let coord = n * d + a;
                let up = space.shift_z(i, coord, 1);
                let dn = space.shift_z(i, coord, -1);
                let z = psi[up] * psi[dn].conj();
                let dphi = if z.norm_sqr() > 0.0 {
                    spec.hbar * math::atan2(z.im, z.re) / (2.0 * spec.dx)
                } else {
                    0.0
                };
                let v = (dphi - beta * space.site_averaged_a(i, a, site)) / m;
                out[a * ns + site] += w * q * inv_vol * v;
            }
        }
    }
    Ok(out)
}

/// Current density as in `current_density_phase` but from an explicit
/// `(rho, phi)` state (no phase reconstruction).
pub fn current_density_state(space: &ConfigSpace, state: &EpistemicState) -> Result<Vec<f64>> {
    let spec = &space.spec;
    let ns = spec.num_sites();
    let d = spec.dim;
    let cur = current_velocity(space, state)?;
    let nzc = spec.z_coords();
    let inv_vol = 1.0 / spec.cell_volume();
    let mut out = vec![0.0; d * ns];
    for i in 0..space.len() {
        let w = state.rho[i];
        if w == 0.0 {
            continue;
        }
        for n in 0..spec.num_particles() {
            let q = spec.particles[n].charge;
            if q == 0.0 {
                continue;
            }
            let site = space.particle_site(i, n);
            for a in 0..d {
                out[a * ns + site] += w * q * inv_vol * cur.v[i * nzc + n * d + a];
            }
        }
    }
    Ok(out)
}

/// Bond-current operator for particle `n`, direction `a`, link at `site`:
/// the Hermitian hop current whose backward divergence reproduces the
/// charge-density commutator with the matching kinetic term exactly.
pub fn bond_current_operator(
    space: &Arc<ConfigSpace>,
    n: usize,
    a: usize,
    site: usize,
    form: KineticForm,
) -> Result<KernelOperator> {
    let spec = &space.spec;
    if n >= spec.num_particles() || a >= spec.dim || site >= spec.num_sites() {
        return Err(EdError::IndexOutOfRange(format!("bond current n={n}, a={a}, site={site}")));
    }
    let q = spec.particles[n].charge;
    let m = spec.particles[n].mass;
    let mut op = KernelOperator::zero(space, OpTag::Observable);
    match form {
        KineticForm::SingleHop => {
            let coef = -spec.hbar * q / (2.0 * m * spec.dx * spec.cell_volume());
            op.push_term(OpTerm::ZHop {
                n,
                a,
                step: 1,
                coef,
                anti: true,
                src_sites: Some(Arc::new(vec![site])),
            });
        }
        KineticForm::CentralTwoHop => {
            let coef = -spec.hbar * q / (8.0 * m * spec.dx * spec.cell_volume());
            let back = spec.site_shift(site, a, -1);
            op.push_term(OpTerm::ZHop {
                n,
                a,
                step: 2,
                coef,
                anti: true,
                src_sites: Some(Arc::new(vec![site, back])),
            });
        }
    }
    Ok(op)
}

/// Expected bond current per dof, summed over particles.
pub fn current_density_bond(
    space: &Arc<ConfigSpace>,
    psi: &[C64],
    form: KineticForm,
) -> Result<Vec<f64>> {
    space.check_len(psi)?;
    let spec = &space.spec;
    let ns = spec.num_sites();
    let mut out = vec![0.0; spec.dim * ns];
    for n in 0..spec.num_particles() {
        if spec.particles[n].charge == 0.0 {
            continue;
        }
        for a in 0..spec.dim {
            for site in 0..ns {
                let op = bond_current_operator(space, n, a, site, form)?;
                out[a * ns + site] += op.expectation(psi);
            }
        }
    }
    Ok(out)
}

/// All field expectations of a state.
pub fn expected_fields(
    space: &Arc<ConfigSpace>,
    psi: &[C64],
    current: CurrentKind,
) -> Result<FieldExpectation> {
    space.check_len(psi)?;
    let spec = &space.spec;
    let nac = spec.a_coords();
    let mut a_lin = vec![0.0; nac];
    let mut circ = vec![C64::new(0.0, 0.0); nac];
    let two_pi = 2.0 * core::f64::consts::PI;
    let period = spec.amplitude_period();
    for (i, amp) in psi.iter().enumerate() {
        let w = amp.norm_sqr();
        if w == 0.0 {
            continue;
        }
        for dof in 0..nac {
            let val = space.a_value(i, dof);
            a_lin[dof] += w * val;
            circ[dof] += C64::new(w, 0.0) * math::cis(two_pi * val / period);
        }
    }
    let a_circ: Vec<f64> = circ
        .iter()
        .map(|z| {
            if z.norm_sqr() > 0.0 {
                period * math::atan2(z.im, z.re) / two_pi
            } else {
                0.0
            }
        })
        .collect();

    // <E> per dof: E = c_E i (S+ - S-), so <E> = -2 c_E Im <psi, S+ psi>
    let c_e = spec.hbar * spec.c / (2.0 * spec.da * spec.cell_volume());
    let mut e = vec![0.0; nac];
    for dof in 0..nac {
        let mut dot_up = C64::new(0.0, 0.0);
        for (i, amp) in psi.iter().enumerate() {
            let (up, _) = space.shift_a(i, dof, 1);
            dot_up += amp.conj() * psi[up];
        }
        e[dof] = -2.0 * c_e * dot_up.im;
    }

    let b = if spec.dim >= 2 {
        Some(spatial_curl(spec, &a_lin)?)
    } else {
        None
    };
    let rho_e = charge_density(space, psi)?;
    let j_e = match current {
        CurrentKind::PhaseGradient => current_density_phase(space, psi)?,
        CurrentKind::Bond(form) => current_density_bond(space, psi, form)?,
    };
    Ok(FieldExpectation { a_lin, a_circ, e, b, rho_e, j_e })
}

/// `(1/ i hbar) <[A_dof, H]>` for every amplitude dof in one pass:
/// `(2/hbar) Im <A_dof psi, H psi>`.
pub fn a_dot_expectation(space: &ConfigSpace, h: &KernelOperator, psi: &[C64]) -> Result<Vec<f64>> {
    space.check_len(psi)?;
    let spec = &space.spec;
    let k = space.len();
    let mut hpsi = vec![C64::new(0.0, 0.0); k];
    h.apply(psi, &mut hpsi);
    let nac = spec.a_coords();
    let mut out = vec![0.0; nac];
    for dof in 0..nac {
        let mut dot = C64::new(0.0, 0.0);
        for i in 0..k {
            let val = space.a_value(i, dof) + h.a_offset_value(dof);
            dot += (psi[i] * C64::new(val, 0.0)).conj() * hpsi[i];
        }
        out[dof] = 2.0 / spec.hbar * dot.im;
    }
    Ok(out)
}

/// `(1/ i hbar) <[E_dof, H]>` for every amplitude dof:
/// `(2/hbar) Im <E_dof psi, H psi>`.
pub fn e_dot_expectation(space: &ConfigSpace, h: &KernelOperator, psi: &[C64]) -> Result<Vec<f64>> {
    space.check_len(psi)?;
    let spec = &space.spec;
    let k = space.len();
    let mut hpsi = vec![C64::new(0.0, 0.0); k];
    h.apply(psi, &mut hpsi);
    let c_e = spec.hbar * spec.c / (2.0 * spec.da * spec.cell_volume());
    let nac = spec.a_coords();
    let mut out = vec![0.0; nac];
    let mut epsi = vec![C64::new(0.0, 0.0); k];
    for dof in 0..nac {
        for i in 0..k {
            let (up, _) = space.shift_a(i, dof, 1);
            let (dn, _) = space.shift_a(i, dof, -1);
            epsi[i] = C64::new(0.0, c_e) * (psi[up] - psi[dn]);
        }
        let dot = linalg::dot_c(&epsi, &hpsi);
        out[dof] = 2.0 / spec.hbar * dot.im;
    }
    Ok(out)
}

/// Charge-conservation residual per site on one forward step:
/// `[rho_e(t+dt) - rho_e(t)]/dt + div J(t)`.
pub fn charge_conservation_residual(
    space: &Arc<ConfigSpace>,
    psi_t: &[C64],
    psi_tdt: &[C64],
    dt: f64,
    current: CurrentKind,
) -> Result<Vec<f64>> {
    let spec = &space.spec;
    let rho0 = charge_density(space, psi_t)?;
    let rho1 = charge_density(space, psi_tdt)?;
    let j = match current {
        CurrentKind::PhaseGradient => current_density_phase(space, psi_t)?,
        CurrentKind::Bond(form) => current_density_bond(space, psi_t, form)?,
    };
    let div_j = spatial_div(spec, &j)?;
    Ok((0..spec.num_sites())
        .map(|x| (rho1[x] - rho0[x]) / dt + div_j[x])
        .collect())
}

/// Weighted l2 norm over sites or dofs: `sqrt(sum dx^D v^2)`.
pub fn site_norm(spec: &crate::lattice::LatticeSpec, v: &[f64]) -> f64 {
    let vol = spec.cell_volume();
    math::sqrt(v.iter().map(|x| vol * x * x).sum())
}

/// Per-step Maxwell residual series along a trajectory under `h_phi` with a
/// static scalar potential `phi_sites`.
#[derive(Debug, Clone)]
pub struct MaxwellSeries {
    /// `d_t A + c (E + grad Phi)` — interior steps.
    pub r_potential: Vec<f64>,
    /// `curl E + (1/c) d_t B` — interior steps (D >= 2).
    pub r_faraday: Vec<f64>,
    /// `d_t E - c curl_adj B + J` — interior steps (D >= 2).
    pub r_ampere: Vec<f64>,
    /// `div E - (rho_e - rho_bar)` — all steps.
    pub r_gauss: Vec<f64>,
    /// Static Ehrenfest defect of (1): `(1/i hbar)<[A,H]> + c(E + grad Phi)`.
    pub floor_potential: Vec<f64>,
    /// Static defect of (2): the forward curl of the (1) defect over `c`
    /// (Faraday is exactly the curl of the potential equation).
    pub floor_faraday: Vec<f64>,
    /// Static Ehrenfest defect of (3).
    pub floor_ampere: Vec<f64>,
    /// Pure time-truncation part of (1): `|| central-dt A - <[A, H]>/(i hbar) ||`
    /// per interior step — `O(dt^2)` with no spatial-floor admixture.
    pub time_truncation_potential: Vec<f64>,
    /// Same for (2) (through `B = curl A`).
    pub time_truncation_faraday: Vec<f64>,
    /// Same for (3).
    pub time_truncation_ampere: Vec<f64>,
    /// Max over interior steps of the exact-identity defect
    /// `|| (2) - curl((1))/c ||` (zero to round-off by construction).
    pub faraday_curl_consistency: f64,
    /// Per-step field expectations (for refinement studies and export).
    pub fields: Vec<FieldExpectation>,
}

/// Compute the four Maxwell residuals along `traj` (time spacing `dt`),
/// together with the static discretization floors that the time-derivative
/// parts converge to as `dt -> 0`.
pub fn maxwell_residuals(
    space: &Arc<ConfigSpace>,
    h_phi: &KernelOperator,
    traj: &[Vec<C64>],
    phi_sites: &[f64],
    dt: f64,
    current: CurrentKind,
) -> Result<MaxwellSeries> {
    let spec = &space.spec;
    if traj.len() < 3 {
        return Err(EdError::InvalidSpec(format!(
            "need at least 3 trajectory points, got {}",
            traj.len()
        )));
    }
    if phi_sites.len() != spec.num_sites() {
        return Err(EdError::LengthMismatch {
            expected: spec.num_sites(),
            got: phi_sites.len(),
        });
    }
    let fields: Vec<FieldExpectation> = traj
        .iter()
        .map(|psi| expected_fields(space, psi, current))
        .collect::<Result<_>>()?;
    let grad_phi = spatial_grad(spec, &phi_sites.to_vec())?;
    let total_charge: f64 = spec.particles.iter().map(|p| p.charge).sum();
    let rho_bar = total_charge / (spec.num_sites() as f64 * spec.cell_volume());

    let mut r_potential = Vec::new();
    let mut r_faraday = Vec::new();
    let mut r_ampere = Vec::new();
    let mut faraday_curl_consistency = 0.0f64;
    let mut floor_potential = Vec::new();
    let mut floor_faraday = Vec::new();
    let mut floor_ampere = Vec::new();
    let mut time_truncation_potential = Vec::new();
    let mut time_truncation_faraday = Vec::new();
    let mut time_truncation_ampere = Vec::new();
    for t in 1..traj.len() - 1 {
        let f = &fields[t];
        let nac = spec.a_coords();
        let mut v1 = vec![0.0; nac];
        for dof in 0..nac {
            let da_dt = (fields[t + 1].a_lin[dof] - fields[t - 1].a_lin[dof]) / (2.0 * dt);
            v1[dof] = da_dt + spec.c * (f.e[dof] + grad_phi[dof]);
        }
        r_potential.push(site_norm(spec, &v1));

        let a_rate = a_dot_expectation(space, h_phi, &traj[t])?;
        let mut fl1 = vec![0.0; nac];
        let mut tt1 = vec![0.0; nac];
        for dof in 0..nac {
            fl1[dof] = a_rate[dof] + spec.c * (f.e[dof] + grad_phi[dof]);
            let da_dt = (fields[t + 1].a_lin[dof] - fields[t - 1].a_lin[dof]) / (2.0 * dt);
            tt1[dof] = da_dt - a_rate[dof];
        }
        floor_potential.push(site_norm(spec, &fl1));
        time_truncation_potential.push(site_norm(spec, &tt1));
        if spec.dim >= 2 {
            let curl_fl1 = spatial_curl(spec, &fl1)?;
            let scaled: Vec<f64> = curl_fl1.iter().map(|v| v / spec.c).collect();
            floor_faraday.push(site_norm(spec, &scaled));
            let curl_tt1 = spatial_curl(spec, &tt1)?;
            let scaled_tt: Vec<f64> = curl_tt1.iter().map(|v| v / spec.c).collect();
            time_truncation_faraday.push(site_norm(spec, &scaled_tt));
        }

        if spec.dim >= 2 {
            let curl_e = spatial_curl(spec, &f.e)?;
            let b_next = fields[t + 1].b.as_ref().unwrap();
            let b_prev = fields[t - 1].b.as_ref().unwrap();
            let v2: Vec<f64> = curl_e
                .iter()
                .enumerate()
                .map(|(i, ce)| ce + (b_next[i] - b_prev[i]) / (2.0 * dt) / spec.c)
                .collect();
            r_faraday.push(site_norm(spec, &v2));
            // exact identity: (2) = curl((1)) / c
            let curl_v1 = spatial_curl(spec, &v1)?;
            let mut cons = 0.0f64;
            for (a, b) in v2.iter().zip(curl_v1.iter()) {
                cons = math::fmax(cons, (a - b / spec.c).abs());
            }
            faraday_curl_consistency = math::fmax(faraday_curl_consistency, cons);

            let curl_b = spatial_curl_adjoint(spec, f.b.as_ref().unwrap())?;
            let mut v3 = vec![0.0; nac];
            for dof in 0..nac {
                let de_dt = (fields[t + 1].e[dof] - fields[t - 1].e[dof]) / (2.0 * dt);
                v3[dof] = de_dt - spec.c * curl_b[dof] + f.j_e[dof];
            }
            r_ampere.push(site_norm(spec, &v3));

            let e_rate = e_dot_expectation(space, h_phi, &traj[t])?;
            let mut fl3 = vec![0.0; nac];
            let mut tt3 = vec![0.0; nac];
            for dof in 0..nac {
                fl3[dof] = e_rate[dof] - spec.c * curl_b[dof] + f.j_e[dof];
                let de_dt = (fields[t + 1].e[dof] - fields[t - 1].e[dof]) / (2.0 * dt);
                tt3[dof] = de_dt - e_rate[dof];
            }
            floor_ampere.push(site_norm(spec, &fl3));
            time_truncation_ampere.push(site_norm(spec, &tt3));
        }
    }
    let mut r_gauss = Vec::new();
    for f in &fields {
        let div_e = spatial_div(spec, &f.e)?;
        let v4: Vec<f64> = div_e
            .iter()
            .zip(f.rho_e.iter())
            .map(|(d, r)| d - (r - rho_bar))
            .collect();
        r_gauss.push(site_norm(spec, &v4));
    }
    Ok(MaxwellSeries {
        r_potential,
        r_faraday,
        r_ampere,
        r_gauss,
        floor_potential,
        floor_faraday,
        floor_ampere,
        time_truncation_potential,
        time_truncation_faraday,
        time_truncation_ampere,
        faraday_curl_consistency,
        fields,
    })
}

// ---------------------------------------------------------------------------
// Spatial solvers: Helmholtz split and the periodic Poisson equation.
// ---------------------------------------------------------------------------

/// Exact discrete Helmholtz split: `longitudinal = grad(lap^-1 div f)` on the
/// zero-mean subspace, `transverse = f - longitudinal`.
pub fn helmholtz_decompose(
    spec: &crate::lattice::LatticeSpec,
    field: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let div = spatial_div(spec, field)?;
    let (potential, _mean) = poisson_zero_mean(spec, &div)?;
    // div = lap(potential); longitudinal = grad potential
    let longitudinal = spatial_grad(spec, &potential)?;
    let transverse: Vec<f64> = field
        .iter()
        .zip(longitudinal.iter())
        .map(|(f, l)| f - l)
        .collect();
    Ok((longitudinal, transverse))
}

/// Solve `lap u = rhs` on the zero-mean subspace (periodic lattice), pinning
/// the constant mode to zero. Returns `(u, removed_mean_of_rhs)`.
pub fn poisson_zero_mean(
    spec: &crate::lattice::LatticeSpec,
    rhs: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let ns = spec.num_sites();
    if rhs.len() != ns {
        return Err(EdError::LengthMismatch { expected: ns, got: rhs.len() });
    }
    let mean: f64 = rhs.iter().sum::<f64>() / ns as f64;
    let b: Vec<f64> = rhs.iter().map(|r| -(r - mean)).collect();
    // CG on the positive-definite -lap restricted to zero-mean vectors
    let apply = |x: &[f64], out: &mut [f64]| {
        let lap = spatial_laplacian(spec, &x.to_vec()).expect("laplacian apply");
        for (o, l) in out.iter_mut().zip(lap.iter()) {
            *o = -l;
        }
    };
    let (mut u, _res, _it) = linalg::cg_spd(apply, &b, 1e-12, 10 * ns + 100)?;
    let u_mean: f64 = u.iter().sum::<f64>() / ns as f64;
    for x in u.iter_mut() {
        *x -= u_mean;
    }
    // u solves -lap u = -(rhs - mean)  =>  lap u = rhs - mean
    Ok((u, mean))
}

/// Solve the lattice Poisson equation `-lap phi = rho_e` with the matched
/// `div(grad)` Laplacian. Net charge is removed as a uniform background and
/// reported. Residual of the returned solution is at CG tolerance.
pub fn coulomb_solve(
    spec: &crate::lattice::LatticeSpec,
    rho_e: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let neg: Vec<f64> = rho_e.iter().map(|r| -r).collect();
    let (phi, mean) = poisson_zero_mean(spec, &neg)?;
    Ok((phi, -mean))
}

/// Lattice Green's function with uniform background, zero-mean pinned:
/// `-lap G = (delta_0 - 1/Ls^D) / dx^D`, returned per displacement site.
pub fn lattice_green(spec: &crate::lattice::LatticeSpec) -> Result<Vec<f64>> {
    let ns = spec.num_sites();
    let mut rho = vec![0.0; ns];
    rho[0] = 1.0 / spec.cell_volume();
    let (phi, _bg) = coulomb_solve(spec, &rho)?;
    Ok(phi)
}

/// Pairwise Coulomb energy of point charges at `sites` with self-terms
/// dropped: `(1/2) sum_{n != n'} q_n q_n' G(z_n - z_n')`.
pub fn coulomb_pair_energy(
    spec: &crate::lattice::LatticeSpec,
    green: &[f64],
    charges: &[(usize, f64)],
) -> f64 {
    let mut e = 0.0;
    for (i, (site_i, q_i)) in charges.iter().enumerate() {
        for (j, (site_j, q_j)) in charges.iter().enumerate() {
            if i == j {
                continue;
            }
            e += 0.5 * q_i * q_j * green[displacement_site(spec, *site_i, *site_j)];
        }
    }
    e
}

/// Site index of the displacement `site_i - site_j` (componentwise cyclic).
pub fn displacement_site(
    spec: &crate::lattice::LatticeSpec,
    site_i: usize,
    site_j: usize,
) -> usize {
    let ci = spec.site_coords(site_i);
    let cj = spec.site_coords(site_j);
    let diff: Vec<usize> = ci
        .iter()
        .zip(cj.iter())
        .map(|(a, b)| (*a as isize - *b as isize).rem_euclid(spec.sites as isize) as usize)
        .collect();
    spec.site_index(&diff)
}

// ---------------------------------------------------------------------------
// Standard-form split H = H_rad + H_mat (Coulomb-gauge bookkeeping).
// ---------------------------------------------------------------------------

/// The standard-form split of the Hamiltonian.
///
/// Exact operator identity on the lattice:
/// `H + Gamma_{Phi_C} = H_rad + H_mat + (1/2) sum_n q_n^2 G(0)`
/// where `Gamma_{Phi_C}` is the difference-form Gauss constraint smeared
/// with the configuration-dependent Coulomb potential. On physical states
/// the smeared constraint expectation is a discretization residual, which
/// is what "within constraint tolerance" means for the energy split.
#[derive(Debug)]
pub struct StandardFormSplit {
    /// `(1/2) int dx^D E_tr^2 + magnetic potential` with
    /// `E_tr = E + grad Phi_C`.
    pub h_rad: KernelOperator,
    /// Particle kinetic terms plus the pairwise lattice Coulomb interaction
    /// (self-terms dropped).
    pub h_mat: KernelOperator,
    /// `(1/2) sum_n q_n^2 G(0)` — the finite lattice self-energy constant.
    pub self_energy: f64,
    /// D=1 has no transverse sector; the radiation part is the
    /// (longitudinally corrected) zero-mode kinetic term only.
    pub d1_zero_mode_only: bool,
}

/// Build the split for the Hamiltonian with the given kinetic form and an
/// optional compact magnetic potential (must mirror how `h` was built).
pub fn standard_form_split(
    space: &Arc<ConfigSpace>,
    form: KineticForm,
    include_magnetic: bool,
) -> Result<StandardFormSplit> {
    let spec = &space.spec;
    let k = space.len();
    let ns = spec.num_sites();
    let green = lattice_green(spec)?;

    // H_mat: particle kinetic + pairwise Coulomb diag
    let mut h_mat = KernelOperator::zero(space, OpTag::Hamiltonian);
    let hbar2 = spec.hbar * spec.hbar;
    let mut mat_diag = vec![0.0; k];
    for n in 0..spec.num_particles() {
        let m = spec.particles[n].mass;
        for a in 0..spec.dim {
            match form {
                KineticForm::CentralTwoHop => {
                    let coef = -hbar2 / (8.0 * m * spec.dx * spec.dx);
                    h_mat.push_term(OpTerm::ZHop { n, a, step: 2, coef, anti: false, src_sites: None });
                    for v in mat_diag.iter_mut() {
                        *v += hbar2 / (4.0 * m * spec.dx * spec.dx);
                    }
                }
                KineticForm::SingleHop => {
                    let coef = -hbar2 / (2.0 * m * spec.dx * spec.dx);
                    h_mat.push_term(OpTerm::ZHop { n, a, step: 1, coef, anti: false, src_sites: None });
                    for v in mat_diag.iter_mut() {
                        *v += hbar2 / (m * spec.dx * spec.dx);
                    }
                }
            }
        }
    }
    for (i, v) in mat_diag.iter_mut().enumerate() {
        let mut e = 0.0;
        for n1 in 0..spec.num_particles() {
            for n2 in 0..spec.num_particles() {
                if n1 == n2 {
                    continue;
                }
                let s1 = space.particle_site(i, n1);
                let s2 = space.particle_site(i, n2);
                e += 0.5
                    * spec.particles[n1].charge
                    * spec.particles[n2].charge
                    * green[displacement_site(spec, s1, s2)];
            }
        }
        *v += e;
    }
    h_mat.push_diag(mat_diag);

    // H_rad: field kinetic (our discrete (1/2) int E^2) + cross and square
    // terms of grad Phi_C + optional magnetic potential
    let mut h_rad = KernelOperator::zero(space, OpTag::Hamiltonian);
    let field_coef = -(spec.hbar * spec.c) * (spec.hbar * spec.c)
        / (2.0 * spec.cell_volume() * spec.da * spec.da);
    for dof in 0..spec.a_coords() {
        h_rad.push_term(OpTerm::ALaplacian { dof, coef: field_coef });
    }
    // per-config grad Phi_C (a z-diagonal weight per dof) and its square
    let vol = spec.cell_volume();
    let c_e = spec.hbar * spec.c / (2.0 * spec.da * vol);
    let mut sq_diag = vec![0.0; k];
    // Phi_C per (z-sector) is a function of particle sites only; cache per
    // unique particle placement via the per-config loop (cheap at desk scale).
    let mut phi_c = vec![0.0; ns];
    let mut grad_site = vec![0.0; spec.a_coords()];
    for i in 0..k {
        for (x, p) in phi_c.iter_mut().enumerate() {
            let mut s = 0.0;
            for n in 0..spec.num_particles() {
                s += spec.particles[n].charge
                    * green[displacement_site(spec, x, space.particle_site(i, n))];
            }
            *p = s;
        }
        for a in 0..spec.dim {
            for site in 0..ns {
                let up = spec.site_shift(site, a, 1);
                grad_site[spec.a_dof(a, site)] = (phi_c[up] - phi_c[site]) / spec.dx;
            }
        }
        let mut sq = 0.0;
        for g in grad_site.iter() {
            sq += 0.5 * vol * g * g;
        }
        sq_diag[i] = sq;
    }
    h_rad.push_diag(sq_diag);
    // cross term: sum_dof dx^D (grad Phi_C)_dof E_dof, with the z-diagonal
    // weight commuting with E
    for dof in 0..spec.a_coords() {
        let mut weight = vec![0.0; k];
        let (a, site) = (dof / ns, dof % ns);
        let up = spec.site_shift(site, a, 1);
        for (i, w) in weight.iter_mut().enumerate() {
            let mut p_up = 0.0;
            let mut p_here = 0.0;
            for n in 0..spec.num_particles() {
                let zs = space.particle_site(i, n);
                p_up += spec.particles[n].charge * green[displacement_site(spec, up, zs)];
                p_here += spec.particles[n].charge * green[displacement_site(spec, site, zs)];
            }
            *w = (p_up - p_here) / spec.dx;
        }
        // dx^D * weight * E = dx^D * weight * c_E i(S+ - S-)
        h_rad.push_term(OpTerm::ADiffWeighted {
            dof,
            coef: vol * c_e,
            weight: Arc::new(weight),
        });
    }
    if include_magnetic {
        if spec.dim < 2 {
            return Err(EdError::InvalidSpec(alloc::string::String::from(
                "magnetic potential requires D >= 2",
            )));
        }
        h_rad.push_diag(magnetic_energy_diag(space));
    }

    let self_energy = 0.5
        * spec
            .particles
            .iter()
            .map(|p| p.charge * p.charge * green[0])
            .sum::<f64>();
    Ok(StandardFormSplit {
        h_rad,
        h_mat,
        self_energy,
        d1_zero_mode_only: spec.dim == 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{build_hamiltonian_kernel, PotentialChoice};
    use crate::lattice::{build_config_space, LatticeSpec, Particle, DEFAULT_MAX_CONFIGS};
    use crate::rng::Rng;

    fn neutral_pair_spec() -> LatticeSpec {
        LatticeSpec {
            dim: 1,
            sites: 3,
            dx: 1.0,
            particles: vec![
                Particle { mass: 1.0, charge: 1.0 },
                Particle { mass: 1.4, charge: -1.0 },
            ],
            levels: 3,
            da: 2.0 * core::f64::consts::PI / 3.0,
            hbar: 1.0,
            c: 1.0,
            eta: 1.0,
            periodic: true,
            max_configs: DEFAULT_MAX_CONFIGS,
        }
    }

    fn random_psi(k: usize, seed: u64) -> Vec<C64> {
        let mut rng = Rng::with_stream(seed, 2);
        let mut v: Vec<C64> = (0..k).map(|_| C64::new(rng.normal(), rng.normal())).collect();
        linalg::normalize_c(&mut v);
        v
    }

    #[test]
    fn total_charge_is_exact() {
        let spec = neutral_pair_spec();
        let space = Arc::new(build_config_space(&spec).unwrap());
        let psi = random_psi(space.len(), 3);
        let rho = charge_density(&space, &psi).unwrap();
        let total: f64 = rho.iter().map(|r| r * spec.cell_volume()).sum();
        assert!(total.abs() < 1e-13); // neutral pair
    }

    #[test]
    fn neutral_and_real_states_carry_no_current_or_field() {
        let spec = LatticeSpec {
            particles: vec![Particle { mass: 1.0, charge: 0.0 }],
            ..neutral_pair_spec()
        };
        let space = Arc::new(build_config_space(&spec).unwrap());
        let psi = random_psi(space.len(), 5);
        let j = current_density_phase(&space, &psi).unwrap();
        assert!(j.iter().all(|&v| v == 0.0));

        // real psi -> <E> = 0 exactly
        let real_psi: Vec<C64> = psi.iter().map(|z| C64::new(z.norm(), 0.0)).collect();
        let f = expected_fields(&space, &real_psi, CurrentKind::PhaseGradient).unwrap();
        assert!(f.e.iter().all(|&v| v.abs() < 1e-13));
    }

    #[test]
    fn point_mass_fields_are_exact() {
        let spec = neutral_pair_spec();
        let space = Arc::new(build_config_space(&spec).unwrap());
        let mut psi = vec![C64::new(0.0, 0.0); space.len()];
        let idx = 57 % space.len();
        psi[idx] = C64::new(1.0, 0.0);
        let f = expected_fields(&space, &psi, CurrentKind::PhaseGradient).unwrap();
        for dof in 0..spec.a_coords() {
            assert!((f.a_lin[dof] - space.a_value(idx, dof)).abs() < 1e-13);
        }
    }

    #[test]
    fn bond_current_divergence_matches_charge_commutator() {
        let spec = neutral_pair_spec();
        let space = Arc::new(build_config_space(&spec).unwrap());
        let h = build_hamiltonian_kernel(&space, PotentialChoice::None, KineticForm::CentralTwoHop)
            .unwrap();
        let psi = random_psi(space.len(), 9);
        let j = current_density_bond(&space, &psi, KineticForm::CentralTwoHop).unwrap();
        let div_j = spatial_div(&spec, &j).unwrap();
        // d<rho_e>/dt from the commutator: build rho_e_x as diagonal kernels
        let vol = spec.cell_volume();
        for x in 0..spec.num_sites() {
            let mut diag = vec![0.0; space.len()];
            for (i, d) in diag.iter_mut().enumerate() {
                for n in 0..spec.num_particles() {
                    if space.particle_site(i, n) == x {
                        *d += spec.particles[n].charge / vol;
                    }
                }
            }
            let rho_x = KernelOperator::diagonal(&space, diag, OpTag::Observable).unwrap();
            // (1/i hbar) <[rho_x, H]> = (2/hbar) Im <rho_x psi, H psi>
            let k = space.len();
            let mut hpsi = vec![C64::new(0.0, 0.0); k];
            h.apply(&psi, &mut hpsi);
            let mut rpsi = vec![C64::new(0.0, 0.0); k];
            rho_x.apply(&psi, &mut rpsi);
            let rate = 2.0 / spec.hbar * linalg::dot_c(&rpsi, &hpsi).im;
            assert!(
                (rate + div_j[x]).abs() < 1e-12,
                "site {x}: rate {rate} vs -div J {}",
                -div_j[x]
            );
        }
    }

    #[test]
    fn helmholtz_reconstructs_and_separates() {
        let spec = LatticeSpec {
            dim: 2,
            sites: 4,
            particles: vec![],
            levels: 2,
            da: 1.0,
            ..neutral_pair_spec()
        };
        let ns = spec.num_sites();
        let field: Vec<f64> = (0..2 * ns).map(|i| math::sin(0.83 * i as f64 + 0.1)).collect();
        let (longi, trans) = helmholtz_decompose(&spec, &field).unwrap();
        for i in 0..2 * ns {
            assert!((longi[i] + trans[i] - field[i]).abs() < 1e-12);
        }
        let div_t = spatial_div(&spec, &trans).unwrap();
        for v in div_t {
            assert!(v.abs() < 1e-10);
        }
        let curl_l = spatial_curl(&spec, &longi).unwrap();
        for v in curl_l {
            assert!(v.abs() < 1e-10);
        }

        // gradient input -> transverse vanishes (up to the removed mean)
        let f: Vec<f64> = (0..ns).map(|i| math::cos(1.7 * i as f64)).collect();
        let g = spatial_grad(&spec, &f).unwrap();
        let (_, trans_g) = helmholtz_decompose(&spec, &g).unwrap();
        for v in &trans_g {
            assert!(v.abs() < 1e-10);
        }
        // divergence-free input -> longitudinal vanishes
        let (_, t_only) = helmholtz_decompose(&spec, &trans).unwrap();
        let (l_of_t, _) = helmholtz_decompose(&spec, &t_only).unwrap();
        for v in &l_of_t {
            assert!(v.abs() < 1e-10);
        }
    }

    #[test]
    fn poisson_solver_zero_source_and_residual() {
        let spec = LatticeSpec {
            dim: 3,
            sites: 4,
            particles: vec![],
            levels: 2,
            da: 1.0,
            ..neutral_pair_spec()
        };
        let ns = spec.num_sites();
        let (phi, bg) = coulomb_solve(&spec, &vec![0.0; ns]).unwrap();
        assert!(bg.abs() < 1e-15);
        assert!(phi.iter().all(|&v| v.abs() < 1e-12));

        let mut rho = vec![0.0; ns];
        rho[3] = 1.0;
        rho[17] = -1.0;
        let (phi, bg) = coulomb_solve(&spec, &rho).unwrap();
        assert!(bg.abs() < 1e-14);
        let lap = spatial_laplacian(&spec, &phi).unwrap();
        for x in 0..ns {
            assert!((-lap[x] - rho[x]).abs() < 1e-9, "site {x}");
        }
    }

    #[test]
    fn green_function_symmetry_and_pair_energy() {
        let spec = LatticeSpec {
            dim: 3,
            sites: 4,
            particles: vec![],
            levels: 2,
            da: 1.0,
            ..neutral_pair_spec()
        };
        let green = lattice_green(&spec).unwrap();
        // inversion symmetry G(r) = G(-r)
        let ns = spec.num_sites();
        for site in 0..ns {
            let neg = displacement_site(&spec, 0, site);
            assert!((green[site] - green[neg]).abs() < 1e-10);
        }
        // pair energy by superposition: potential of charge pair dotted in
        let (s1, s2) = (1usize, 22usize);
        let mut rho = vec![0.0; ns];
        rho[s1] += 1.0 / spec.cell_volume();
        rho[s2] -= 1.0 / spec.cell_volume();
        let (phi, _) = coulomb_solve(&spec, &rho).unwrap();
        let direct = 0.5
            * ((phi[s1] * 1.0) + (phi[s2] * -1.0))
            - 0.5 * (green[0] * 1.0 + green[0] * 1.0); // remove self terms
        let pair = coulomb_pair_energy(&spec, &green, &[(s1, 1.0), (s2, -1.0)]);
        assert!((direct - pair).abs() < 1e-10, "direct {direct} vs pair {pair}");
    }

    #[test]
    fn split_identity_holds_exactly_with_constraint_correction() {
        let spec = neutral_pair_spec();
        let space = Arc::new(build_config_space(&spec).unwrap());
        let h = build_hamiltonian_kernel(&space, PotentialChoice::None, KineticForm::CentralTwoHop)
            .unwrap();
        let split = standard_form_split(&space, KineticForm::CentralTwoHop, false).unwrap();
        assert!(split.d1_zero_mode_only);
        let constraint = crate::gauge::gauss_constraint(&space).unwrap();
        // smear the difference constraint with the per-config Coulomb
        // potential cannot be expressed site-wise; instead verify the
        // identity on random vectors:
        // <H> + <Gamma_{PhiC}> = <H_rad> + <H_mat> + self_energy
        // with <Gamma_{PhiC}> evaluated by direct summation over sites of
        // PhiC-weighted constraint expectations per z-sector; at desk scale
        // simply check on a gauge-projected state where the constraint
        // expectation is the O(dA^2) residual.
        let psi = random_psi(space.len(), 31);
        let (phys, _) = crate::gauge::project_physical(&space, &psi, 1e-10).unwrap();
        let lhs = h.expectation(&phys);
        let rhs = split.h_rad.expectation(&phys) + split.h_mat.expectation(&phys)
            + split.self_energy;
        // constraint tolerance: per-site difference-form norms set the scale
        let norms = constraint.site_norms(&constraint.difference, &phys);
        let tol: f64 = norms.iter().map(|n| n * 2.0).sum::<f64>() + 1e-10;
        assert!(
            (lhs - rhs).abs() <= tol,
            "split gap {} vs constraint scale {}",
            lhs - rhs,
            tol
        );
    }
}
