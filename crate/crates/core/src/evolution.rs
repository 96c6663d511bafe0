//! Current velocities, the continuity equation, the Hamiltonian (functional
//! and kernel forms), the unitary integrator, and action residuals.
//!
//! The Hamiltonian kernel is
//!
//! `H = sum_n (-hbar^2 / 2 m_n) D_n . D_n
//!    + sum_x dx^D ((hbar c)^2 / 2) (1/dx^{2D}) (-d^2/dA^2) + V`
//!
//! with `D_na` the gauge-covariant difference whose hop phase is the line
//! integral of `A` over the links crossed (so discrete gauge shifts commute
//! with it exactly), and `d^2/dA^2` the cyclic second difference. The
//! magnetic potential uses the compact plaquette form
//! `(dx^D/2) (2/lambda^2) (1 - cos(lambda F))` with `lambda = 2 pi dx/(M dA)`,
//! which reduces to `(dx^D/2) F^2` for small flux and is exactly periodic on
//! the cyclic amplitude grid.
//!
//! Time stepping is the Cayley (implicit midpoint) scheme
//! `(1 + i dt H / 2 hbar) psi' = (1 - i dt H / 2 hbar) psi`,
//! solved with conjugate gradients on the Hermitian positive-definite
//! normal form `(1 + a^2 H^2)`. The step is exactly unitary and commutes
//! with `H`, so norm and energy are conserved to solver tolerance.

use crate::ephase::EpistemicState;
use crate::error::{EdError, Result};
use crate::lattice::ConfigSpace;
use crate::linalg;
use crate::math;
use crate::operator::{KernelOperator, KineticForm, OpTag, OpTerm};
use crate::C64;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

/// Potential term choice for the Hamiltonian kernel.
#[derive(Debug, Clone)]
pub enum PotentialChoice {
    None,
    /// Compact magnetic plaquette energy (requires D >= 2).
    Magnetic,
    /// Arbitrary diagonal `V(z, A)`.
    Custom(Vec<f64>),
}

/// Integration-constant choice for the Hamiltonian functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreeFunctional {
    Zero,
    /// The discrete quantum potential
    /// `sum rho [ sum_n (hbar^2/8 m_n) (d rho / rho)^2 + field analogue ]`,
    /// the choice that restores bilinearity in the continuum limit.
    QuantumPotential,
}

/// Probability-flow velocities `(v, u)` per configuration.
///
/// Layout: `v[cfg * (N*D) + coord]`, `u[cfg * a_coords + dof]`.
#[derive(Debug, Clone)]
pub struct CurrentVelocity {
    pub v: Vec<f64>,
    pub u: Vec<f64>,
}

/// Phase from drift potential: `phi = varphi - (eta/2) ln rho`.
pub fn phase_from_drift(varphi: &[f64], rho: &[f64], eta: f64) -> Result<Vec<f64>> {
    if varphi.len() != rho.len() {
        return Err(EdError::LengthMismatch { expected: varphi.len(), got: rho.len() });
    }
    let mut phi = Vec::with_capacity(rho.len());
    for (v, r) in varphi.iter().zip(rho.iter()) {
        if *r <= 0.0 {
            return Err(EdError::SingularSupport { index: phi.len() });
        }
        phi.push(v - 0.5 * eta * math::ln(*r));
    }
    Ok(phi)
}

/// Current velocity of the probability flow:
/// `v_n^a = (1/m_n)(d_na phi - beta_n A_a(z_n))` with the site-averaged
/// field, and `u_ax = c^2 (delta phi / delta A_ax)`.
pub fn current_velocity(space: &ConfigSpace, state: &EpistemicState) -> Result<CurrentVelocity> {
    space.check_len(&state.phi)?;
    let spec = &space.spec;
    let k = space.len();
    let d = spec.dim;
    let nzc = spec.z_coords();
    let nac = spec.a_coords();
    let mut v = vec![0.0; k * nzc];
    let mut u = vec![0.0; k * nac];
    let c2 = spec.c * spec.c;
    let inv_vol = 1.0 / spec.cell_volume();
    for i in 0..k {
        for n in 0..spec.num_particles() {
            let site = space.particle_site(i, n);
            let beta = spec.particles[n].charge / spec.c;
            for a in 0..d {
                let coord = n * d + a;
                let up = space.shift_z(i, coord, 1);
                let dn = space.shift_z(i, coord, -1);
                let dphi = (state.phi[up] - state.phi[dn]) / (2.0 * spec.dx);
                let a_avg = space.site_averaged_a(i, a, site);
                v[i * nzc + coord] = (dphi - beta * a_avg) / spec.particles[n].mass;
            }
        }
        for dof in 0..nac {
            let (up, _) = space.shift_a(i, dof, 1);
            let (dn, _) = space.shift_a(i, dof, -1);
            u[i * nac + dof] =
                c2 * (state.phi[up] - state.phi[dn]) / (2.0 * spec.da) * inv_vol;
        }
    }
    Ok(CurrentVelocity { v, u })
}

/// Right-hand side of the continuity equation,
/// `- sum_n d_na (v rho) - sum_x dx^D (delta/delta A)(u rho)`;
/// sums to zero exactly on the periodic grids.
pub fn continuity_rhs(space: &ConfigSpace, state: &EpistemicState) -> Result<Vec<f64>> {
    space.check_len(&state.rho)?;
    let spec = &space.spec;
    let k = space.len();
    let nzc = spec.z_coords();
    let nac = spec.a_coords();
    let cur = current_velocity(space, state)?;
    let mut out = vec![0.0; k];
    let mut flux = vec![0.0; k];
    for coord in 0..nzc {
        for i in 0..k {
            flux[i] = cur.v[i * nzc + coord] * state.rho[i];
        }
        for i in 0..k {
            let up = space.shift_z(i, coord, 1);
            let dn = space.shift_z(i, coord, -1);
            out[i] -= (flux[up] - flux[dn]) / (2.0 * spec.dx);
        }
    }
    // field part: dx^D * (1/dx^D) * central difference = plain central diff
    for dof in 0..nac {
        for i in 0..k {
            flux[i] = cur.u[i * nac + dof] * state.rho[i];
        }
        for i in 0..k {
            let (up, _) = space.shift_a(i, dof, 1);
            let (dn, _) = space.shift_a(i, dof, -1);
            out[i] -= (flux[up] - flux[dn]) / (2.0 * spec.da);
        }
    }
    Ok(out)
}

/// The Hamiltonian functional
/// `H[rho, phi] = sum_cfg rho [ sum_n |d phi - beta A|^2 / 2 m_n
/// + sum_x dx^D (c^2/2) (delta phi/delta A)^2 ] + F[rho]`.
pub fn hamiltonian_functional(
    space: &ConfigSpace,
    state: &EpistemicState,
    choice: FreeFunctional,
) -> Result<f64> {
    space.check_len(&state.rho)?;
    let spec = &space.spec;
    let k = space.len();
    let nzc = spec.z_coords();
    let nac = spec.a_coords();
    let cur = current_velocity(space, state)?;
    let vol = spec.cell_volume();
    let c2 = spec.c * spec.c;
    let mut total = 0.0;
    for i in 0..k {
        let mut kin = 0.0;
        for n in 0..spec.num_particles() {
            let m = spec.particles[n].mass;
            for a in 0..spec.dim {
                let vv = cur.v[i * nzc + n * spec.dim + a];
                kin += 0.5 * m * vv * vv; // (1/2m)(d phi - beta A)^2 = m v^2 / 2
            }
        }
        for dof in 0..nac {
            let uu = cur.u[i * nac + dof];
            kin += vol * 0.5 / c2 * uu * uu; // dx^D (c^2/2) (dphi/dA)^2 with u = c^2 dphi/dA
        }
        total += state.rho[i] * kin;
    }
    if choice == FreeFunctional::QuantumPotential {
        let hbar2 = spec.hbar * spec.hbar;
        let hc2 = hbar2 * c2;
        for i in 0..k {
            let r = state.rho[i];
            if r <= 0.0 {
                continue;
            }
            for n in 0..spec.num_particles() {
                let m = spec.particles[n].mass;
                for a in 0..spec.dim {
                    let coord = n * spec.dim + a;
                    let up = space.shift_z(i, coord, 1);
                    let dn = space.shift_z(i, coord, -1);
                    let dr = (state.rho[up] - state.rho[dn]) / (2.0 * spec.dx);
                    total += hbar2 / (8.0 * m) * dr * dr / r;
                }
            }
            for dof in 0..nac {
                let (up, _) = space.shift_a(i, dof, 1);
                let (dn, _) = space.shift_a(i, dof, -1);
                let dr = (state.rho[up] - state.rho[dn]) / (2.0 * spec.da) / vol;
                total += vol * hc2 / 8.0 * dr * dr / r;
            }
        }
    }
    Ok(total)
}

/// Assemble the Hamiltonian kernel.
pub fn build_hamiltonian_kernel(
    space: &Arc<ConfigSpace>,
    potential: PotentialChoice,
    form: KineticForm,
) -> Result<KernelOperator> {
    let spec = &space.spec;
    let mut op = KernelOperator::zero(space, OpTag::Hamiltonian);
    let mut diag = vec![0.0; space.len()];
    let hbar2 = spec.hbar * spec.hbar;
    for n in 0..spec.num_particles() {
        let m = spec.particles[n].mass;
        for a in 0..spec.dim {
            match form {
                KineticForm::CentralTwoHop => {
                    let coef = -hbar2 / (8.0 * m * spec.dx * spec.dx);
                    op.push_term(OpTerm::ZHop { n, a, step: 2, coef, anti: false, src_sites: None });
                    for v in diag.iter_mut() {
                        *v += hbar2 / (4.0 * m * spec.dx * spec.dx);
                    }
                }
                KineticForm::SingleHop => {
                    let coef = -hbar2 / (2.0 * m * spec.dx * spec.dx);
                    op.push_term(OpTerm::ZHop { n, a, step: 1, coef, anti: false, src_sites: None });
                    for v in diag.iter_mut() {
                        *v += hbar2 / (m * spec.dx * spec.dx);
                    }
                }
            }
        }
    }
    let field_coef = -(spec.hbar * spec.c) * (spec.hbar * spec.c)
        / (2.0 * spec.cell_volume() * spec.da * spec.da);
    for dof in 0..spec.a_coords() {
        op.push_term(OpTerm::ALaplacian { dof, coef: field_coef });
    }
    match potential {
        PotentialChoice::None => {}
        PotentialChoice::Custom(v) => {
            space.check_len(&v)?;
            for (d, x) in diag.iter_mut().zip(v.iter()) {
                *d += x;
            }
        }
        PotentialChoice::Magnetic => {
            if spec.dim < 2 {
                return Err(EdError::InvalidSpec(alloc::string::String::from(
                    "magnetic potential requires D >= 2",
                )));
            }
            let mag = magnetic_energy_diag(space);
            for (d, x) in diag.iter_mut().zip(mag.iter()) {
                *d += x;
            }
        }
    }
    op.push_diag(diag);
    Ok(op)
}

/// Compact magnetic energy per configuration:
/// `sum_x sum_{a<b} (dx^D/2)(2/lambda^2)(1 - cos(lambda F_ab(x)))`.
pub fn magnetic_energy_diag(space: &ConfigSpace) -> Vec<f64> {
    let spec = &space.spec;
    let ns = spec.num_sites();
    let lambda = 2.0 * core::f64::consts::PI * spec.dx / (spec.levels as f64 * spec.da);
    let pref = spec.cell_volume() / (lambda * lambda);
    let mut diag = vec![0.0; space.len()];
    for (i, out) in diag.iter_mut().enumerate() {
        let mut e = 0.0;
        for site in 0..ns {
            for a in 0..spec.dim {
                for b in a + 1..spec.dim {
                    let up_a = spec.site_shift(site, a, 1);
                    let up_b = spec.site_shift(site, b, 1);
                    let flux = (space.a_value(i, spec.a_dof(b, up_a))
                        - space.a_value(i, spec.a_dof(b, site))
                        - space.a_value(i, spec.a_dof(a, up_b))
                        + space.a_value(i, spec.a_dof(a, site)))
                        / spec.dx;
                    e += pref * (1.0 - math::cos(lambda * flux));
                }
            }
        }
        *out = e;
    }
    diag
}

/// Modified Hamiltonian `H_Phi = H + Gamma_Phi` (the smeared constraint is
/// built by the gauge module).
pub fn modified_hamiltonian(h: &KernelOperator, gamma_phi: &KernelOperator) -> Result<KernelOperator> {
    let mut out = h.clone();
    out.add_assign_op(gamma_phi)?;
    Ok(out)
}

/// One Cayley step: `(1 + i a H) psi' = (1 - i a H) psi` with `a = dt/2 hbar`.
pub fn cayley_step(h: &KernelOperator, psi: &[C64], dt: f64, tol: f64) -> Result<Vec<C64>> {
    let k = psi.len();
    let a = dt / (2.0 * h.space.spec.hbar);
    let mut hpsi = vec![C64::new(0.0, 0.0); k];
    h.apply(psi, &mut hpsi);
    let mut hhpsi = vec![C64::new(0.0, 0.0); k];
    h.apply(&hpsi, &mut hhpsi);
    // rhs = (1 - i a H)^2 psi = psi - 2 i a H psi - a^2 H^2 psi
    let mut rhs = psi.to_vec();
    for i in 0..k {
        rhs[i] += C64::new(0.0, -2.0 * a) * hpsi[i] - C64::new(a * a, 0.0) * hhpsi[i];
    }
    let scratch = core::cell::RefCell::new(vec![C64::new(0.0, 0.0); k]);
    let apply = |x: &[C64], out: &mut [C64]| {
        // out = x + a^2 H(Hx)
        let mut t = scratch.borrow_mut();
        h.apply(x, &mut t);
        h.apply(&t, out);
        for i in 0..k {
            out[i] = x[i] + C64::new(a * a, 0.0) * out[i];
        }
    };
    let (next, _res, _it) = linalg::cg_hpd(apply, &rhs, tol, 20_000)?;
    Ok(next)
}

/// Norm-preserving, time-reversible second-order propagation of `psi` by
/// `steps` Cayley steps of size `dt` under a time-independent Hamiltonian.
pub fn evolve_schrodinger(
    h: &KernelOperator,
    psi: &[C64],
    dt: f64,
    steps: usize,
) -> Result<Vec<C64>> {
    evolve_recording(h, psi, dt, steps, |_, _| {})
}

/// As [`evolve_schrodinger`], invoking `record(step_index, psi)` after every
/// step (step 0 is the initial state).
pub fn evolve_recording<F: FnMut(usize, &[C64])>(
    h: &KernelOperator,
    psi: &[C64],
    dt: f64,
    steps: usize,
    mut record: F,
) -> Result<Vec<C64>> {
    h.space.check_len(psi)?;
    let mut cur = psi.to_vec();
    record(0, &cur);
    for s in 0..steps {
        cur = cayley_step(h, &cur, dt, 1e-13)?;
        record(s + 1, &cur);
    }
    Ok(cur)
}

/// Discrete Euler-Lagrange residuals of a trajectory under `H_Phi`:
/// per interior step the central-difference Schrödinger residual
/// `|| i hbar (psi_{k+1} - psi_{k-1})/(2 dt) - H_Phi psi_k ||`, and per step
/// the smeared-constraint expectation norm
/// `sqrt( sum_x dx^D <Gamma_x>^2 )`.
pub fn action_residual(
    psi_path: &[Vec<C64>],
    h_phi: &KernelOperator,
    site_constraints: &[KernelOperator],
    dt: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if psi_path.len() < 3 {
        return Err(EdError::InvalidSpec(format!(
            "need at least 3 path points, got {}",
            psi_path.len()
        )));
    }
    let k = h_phi.space.len();
    for p in psi_path {
        if p.len() != k {
            return Err(EdError::LengthMismatch { expected: k, got: p.len() });
        }
    }
    let hbar = h_phi.space.spec.hbar;
    let vol = h_phi.space.spec.cell_volume();
    let mut schrodinger = Vec::new();
    let mut hpsi = vec![C64::new(0.0, 0.0); k];
    for t in 1..psi_path.len() - 1 {
        h_phi.apply(&psi_path[t], &mut hpsi);
        let mut acc = 0.0;
        for i in 0..k {
            let dot = C64::new(0.0, hbar) * (psi_path[t + 1][i] - psi_path[t - 1][i])
                / C64::new(2.0 * dt, 0.0);
            acc += (dot - hpsi[i]).norm_sqr();
        }
        schrodinger.push(math::sqrt(acc));
    }
    let mut gauss = Vec::new();
    for p in psi_path {
        let mut acc = 0.0;
        for op in site_constraints {
            let g = op.expectation(p);
            acc += vol * g * g;
        }
        gauss.push(math::sqrt(acc));
    }
    Ok((schrodinger, gauss))
}
