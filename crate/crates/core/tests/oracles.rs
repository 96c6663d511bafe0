//! Independent-oracle validations: dense matrix-exponential propagation,
//! Poisson-bracket identities through analytic coordinate gradients, the
//! short-time expansion of the integral kernel, and the closed Gaussian form
//! of the maximum-entropy step.

use edlab_core::dense::{eigh_hermitian, expm_apply};
use edlab_core::ephase::{poisson_bracket, to_wavefunction, EpistemicState};
use edlab_core::evolution::{
    continuity_rhs, evolve_schrodinger, phase_from_drift,
};
use edlab_core::gauge::{gauge_transform_field, gauge_transform_state, GaugeFunction};
use edlab_core::lattice::{build_config_space, LatticeSpec, Particle, DEFAULT_MAX_CONFIGS};
use edlab_core::linalg;
use edlab_core::maxent::{
    drift_means, evolve_rho_integral, maxent_oracle, transition_logdensity, DriftPotential,
    KernelKind, Multipliers, StepSample,
};
use edlab_core::operator::{KernelOperator, OpTag};
use edlab_core::rng::Rng;
use edlab_core::C64;
use std::sync::Arc;

fn spec_k8() -> LatticeSpec {
    LatticeSpec {
        dim: 1,
        sites: 2,
        dx: 1.0,
        particles: vec![Particle { mass: 1.0, charge: 0.0 }],
        levels: 2,
        da: 1.0,
        hbar: 1.0,
        c: 1.0,
        eta: 1.0,
        periodic: true,
        max_configs: DEFAULT_MAX_CONFIGS,
    }
}

fn spec_k81() -> LatticeSpec {
    LatticeSpec {
        dim: 1,
        sites: 3,
        dx: 1.0,
        particles: vec![Particle { mass: 1.0, charge: 1.0 }],
        levels: 3,
        da: 1.0,
        hbar: 1.0,
        c: 1.0,
        eta: 1.0,
        periodic: true,
        max_configs: DEFAULT_MAX_CONFIGS,
    }
}

fn random_hermitian(k: usize, seed: u64, scale: f64) -> Vec<C64> {
    let mut rng = Rng::with_stream(seed, 1);
    let mut h = vec![C64::new(0.0, 0.0); k * k];
    for i in 0..k {
        for j in i..k {
            let re = scale * rng.normal();
            let im = if i == j { 0.0 } else { scale * rng.normal() };
            h[i * k + j] = C64::new(re, im);
            h[j * k + i] = C64::new(re, -im);
        }
    }
    h
}

fn random_state(k: usize, seed: u64) -> Vec<C64> {
    let mut rng = Rng::with_stream(seed, 2);
    let mut v: Vec<C64> = (0..k).map(|_| C64::new(rng.normal(), rng.normal())).collect();
    linalg::normalize_c(&mut v);
    v
}

#[test]
fn integrator_second_order_against_dense_exponential() {
    let spec = spec_k8();
    let space = Arc::new(build_config_space(&spec).unwrap());
    let k = space.len();
    assert_eq!(k, 8);
    let dense = random_hermitian(k, 42, 0.6);
    let h = KernelOperator::from_dense(&space, dense.clone(), OpTag::Hamiltonian).unwrap();
    let psi0 = random_state(k, 7);
    let total_t = 0.8;

    let err_at = |steps: usize| -> f64 {
        let dt = total_t / steps as f64;
        let got = evolve_schrodinger(&h, &psi0, dt, steps).unwrap();
        let exact = expm_apply(k, &dense, &psi0, total_t, spec.hbar).unwrap();
        let mut acc = 0.0;
        for i in 0..k {
            acc += (got[i] - exact[i]).norm_sqr();
        }
        acc.sqrt()
    };
    let e1 = err_at(8);
    let e2 = err_at(16);
    let e4 = err_at(32);
    let order12 = (e1 / e2).log2();
    let order24 = (e2 / e4).log2();
    assert!(order12 >= 1.9, "order {order12} from errors {e1}, {e2}");
    assert!(order24 >= 1.9, "order {order24} from errors {e2}, {e4}");
}

#[test]
fn poisson_bracket_jacobi_identity_dense() {
    let spec = spec_k8();
    let space = Arc::new(build_config_space(&spec).unwrap());
    let k = space.len();
    let hbar = spec.hbar;
    let a = random_hermitian(k, 11, 1.0);
    let b = random_hermitian(k, 12, 1.0);
    let c = random_hermitian(k, 13, 1.0);
    let psi = random_state(k, 5);

    // {A, B} is the bilinear functional with Hermitian kernel (1/i hbar)[A, B]
    let comm = |x: &[C64], y: &[C64]| -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); k * k];
        for i in 0..k {
            for j in 0..k {
                let mut acc = C64::new(0.0, 0.0);
                for l in 0..k {
                    acc += x[i * k + l] * y[l * k + j] - y[i * k + l] * x[l * k + j];
                }
                out[i * k + j] = acc / C64::new(0.0, hbar);
            }
        }
        out
    };
    let expect = |m: &[C64], psi: &[C64]| -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..k {
            for j in 0..k {
                acc += psi[i].conj() * m[i * k + j] * psi[j];
            }
        }
        acc.re
    };
    let jac = expect(&comm(&comm(&a, &b), &c), &psi)
        + expect(&comm(&comm(&b, &c), &a), &psi)
        + expect(&comm(&comm(&c, &a), &b), &psi);
    assert!(jac.abs() < 1e-8, "Jacobi identity violated: {jac}");

    // antisymmetry and bilinearity through the production path
    let ka = KernelOperator::from_dense(&space, a.clone(), OpTag::Observable).unwrap();
    let kb = KernelOperator::from_dense(&space, b.clone(), OpTag::Observable).unwrap();
    let ab = poisson_bracket(&ka, &kb, &psi, hbar).unwrap();
    let ba = poisson_bracket(&kb, &ka, &psi, hbar).unwrap();
    assert!((ab + ba).abs() < 1e-12);
    let mut a2 = a.clone();
    for v in a2.iter_mut() {
        *v *= 2.5;
    }
    let ka2 = KernelOperator::from_dense(&space, a2, OpTag::Observable).unwrap();
    let scaled = poisson_bracket(&ka2, &kb, &psi, hbar).unwrap();
    assert!((scaled - 2.5 * ab).abs() < 1e-12 * (1.0 + ab.abs()));
}

/// Analytic (rho, phi)-coordinate gradients of a bilinear functional:
/// dV/drho_k = Re[conj(psi_k) (V psi)_k] / rho_k,
/// dV/dphi_k = (2/hbar) Im[conj(psi_k) (V psi)_k].
fn coordinate_gradients(
    op: &KernelOperator,
    state: &EpistemicState,
    hbar: f64,
) -> (Vec<f64>, Vec<f64>) {
    let k = state.len();
    let psi = to_wavefunction(&state.rho, &state.phi, hbar);
    let mut vpsi = vec![C64::new(0.0, 0.0); k];
    op.apply(&psi, &mut vpsi);
    let mut g_rho = vec![0.0; k];
    let mut g_phi = vec![0.0; k];
    for i in 0..k {
        let z = psi[i].conj() * vpsi[i];
        g_rho[i] = z.re / state.rho[i];
        g_phi[i] = 2.0 / hbar * z.im;
    }
    (g_rho, g_phi)
}

#[test]
fn canonical_map_preserves_poisson_bracket_to_1e10() {
    // kernel-route bracket vs the Omega-contraction of analytic
    // (rho, phi) gradients: the map (rho, phi) -> psi is canonical, so the
    // two routes agree to round-off.
    let spec = spec_k8();
    let space = Arc::new(build_config_space(&spec).unwrap());
    let k = space.len();
    let hbar = spec.hbar;
    let mut rng = Rng::with_stream(77, 0);
    for trial in 0..5 {
        let raw: Vec<f64> = (0..k).map(|_| 0.4 + rng.uniform()).collect();
        let z: f64 = raw.iter().sum();
        let rho: Vec<f64> = raw.iter().map(|r| r / z).collect();
        let phi: Vec<f64> = (0..k).map(|_| 2.0 * rng.normal()).collect();
        let state = EpistemicState::new(rho, phi).unwrap();
        let psi = to_wavefunction(&state.rho, &state.phi, hbar);

        let va = random_hermitian(k, 100 + trial, 1.0);
        let vb = random_hermitian(k, 200 + trial, 1.0);
        let ka = KernelOperator::from_dense(&space, va, OpTag::Observable).unwrap();
        let kb = KernelOperator::from_dense(&space, vb, OpTag::Observable).unwrap();
        let kernel_route = poisson_bracket(&ka, &kb, &psi, hbar).unwrap();

        let (ga_r, ga_p) = coordinate_gradients(&ka, &state, hbar);
        let (gb_r, gb_p) = coordinate_gradients(&kb, &state, hbar);
        let mut coord_route = 0.0;
        for i in 0..k {
            coord_route += ga_r[i] * gb_p[i] - ga_p[i] * gb_r[i];
        }
        assert!(
            (kernel_route - coord_route).abs() < 1e-10 * (1.0 + kernel_route.abs()),
            "trial {trial}: kernel {kernel_route} vs coords {coord_route}"
        );
    }
}

#[test]
fn kernel_expansion_matches_continuity_to_first_order() {
    // uniform rho and a nontrivial drift potential: the moment-matched
    // kernel gives (rho' - rho)/dt = continuity_rhs + dt * (exact remainder),
    // so the defect halves exactly when dt halves. Charge and amplitude
    // spacing are kept small enough that the drift stays below the
    // three-point kernel's grid-Peclet bound at the largest dt.
    let mut spec = spec_k81();
    spec.particles[0].charge = 0.3;
    spec.da = 0.5;
    let space = build_config_space(&spec).unwrap();
    let k = space.len();
    let varphi: Vec<f64> = (0..k)
        .map(|i| {
            0.11 * ((0.9 * i as f64).sin() + 0.4 * (0.23 * i as f64).cos())
        })
        .collect();
    let drift = DriftPotential::new(varphi.clone()).unwrap();
    let rho = vec![1.0 / k as f64; k];

    let defect = |dt: f64| -> f64 {
        let mult = Multipliers::from_spec(&spec, dt).unwrap();
        let out =
            evolve_rho_integral(&space, &rho, &drift, &mult, KernelKind::MomentMatched).unwrap();
        let phi = phase_from_drift(&varphi, &rho, spec.eta).unwrap();
        let state = EpistemicState::new(rho.clone(), phi).unwrap();
        let rhs = continuity_rhs(&space, &state).unwrap();
        let mut acc = 0.0;
        for i in 0..k {
            let d = (out[i] - rho[i]) / dt - rhs[i];
            acc += d * d;
        }
        acc.sqrt()
    };
    // base step inside the short-step regime (m2 well below a grid cell)
    let d1 = defect(0.05);
    let d2 = defect(0.025);
    let d3 = defect(0.0125);
    for ratio in [d1 / d2, d2 / d3] {
        assert!(
            (ratio - 2.0).abs() < 0.4,
            "dt-halving ratio {ratio} (defects {d1}, {d2}, {d3})"
        );
    }
}

#[test]
fn maxent_oracle_reproduces_gaussian_transition_form() {
    // two-coordinate step space (one particle coordinate, one field dof),
    // prior plus drift and gauge constraints; the oracle's distribution must
    // match the discretized closed-form Gaussian up to normalization.
    let spec = spec_k81();
    let space = build_config_space(&spec).unwrap();
    let k = space.len();
    let varphi: Vec<f64> = (0..k).map(|i| 0.17 * (1.3 * i as f64).sin()).collect();
    let drift = DriftPotential::new(varphi.clone()).unwrap();
    let dt = 0.05;
    let mult = Multipliers::from_spec(&spec, dt).unwrap();
    let idx = 47;

    // gradients of varphi at idx (central differences, matching drift_means)
    let up = space.shift_z(idx, 0, 1);
    let dn = space.shift_z(idx, 0, -1);
    let g_z = (varphi[up] - varphi[dn]) / (2.0 * spec.dx);
    let dof = 1; // field dof entering the second step coordinate
    let (aup, _) = space.shift_a(idx, dof, 1);
    let (adn, _) = space.shift_a(idx, dof, -1);
    let vol = spec.cell_volume();
    let g_a = (varphi[aup] - varphi[adn]) / (2.0 * spec.da) / vol;
    let site = space.particle_site(idx, 0);
    let a_avg = space.site_averaged_a(idx, 0, site);

    // step-space atoms
    let n_side = 81;
    let sigma_z = (spec.eta * dt / spec.particles[0].mass).sqrt();
    let sigma_a = (spec.c * spec.c * spec.eta * dt / vol).sqrt();
    let (dz_bar_c, da_bar_c) = {
        let (dz, da) = drift_means(&space, idx, &drift, &mult).unwrap();
        (dz[0], da[dof])
    };
    let zs: Vec<f64> = (0..n_side)
        .map(|i| dz_bar_c + (i as f64 - 40.0) / 40.0 * 5.0 * sigma_z)
        .collect();
    let avs: Vec<f64> = (0..n_side)
        .map(|i| da_bar_c + (i as f64 - 40.0) / 40.0 * 5.0 * sigma_a)
        .collect();
    let n_atoms = n_side * n_side;
    let mut prior = vec![0.0; n_atoms];
    let mut t_drift = vec![0.0; n_atoms];
    let mut t_gauge = vec![0.0; n_atoms];
    for (iz, z) in zs.iter().enumerate() {
        for (ia, a) in avs.iter().enumerate() {
            let atom = iz * n_side + ia;
            prior[atom] =
                (-0.5 * mult.alpha_n[0] * z * z - 0.5 * mult.alpha * vol * a * a).exp();
            // drift constraint: d_z varphi * dz + sum_x dx^D (delta varphi/ delta A) dA
            t_drift[atom] = g_z * z + vol * g_a * a;
            // gauge constraint: <dz^a> A_a(z_n)
            t_gauge[atom] = a_avg * z;
        }
    }
    // targets from the closed-form means
    let kappa_prime: f64 = g_z * dz_bar_c + vol * g_a * da_bar_c;
    let kappa_gauge = a_avg * dz_bar_c;
    let (p, _lambda) = maxent_oracle(
        &prior,
        &[t_drift.clone(), t_gauge.clone()],
        &[kappa_prime, kappa_gauge],
        1e-13,
    )
    .unwrap();

    // closed form restricted to the same atoms
    let mut closed = vec![0.0; n_atoms];
    for (iz, z) in zs.iter().enumerate() {
        for (ia, a) in avs.iter().enumerate() {
            let step = StepSample { dz: vec![*z], da: {
                let mut v = vec![0.0; spec.a_coords()];
                v[dof] = *a;
                v
            }};
            closed[iz * n_side + ia] =
                transition_logdensity(&space, &step, idx, &drift, &mult).unwrap();
        }
    }
    let z_closed: f64 = closed.iter().map(|l| l.exp()).sum();
    let mut max_dev = 0.0f64;
    for atom in 0..n_atoms {
        let log_p = p[atom].ln();
        let log_c = closed[atom] - z_closed.ln();
        max_dev = max_dev.max((log_p - log_c).abs());
    }
    assert!(max_dev < 1e-8, "max log-ratio deviation {max_dev}");
}

#[test]
fn drift_combination_is_exactly_gauge_invariant() {
    let mut spec = spec_k81();
    spec.da = 2.0 * std::f64::consts::PI / 3.0; // commensurate with q = 1
    let space = build_config_space(&spec).unwrap();
    let k = space.len();
    let varphi: Vec<f64> = (0..k).map(|i| 0.3 * (0.7 * i as f64).sin()).collect();
    let drift = DriftPotential::new(varphi.clone()).unwrap();
    let mult = Multipliers::from_spec(&spec, 0.04).unwrap();

    let arc = Arc::new(space);
    let xi = GaugeFunction::from_units(&arc, &[1, 0, 0]).unwrap();
    // transformed drift potential: varphi^xi[perm(i)] = varphi[i] + charge shift
    let mut varphi_xi = vec![0.0; k];
    let steps = edlab_core::gauge::grad_steps(&arc, &xi).unwrap();
    for i in 0..k {
        let mut t = i;
        for (dof, s) in steps.iter().enumerate() {
            if *s != 0 {
                t = arc.shift_a(t, dof, *s as isize).0;
            }
        }
        let mut shift = 0.0;
        for n in 0..arc.spec.num_particles() {
            shift += arc.spec.particles[n].charge / arc.spec.c
                * xi.values[arc.particle_site(i, n)];
        }
        varphi_xi[t] = varphi[i] + shift;
    }
    let drift_xi = DriftPotential::new(varphi_xi).unwrap();
    // exact invariance holds wherever the level shift does not wrap the
    // cyclic representative (the drift formula is linear in the
    // representative value, so it is invariant modulo the period M dA)
    let mut checked = 0usize;
    for i in 0..k {
        let mut t = i;
        let mut wrapped = false;
        for (dof, s) in steps.iter().enumerate() {
            if *s != 0 {
                let (tt, w) = arc.shift_a(t, dof, *s as isize);
                t = tt;
                wrapped |= w != 0;
            }
        }
        // neighbours probed by the central differences must not wrap either
        for coord in 0..arc.spec.z_coords() {
            for step in [-1isize, 1] {
                let j = arc.shift_z(i, coord, step);
                let mut tj = j;
                for (dof, s) in steps.iter().enumerate() {
                    if *s != 0 {
                        let (tt, w) = arc.shift_a(tj, dof, *s as isize);
                        tj = tt;
                        wrapped |= w != 0;
                    }
                }
            }
        }
        if wrapped {
            continue;
        }
        checked += 1;
        let (dz, _) = drift_means(&arc, i, &drift, &mult).unwrap();
        let (dz_xi, _) = drift_means(&arc, t, &drift_xi, &mult).unwrap();
        for c in 0..dz.len() {
            assert!(
                (dz[c] - dz_xi[c]).abs() < 1e-13,
                "config {i}, coord {c}: {} vs {}",
                dz[c],
                dz_xi[c]
            );
        }
    }
    assert!(checked > 5, "too few wrap-free configs exercised: {checked}");
}

#[test]
fn gauge_field_transform_examples() {
    let mut spec = spec_k81();
    spec.da = 2.0 * std::f64::consts::PI / 3.0;
    let space = Arc::new(build_config_space(&spec).unwrap());
    // constant xi leaves fields unchanged; xi then -xi is the identity
    let xi = GaugeFunction::from_units(&space, &[2, 2, 2]).unwrap();
    let levels = vec![0u32, 2, 1];
    assert_eq!(gauge_transform_field(&space, &levels, &xi).unwrap(), levels);

    // plane-wave-like eigenvector check for the electric operator: a state
    // e^{i E0 A dx^D / (hbar c)} with E0 on the reciprocal grid is an
    // eigenvector of E with eigenvalue (hbar c / dx^D) sin(kappa dA)/dA.
    let k = space.len();
    let spec = &space.spec;
    let dof = 0usize;
    let harmonics = 1.0; // one reciprocal-lattice unit
    let kappa = 2.0 * std::f64::consts::PI * harmonics / (spec.levels as f64 * spec.da);
    let mut psi = vec![C64::new(0.0, 0.0); k];
    for (i, v) in psi.iter_mut().enumerate() {
        let a = space.a_value(i, dof);
        *v = C64::new(0.0, kappa * a).exp();
    }
    linalg::normalize_c(&mut psi);
    let e_op = edlab_core::gauge::electric_field_operator(&space, 0, 0).unwrap();
    let mut epsi = vec![C64::new(0.0, 0.0); k];
    e_op.apply(&psi, &mut epsi);
    // discrete eigenvalue of i hbar c/dx^D central difference on e^{i kappa A}
    let expect = -spec.hbar * spec.c / spec.cell_volume() * (kappa * spec.da).sin() / spec.da;
    for i in 0..k {
        assert!(
            (epsi[i] - C64::new(expect, 0.0) * psi[i]).norm() < 1e-12,
            "config {i}"
        );
    }
    // which approximates the continuum eigenvalue -hbar c kappa / dx^D to O(dA^2)
    let continuum = -spec.hbar * spec.c * kappa / spec.cell_volume();
    let rel = ((expect - continuum) / continuum).abs();
    let bound = (kappa * spec.da) * (kappa * spec.da) / 6.0 * 1.01;
    assert!(rel <= bound, "rel {rel} vs O(dA^2) bound {bound}");
}

#[test]
fn gauge_state_transform_unitary_and_energy_covariant() {
    let mut spec = spec_k81();
    spec.da = 2.0 * std::f64::consts::PI / 3.0;
    let space = Arc::new(build_config_space(&spec).unwrap());
    let psi = random_state(space.len(), 31);
    let xi = GaugeFunction::from_units(&space, &[0, 1, 2]).unwrap();
    let out = gauge_transform_state(&space, &psi, &xi).unwrap();
    assert!((linalg::norm2_c(&out) - 1.0).abs() < 1e-13);

    // |psi'| values are a rearrangement of |psi| for q = 0
    let mut spec0 = spec.clone();
    spec0.particles[0].charge = 0.0;
    let space0 = Arc::new(build_config_space(&spec0).unwrap());
    let psi0 = random_state(space0.len(), 32);
    let out0 = gauge_transform_state(&space0, &psi0, &xi).unwrap();
    let mut n1: Vec<f64> = psi0.iter().map(|z| z.norm()).collect();
    let mut n2: Vec<f64> = out0.iter().map(|z| z.norm()).collect();
    n1.sort_by(|a, b| a.partial_cmp(b).unwrap());
    n2.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (a, b) in n1.iter().zip(n2.iter()) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn dense_eigh_matches_kernel_operator_spectra() {
    // cross-check the Jacobi eigensolver against the Cayley integrator: an
    // eigenvector of H must acquire the Cayley phase of its eigenvalue.
    let spec = spec_k8();
    let space = Arc::new(build_config_space(&spec).unwrap());
    let k = space.len();
    let dense = random_hermitian(k, 55, 0.8);
    let h = KernelOperator::from_dense(&space, dense.clone(), OpTag::Hamiltonian).unwrap();
    let (vals, vecs) = eigh_hermitian(k, &dense).unwrap();
    let dt = 0.1;
    for (val, v) in vals.iter().zip(vecs.iter()).take(3) {
        let out = evolve_schrodinger(&h, v, dt, 1).unwrap();
        let a = val * dt / (2.0 * spec.hbar);
        let phase = C64::new(1.0, -a) / C64::new(1.0, a);
        for i in 0..k {
            assert!((out[i] - phase * v[i]).norm() < 1e-10);
        }
    }
}
