//! Property-based invariants: indexing bijectivity, geometric identities,
//! conservation under the integral kernel and the unitary integrator, and
//! constraint satisfaction of the entropy maximizer.

use edlab_core::ephase::{
    j_apply, metric_length_sq, omega, to_wavefunction, EpistemicState, TangentVector,
};
use edlab_core::evolution::{cayley_step, build_hamiltonian_kernel, PotentialChoice};
use edlab_core::gauge::{gauge_transform_state, GaugeFunction};
use edlab_core::lattice::{build_config_space, LatticeSpec, OnticConfig, Particle, DEFAULT_MAX_CONFIGS};
use edlab_core::linalg;
use edlab_core::maxent::{
    evolve_rho_integral, maxent_oracle, DriftPotential, KernelKind, Multipliers,
};
use edlab_core::operator::KineticForm;
use edlab_core::C64;
use proptest::prelude::*;
use std::sync::Arc;

fn small_spec(dim: usize, sites: usize, n: usize, levels: usize) -> LatticeSpec {
    LatticeSpec {
        dim,
        sites,
        dx: 1.0,
        particles: vec![Particle { mass: 1.0, charge: 0.5 }; n],
        levels,
        da: 0.6,
        hbar: 1.0,
        c: 1.0,
        eta: 1.0,
        periodic: true,
        max_configs: DEFAULT_MAX_CONFIGS,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encode_decode_bijection(
        dim in 1usize..=2,
        sites in 2usize..=3,
        n in 0usize..=2,
        levels in 2usize..=3,
        probe in 0usize..10_000,
    ) {
        let spec = small_spec(dim, sites, n, levels);
        prop_assume!(spec.config_count() <= 10_000);
        let space = build_config_space(&spec).unwrap();
        let idx = probe % space.len();
        let cfg = space.decode(idx);
        prop_assert_eq!(space.encode(&cfg).unwrap(), idx);
    }

    #[test]
    fn omega_antisymmetric_bilinear(
        vr in prop::collection::vec(-3.0f64..3.0, 6),
        vp in prop::collection::vec(-3.0f64..3.0, 6),
        ur in prop::collection::vec(-3.0f64..3.0, 6),
        up in prop::collection::vec(-3.0f64..3.0, 6),
        s in -2.0f64..2.0,
    ) {
        let v = TangentVector::new(vr.clone(), vp.clone()).unwrap();
        let u = TangentVector::new(ur, up).unwrap();
        let vu = omega(&v, &u).unwrap();
        let uv = omega(&u, &v).unwrap();
        prop_assert!((vu + uv).abs() < 1e-12);
        let sv = TangentVector::new(
            vr.iter().map(|x| s * x).collect(),
            vp.iter().map(|x| s * x).collect(),
        ).unwrap();
        let svu = omega(&sv, &u).unwrap();
        prop_assert!((svu - s * vu).abs() < 1e-10 * (1.0 + vu.abs()));
    }

    #[test]
    fn j_squares_to_minus_one_and_metric_positive(
        rho_raw in prop::collection::vec(0.05f64..1.0, 8),
        dr in prop::collection::vec(-2.0f64..2.0, 8),
        dp in prop::collection::vec(-2.0f64..2.0, 8),
        hbar in 0.3f64..2.0,
    ) {
        let z: f64 = rho_raw.iter().sum();
        let rho: Vec<f64> = rho_raw.iter().map(|r| r / z).collect();
        let state = EpistemicState::new(rho, vec![0.0; 8]).unwrap();
        let v = TangentVector::new(dr.clone(), dp.clone()).unwrap();
        let jv = j_apply(&state, &v, hbar).unwrap();
        let jjv = j_apply(&state, &jv, hbar).unwrap();
        for i in 0..8 {
            prop_assert!((jjv.d_rho[i] + v.d_rho[i]).abs() < 1e-12 * (1.0 + v.d_rho[i].abs()));
            prop_assert!((jjv.d_phi[i] + v.d_phi[i]).abs() < 1e-12 * (1.0 + v.d_phi[i].abs()));
        }
        let nonzero = dr.iter().chain(dp.iter()).any(|x| x.abs() > 1e-9);
        if nonzero {
            prop_assert!(metric_length_sq(&state, &v, hbar).unwrap() > 0.0);
        }
    }

    #[test]
    fn integral_kernel_is_stochastic(
        seed_rho in prop::collection::vec(0.01f64..1.0, 81),
        amp in 0.0f64..0.15,
        dt in 0.005f64..0.04,
    ) {
        let mut spec = small_spec(1, 3, 1, 3);
        spec.da = 0.5;
        spec.particles[0].charge = 0.3;
        let space = build_config_space(&spec).unwrap();
        let z: f64 = seed_rho.iter().sum();
        let rho: Vec<f64> = seed_rho.iter().map(|r| r / z).collect();
        let varphi: Vec<f64> = (0..space.len()).map(|i| amp * (0.9 * i as f64).sin()).collect();
        let drift = DriftPotential::new(varphi).unwrap();
        let mult = Multipliers::from_spec(&spec, dt).unwrap();
        let out = evolve_rho_integral(&space, &rho, &drift, &mult, KernelKind::MomentMatched).unwrap();
        let total: f64 = out.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(out.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn cayley_step_is_unitary(seed in 0u64..500, dt in 0.001f64..0.2) {
        let spec = small_spec(1, 3, 1, 3);
        let space = Arc::new(build_config_space(&spec).unwrap());
        let h = build_hamiltonian_kernel(&space, PotentialChoice::None, KineticForm::CentralTwoHop).unwrap();
        let mut rng = edlab_core::rng::Rng::with_stream(seed, 0);
        let mut psi: Vec<C64> = (0..space.len())
            .map(|_| C64::new(rng.normal(), rng.normal()))
            .collect();
        linalg::normalize_c(&mut psi);
        let out = cayley_step(&h, &psi, dt, 1e-13).unwrap();
        prop_assert!((linalg::norm2_c(&out) - 1.0).abs() < 1e-11);
    }

    #[test]
    fn maxent_result_positive_and_feasible(
        logq in prop::collection::vec(-2.0f64..2.0, 41),
        frac in 0.05f64..0.95,
    ) {
        let prior: Vec<f64> = logq.iter().map(|l| l.exp()).collect();
        let xs: Vec<f64> = (0..41).map(|i| i as f64 / 40.0).collect();
        // a feasible target strictly inside the support range
        let target = frac;
        let (p, _) = maxent_oracle(&prior, &[xs.clone()], &[target], 1e-11).unwrap();
        let mean: f64 = xs.iter().zip(p.iter()).map(|(x, w)| x * w).sum();
        prop_assert!((mean - target).abs() < 1e-10);
        prop_assert!(p.iter().all(|&w| w > 0.0));
        let total: f64 = p.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gauge_action_preserves_norm_and_probabilities(
        seed in 0u64..300,
        u0 in -2i64..=2,
        u1 in -2i64..=2,
        u2 in -2i64..=2,
    ) {
        let mut spec = small_spec(1, 3, 2, 3);
        spec.da = 2.0 * std::f64::consts::PI / 3.0;
        spec.particles[0].charge = 1.0;
        spec.particles[1].charge = -1.0;
        let space = Arc::new(build_config_space(&spec).unwrap());
        let mut rng = edlab_core::rng::Rng::with_stream(seed, 9);
        let mut psi: Vec<C64> = (0..space.len())
            .map(|_| C64::new(rng.normal(), rng.normal()))
            .collect();
        linalg::normalize_c(&mut psi);
        let xi = GaugeFunction::from_units(&space, &[u0, u1, u2]).unwrap();
        let out = gauge_transform_state(&space, &psi, &xi).unwrap();
        prop_assert!((linalg::norm2_c(&out) - 1.0).abs() < 1e-12);
        // multiset of probabilities is preserved (permutation + phases)
        let mut p1: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
        let mut p2: Vec<f64> = out.iter().map(|z| z.norm_sqr()).collect();
        p1.sort_by(|a, b| a.partial_cmp(b).unwrap());
        p2.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in p1.iter().zip(p2.iter()) {
            prop_assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn wavefunction_roundtrip_preserves_rho(
        rho_raw in prop::collection::vec(0.0f64..1.0, 12),
        phi in prop::collection::vec(-8.0f64..8.0, 12),
        hbar in 0.5f64..1.5,
    ) {
        let z: f64 = rho_raw.iter().sum::<f64>().max(1e-9);
        let rho: Vec<f64> = rho_raw.iter().map(|r| r / z).collect();
        let psi = to_wavefunction(&rho, &phi, hbar);
        let (r2, p2) = edlab_core::ephase::from_wavefunction(&psi, hbar);
        for i in 0..12 {
            prop_assert!((rho[i] - r2[i]).abs() < 1e-13);
            if rho[i] > 1e-12 {
                let d = (phi[i] - p2[i]) / (2.0 * std::f64::consts::PI * hbar);
                prop_assert!((d - d.round()).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn ontic_config_dof_count_matches_spec() {
    let spec = small_spec(2, 2, 2, 3);
    let space = build_config_space(&spec).unwrap();
    let cfg: OnticConfig = space.decode(17 % space.len());
    assert_eq!(cfg.z.len(), spec.num_particles() * spec.dim);
    assert_eq!(cfg.a_levels.len(), spec.dim * spec.num_sites());
}
