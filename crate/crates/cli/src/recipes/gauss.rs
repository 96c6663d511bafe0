//! Gauss-constraint suite: exact gauge invariance of probabilities, strong
//! constraint commutators, the first-class property, physical projection,
//! constraint transport under the modified Hamiltonian, and the
//! time-dependent gauge shift identity.

use crate::config::ExperimentConfig;
use crate::report::{Check, RunReport, Summary};
use anyhow::Result;
use edlab_core::ephase::from_wavefunction;
use edlab_core::evolution::{
    build_hamiltonian_kernel, evolve_recording, modified_hamiltonian, PotentialChoice,
};
use edlab_core::gauge::{
    commutator_residual, first_class_check, gauge_transform_state, gauss_constraint, grad_steps,
    project_physical, time_dependent_gauge_shift, GaugeFunction,
};
use edlab_core::lattice::build_config_space;
use edlab_core::linalg;
use edlab_core::operator::KineticForm;
use edlab_core::rng::Rng;
use edlab_core::C64;
use std::sync::Arc;

pub fn run(config: &ExperimentConfig, report: &mut RunReport) -> Result<Summary> {
    let spec = config.lattice.to_spec();
    let space = Arc::new(build_config_space(&spec).map_err(|e| anyhow::anyhow!("{e}"))?);
    let k = space.len();
    let ns = spec.num_sites();
    let mut summary = Summary::new(&config.experiment, config.seed);
    let mut rng = Rng::with_stream(config.seed, 6);

    let h = build_hamiltonian_kernel(&space, PotentialChoice::None, KineticForm::CentralTwoHop)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let constraint = gauss_constraint(&space).map_err(|e| anyhow::anyhow!("{e}"))?;

    // (GI a): rho is exactly invariant under the unitary gauge action
    let mut psi: Vec<C64> = (0..k).map(|_| C64::new(rng.normal(), rng.normal())).collect();
    linalg::normalize_c(&mut psi);
    let units: Vec<i64> = (0..ns).map(|_| (rng.next_u64() % 5) as i64 - 2).collect();
    let xi = GaugeFunction::from_units(&space, &units).map_err(|e| anyhow::anyhow!("{e}"))?;
    let psi_xi = gauge_transform_state(&space, &psi, &xi).map_err(|e| anyhow::anyhow!("{e}"))?;
    let steps = grad_steps(&space, &xi).map_err(|e| anyhow::anyhow!("{e}"))?;
    let (rho, _) = from_wavefunction(&psi, spec.hbar);
    let (rho_xi, _) = from_wavefunction(&psi_xi, spec.hbar);
    let mut gi_dev = 0.0f64;
    for i in 0..k {
        let mut t = i;
        for (dof, s) in steps.iter().enumerate() {
            if *s != 0 {
                t = space.shift_a(t, dof, *s as isize).0;
            }
        }
        gi_dev = gi_dev.max((rho_xi[t] - rho[i]).abs());
    }
    summary.push(Check::le("rho_gauge_invariance", gi_dev, config.tol("gi", 1e-13)));

    // energy covariance under the same transformation
    let cov = (h.expectation(&psi_xi) - h.expectation(&psi)).abs();
    summary.push(Check::le("energy_gauge_covariance", cov, config.tol("covariance", 1e-10)));

    // strong commutator: generator form gates at 1e-10; the
    // central-difference form is reported as the discretization diagnostic
    let mut gen_comm = 0.0f64;
    let mut cd_comm = 0.0f64;
    for x in 0..ns {
        gen_comm = gen_comm.max(commutator_residual(&constraint.generator[x], &h, &mut rng));
        cd_comm = cd_comm.max(commutator_residual(&constraint.difference[x], &h, &mut rng));
    }
    summary.push(Check::le(
        "gauss_commutator_generator_form",
        gen_comm,
        config.tol("gauss_commutator", 1e-10),
    ));
    summary.extra_value(
        "gauss_commutator_difference_form",
        serde_json::json!(cd_comm),
    );

    // first-class property (both forms, random smearings)
    let fc = first_class_check(&space, config.seed).map_err(|e| anyhow::anyhow!("{e}"))?;
    summary.push(Check::le("first_class_residual", fc, config.tol("first_class", 1e-10)));

    // physical projection
    let (phys, proj) =
        project_physical(&space, &psi, config.tol("proj_tol", 1e-8)).map_err(|e| anyhow::anyhow!("{e}"))?;
    let (phys2, proj2) =
        project_physical(&space, &phys, config.tol("proj_tol", 1e-8)).map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut idem = 0.0f64;
    for i in 0..k {
        idem = idem.max((phys2[i] - phys[i]).norm());
    }
    summary.push(Check::le("projection_idempotent", idem, 1e-10));
    summary.push(Check::le("projection_second_pass_discard", proj2.discarded_weight, 1e-12));
    let gen_norms = constraint.site_norms(&constraint.generator, &phys);
    let gen_max = gen_norms.iter().cloned().fold(0.0f64, f64::max);
    summary.push(Check::le("generator_constraint_on_physical", gen_max, 1e-10));

    // constraint transport: evolve the projected state under H_Phi for many
    // steps; difference-form site norms must stay within 10x of the start
    // (they are exactly transported: [Gamma, H_Phi] = 0 for the smeared
    // difference form and H preserves the physical subspace)
    let phi_smear: Vec<f64> = (0..ns).map(|_| rng.normal()).collect();
    let gamma_phi = constraint
        .smear_difference(&phi_smear)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let h_phi = modified_hamiltonian(&h, &gamma_phi).map_err(|e| anyhow::anyhow!("{e}"))?;
    let n_steps = config.steps.unwrap_or(1000);
    let dt = config
        .dt
        .unwrap_or_else(|| 0.1 * spec.hbar / h_phi.norm_estimate(40).max(1e-12));
    let cd_norms_0 = constraint.site_norms(&constraint.difference, &phys);
    let mut max_growth = 0.0f64;
    let track_every = (n_steps / 20).max(1);
    let evolved = evolve_recording(&h_phi, &phys, dt, n_steps, |step, cur| {
        if step % track_every == 0 && step > 0 {
            let norms = constraint.site_norms(&constraint.difference, cur);
            for (now, start) in norms.iter().zip(cd_norms_0.iter()) {
                if *start > 0.0 {
                    max_growth = max_growth.max(now / start);
                }
            }
        }
    })
    .map_err(|e| anyhow::anyhow!("{e}"))?;
    summary.push(Check::le("constraint_norm_growth", max_growth, 10.0));
    let gen_after = constraint.site_norms(&constraint.generator, &evolved);
    summary.push(Check::le(
        "generator_constraint_after_evolution",
        gen_after.iter().cloned().fold(0.0f64, f64::max),
        config.tol("gen_after", 1e-8),
    ));

    // expectation of H_Phi equals that of H within the constraint scale
    let cd_scale: f64 = cd_norms_0
        .iter()
        .zip(phi_smear.iter())
        .map(|(n, p)| spec.cell_volume() * p.abs() * n)
        .sum();
    let gap = (h_phi.expectation(&phys) - h.expectation(&phys)).abs();
    summary.push(Check::le("h_phi_expectation_gap", gap, cd_scale + 1e-10));

    // time-dependent gauge shift: linear-in-t path is exact; also exercise a
    // generic smooth path differentiated centrally
    let chi: Vec<f64> = (0..ns).map(|_| rng.normal()).collect();
    let t0 = 0.37;
    let xi_now: Vec<f64> = chi.iter().map(|c| c * t0).collect();
    let check = time_dependent_gauge_shift(
        &space,
        &h_phi,
        &xi_now,
        &chi,
        |offset| {
            let mut hh = build_hamiltonian_kernel(
                &space,
                PotentialChoice::None,
                KineticForm::CentralTwoHop,
            )?;
            hh.set_a_offset(offset.to_vec())?;
            modified_hamiltonian(&hh, &gamma_phi)
        },
        config.seed,
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;
    summary.push(Check::le(
        "time_dependent_gauge_shift",
        check.identity_residual,
        config.tol("td_shift", 1e-8),
    ));

    // constraint report JSON
    let cd_norms_after = constraint.site_norms(&constraint.difference, &evolved);
    let report_json = serde_json::json!({
        "discarded_projection_weight": proj.discarded_weight,
        "group_size": proj.group_size,
        "per_site_difference_norms_initial": cd_norms_0,
        "per_site_difference_norms_final": cd_norms_after,
        "per_site_generator_norms_physical": gen_norms,
        "commutator_norms": {
            "generator_vs_hamiltonian": gen_comm,
            "difference_vs_hamiltonian": cd_comm,
            "first_class": fc,
        },
    });
    report.write_json("constraint_report.json", &report_json)?;
    summary.extra_value("projection_discarded_weight", serde_json::json!(proj.discarded_weight));
    Ok(summary)
}
