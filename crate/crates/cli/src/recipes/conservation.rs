//! Conservation suite: total probability and expected charge constancy
//! under unitary evolution, the local charge-conservation residual and its
//! first-order decrease under dt halving, and the static-eigenstate case.

use crate::config::ExperimentConfig;
use crate::report::{Check, Column, RunReport, Summary};
use crate::state::build_initial_state;
use anyhow::Result;
use edlab_core::dense::eigh_hermitian;
use edlab_core::evolution::{build_hamiltonian_kernel, evolve_schrodinger, PotentialChoice};
use edlab_core::lattice::{build_config_space, spatial_div};
use edlab_core::linalg;
use edlab_core::observables::{
    charge_conservation_residual, charge_density, current_density_bond, site_norm, CurrentKind,
};
use edlab_core::operator::KineticForm;
use std::sync::Arc;

pub fn run(config: &ExperimentConfig, report: &mut RunReport) -> Result<Summary> {
    let spec = config.lattice.to_spec();
    let space = Arc::new(build_config_space(&spec).map_err(|e| anyhow::anyhow!("{e}"))?);
    let mut summary = Summary::new(&config.experiment, config.seed);
    let form = KineticForm::CentralTwoHop;
    let h = build_hamiltonian_kernel(&space, PotentialChoice::None, form)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let psi0 = build_initial_state(&space, &config.initial_state, Some(&h))?;

    let steps = config.steps.unwrap_or(200);
    let dt = config
        .dt
        .unwrap_or_else(|| 0.1 * spec.hbar / h.norm_estimate(40).max(1e-12));

    // probability and total charge over the run
    let vol = spec.cell_volume();
    let q_total = |psi: &[edlab_core::C64]| -> f64 {
        charge_density(&space, psi)
            .unwrap()
            .iter()
            .map(|r| r * vol)
            .sum()
    };
    let q0 = q_total(&psi0);
    let psi_end =
        evolve_schrodinger(&h, &psi0, dt, steps).map_err(|e| anyhow::anyhow!("{e}"))?;
    summary.push(Check::le(
        "probability_drift",
        (linalg::norm2_c(&psi_end) - 1.0).abs(),
        config.tol("probability", 1e-10),
    ));
    summary.push(Check::le(
        "total_charge_drift",
        (q_total(&psi_end) - q0).abs(),
        config.tol("charge", 1e-10),
    ));

    // local residual under dt halving: the bond current isolates the O(dt)
    // forward-difference truncation; the phase-gradient form is reported too
    let mut rows = Vec::new();
    let mut bond_norms = Vec::new();
    for level in 0..3 {
        let dtl = dt / f64::powi(2.0, level);
        let psi1 = evolve_schrodinger(&h, &psi0, dtl, 1).map_err(|e| anyhow::anyhow!("{e}"))?;
        let res_bond = charge_conservation_residual(
            &space,
            &psi0,
            &psi1,
            dtl,
            CurrentKind::Bond(form),
        )
        .map_err(|e| anyhow::anyhow!("{e}"))?;
        let res_phase = charge_conservation_residual(
            &space,
            &psi0,
            &psi1,
            dtl,
            CurrentKind::PhaseGradient,
        )
        .map_err(|e| anyhow::anyhow!("{e}"))?;
        let nb = site_norm(&spec, &res_bond);
        let np = site_norm(&spec, &res_phase);
        rows.push(vec![dtl, nb, np]);
        bond_norms.push(nb);
    }
    for i in 0..bond_norms.len() - 1 {
        let ratio = bond_norms[i] / bond_norms[i + 1];
        summary.push(Check::within(
            &format!("charge_residual_halving_{i}"),
            ratio,
            1.5,
            2.5,
        ));
    }
    report.write_csv(
        "charge_conservation.csv",
        &[
            Column { name: "dt".into(), definition: "time step".into() },
            Column {
                name: "residual_bond".into(),
                definition: "site norm of d rho_e/dt + div J with the bond current".into(),
            },
            Column {
                name: "residual_phase".into(),
                definition: "same with the phase-gradient current".into(),
            },
        ],
        &rows,
    )?;

    // static eigenstate: time term vanishes and the bond current is
    // divergence-free
    if space.len() <= 512 {
        let dense = h.to_dense().map_err(|e| anyhow::anyhow!("{e}"))?;
        let (_vals, vecs) = eigh_hermitian(space.len(), &dense).map_err(|e| anyhow::anyhow!("{e}"))?;
        let eigen = &vecs[1 % vecs.len()];
        let j = current_density_bond(&space, eigen, form).map_err(|e| anyhow::anyhow!("{e}"))?;
        let div_j = spatial_div(&spec, &j).map_err(|e| anyhow::anyhow!("{e}"))?;
        summary.push(Check::le(
            "eigenstate_div_bond_current",
            site_norm(&spec, &div_j),
            config.tol("eigenstate_div", 1e-10),
        ));
    }

    // uncharged system: residual identically zero
    {
        let mut spec0 = spec.clone();
        for p in spec0.particles.iter_mut() {
            p.charge = 0.0;
        }
        let space0 = Arc::new(build_config_space(&spec0).map_err(|e| anyhow::anyhow!("{e}"))?);
        let h0 = build_hamiltonian_kernel(&space0, PotentialChoice::None, form)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let p0 = build_initial_state(&space0, &Default::default(), Some(&h0))?;
        let p1 = evolve_schrodinger(&h0, &p0, dt, 1).map_err(|e| anyhow::anyhow!("{e}"))?;
        let res =
            charge_conservation_residual(&space0, &p0, &p1, dt, CurrentKind::Bond(form))
                .map_err(|e| anyhow::anyhow!("{e}"))?;
        summary.push(Check::le(
            "zero_charge_residual",
            res.iter().fold(0.0f64, |a, b| a.max(b.abs())),
            1e-14,
        ));
    }
    summary.extra_value("dt", serde_json::json!(dt));
    Ok(summary)
}
