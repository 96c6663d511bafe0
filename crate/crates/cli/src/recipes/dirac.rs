//! Negative control: the smeared Gauss constraint is first class, its flow
//! preserves the constraint surface, and yet the flow moves physical states
//! off the gauge orbit — it does not act as a gauge transformation.

use crate::config::ExperimentConfig;
use crate::report::{Check, RunReport, Summary};
use anyhow::Result;
use edlab_core::evolution::evolve_schrodinger;
use edlab_core::gauge::{
    first_class_check, gauge_transform_state, gauss_constraint, project_physical, GaugeFunction,
};
use edlab_core::lattice::build_config_space;
use edlab_core::linalg;
use edlab_core::rng::Rng;
use edlab_core::C64;
use std::sync::Arc;

pub fn run(config: &ExperimentConfig, report: &mut RunReport) -> Result<Summary> {
    let spec = config.lattice.to_spec();
    let space = Arc::new(build_config_space(&spec).map_err(|e| anyhow::anyhow!("{e}"))?);
    let k = space.len();
    let ns = spec.num_sites();
    let mut summary = Summary::new(&config.experiment, config.seed);
    let mut rng = Rng::with_stream(config.seed, 8);

    // physical state
    let mut psi: Vec<C64> = (0..k).map(|_| C64::new(rng.normal(), rng.normal())).collect();
    linalg::normalize_c(&mut psi);
    let (phys, _) = project_physical(&space, &psi, 1e-8).map_err(|e| anyhow::anyhow!("{e}"))?;

    // first-class property holds
    let fc = first_class_check(&space, config.seed).map_err(|e| anyhow::anyhow!("{e}"))?;
    summary.push(Check::le("first_class_residual", fc, config.tol("first_class", 1e-10)));

    // flow generated by the smeared difference-form constraint
    let constraint = gauss_constraint(&space).map_err(|e| anyhow::anyhow!("{e}"))?;
    let phi_smear: Vec<f64> = (0..ns).map(|_| rng.normal()).collect();
    let gamma_phi = constraint
        .smear_difference(&phi_smear)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    // scale the flow parameter to the constraint size so the motion is
    // macroscopic
    let mut gpsi = vec![C64::new(0.0, 0.0); k];
    gamma_phi.apply(&phys, &mut gpsi);
    let g_norm = linalg::norm2_c(&gpsi).max(1e-12);
    let lambda_total = 2.0 * spec.hbar / g_norm;
    let steps = config.steps.unwrap_or(64);
    let flowed = evolve_schrodinger(&gamma_phi, &phys, lambda_total / steps as f64, steps)
        .map_err(|e| anyhow::anyhow!("{e}"))?;

    // fidelity with the gauge orbit of the initial state: the orbit of a
    // physical state is the state itself (it is invariant), but sweep the
    // whole finite group anyway
    let m = spec.levels;
    let group_size = m.pow(ns as u32);
    let mut fidelity = 0.0f64;
    let mut units = vec![0i64; ns];
    for g in 0..group_size {
        let mut rem = g;
        for u in units.iter_mut() {
            *u = (rem % m) as i64;
            rem /= m;
        }
        let xi = GaugeFunction::from_units(&space, &units).map_err(|e| anyhow::anyhow!("{e}"))?;
        let orbit_point =
            gauge_transform_state(&space, &phys, &xi).map_err(|e| anyhow::anyhow!("{e}"))?;
        fidelity = fidelity.max(linalg::dot_c(&orbit_point, &flowed).norm());
    }
    summary.push(Check::le(
        "gauge_orbit_fidelity",
        fidelity,
        1.0 - config.tol("fidelity_gap", 1e-6),
    ));

    // the flow preserves the constraint surface: difference-form site norms
    // are exactly transported ([Gamma_x, Gamma_Phi] = 0), and the state
    // stays physical (the flow commutes with every gauge unitary)
    let before = constraint.site_norms(&constraint.difference, &phys);
    let after = constraint.site_norms(&constraint.difference, &flowed);
    let mut growth = 0.0f64;
    for (b, a) in before.iter().zip(after.iter()) {
        if *b > 0.0 {
            growth = growth.max(a / b);
        }
    }
    summary.push(Check::le("constraint_norm_growth_under_flow", growth, 10.0));
    let gen_after = constraint.site_norms(&constraint.generator, &flowed);
    summary.push(Check::le(
        "flow_preserves_physicality",
        gen_after.iter().cloned().fold(0.0f64, f64::max),
        config.tol("physicality", 1e-8),
    ));

    report.write_json(
        "dirac_remark.json",
        &serde_json::json!({
            "flow_parameter": lambda_total,
            "fidelity_with_gauge_orbit": fidelity,
            "constraint_norms_before": before,
            "constraint_norms_after": after,
        }),
    )?;
    summary.extra_value("fidelity", serde_json::json!(fidelity));
    Ok(summary)
}
