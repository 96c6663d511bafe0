//! Appendix cross-check: the finite-difference of the integral kernel
//! evolution against the continuity equation, under dt halving.

use crate::config::ExperimentConfig;
use crate::report::{Check, Column, RunReport, Summary};
use anyhow::Result;
use edlab_core::ephase::EpistemicState;
use edlab_core::evolution::{continuity_rhs, phase_from_drift};
use edlab_core::lattice::build_config_space;
use edlab_core::maxent::{evolve_rho_integral, DriftPotential, KernelKind, Multipliers};
use edlab_core::rng::Rng;

pub fn run(config: &ExperimentConfig, report: &mut RunReport) -> Result<Summary> {
    let spec = config.lattice.to_spec();
    let space = build_config_space(&spec).map_err(|e| anyhow::anyhow!("{e}"))?;
    let k = space.len();
    let mut summary = Summary::new(&config.experiment, config.seed);

    let mut rng = Rng::with_stream(config.seed, 2);
    let varphi: Vec<f64> = (0..k).map(|_| 0.12 * rng.normal()).collect();
    let drift = DriftPotential::new(varphi.clone()).unwrap();
    let rho = vec![1.0 / k as f64; k];

    let base_dt = config.dt.unwrap_or(0.05);
    let mut rows = Vec::new();
    let mut defects = Vec::new();
    for level in 0..3 {
        let dt = base_dt / f64::powi(2.0, level);
        let mult = Multipliers::from_spec(&spec, dt).map_err(|e| anyhow::anyhow!("{e}"))?;
        let out = evolve_rho_integral(&space, &rho, &drift, &mult, KernelKind::MomentMatched)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let total: f64 = out.iter().sum();
        summary.push(Check::le(
            &format!("mass_conservation_dt{level}"),
            (total - 1.0).abs(),
            1e-12,
        ));
        let phi = phase_from_drift(&varphi, &rho, spec.eta).map_err(|e| anyhow::anyhow!("{e}"))?;
        let state = EpistemicState::new(rho.clone(), phi).unwrap();
        let rhs = continuity_rhs(&space, &state).map_err(|e| anyhow::anyhow!("{e}"))?;
        let mut acc = 0.0;
        for i in 0..k {
            let d = (out[i] - rho[i]) / dt - rhs[i];
            acc += d * d;
        }
        let defect = acc.sqrt();
        rows.push(vec![dt, defect]);
        defects.push(defect);
    }
    for i in 0..defects.len() - 1 {
        let ratio = defects[i] / defects[i + 1];
        summary.push(Check::within(&format!("halving_ratio_{i}"), ratio, 1.6, 2.4));
    }
    report.write_csv(
        "continuity_defect.csv",
        &[
            Column { name: "dt".into(), definition: "time step".into() },
            Column {
                name: "defect".into(),
                definition: "l2 norm of (evolve_rho_integral - rho)/dt - continuity_rhs".into(),
            },
        ],
        &rows,
    )?;
    Ok(summary)
}
