//! Evolution suite: conservation of norm, energy, and the symplectic
//! pairing under the Cayley integrator; superposition; convergence order
//! against the dense matrix exponential.

use crate::config::ExperimentConfig;
use crate::report::{Check, Column, RunReport, Summary};
use crate::state::build_initial_state;
use anyhow::Result;
use edlab_core::dense::expm_apply;
use edlab_core::evolution::{build_hamiltonian_kernel, evolve_recording, evolve_schrodinger, PotentialChoice};
use edlab_core::lattice::{build_config_space, LatticeSpec, Particle};
use edlab_core::linalg;
use edlab_core::operator::{KernelOperator, KineticForm, OpTag};
use edlab_core::rng::Rng;
use edlab_core::C64;
use std::sync::Arc;

pub fn run(config: &ExperimentConfig, report: &mut RunReport) -> Result<Summary> {
    let spec = config.lattice.to_spec();
    let space = Arc::new(build_config_space(&spec).map_err(|e| anyhow::anyhow!("{e}"))?);
    let mut summary = Summary::new(&config.experiment, config.seed);
    let h = build_hamiltonian_kernel(&space, PotentialChoice::None, KineticForm::CentralTwoHop)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let psi0 = build_initial_state(&space, &config.initial_state, Some(&h))?;

    let steps = config.steps.unwrap_or(1000);
    let dt = config
        .dt
        .unwrap_or_else(|| 0.1 * spec.hbar / h.norm_estimate(40).max(1e-12));

    // conservation over the long run, with a co-evolved partner for the
    // symplectic pairing and a superposition triple
    let mut rng = Rng::with_stream(config.seed, 4);
    let mut partner: Vec<C64> = (0..space.len())
        .map(|_| C64::new(rng.normal(), rng.normal()))
        .collect();
    linalg::normalize_c(&mut partner);
    let alpha = C64::new(0.6, 0.2);
    let beta = C64::new(-0.3, 0.7);
    let mut combo: Vec<C64> = psi0
        .iter()
        .zip(partner.iter())
        .map(|(a, b)| alpha * a + beta * b)
        .collect();

    let e0 = h.expectation(&psi0);
    let pairing0 = linalg::dot_c(&psi0, &partner);
    let mut rows = Vec::new();
    let mut max_norm_drift = 0.0f64;
    let mut max_energy_drift = 0.0f64;
    let mut psi = psi0.clone();
    {
        let record = |step: usize, cur: &[C64]| {
            let norm = linalg::norm2_c(cur);
            let energy = h.expectation(cur);
            if step > 0 {
                max_norm_drift = max_norm_drift.max((norm - 1.0).abs() / step as f64);
                max_energy_drift = max_energy_drift.max((energy - e0).abs() / step as f64);
            }
            if step % 50 == 0 {
                rows.push(vec![step as f64 * dt, norm, energy]);
            }
        };
        psi = evolve_recording(&h, &psi, dt, steps, record).map_err(|e| anyhow::anyhow!("{e}"))?;
    }
    partner = evolve_schrodinger(&h, &partner, dt, steps).map_err(|e| anyhow::anyhow!("{e}"))?;
    combo = evolve_schrodinger(&h, &combo, dt, steps).map_err(|e| anyhow::anyhow!("{e}"))?;

    summary.push(Check::le(
        "norm_drift_per_step",
        max_norm_drift,
        config.tol("norm_drift", 1e-12),
    ));
    summary.push(Check::le(
        "energy_drift_per_step",
        max_energy_drift,
        config.tol("energy_drift", 1e-10),
    ));
    let pairing1 = linalg::dot_c(&psi, &partner);
    summary.push(Check::le(
        "symplectic_pairing_drift_per_step",
        (pairing1 - pairing0).norm() / steps as f64,
        config.tol("pairing_drift", 1e-10),
    ));
    // superposition: evolving the combination equals the combination of the
    // evolved states
    let mut lin_dev = 0.0f64;
    for i in 0..space.len() {
        let expect = alpha * psi[i] + beta * partner[i];
        lin_dev = lin_dev.max((combo[i] - expect).norm());
    }
    summary.push(Check::le("superposition_linearity", lin_dev, config.tol("linearity", 1e-10)));

    // order versus the dense exponential on K = 8
    let sub = LatticeSpec {
        dim: 1,
        sites: 2,
        dx: 1.0,
        particles: vec![Particle { mass: 1.0, charge: 0.0 }],
        levels: 2,
        da: 1.0,
        hbar: spec.hbar,
        c: spec.c,
        eta: spec.eta,
        periodic: true,
        max_configs: spec.max_configs,
    };
    let sub_space = Arc::new(build_config_space(&sub).map_err(|e| anyhow::anyhow!("{e}"))?);
    let kk = sub_space.len();
    let mut dense = vec![C64::new(0.0, 0.0); kk * kk];
    for i in 0..kk {
        for j in i..kk {
            let re = 0.7 * rng.normal();
            let im = if i == j { 0.0 } else { 0.7 * rng.normal() };
            dense[i * kk + j] = C64::new(re, im);
            dense[j * kk + i] = C64::new(re, -im);
        }
    }
    let hk = KernelOperator::from_dense(&sub_space, dense.clone(), OpTag::Hamiltonian)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut psi8: Vec<C64> = (0..kk).map(|_| C64::new(rng.normal(), rng.normal())).collect();
    linalg::normalize_c(&mut psi8);
    let total_t = 0.8;
    let err_at = |n: usize| -> Result<f64> {
        let got = evolve_schrodinger(&hk, &psi8, total_t / n as f64, n)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let exact =
            expm_apply(kk, &dense, &psi8, total_t, sub.hbar).map_err(|e| anyhow::anyhow!("{e}"))?;
        let mut acc = 0.0;
        for i in 0..kk {
            acc += (got[i] - exact[i]).norm_sqr();
        }
        Ok(acc.sqrt())
    };
    let e1 = err_at(8)?;
    let e2 = err_at(16)?;
    let order = (e1 / e2).log2();
    summary.push(Check::ge("integrator_order", order, config.tol("order", 1.9)));

    report.write_csv(
        "trajectory.csv",
        &[
            Column { name: "t".into(), definition: "time (evolve_schrodinger steps)".into() },
            Column { name: "norm".into(), definition: "l2 norm of psi".into() },
            Column { name: "energy".into(), definition: "<psi|H|psi>".into() },
        ],
        &rows,
    )?;
    summary.extra_value("dt", serde_json::json!(dt));
    summary.extra_value("steps", serde_json::json!(steps));
    Ok(summary)
}
