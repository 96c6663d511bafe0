//! MaxEnt suite: the brute-force dual solver against the closed Gaussian
//! kernel, the sampling moment report, and the multiplier schedule.

use crate::config::ExperimentConfig;
use crate::report::{Check, Column, RunReport, Summary};
use anyhow::Result;
use edlab_core::lattice::build_config_space;
use edlab_core::maxent::{
    drift_means, maxent_oracle, moment_report, transition_logdensity, DriftPotential,
    Multipliers, StepSample,
};
use edlab_core::rng::Rng;

pub fn run(config: &ExperimentConfig, report: &mut RunReport) -> Result<Summary> {
    let spec = config.lattice.to_spec();
    let space = build_config_space(&spec).map_err(|e| anyhow::anyhow!("{e}"))?;
    let k = space.len();
    let mut summary = Summary::new(&config.experiment, config.seed);
    let dt = config.dt.unwrap_or(0.05);
    let mult = Multipliers::from_spec(&spec, dt).map_err(|e| anyhow::anyhow!("{e}"))?;
    let mult2 = Multipliers::from_spec(&spec, 2.0 * dt).map_err(|e| anyhow::anyhow!("{e}"))?;

    // multiplier schedule: doubling dt halves alpha_n and alpha
    let mut sched_dev = ((mult2.alpha * 2.0 - mult.alpha) / mult.alpha).abs();
    for n in 0..spec.num_particles() {
        sched_dev =
            sched_dev.max(((mult2.alpha_n[n] * 2.0 - mult.alpha_n[n]) / mult.alpha_n[n]).abs());
    }
    summary.push(Check::le("multiplier_schedule", sched_dev, 1e-14));

    // drift potential for the suite
    let mut rng = Rng::with_stream(config.seed, 1);
    let varphi: Vec<f64> = (0..k).map(|_| 0.15 * rng.normal()).collect();
    let drift = DriftPotential::new(varphi.clone()).unwrap();
    let idx = (rng.next_u64() as usize) % k;

    // oracle vs closed form on an explicit step space (<= 10^4 atoms)
    let (dz_bar, da_bar) = drift_means(&space, idx, &drift, &mult).unwrap();
    let vol = spec.cell_volume();
    let up = space.shift_z(idx, 0, 1);
    let dn = space.shift_z(idx, 0, -1);
    let g_z = (varphi[up] - varphi[dn]) / (2.0 * spec.dx);
    let dof = 0usize;
    let (aup, _) = space.shift_a(idx, dof, 1);
    let (adn, _) = space.shift_a(idx, dof, -1);
    let g_a = (varphi[aup] - varphi[adn]) / (2.0 * spec.da) / vol;
    let site = space.particle_site(idx, 0);
    let a_avg = space.site_averaged_a(idx, 0, site);

    let n_side = 71;
    let sigma_z = (spec.eta * dt / spec.particles[0].mass).sqrt();
    let sigma_a = (spec.c * spec.c * spec.eta * dt / vol).sqrt();
    let zs: Vec<f64> = (0..n_side)
        .map(|i| dz_bar[0] + (i as f64 - 35.0) / 35.0 * 5.0 * sigma_z)
        .collect();
    let avs: Vec<f64> = (0..n_side)
        .map(|i| da_bar[dof] + (i as f64 - 35.0) / 35.0 * 5.0 * sigma_a)
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
            t_drift[atom] = g_z * z + vol * g_a * a;
            t_gauge[atom] = a_avg * z;
        }
    }
    let (p, _) = maxent_oracle(
        &prior,
        &[t_drift, t_gauge],
        &[
            g_z * dz_bar[0] + vol * g_a * da_bar[dof],
            a_avg * dz_bar[0],
        ],
        1e-13,
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut closed_log = vec![0.0; n_atoms];
    for (iz, z) in zs.iter().enumerate() {
        for (ia, a) in avs.iter().enumerate() {
            let mut da = vec![0.0; spec.a_coords()];
            da[dof] = *a;
            let step = StepSample { dz: vec![*z], da };
            closed_log[iz * n_side + ia] =
                transition_logdensity(&space, &step, idx, &drift, &mult).unwrap();
        }
    }
    let z_closed: f64 = closed_log.iter().map(|l| l.exp()).sum();
    let mut max_dev = 0.0f64;
    for atom in 0..n_atoms {
        let dev = (p[atom].ln() - (closed_log[atom] - z_closed.ln())).abs();
        max_dev = max_dev.max(dev);
    }
    summary.push(Check::le("oracle_log_ratio", max_dev, config.tol("oracle_log_ratio", 1e-8)));

    // sampling moment report
    let samples = config.samples.unwrap_or(100_000);
    let rows = moment_report(&space, idx, &drift, &mult, samples, config.seed)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let max_z = rows.iter().map(|r| r.z_score.abs()).fold(0.0f64, f64::max);
    summary.push(Check::le("moment_report_max_z", max_z, config.tol("moment_z", 5.0)));
    let csv_rows: Vec<(String, Vec<f64>)> = rows
        .iter()
        .map(|r| (r.quantity.clone(), vec![r.predicted, r.empirical, r.stderr, r.z_score]))
        .collect();
    report.write_csv_named(
        "moment_report.csv",
        &[
            Column { name: "quantity".into(), definition: "moment identifier".into() },
            Column {
                name: "predicted".into(),
                definition: "closed-form kernel moment (drift_means / fluctuation schedule)".into(),
            },
            Column { name: "empirical".into(), definition: "sample estimate".into() },
            Column { name: "stderr".into(), definition: "standard error of the estimate".into() },
            Column { name: "z_score".into(), definition: "(empirical - predicted)/stderr".into() },
        ],
        &csv_rows,
    )?;
    summary.extra_value("samples", serde_json::json!(samples));
    Ok(summary)
}
