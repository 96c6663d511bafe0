//! Maxwell suite: the four expected-field residuals along a trajectory
//! under the modified Hamiltonian, gated against computed discretization
//! floors; dt-refinement of the time parts and dA-refinement of the static
//! parts; the projection contrast of the Gauss residual.

use crate::config::ExperimentConfig;
use crate::report::{Check, Column, RunReport, Summary};
use crate::state::build_initial_state;
use anyhow::Result;
use edlab_core::evolution::{
    build_hamiltonian_kernel, evolve_recording, modified_hamiltonian, PotentialChoice,
};
use edlab_core::gauge::gauss_constraint;
use edlab_core::lattice::{build_config_space, ConfigSpace, LatticeSpec};
use edlab_core::observables::{
    maxwell_residuals, site_norm, CurrentKind, MaxwellSeries,
};
use edlab_core::operator::{KernelOperator, KineticForm};
use edlab_core::rng::Rng;
use edlab_core::C64;
use std::sync::Arc;

/// `(dt^2/6) * max_t || g''' ||` from a per-dof time series — the standard
/// central-difference truncation estimate, with the third derivative read
/// off the series itself.
fn dt2_estimate(series: &[Vec<f64>], dt: f64, spec: &LatticeSpec) -> f64 {
    if series.len() < 5 {
        return 0.0;
    }
    let n_dof = series[0].len();
    let mut worst = 0.0f64;
    for t in 2..series.len() - 2 {
        let mut third = vec![0.0; n_dof];
        for d in 0..n_dof {
            third[d] = (series[t + 2][d] - 2.0 * series[t + 1][d] + 2.0 * series[t - 1][d]
                - series[t - 2][d])
                / (2.0 * dt * dt * dt);
        }
        worst = worst.max(site_norm(spec, &third));
    }
    dt * dt / 6.0 * worst
}

struct LevelData {
    dt: f64,
    series: MaxwellSeries,
    est_potential: f64,
    est_faraday: f64,
    est_ampere: f64,
}

fn run_level(
    space: &Arc<ConfigSpace>,
    h_phi: &KernelOperator,
    phi_sites: &[f64],
    psi0: &[C64],
    dt: f64,
    steps: usize,
    form: KineticForm,
) -> Result<LevelData> {
    let mut traj: Vec<Vec<C64>> = Vec::with_capacity(steps + 1);
    evolve_recording(h_phi, psi0, dt, steps, |_, cur| traj.push(cur.to_vec()))
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let series = maxwell_residuals(space, h_phi, &traj, phi_sites, dt, CurrentKind::Bond(form))
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let spec = &space.spec;
    let a_series: Vec<Vec<f64>> = series.fields.iter().map(|f| f.a_lin.clone()).collect();
    let e_series: Vec<Vec<f64>> = series.fields.iter().map(|f| f.e.clone()).collect();
    let b_series: Vec<Vec<f64>> = series
        .fields
        .iter()
        .map(|f| f.b.clone().unwrap_or_default())
        .collect();
    let est_potential = dt2_estimate(&a_series, dt, spec);
    let est_faraday = dt2_estimate(&b_series, dt, spec) / spec.c;
    let est_ampere = dt2_estimate(&e_series, dt, spec);
    Ok(LevelData { dt, series, est_potential, est_faraday, est_ampere })
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(0.0, f64::max)
}

pub fn run(config: &ExperimentConfig, report: &mut RunReport) -> Result<Summary> {
    let spec = config.lattice.to_spec();
    if spec.dim < 2 {
        anyhow::bail!("the maxwell suite needs D >= 2 for the curl equations");
    }
    let space = Arc::new(build_config_space(&spec).map_err(|e| anyhow::anyhow!("{e}"))?);
    let ns = spec.num_sites();
    let mut summary = Summary::new(&config.experiment, config.seed);
    let mut rng = Rng::with_stream(config.seed, 12);

    // two-site rings degenerate the two-hop central kinetic term, so the
    // suite uses the single-hop covariant Laplacian
    let form = if spec.sites <= 2 { KineticForm::SingleHop } else { KineticForm::CentralTwoHop };
    let h = build_hamiltonian_kernel(&space, PotentialChoice::Magnetic, form)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let constraint = gauss_constraint(&space).map_err(|e| anyhow::anyhow!("{e}"))?;
    let phi_sites: Vec<f64> = (0..ns).map(|_| 0.1 * rng.normal()).collect();
    let gamma_phi = constraint
        .smear_difference(&phi_sites)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let h_phi = modified_hamiltonian(&h, &gamma_phi).map_err(|e| anyhow::anyhow!("{e}"))?;

    // physical initial state
    let mut recipe = config.initial_state.clone();
    recipe.project = true;
    if recipe.a_center.is_none() {
        // keep the packet away from the amplitude branch cut
        recipe.a_center = Some(spec.amplitude_period() / 2.0);
    }
    if recipe.a_sigma.is_none() {
        recipe.a_sigma = Some(spec.amplitude_period() / 8.0);
    }
    let psi0 = build_initial_state(&space, &recipe, Some(&h))?;

    let base_dt = config
        .dt
        .unwrap_or_else(|| 0.25 * spec.hbar / h_phi.norm_estimate(30).max(1e-12));
    let base_steps = config.steps.unwrap_or(24);

    // Gauss projection contrast on the packet before vs after projection,
    // measured with the exact generator-form constraint norms (the
    // central-difference expectation residual carries an irreducible
    // coarse-grid floor at M = 3 and is reported as a diagnostic)
    let mut unprojected_recipe = recipe.clone();
    unprojected_recipe.project = false;
    let packet_raw = build_initial_state(&space, &unprojected_recipe, Some(&h))?;
    let gen_raw = max_of(&constraint.site_norms(&constraint.generator, &packet_raw));
    let gen_phys = max_of(&constraint.site_norms(&constraint.generator, &psi0));
    summary.push(Check::ge(
        "gauss_projection_contrast",
        gen_raw / gen_phys.max(1e-300),
        config.tol("gauss_contrast", 100.0),
    ));
    let static_series = |psi: &[C64]| -> Result<MaxwellSeries> {
        let traj = vec![psi.to_vec(), psi.to_vec(), psi.to_vec()];
        maxwell_residuals(&space, &h_phi, &traj, &phi_sites, base_dt, CurrentKind::Bond(form))
            .map_err(|e| anyhow::anyhow!("{e}"))
    };
    let gauss_raw = max_of(&static_series(&packet_raw)?.r_gauss);
    let gauss_phys = max_of(&static_series(&psi0)?.r_gauss);
    summary.extra_value(
        "gauss_expectation_contrast",
        serde_json::json!(gauss_raw / gauss_phys.max(1e-300)),
    );

    // three dt levels
    let mut levels = Vec::new();
    for l in 0..3u32 {
        let dt = base_dt / f64::powi(2.0, l as i32);
        let steps = base_steps * 2usize.pow(l);
        levels.push(run_level(&space, &h_phi, &phi_sites, &psi0, dt, steps, form)?);
    }

    // residuals below 10x the computed floors + dt^2 estimates (base level)
    let l0 = &levels[0];
    let checks = [
        ("potential", max_of(&l0.series.r_potential), max_of(&l0.series.floor_potential), l0.est_potential),
        ("faraday", max_of(&l0.series.r_faraday), max_of(&l0.series.floor_faraday), l0.est_faraday),
        ("ampere", max_of(&l0.series.r_ampere), max_of(&l0.series.floor_ampere), l0.est_ampere),
    ];
    for (name, r, floor, est) in checks {
        summary.push(Check::le(
            &format!("residual_{name}_within_predicted"),
            r,
            config.tol("floor_factor", 10.0) * (floor + est),
        ));
    }
    summary.push(Check::le(
        "residual_gauss_within_predicted",
        max_of(&l0.series.r_gauss),
        config.tol("floor_factor", 10.0) * gauss_phys,
    ));
    summary.push(Check::le(
        "faraday_is_curl_of_potential_eq",
        l0.series.faraday_curl_consistency,
        1e-12,
    ));

    // dt-order of the isolated time-truncation parts (central difference of
    // the expectation series minus the exact Ehrenfest rate): O(dt^2)
    for (name, pick) in [
        ("potential", 0usize),
        ("faraday", 1),
        ("ampere", 2),
    ] {
        let trunc: Vec<f64> = levels
            .iter()
            .map(|l| match pick {
                0 => max_of(&l.series.time_truncation_potential),
                1 => max_of(&l.series.time_truncation_faraday),
                _ => max_of(&l.series.time_truncation_ampere),
            })
            .collect();
        // a truncation series below ~1e-6 of its residual's scale is at
        // measurement noise (the compact linear mean circulates steadily:
        // its smooth third derivative can vanish below round-off); order is
        // unobservable there and the time part is already converged
        let residual_scale = match pick {
            0 => max_of(&levels[0].series.r_potential),
            1 => max_of(&levels[0].series.r_faraday),
            _ => max_of(&levels[0].series.r_ampere),
        };
        let noise = 1e-6 * (residual_scale + 1e-12);
        for i in 0..trunc.len() - 1 {
            if trunc[i + 1] <= noise {
                summary.push(Check::le(
                    &format!("order_{name}_{i}_converged"),
                    trunc[i + 1],
                    noise,
                ));
            } else {
                summary.push(Check::ge(
                    &format!("order_{name}_{i}"),
                    (trunc[i] / trunc[i + 1]).log2(),
                    config.tol("dt_order", 1.5),
                ));
            }
        }
    }

    // dA refinement with the amplitude period fixed: the static floors drop
    let refined_levels = config
        .tolerances
        .get("refine_levels")
        .map(|v| *v as usize)
        .unwrap_or(spec.levels + 2);
    let spec5 = LatticeSpec {
        levels: refined_levels,
        da: spec.amplitude_period() / refined_levels as f64,
        ..spec.clone()
    };
    let space5 = Arc::new(build_config_space(&spec5).map_err(|e| anyhow::anyhow!("{e}"))?);
    let h5 = build_hamiltonian_kernel(&space5, PotentialChoice::Magnetic, form)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let constraint5 = gauss_constraint(&space5).map_err(|e| anyhow::anyhow!("{e}"))?;
    let gamma5 = constraint5
        .smear_difference(&phi_sites)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let h_phi5 = modified_hamiltonian(&h5, &gamma5).map_err(|e| anyhow::anyhow!("{e}"))?;
    let psi5 = build_initial_state(&space5, &recipe, Some(&h5))?;
    // short dynamic window at the refined spacing, compared over the same
    // time range of the base run
    let steps5 = config
        .tolerances
        .get("refine_steps")
        .map(|v| *v as usize)
        .unwrap_or(12)
        .min(base_steps);
    let l5 = run_level(&space5, &h_phi5, &phi_sites, &psi5, base_dt, steps5, form)?;
    let window = l5.series.floor_ampere.len();
    // The Ampère floor is free of amplitude-wrap flux (every commutator in
    // it is built from wrap-safe pieces), so it scales cleanly with the
    // grid; the potential-equation floor carries branch-cut flux of the
    // linear mean and is reported as a diagnostic only.
    let ratio_amp = max_of(&l5.series.floor_ampere)
        / max_of(&l0.series.floor_ampere[..window.min(l0.series.floor_ampere.len())])
            .max(1e-300);
    let ratio_pot = max_of(&l5.series.floor_potential)
        / max_of(&l0.series.floor_potential[..window.min(l0.series.floor_potential.len())])
            .max(1e-300);
    let ratio_gauss = max_of(&l5.series.r_gauss) / gauss_phys.max(1e-300);
    summary.push(Check::le(
        "da_refinement_floor_ampere",
        ratio_amp,
        config.tol("da_ratio", 0.75),
    ));
    summary.push(Check::le(
        "da_refinement_gauss",
        ratio_gauss,
        config.tol("da_ratio", 0.75),
    ));
    summary.extra_value("da_refinement_floor_potential", serde_json::json!(ratio_pot));

    // series CSV for the base level
    let mut rows = Vec::new();
    for (t, _) in l0.series.r_potential.iter().enumerate() {
        rows.push(vec![
            (t + 1) as f64 * l0.dt,
            l0.series.r_potential[t],
            l0.series.r_faraday[t],
            l0.series.r_ampere[t],
            l0.series.r_gauss[t + 1],
            l0.series.floor_potential[t],
            l0.series.floor_faraday[t],
            l0.series.floor_ampere[t],
        ]);
    }
    report.write_csv(
        "maxwell_series.csv",
        &[
            Column { name: "t".into(), definition: "time".into() },
            Column { name: "r_potential".into(), definition: "|| d_t A + c(E + grad Phi) ||".into() },
            Column { name: "r_faraday".into(), definition: "|| curl E + (1/c) d_t B ||".into() },
            Column { name: "r_ampere".into(), definition: "|| d_t E - c curl_adj B + J ||".into() },
            Column { name: "r_gauss".into(), definition: "|| div E - (rho_e - rho_bar) ||".into() },
            Column { name: "floor_potential".into(), definition: "static Ehrenfest defect of (1)".into() },
            Column { name: "floor_faraday".into(), definition: "curl of the (1) defect over c".into() },
            Column { name: "floor_ampere".into(), definition: "static Ehrenfest defect of (3)".into() },
        ],
        &rows,
    )?;

    // plot-data export: (dof, t, value) triples for the expected potential
    let mut plot = Vec::new();
    for (t, f) in l0.series.fields.iter().enumerate() {
        for (dof, v) in f.a_lin.iter().enumerate() {
            plot.push(serde_json::json!([dof, t as f64 * l0.dt, v]));
        }
    }
    report.write_json("a_field_plotdata.json", &serde_json::json!(plot))?;

    summary.extra_value("dt_levels", serde_json::json!(levels.iter().map(|l| l.dt).collect::<Vec<_>>()));
    summary.extra_value("gauss_raw", serde_json::json!(gauss_raw));
    summary.extra_value("gauss_physical", serde_json::json!(gauss_phys));
    summary.extra_value(
        "floors_base_level",
        serde_json::json!({
            "potential": max_of(&l0.series.floor_potential),
            "faraday": max_of(&l0.series.floor_faraday),
            "ampere": max_of(&l0.series.floor_ampere),
            "est_potential_dt2": l0.est_potential,
            "est_faraday_dt2": l0.est_faraday,
            "est_ampere_dt2": l0.est_ampere,
        }),
    );
    Ok(summary)
}
