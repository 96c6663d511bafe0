//! Geometry suite: J^2 = -1, Omega antisymmetry, metric positivity, Poisson
//! bracket identities (antisymmetry, Jacobi), and canonical invariance of
//! the bracket under the (rho, phi) -> psi map.

use crate::config::ExperimentConfig;
use crate::report::{Check, Column, RunReport, Summary};
use anyhow::Result;
use edlab_core::ephase::{
    j_apply, metric_length_sq, omega, poisson_bracket, to_wavefunction, EpistemicState,
    TangentVector,
};
use edlab_core::lattice::build_config_space;
use edlab_core::operator::{KernelOperator, OpTag};
use edlab_core::rng::Rng;
use edlab_core::C64;
use std::sync::Arc;

fn random_hermitian(k: usize, rng: &mut Rng, scale: f64) -> Vec<C64> {
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

fn random_state(k: usize, rng: &mut Rng) -> EpistemicState {
    let raw: Vec<f64> = (0..k).map(|_| 0.3 + rng.uniform()).collect();
    let z: f64 = raw.iter().sum();
    let rho: Vec<f64> = raw.iter().map(|r| r / z).collect();
    let phi: Vec<f64> = (0..k).map(|_| 1.5 * rng.normal()).collect();
    EpistemicState::new(rho, phi).unwrap()
}

/// Coordinate-route Poisson bracket through analytic gradients of bilinear
/// functionals (the canonical-map cross-check).
fn coordinate_bracket(
    a: &KernelOperator,
    b: &KernelOperator,
    state: &EpistemicState,
    hbar: f64,
) -> f64 {
    let k = state.len();
    let psi = to_wavefunction(&state.rho, &state.phi, hbar);
    let grads = |op: &KernelOperator| -> (Vec<f64>, Vec<f64>) {
        let mut opsi = vec![C64::new(0.0, 0.0); k];
        op.apply(&psi, &mut opsi);
        let mut gr = vec![0.0; k];
        let mut gp = vec![0.0; k];
        for i in 0..k {
            let z = psi[i].conj() * opsi[i];
            gr[i] = z.re / state.rho[i];
            gp[i] = 2.0 / hbar * z.im;
        }
        (gr, gp)
    };
    let (ar, ap) = grads(a);
    let (br, bp) = grads(b);
    (0..k).map(|i| ar[i] * bp[i] - ap[i] * br[i]).sum()
}

pub fn run(config: &ExperimentConfig, report: &mut RunReport) -> Result<Summary> {
    let spec = config.lattice.to_spec();
    let space = Arc::new(build_config_space(&spec).map_err(|e| anyhow::anyhow!("{e}"))?);
    let k = space.len();
    let hbar = spec.hbar;
    let mut summary = Summary::new(&config.experiment, config.seed);
    let mut rng = Rng::with_stream(config.seed, 0);

    // J^2 = -1 and metric positivity over random states/tangents
    let mut j_dev = 0.0f64;
    let mut metric_min = f64::INFINITY;
    let mut omega_dev = 0.0f64;
    for _ in 0..20 {
        let st = random_state(k, &mut rng);
        let v = TangentVector::new(
            (0..k).map(|_| rng.normal()).collect(),
            (0..k).map(|_| rng.normal()).collect(),
        )
        .unwrap();
        let u = TangentVector::new(
            (0..k).map(|_| rng.normal()).collect(),
            (0..k).map(|_| rng.normal()).collect(),
        )
        .unwrap();
        let jv = j_apply(&st, &v, hbar).map_err(|e| anyhow::anyhow!("{e}"))?;
        let jjv = j_apply(&st, &jv, hbar).map_err(|e| anyhow::anyhow!("{e}"))?;
        for i in 0..k {
            j_dev = j_dev.max((jjv.d_rho[i] + v.d_rho[i]).abs());
            j_dev = j_dev.max((jjv.d_phi[i] + v.d_phi[i]).abs());
        }
        metric_min =
            metric_min.min(metric_length_sq(&st, &v, hbar).map_err(|e| anyhow::anyhow!("{e}"))?);
        let vu = omega(&v, &u).unwrap();
        let uv = omega(&u, &v).unwrap();
        omega_dev = omega_dev.max((vu + uv).abs() / (1.0 + vu.abs()));
    }
    summary.push(Check::le("j_squared_plus_one_max", j_dev, config.tol("j_squared", 1e-12)));
    summary.push(Check::ge("metric_min_random", metric_min, 0.0));
    summary.push(Check::le("omega_antisymmetry", omega_dev, config.tol("omega", 1e-12)));

    // Poisson brackets: antisymmetry, Jacobi, canonical invariance
    let pb_k = k.min(8);
    let sub_spec = edlab_core::lattice::LatticeSpec {
        dim: 1,
        sites: 2,
        particles: vec![edlab_core::lattice::Particle { mass: 1.0, charge: 0.0 }],
        levels: 2,
        ..spec.clone()
    };
    let (pb_space, pb_dim) = if k <= 8 {
        (space.clone(), k)
    } else {
        let s = Arc::new(build_config_space(&sub_spec).map_err(|e| anyhow::anyhow!("{e}"))?);
        let d = s.len();
        (s, d)
    };
    let _ = pb_k;
    let a = random_hermitian(pb_dim, &mut rng, 1.0);
    let b = random_hermitian(pb_dim, &mut rng, 1.0);
    let c = random_hermitian(pb_dim, &mut rng, 1.0);
    let st = random_state(pb_dim, &mut rng);
    let psi = to_wavefunction(&st.rho, &st.phi, hbar);

    let comm = |x: &[C64], y: &[C64]| -> Vec<C64> {
        let n = pb_dim;
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for l in 0..n {
                    acc += x[i * n + l] * y[l * n + j] - y[i * n + l] * x[l * n + j];
                }
                out[i * n + j] = acc / C64::new(0.0, hbar);
            }
        }
        out
    };
    let expect = |m: &[C64]| -> f64 {
        let n = pb_dim;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += psi[i].conj() * m[i * n + j] * psi[j];
            }
        }
        acc.re
    };
    let jacobi = expect(&comm(&comm(&a, &b), &c))
        + expect(&comm(&comm(&b, &c), &a))
        + expect(&comm(&comm(&c, &a), &b));
    summary.push(Check::le("pb_jacobi", jacobi.abs(), config.tol("pb_jacobi", 1e-8)));

    let ka = KernelOperator::from_dense(&pb_space, a, OpTag::Observable)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let kb = KernelOperator::from_dense(&pb_space, b, OpTag::Observable)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let ab = poisson_bracket(&ka, &kb, &psi, hbar).map_err(|e| anyhow::anyhow!("{e}"))?;
    let ba = poisson_bracket(&kb, &ka, &psi, hbar).map_err(|e| anyhow::anyhow!("{e}"))?;
    summary.push(Check::le("pb_antisymmetry", (ab + ba).abs(), 1e-12));
    let coord = coordinate_bracket(&ka, &kb, &st, hbar);
    summary.push(Check::le(
        "pb_canonical_map_invariance",
        (ab - coord).abs() / (1.0 + ab.abs()),
        config.tol("canonical", 1e-10),
    ));

    // normalization generator commutes with every Hermitian kernel
    let one = KernelOperator::identity(&pb_space, OpTag::Observable);
    let n_pb = poisson_bracket(&one, &ka, &psi, hbar).map_err(|e| anyhow::anyhow!("{e}"))?;
    summary.push(Check::le("pb_with_identity", n_pb.abs(), 1e-12));

    let rows: Vec<(String, Vec<f64>)> = summary
        .checks
        .iter()
        .map(|c| (c.name.clone(), vec![c.value, c.threshold, c.pass as u8 as f64]))
        .collect();
    report.write_csv_named(
        "geometry_checks.csv",
        &[
            Column { name: "check".into(), definition: "check identifier".into() },
            Column { name: "value".into(), definition: "measured deviation or minimum".into() },
            Column { name: "threshold".into(), definition: "pass threshold".into() },
            Column { name: "pass".into(), definition: "1 if the check passed".into() },
        ],
        &rows,
    )?;
    Ok(summary)
}
