use edlab_cli::config::ExperimentConfig;
use edlab_core::evolution::*;
use edlab_core::gauge::gauss_constraint;
use edlab_core::lattice::{build_config_space, LatticeSpec};
use edlab_core::operator::KineticForm;
use edlab_core::rng::Rng;
use edlab_core::C64;
use std::sync::Arc;
use std::time::Instant;

fn main() {
    let (config, _) = ExperimentConfig::from_path(std::path::Path::new("configs/maxwell-2d.toml")).unwrap();
    let base = config.lattice.to_spec();
    let spec = LatticeSpec { levels: 5, da: base.amplitude_period() / 5.0, ..base.clone() };
    let space = Arc::new(build_config_space(&spec).unwrap());
    let k = space.len();
    let mut rng = Rng::with_stream(1, 0);
    let h = build_hamiltonian_kernel(&space, PotentialChoice::Magnetic, KineticForm::SingleHop).unwrap();
    let constraint = gauss_constraint(&space).unwrap();
    let phi: Vec<f64> = (0..spec.num_sites()).map(|_| 0.1 * rng.normal()).collect();
    let h_phi = modified_hamiltonian(&h, &constraint.smear_difference(&phi).unwrap()).unwrap();
    let x: Vec<C64> = (0..k).map(|_| C64::new(rng.normal(), rng.normal())).collect();
    let mut y = vec![C64::new(0.0, 0.0); k];
    let t0 = Instant::now();
    for _ in 0..5 { h_phi.apply(&x, &mut y); }
    println!("K = {k}: apply = {:?} each", t0.elapsed() / 5);
    let t0 = Instant::now();
    let _ = cayley_step(&h_phi, &x, 0.005, 1e-13).unwrap();
    println!("cayley step = {:?}", t0.elapsed());
}
