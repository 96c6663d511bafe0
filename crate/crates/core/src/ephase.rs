//! Geometry of the epistemic phase space.
//!
//! Coordinates on the cotangent bundle over unnormalized distributions are
//! `(rho, phi)` per configuration, or equivalently the wave function
//! `psi = rho^{1/2} exp(i phi / hbar)`. This module provides
//!
//! - the symplectic form `Omega[V, U] = sum_k (V_rho U_phi - V_phi U_rho)`,
//! - the information metric `dl^2 = sum_k [ hbar/(2 rho) drho^2
//!   + (2 rho/hbar) dphi^2 ]`,
//! - the complex structure `J: (drho, dphi) -> (-(2 rho/hbar) dphi,
//!   (hbar/(2 rho)) drho)` with `J^2 = -1`,
//! - Poisson brackets of bilinear functionals (kernel route and the
//!   coordinate route used to validate it),
//! - the normalization generator `N = 1 - <psi|psi>` and its ray flow
//!   `psi -> psi e^{i nu / hbar}`.
//!
//! Configuration-space sums use the counting measure throughout.

use crate::error::{EdError, Result};
use crate::lattice::LatticeSpec;
use crate::linalg;
use crate::math;
use crate::operator::KernelOperator;
use crate::C64;
use alloc::vec;
use alloc::vec::Vec;

/// State of knowledge: probabilities and phases over configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct EpistemicState {
    pub rho: Vec<f64>,
    /// Phase in action units; convention `phi = 0` wherever `rho = 0`.
    pub phi: Vec<f64>,
}

impl EpistemicState {
    pub fn new(rho: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if rho.len() != phi.len() {
            return Err(EdError::LengthMismatch { expected: rho.len(), got: phi.len() });
        }
        for (i, r) in rho.iter().enumerate() {
            if !(*r >= 0.0) || !r.is_finite() {
                return Err(EdError::InvalidSpec(alloc::format!(
                    "rho[{i}] = {r} must be finite and nonnegative"
                )));
            }
        }
        Ok(EpistemicState { rho, phi })
    }

    /// As `new`, and additionally requires `sum rho = 1` within 1e-12.
    pub fn new_normalized(rho: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        let state = Self::new(rho, phi)?;
        let total: f64 = state.rho.iter().sum();
        if math::abs(total - 1.0) > 1e-12 {
            return Err(EdError::InvalidSpec(alloc::format!(
                "rho must be normalized: sum = {total}"
            )));
        }
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn total_probability(&self) -> f64 {
        self.rho.iter().sum()
    }

    pub fn to_wavefunction(&self, spec: &LatticeSpec) -> Vec<C64> {
        to_wavefunction(&self.rho, &self.phi, spec.hbar)
    }
}

/// Tangent vector at a point of the e-phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub d_rho: Vec<f64>,
    pub d_phi: Vec<f64>,
}

impl TangentVector {
    pub fn new(d_rho: Vec<f64>, d_phi: Vec<f64>) -> Result<Self> {
        if d_rho.len() != d_phi.len() {
            return Err(EdError::LengthMismatch { expected: d_rho.len(), got: d_phi.len() });
        }
        if d_rho.iter().chain(d_phi.iter()).any(|v| !v.is_finite()) {
            return Err(EdError::InvalidSpec(alloc::string::String::from(
                "tangent vector entries must be finite",
            )));
        }
        Ok(TangentVector { d_rho, d_phi })
    }
}

/// Symplectic form `Omega[V, U]`; antisymmetric and bilinear.
pub fn omega(v: &TangentVector, u: &TangentVector) -> Result<f64> {
    if v.d_rho.len() != u.d_rho.len() {
        return Err(EdError::LengthMismatch { expected: v.d_rho.len(), got: u.d_rho.len() });
    }
    let mut acc = 0.0;
    for k in 0..v.d_rho.len() {
        acc += v.d_rho[k] * u.d_phi[k] - v.d_phi[k] * u.d_rho[k];
    }
    Ok(acc)
}

/// Squared length of `dx` in the information metric at `state`.
pub fn metric_length_sq(state: &EpistemicState, dx: &TangentVector, hbar: f64) -> Result<f64> {
    if dx.d_rho.len() != state.len() {
        return Err(EdError::LengthMismatch { expected: state.len(), got: dx.d_rho.len() });
    }
    let mut acc = 0.0;
    for k in 0..state.len() {
        let r = state.rho[k];
        if r == 0.0 {
            if dx.d_rho[k] != 0.0 || dx.d_phi[k] != 0.0 {
                return Err(EdError::SingularSupport { index: k });
            }
            continue;
        }
        acc += hbar / (2.0 * r) * dx.d_rho[k] * dx.d_rho[k]
            + 2.0 * r / hbar * dx.d_phi[k] * dx.d_phi[k];
    }
    Ok(acc)
}

/// Metric pairing `G(V, U)` (polarization of [`metric_length_sq`]).
pub fn metric_pairing(
    state: &EpistemicState,
    v: &TangentVector,
    u: &TangentVector,
    hbar: f64,
) -> Result<f64> {
    let mut acc = 0.0;
    for k in 0..state.len() {
        let r = state.rho[k];
        if r == 0.0 {
            if v.d_rho[k] != 0.0 || v.d_phi[k] != 0.0 || u.d_rho[k] != 0.0 || u.d_phi[k] != 0.0 {
                return Err(EdError::SingularSupport { index: k });
            }
            continue;
        }
        acc += hbar / (2.0 * r) * v.d_rho[k] * u.d_rho[k]
            + 2.0 * r / hbar * v.d_phi[k] * u.d_phi[k];
    }
    Ok(acc)
}

/// Complex structure: `(d_rho, d_phi) -> (-(2 rho/hbar) d_phi, (hbar/(2 rho)) d_rho)`.
pub fn j_apply(state: &EpistemicState, v: &TangentVector, hbar: f64) -> Result<TangentVector> {
    if v.d_rho.len() != state.len() {
        return Err(EdError::LengthMismatch { expected: state.len(), got: v.d_rho.len() });
    }
    let mut d_rho = vec![0.0; state.len()];
    let mut d_phi = vec![0.0; state.len()];
    for k in 0..state.len() {
        let r = state.rho[k];
        if r == 0.0 {
            if v.d_rho[k] != 0.0 || v.d_phi[k] != 0.0 {
                return Err(EdError::SingularSupport { index: k });
            }
            continue;
        }
        d_rho[k] = -(2.0 * r / hbar) * v.d_phi[k];
        d_phi[k] = hbar / (2.0 * r) * v.d_rho[k];
    }
    TangentVector::new(d_rho, d_phi)
}

/// `psi = rho^{1/2} e^{i phi / hbar}` elementwise.
pub fn to_wavefunction(rho: &[f64], phi: &[f64], hbar: f64) -> Vec<C64> {
    rho.iter()
        .zip(phi.iter())
        .map(|(r, p)| math::cis(p / hbar) * math::sqrt(*r))
        .collect()
}

/// Inverse map: `rho = |psi|^2`, `phi = hbar arg(psi)` in `(-pi hbar, pi hbar]`;
/// `phi = 0` where `rho = 0`.
pub fn from_wavefunction(psi: &[C64], hbar: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rho = Vec::with_capacity(psi.len());
    let mut phi = Vec::with_capacity(psi.len());
    for z in psi {
        let r = z.norm_sqr();
        rho.push(r);
        phi.push(if r == 0.0 { 0.0 } else { hbar * math::atan2(z.im, z.re) });
    }
    (rho, phi)
}

/// Poisson bracket of the bilinear functionals generated by two Hermitian
/// kernels, evaluated at `psi`:
/// `{V~, U~} = (1/i hbar) <psi| [V, U] |psi> = (2/hbar) Im <V psi, U psi>`.
pub fn poisson_bracket(
    vker: &KernelOperator,
    uker: &KernelOperator,
    psi: &[C64],
    hbar: f64,
) -> Result<f64> {
    vker.space.check_len(psi)?;
    let k = psi.len();
    let mut vpsi = vec![C64::new(0.0, 0.0); k];
    let mut upsi = vec![C64::new(0.0, 0.0); k];
    vker.apply(psi, &mut vpsi);
    uker.apply(psi, &mut upsi);
    Ok(2.0 / hbar * linalg::dot_c(&vpsi, &upsi).im)
}

/// Coordinate form of the same bracket: contract numerical `(rho, phi)`
/// gradients of the two expectation functionals with the symplectic form.
/// Kept as the validation route for [`poisson_bracket`].
pub fn poisson_bracket_coordinate(
    vker: &KernelOperator,
    uker: &KernelOperator,
    state: &EpistemicState,
    hbar: f64,
    step: f64,
) -> Result<f64> {
    let k = state.len();
    let eval = |op: &KernelOperator, rho: &[f64], phi: &[f64]| -> f64 {
        let psi = to_wavefunction(rho, phi, hbar);
        op.expectation(&psi)
    };
    let mut grad_v = (vec![0.0; k], vec![0.0; k]);
    let mut grad_u = (vec![0.0; k], vec![0.0; k]);
    let mut rho = state.rho.clone();
    let mut phi = state.phi.clone();
    for i in 0..k {
        let h = step * (1.0 + math::abs(rho[i]));
        let r0 = rho[i];
        rho[i] = r0 + h;
        let vp = eval(vker, &rho, &phi);
        let up = eval(uker, &rho, &phi);
        rho[i] = r0 - h;
        let vm = eval(vker, &rho, &phi);
        let um = eval(uker, &rho, &phi);
        rho[i] = r0;
        grad_v.0[i] = (vp - vm) / (2.0 * h);
        grad_u.0[i] = (up - um) / (2.0 * h);

        let h = step * (1.0 + math::abs(phi[i]));
        let p0 = phi[i];
        phi[i] = p0 + h;
        let vp = eval(vker, &rho, &phi);
        let up = eval(uker, &rho, &phi);
        phi[i] = p0 - h;
        let vm = eval(vker, &rho, &phi);
        let um = eval(uker, &rho, &phi);
        phi[i] = p0;
        grad_v.1[i] = (vp - vm) / (2.0 * h);
        grad_u.1[i] = (up - um) / (2.0 * h);
    }
    let mut acc = 0.0;
    for i in 0..k {
        acc += grad_v.0[i] * grad_u.1[i] - grad_v.1[i] * grad_u.0[i];
    }
    Ok(acc)
}

/// Normalization functional `N = 1 - <psi|psi>`.
pub fn normalization_functional(psi: &[C64]) -> f64 {
    let mut s = 0.0;
    for z in psi {
        s += z.norm_sqr();
    }
    1.0 - s
}

/// Flow generated by the normalization functional: a global ray phase,
/// `psi(nu) = psi(0) e^{i nu / hbar}`.
pub fn ray_flow(psi: &[C64], nu: f64, hbar: f64) -> Vec<C64> {
    let phase = math::cis(nu / hbar);
    psi.iter().map(|z| phase * z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_config_space, LatticeSpec, Particle, DEFAULT_MAX_CONFIGS};
    use crate::operator::OpTag;
    use alloc::sync::Arc;

    fn spec_k8() -> LatticeSpec {
        LatticeSpec {
            dim: 1,
            sites: 2,
            dx: 1.0,
            particles: vec![Particle { mass: 1.0, charge: 0.0 }],
            levels: 2,
            da: 1.0,
            hbar: 1.0,
            c: 1.0,
            eta: 1.0,
            periodic: true,
            max_configs: DEFAULT_MAX_CONFIGS,
        }
    }

    fn pseudo_state(k: usize, seed: f64) -> EpistemicState {
        let rho: Vec<f64> = (0..k).map(|i| 0.2 + 0.1 * math::sin(seed * (i + 1) as f64).abs()).collect();
        let total: f64 = rho.iter().sum();
        let rho: Vec<f64> = rho.iter().map(|r| r / total).collect();
        let phi: Vec<f64> = (0..k).map(|i| 0.7 * math::cos(seed * 1.3 * (i + 2) as f64)).collect();
        EpistemicState::new(rho, phi).unwrap()
    }

    fn pseudo_tangent(k: usize, seed: f64) -> TangentVector {
        TangentVector::new(
            (0..k).map(|i| math::sin(seed * (i as f64 + 0.4))).collect(),
            (0..k).map(|i| math::cos(seed * (i as f64 + 1.9))).collect(),
        )
        .unwrap()
    }

    #[test]
    fn omega_unit_vectors_and_antisymmetry() {
        let k = 8;
        let mut e_rho = TangentVector::new(vec![0.0; k], vec![0.0; k]).unwrap();
        let mut e_phi = TangentVector::new(vec![0.0; k], vec![0.0; k]).unwrap();
        e_rho.d_rho[3] = 1.0;
        e_phi.d_phi[3] = 1.0;
        assert_eq!(omega(&e_rho, &e_phi).unwrap(), 1.0);
        let v = pseudo_tangent(k, 0.9);
        let u = pseudo_tangent(k, 2.3);
        assert_eq!(omega(&v, &v).unwrap(), 0.0);
        assert!((omega(&v, &u).unwrap() + omega(&u, &v).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn omega_matches_block_matrix_contraction() {
        let k = 8;
        let v = pseudo_tangent(k, 1.1);
        let u = pseudo_tangent(k, 0.3);
        // dense contraction with [[0, I], [-I, 0]] over (rho..., phi...)
        let mut dense = 0.0;
        for i in 0..k {
            dense += v.d_rho[i] * u.d_phi[i];
            dense -= v.d_phi[i] * u.d_rho[i];
        }
        assert!((omega(&v, &u).unwrap() - dense).abs() < 1e-15);
    }

    #[test]
    fn metric_direct_value_and_psi_form() {
        // K = 1, rho = 1/2, d_rho = 1, d_phi = 0, hbar = 1 -> 1.0
        let st = EpistemicState::new(vec![0.5], vec![0.0]).unwrap();
        let dx = TangentVector::new(vec![1.0], vec![0.0]).unwrap();
        assert!((metric_length_sq(&st, &dx, 1.0).unwrap() - 1.0).abs() < 1e-15);

        // equals 2 hbar <dpsi|dpsi> for the analytically induced dpsi
        let hbar = 0.7;
        let k = 8;
        let st = pseudo_state(k, 1.7);
        let dx = pseudo_tangent(k, 0.5);
        let mut dpsi_sq = 0.0;
        for i in 0..k {
            let dpsi = math::cis(st.phi[i] / hbar)
                * C64::new(
                    dx.d_rho[i] / (2.0 * math::sqrt(st.rho[i])),
                    math::sqrt(st.rho[i]) * dx.d_phi[i] / hbar,
                );
            dpsi_sq += dpsi.norm_sqr();
        }
        let g = metric_length_sq(&st, &dx, hbar).unwrap();
        assert!((g - 2.0 * hbar * dpsi_sq).abs() < 1e-10 * g.abs());
    }

    #[test]
    fn metric_positive_definite_random() {
        for s in 1..40 {
            let k = 5 + s % 7;
            let st = pseudo_state(k, s as f64 * 0.31);
            let dx = pseudo_tangent(k, s as f64 * 0.77);
            assert!(metric_length_sq(&st, &dx, 1.0).unwrap() > 0.0);
        }
    }

    #[test]
    fn metric_singular_support_error() {
        let st = EpistemicState::new(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let dx = TangentVector::new(vec![1.0, 0.0], vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            metric_length_sq(&st, &dx, 1.0),
            Err(EdError::SingularSupport { index: 0 })
        ));
    }

    #[test]
    fn j_squares_to_minus_one_and_preserves_metric() {
        let k = 24;
        let st = pseudo_state(k, 0.37);
        let hbar = 1.3;
        let v = pseudo_tangent(k, 1.21);
        let u = pseudo_tangent(k, 0.63);
        let jv = j_apply(&st, &v, hbar).unwrap();
        let jjv = j_apply(&st, &jv, hbar).unwrap();
        for i in 0..k {
            assert!((jjv.d_rho[i] + v.d_rho[i]).abs() < 1e-12);
            assert!((jjv.d_phi[i] + v.d_phi[i]).abs() < 1e-12);
        }
        let zero = TangentVector::new(vec![0.0; k], vec![0.0; k]).unwrap();
        let jz = j_apply(&st, &zero, hbar).unwrap();
        assert!(jz.d_rho.iter().chain(jz.d_phi.iter()).all(|&x| x == 0.0));
        // compatibility G(JV, JU) = G(V, U)
        let ju = j_apply(&st, &u, hbar).unwrap();
        let lhs = metric_pairing(&st, &jv, &ju, hbar).unwrap();
        let rhs = metric_pairing(&st, &v, &u, hbar).unwrap();
        assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn wavefunction_map_examples_and_roundtrip() {
        let psi = to_wavefunction(&[1.0], &[0.0], 1.0);
        assert!((psi[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        let hbar = 0.9;
        let psi = to_wavefunction(&[1.0], &[core::f64::consts::PI * hbar / 2.0], hbar);
        assert!((psi[0] - C64::new(0.0, 1.0)).norm() < 1e-14);

        let rho = vec![0.3, 0.0, 0.7];
        let phi = vec![0.2, 0.0, -3.0];
        let psi = to_wavefunction(&rho, &phi, hbar);
        let (r2, p2) = from_wavefunction(&psi, hbar);
        for i in 0..3 {
            assert!((rho[i] - r2[i]).abs() < 1e-14);
            if rho[i] > 0.0 {
                // phases agree modulo 2 pi hbar
                let d = (phi[i] - p2[i]) / (2.0 * core::f64::consts::PI * hbar);
                assert!((d - math::round(d)).abs() < 1e-12);
            } else {
                assert_eq!(p2[i], 0.0);
            }
        }
    }

    #[test]
    fn poisson_bracket_basics() {
        let space = Arc::new(build_config_space(&spec_k8()).unwrap());
        let k = space.len();
        let st = pseudo_state(k, 0.81);
        let psi = st.to_wavefunction(&space.spec);
        let diag: Vec<f64> = (0..k).map(|i| (i as f64) * 0.3 - 1.0).collect();
        let v = KernelOperator::diagonal(&space, diag, OpTag::Observable).unwrap();
        // {V, V} = 0
        assert!(poisson_bracket(&v, &v, &psi, 1.0).unwrap().abs() < 1e-14);
        // identity commutes with everything
        let one = KernelOperator::identity(&space, OpTag::Observable);
        assert!(poisson_bracket(&one, &v, &psi, 1.0).unwrap().abs() < 1e-14);
    }

    #[test]
    fn poisson_bracket_kernel_matches_coordinate_route() {
        let space = Arc::new(build_config_space(&spec_k8()).unwrap());
        let k = space.len();
        let hbar = 1.0;
        let st = pseudo_state(k, 0.45);
        let psi = st.to_wavefunction(&space.spec);
        let mut m1 = vec![C64::new(0.0, 0.0); k * k];
        let mut m2 = vec![C64::new(0.0, 0.0); k * k];
        let mut s = 0.2f64;
        for i in 0..k {
            for j in i..k {
                s = math::sin(5.1 * s + 0.7);
                let re = s;
                s = math::sin(5.1 * s + 0.7);
                let im = if i == j { 0.0 } else { 0.5 * s };
                m1[i * k + j] = C64::new(re, im);
                m1[j * k + i] = C64::new(re, -im);
                s = math::sin(5.1 * s + 0.7);
                let re = s;
                s = math::sin(5.1 * s + 0.7);
                let im = if i == j { 0.0 } else { 0.4 * s };
                m2[i * k + j] = C64::new(re, im);
                m2[j * k + i] = C64::new(re, -im);
            }
        }
        let vker = KernelOperator::from_dense(&space, m1, OpTag::Observable).unwrap();
        let uker = KernelOperator::from_dense(&space, m2, OpTag::Observable).unwrap();
        let kernel_pb = poisson_bracket(&vker, &uker, &psi, hbar).unwrap();
        let coord_pb = poisson_bracket_coordinate(&vker, &uker, &st, hbar, 1e-5).unwrap();
        assert!(
            (kernel_pb - coord_pb).abs() < 1e-6 * (1.0 + kernel_pb.abs()),
            "kernel {kernel_pb} vs coord {coord_pb}"
        );
    }

    #[test]
    fn normalization_and_ray_flow() {
        let spec = spec_k8();
        let space = Arc::new(build_config_space(&spec).unwrap());
        let k = space.len();
        let st = pseudo_state(k, 2.2);
        let psi = st.to_wavefunction(&spec);
        assert!(normalization_functional(&psi).abs() < 1e-12);

        let hbar = spec.hbar;
        let back = ray_flow(&psi, 2.0 * core::f64::consts::PI * hbar, hbar);
        for i in 0..k {
            assert!((back[i] - psi[i]).norm() < 1e-14);
        }

        // d psi / d nu from the flow matches Hamilton's equation
        // (1/ i hbar) dN/dpsi* = i psi / hbar, by central differences.
        let h = 1e-6;
        let plus = ray_flow(&psi, h, hbar);
        let minus = ray_flow(&psi, -h, hbar);
        for i in 0..k {
            let fd = (plus[i] - minus[i]) / C64::new(2.0 * h, 0.0);
            let analytic = C64::new(0.0, 1.0 / hbar) * psi[i];
            assert!((fd - analytic).norm() < 1e-8);
        }

        // <psi|H|psi> invariant under ray flow for Hermitian H
        let diag: Vec<f64> = (0..k).map(|i| math::cos(0.8 * i as f64)).collect();
        let hop = KernelOperator::diagonal(&space, diag, OpTag::Hamiltonian).unwrap();
        let e0 = hop.expectation(&psi);
        let e1 = hop.expectation(&ray_flow(&psi, 0.37, hbar));
        assert!((e0 - e1).abs() < 1e-13);
    }
}
