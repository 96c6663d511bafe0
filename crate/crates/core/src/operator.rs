//! Hermitian kernel operators on the configuration space.
//!
//! Operators are sums of structured terms applied matrix-free, so the
//! configuration space never has to be materialized as a matrix:
//!
//! - `Diag` — real multiplication operators (potentials, charge densities);
//! - `ZHop` — gauge-covariant particle hops `c (W T^{+s} + h.c.)` where the
//!   Wilson phase `W = exp(-i (q/hbar c) dx sum_links A)` runs over the links
//!   crossed by the hop (the hop-averaged minimal coupling: the line
//!   integral of `A` along the hop);
//! - `ALaplacian` — the cyclic second difference in one amplitude dof;
//! - `ADiff` — `c * i (S+ - S-)`, the Hermitian central difference behind
//!   the electric-field operator;
//! - `GaugeGen` — `pref * (V_y - V_y†) / (2 i)`, the Hermitian generator
//!   built from the elementary discrete gauge unitary at a site (the exact
//!   lattice counterpart of the Gauss constraint density);
//! - `Dense` — explicit small matrices for tests and oracles.
//!
//! Every structured term is Hermitian by construction; `from_dense`
//! validates Hermiticity explicitly and rejects violations.

use crate::error::{EdError, Result};
use crate::lattice::ConfigSpace;
use crate::linalg;
use crate::math;
use crate::C64;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

/// What an operator means; carried as metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpTag {
    Hamiltonian,
    Constraint,
    Observable,
}

/// Visit every config `i` with its cyclic up/down neighbours in one
/// amplitude dof, iterating in stride blocks so no index division is needed
/// on the hot path.
#[inline]
fn for_each_shift_block<F: FnMut(usize, usize, usize)>(
    space: &ConfigSpace,
    dof: usize,
    k: usize,
    mut f: F,
) {
    let stride = space.a_stride(dof);
    let m = space.spec.levels;
    let block = stride * m;
    let wrap = (m - 1) * stride;
    let mut base = 0;
    while base < k {
        for digit in 0..m {
            let row = base + digit * stride;
            let up_off = if digit + 1 == m { row - wrap } else { row + stride };
            let dn_off = if digit == 0 { row + wrap } else { row - stride };
            for lo in 0..stride {
                f(row + lo, up_off + lo, dn_off + lo);
            }
        }
        base += block;
    }
}

/// Which discrete covariant Laplacian the matter sector uses.
///
/// `CentralTwoHop` is the square of the central-difference covariant
/// derivative (hops of two cells); it degenerates on two-site rings, where
/// `SingleHop` (the nearest-neighbour covariant Laplacian, same continuum
/// limit, same exact gauge covariance) is the appropriate choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KineticForm {
    CentralTwoHop,
    SingleHop,
}

#[derive(Debug, Clone)]
pub(crate) enum OpTerm {
    /// Real diagonal.
    Diag(Arc<Vec<f64>>),
    /// `coef * (F W T^{+step} + h.c.)` (anti = false) or
    /// `coef * i (F W T^{+step} - h.c.)` (anti = true), where `F` optionally
    /// restricts the source site of the forward hop (bond currents).
    ZHop {
        n: usize,
        a: usize,
        step: usize,
        coef: f64,
        anti: bool,
        src_sites: Option<Arc<Vec<usize>>>,
    },
    /// `coef * (S+ + S- - 2)` on one amplitude dof.
    ALaplacian { dof: usize, coef: f64 },
    /// `coef * i (S+ - S-)` on one amplitude dof.
    ADiff { dof: usize, coef: f64 },
    /// `coef * w * i (S+ - S-)` with a real diagonal weight `w` that must be
    /// constant along the shifted coordinate (e.g. a function of particle
    /// positions only), so the product stays Hermitian.
    ADiffWeighted {
        dof: usize,
        coef: f64,
        weight: Arc<Vec<f64>>,
    },
    /// `pref * (V_site - V_site†) / (2 i)`.
    GaugeGen {
        site: usize,
        pref: f64,
        /// Phase angle contributed by particle `n` when it sits at `site`.
        angle_at_site: Arc<Vec<f64>>,
        /// Constant background angle (charged-sector neutralization).
        angle_background: f64,
    },
    /// Row-major dense matrix (small spaces, oracles).
    Dense(Arc<Vec<C64>>),
}

/// Hermitian linear operator on the K-dimensional configuration space,
/// stored as structured terms and applied matrix-free.
#[derive(Debug, Clone)]
pub struct KernelOperator {
    pub space: Arc<ConfigSpace>,
    pub tag: OpTag,
    pub(crate) terms: Vec<OpTerm>,
    /// Real offset added to every amplitude value when evaluating hop
    /// phases; lets one build `H[A + grad xi]` for arbitrary shifts.
    pub(crate) a_offset: Arc<Vec<f64>>,
}

impl KernelOperator {
    pub fn zero(space: &Arc<ConfigSpace>, tag: OpTag) -> Self {
        KernelOperator {
            space: space.clone(),
            tag,
            terms: Vec::new(),
            a_offset: Arc::new(vec![0.0; space.spec.a_coords()]),
        }
    }

    pub fn identity(space: &Arc<ConfigSpace>, tag: OpTag) -> Self {
        let mut op = Self::zero(space, tag);
        op.push_diag(vec![1.0; space.len()]);
        op
    }

    pub fn diagonal(space: &Arc<ConfigSpace>, diag: Vec<f64>, tag: OpTag) -> Result<Self> {
        space.check_len(&diag)?;
        let mut op = Self::zero(space, tag);
        op.push_diag(diag);
        Ok(op)
    }

    /// Dense Hermitian matrix, validated to 1e-12.
    pub fn from_dense(space: &Arc<ConfigSpace>, m: Vec<C64>, tag: OpTag) -> Result<Self> {
        let k = space.len();
        if m.len() != k * k {
            return Err(EdError::LengthMismatch { expected: k * k, got: m.len() });
        }
        let mut residual = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                residual = math::fmax(residual, (m[i * k + j] - m[j * k + i].conj()).norm());
            }
        }
        if residual > 1e-12 {
            return Err(EdError::NonHermitian { residual });
        }
        let mut op = Self::zero(space, tag);
        op.terms.push(OpTerm::Dense(Arc::new(m)));
        Ok(op)
    }

    pub(crate) fn push_diag(&mut self, diag: Vec<f64>) {
        self.terms.push(OpTerm::Diag(Arc::new(diag)));
    }

    pub(crate) fn push_term(&mut self, t: OpTerm) {
        self.terms.push(t);
    }

    pub fn set_a_offset(&mut self, offset: Vec<f64>) -> Result<()> {
        if offset.len() != self.space.spec.a_coords() {
            return Err(EdError::LengthMismatch {
                expected: self.space.spec.a_coords(),
                got: offset.len(),
            });
        }
        self.a_offset = Arc::new(offset);
        Ok(())
    }

    /// Append all terms of `other` (same configuration space required).
    pub fn add_assign_op(&mut self, other: &KernelOperator) -> Result<()> {
        if other.space.len() != self.space.len() {
            return Err(EdError::LengthMismatch {
                expected: self.space.len(),
                got: other.space.len(),
            });
        }
        self.terms.extend(other.terms.iter().cloned());
        self.consolidate();
        Ok(())
    }

    /// Merge mergeable terms (diagonals into one, `ADiff`/`ALaplacian` with
    /// equal dof into single passes) — keeps `apply` proportional to the
    /// number of distinct structures, not the number of assembled pieces.
    pub fn consolidate(&mut self) {
        let k = self.space.len();
        let mut diag_acc: Option<Vec<f64>> = None;
        let mut adiff: alloc::collections::BTreeMap<usize, f64> = alloc::collections::BTreeMap::new();
        let mut alap: alloc::collections::BTreeMap<usize, f64> = alloc::collections::BTreeMap::new();
        let mut rest = Vec::new();
        for term in self.terms.drain(..) {
            match term {
                OpTerm::Diag(d) => {
                    let acc = diag_acc.get_or_insert_with(|| vec![0.0; k]);
                    for (a, b) in acc.iter_mut().zip(d.iter()) {
                        *a += b;
                    }
                }
                OpTerm::ADiff { dof, coef } => {
                    *adiff.entry(dof).or_insert(0.0) += coef;
                }
                OpTerm::ALaplacian { dof, coef } => {
                    *alap.entry(dof).or_insert(0.0) += coef;
                }
                other => rest.push(other),
            }
        }
        self.terms = rest;
        for (dof, coef) in alap {
            if coef != 0.0 {
                self.terms.push(OpTerm::ALaplacian { dof, coef });
            }
        }
        for (dof, coef) in adiff {
            if coef != 0.0 {
                self.terms.push(OpTerm::ADiff { dof, coef });
            }
        }
        if let Some(d) = diag_acc {
            self.terms.push(OpTerm::Diag(Arc::new(d)));
        }
    }

    /// Multiply the whole operator by a real scalar.
    pub fn scale(&mut self, s: f64) {
        for t in self.terms.iter_mut() {
            match t {
                OpTerm::Diag(d) => {
                    let mut v = d.as_ref().clone();
                    v.iter_mut().for_each(|x| *x *= s);
                    *d = Arc::new(v);
                }
                OpTerm::ZHop { coef, .. } => *coef *= s,
                OpTerm::ALaplacian { coef, .. } => *coef *= s,
                OpTerm::ADiff { coef, .. } => *coef *= s,
                OpTerm::ADiffWeighted { coef, .. } => *coef *= s,
                OpTerm::GaugeGen { pref, .. } => *pref *= s,
                OpTerm::Dense(m) => {
                    let mut v = m.as_ref().clone();
                    v.iter_mut().for_each(|x| *x *= s);
                    *m = Arc::new(v);
                }
            }
        }
    }

    #[inline]
    fn a_eff(&self, i: usize, dof: usize) -> f64 {
        self.space.a_value(i, dof) + self.a_offset[dof]
    }

    /// Baked-in amplitude offset of one dof.
    pub fn a_offset_value(&self, dof: usize) -> f64 {
        self.a_offset[dof]
    }

    /// Wilson line angle for a forward hop of particle `n` along `a` by
    /// `step` cells starting from config `i`.
    #[inline]
    fn hop_angle(&self, i: usize, n: usize, a: usize, step: usize) -> f64 {
        let spec = &self.space.spec;
        let kappa = spec.particles[n].charge * spec.dx / (spec.hbar * spec.c);
        let mut site = self.space.particle_site(i, n);
        let mut sum = 0.0;
        for _ in 0..step {
            sum += self.a_eff(i, spec.a_dof(a, site));
            site = spec.site_shift(site, a, 1);
        }
        kappa * sum
    }

    /// Config reached from `i` by the elementary gauge shift at `site`
    /// (direction +1) or its inverse (direction -1).
    #[inline]
    fn gauge_shift_config(&self, i: usize, site: usize, direction: isize) -> usize {
        let spec = &self.space.spec;
        let mut j = i;
        for a in 0..spec.dim {
            let back = spec.site_shift(site, a, -1);
            let (j1, _) = self.space.shift_a(j, spec.a_dof(a, site), direction);
            let (j2, _) = self.space.shift_a(j1, spec.a_dof(a, back), -direction);
            j = j2;
        }
        j
    }

    /// `out = O x`.
    pub fn apply(&self, x: &[C64], out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.space.len());
        debug_assert_eq!(out.len(), self.space.len());
        out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        self.apply_add(x, out);
    }

    /// `out += O x`.
    pub fn apply_add(&self, x: &[C64], out: &mut [C64]) {
        let space = &self.space;
        let k = space.len();
        for term in &self.terms {
            match term {
                OpTerm::Diag(d) => {
                    for i in 0..k {
                        out[i] += C64::new(d[i], 0.0) * x[i];
                    }
                }
                OpTerm::Dense(m) => {
                    for i in 0..k {
                        let mut acc = C64::new(0.0, 0.0);
                        let row = &m[i * k..(i + 1) * k];
                        for (j, v) in row.iter().enumerate() {
                            acc += v * x[j];
                        }
                        out[i] += acc;
                    }
                }
                OpTerm::ALaplacian { dof, coef } => {
                    let c = C64::new(*coef, 0.0);
                    for_each_shift_block(space, *dof, k, |i, up, dn| {
                        out[i] += c * (x[up] + x[dn] - C64::new(2.0, 0.0) * x[i]);
                    });
                }
                OpTerm::ADiff { dof, coef } => {
                    let ic = C64::new(0.0, *coef);
                    for_each_shift_block(space, *dof, k, |i, up, dn| {
                        out[i] += ic * (x[up] - x[dn]);
                    });
                }
                OpTerm::ADiffWeighted { dof, coef, weight } => {
                    let coef = *coef;
                    let w = weight.as_ref();
                    for_each_shift_block(space, *dof, k, |i, up, dn| {
                        out[i] += C64::new(0.0, coef * w[i]) * (x[up] - x[dn]);
                    });
                }
                OpTerm::ZHop { n, a, step, coef, anti, src_sites } => {
                    let coord = n * space.spec.dim + *a;
                    let fwd_factor = if *anti {
                        C64::new(0.0, *coef)
                    } else {
                        C64::new(*coef, 0.0)
                    };
                    let bwd_factor = fwd_factor.conj();
                    // With no amplitude offset the Wilson angle is
                    // kappa * dA * (summed levels): a small table replaces
                    // per-entry trig.
                    let offset_free = self.a_offset.iter().all(|v| *v == 0.0);
                    let table: Option<Vec<C64>> = if offset_free {
                        let spec = &space.spec;
                        let kappa = spec.particles[*n].charge * spec.dx / (spec.hbar * spec.c);
                        let max_sum = (spec.levels - 1) * step;
                        Some(
                            (0..=max_sum)
                                .map(|l| math::cis(-kappa * spec.da * l as f64))
                                .collect(),
                        )
                    } else {
                        None
                    };
                    let fwd_phase = |op: &KernelOperator, i: usize| -> C64 {
                        if let Some(t) = &table {
                            let spec = &op.space.spec;
                            let mut site = op.space.particle_site(i, *n);
                            let mut lsum = 0usize;
                            for _ in 0..*step {
                                lsum += op.space.a_level(i, spec.a_dof(*a, site));
                                site = spec.site_shift(site, *a, 1);
                            }
                            t[lsum]
                        } else {
                            math::cis(-op.hop_angle(i, *n, *a, *step))
                        }
                    };
                    for i in 0..k {
                        let up = space.shift_z(i, coord, *step as isize);
                        let dn = space.shift_z(i, coord, -(*step as isize));
                        let pass_fwd = src_sites
                            .as_ref()
                            .map_or(true, |s| s.contains(&space.particle_site(i, *n)));
                        if pass_fwd {
                            out[i] += fwd_factor * fwd_phase(self, i) * x[up];
                        }
                        let pass_bwd = src_sites
                            .as_ref()
                            .map_or(true, |s| s.contains(&space.particle_site(dn, *n)));
                        if pass_bwd {
                            out[i] += bwd_factor * fwd_phase(self, dn).conj() * x[dn];
                        }
                    }
                }
                OpTerm::GaugeGen { site, pref, angle_at_site, angle_background } => {
                    let half = C64::new(0.0, -0.5 * pref); // 1/(2i) = -i/2
                    for i in 0..k {
                        let mut angle = *angle_background;
                        for (n, an) in angle_at_site.iter().enumerate() {
                            if space.particle_site(i, n) == *site {
                                angle += an;
                            }
                        }
                        let phase = math::cis(angle);
                        let fwd = self.gauge_shift_config(i, *site, 1);
                        let bwd = self.gauge_shift_config(i, *site, -1);
                        out[i] += half * (phase * x[fwd] - phase.conj() * x[bwd]);
                    }
                }
            }
        }
    }

    /// `<psi| O |psi>` — real part (exact for Hermitian terms).
    pub fn expectation(&self, psi: &[C64]) -> f64 {
        let mut tmp = vec![C64::new(0.0, 0.0); self.space.len()];
        self.apply(psi, &mut tmp);
        linalg::dot_c(psi, &tmp).re
    }

    /// Materialize as a dense row-major matrix (small spaces only).
    pub fn to_dense(&self) -> Result<Vec<C64>> {
        let k = self.space.len();
        if k > 4096 {
            return Err(EdError::Numerical(String::from(
                "refusing to densify an operator with K > 4096",
            )));
        }
        let mut m = vec![C64::new(0.0, 0.0); k * k];
        let mut basis = vec![C64::new(0.0, 0.0); k];
        let mut col = vec![C64::new(0.0, 0.0); k];
        for j in 0..k {
            basis[j] = C64::new(1.0, 0.0);
            self.apply(&basis, &mut col);
            for i in 0..k {
                m[i * k + j] = col[i];
            }
            basis[j] = C64::new(0.0, 0.0);
        }
        Ok(m)
    }

    /// Max Hermiticity violation measured on the dense form (small K).
    pub fn hermiticity_residual(&self) -> Result<f64> {
        let k = self.space.len();
        let m = self.to_dense()?;
        let mut r = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                r = math::fmax(r, (m[i * k + j] - m[j * k + i].conj()).norm());
            }
        }
        Ok(r)
    }

    /// Stream the nonzero entries `(row, col, value)` term by term; entries
    /// for the same coordinate may repeat and must be accumulated by the
    /// consumer. Works at any K without materializing the matrix.
    pub fn for_each_entry<F: FnMut(usize, usize, C64)>(&self, mut f: F) {
        let space = &self.space;
        let k = space.len();
        for term in &self.terms {
            match term {
                OpTerm::Diag(d) => {
                    for i in 0..k {
                        if d[i] != 0.0 {
                            f(i, i, C64::new(d[i], 0.0));
                        }
                    }
                }
                OpTerm::Dense(m) => {
                    for i in 0..k {
                        for j in 0..k {
                            let v = m[i * k + j];
                            if v != C64::new(0.0, 0.0) {
                                f(i, j, v);
                            }
                        }
                    }
                }
                OpTerm::ALaplacian { dof, coef } => {
                    for i in 0..k {
                        let (up, _) = space.shift_a(i, *dof, 1);
                        let (dn, _) = space.shift_a(i, *dof, -1);
                        f(i, i, C64::new(-2.0 * coef, 0.0));
                        f(i, up, C64::new(*coef, 0.0));
                        f(i, dn, C64::new(*coef, 0.0));
                    }
                }
                OpTerm::ADiff { dof, coef } => {
                    let ic = C64::new(0.0, *coef);
                    for i in 0..k {
                        let (up, _) = space.shift_a(i, *dof, 1);
                        let (dn, _) = space.shift_a(i, *dof, -1);
                        f(i, up, ic);
                        f(i, dn, -ic);
                    }
                }
                OpTerm::ADiffWeighted { dof, coef, weight } => {
                    for i in 0..k {
                        let (up, _) = space.shift_a(i, *dof, 1);
                        let (dn, _) = space.shift_a(i, *dof, -1);
                        let ic = C64::new(0.0, *coef * weight[i]);
                        f(i, up, ic);
                        f(i, dn, -ic);
                    }
                }
                OpTerm::ZHop { n, a, step, coef, anti, src_sites } => {
                    let coord = n * space.spec.dim + *a;
                    let fwd_factor = if *anti {
                        C64::new(0.0, *coef)
                    } else {
                        C64::new(*coef, 0.0)
                    };
                    for i in 0..k {
                        let up = space.shift_z(i, coord, *step as isize);
                        let pass = src_sites
                            .as_ref()
                            .map_or(true, |s| s.contains(&space.particle_site(i, *n)));
                        if pass {
                            let th = self.hop_angle(i, *n, *a, *step);
                            let v = fwd_factor * math::cis(-th);
                            f(i, up, v);
                            f(up, i, v.conj());
                        }
                    }
                }
                OpTerm::GaugeGen { site, pref, angle_at_site, angle_background } => {
                    let half = C64::new(0.0, -0.5 * pref);
                    for i in 0..k {
                        let mut angle = *angle_background;
                        for (n, an) in angle_at_site.iter().enumerate() {
                            if space.particle_site(i, n) == *site {
                                angle += an;
                            }
                        }
                        let fwd = self.gauge_shift_config(i, *site, 1);
                        let v = half * math::cis(angle);
                        f(i, fwd, v);
                        f(fwd, i, v.conj());
                    }
                }
            }
        }
    }

    /// Spectral-norm estimate by power iteration (Hermitian operators).
    pub fn norm_estimate(&self, iters: usize) -> f64 {
        let k = self.space.len();
        let mut v: Vec<C64> = (0..k)
            .map(|i| {
                let t = 0.7548776662466927 * (i as f64 + 1.0);
                C64::new(math::cos(t), math::sin(1.3 * t))
            })
            .collect();
        linalg::normalize_c(&mut v);
        let mut w = vec![C64::new(0.0, 0.0); k];
        let mut lambda = 0.0;
        for _ in 0..iters {
            self.apply(&v, &mut w);
            lambda = linalg::norm2_c(&w);
            if lambda == 0.0 {
                return 0.0;
            }
            core::mem::swap(&mut v, &mut w);
            let inv = C64::new(1.0 / lambda, 0.0);
            linalg::scale_c(&mut v, inv);
        }
        lambda
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_config_space, LatticeSpec, Particle, DEFAULT_MAX_CONFIGS};

    fn space_131() -> Arc<ConfigSpace> {
        let spec = LatticeSpec {
            dim: 1,
            sites: 3,
            dx: 1.0,
            particles: vec![Particle { mass: 1.0, charge: 1.0 }],
            levels: 3,
            da: 2.0 * core::f64::consts::PI / 3.0,
            hbar: 1.0,
            c: 1.0,
            eta: 1.0,
            periodic: true,
            max_configs: DEFAULT_MAX_CONFIGS,
        };
        Arc::new(build_config_space(&spec).unwrap())
    }

    #[test]
    fn from_dense_rejects_non_hermitian() {
        let spec = LatticeSpec {
            dim: 1,
            sites: 2,
            dx: 1.0,
            particles: vec![],
            levels: 2,
            da: 1.0,
            hbar: 1.0,
            c: 1.0,
            eta: 1.0,
            periodic: true,
            max_configs: DEFAULT_MAX_CONFIGS,
        };
        let space = Arc::new(build_config_space(&spec).unwrap());
        let k = space.len();
        let mut m = vec![C64::new(0.0, 0.0); k * k];
        m[1] = C64::new(1.0, 0.5);
        m[k] = C64::new(1.0, 0.5); // not the conjugate
        assert!(matches!(
            KernelOperator::from_dense(&space, m, OpTag::Observable),
            Err(EdError::NonHermitian { .. })
        ));
    }

    #[test]
    fn structured_terms_are_hermitian() {
        let space = space_131();
        let mut op = KernelOperator::zero(&space, OpTag::Hamiltonian);
        op.push_term(OpTerm::ZHop { n: 0, a: 0, step: 1, coef: -0.5, anti: false, src_sites: None });
        op.push_term(OpTerm::ZHop { n: 0, a: 0, step: 2, coef: 0.25, anti: false, src_sites: None });
        op.push_term(OpTerm::ZHop {
            n: 0,
            a: 0,
            step: 1,
            coef: 0.7,
            anti: true,
            src_sites: Some(Arc::new(vec![1usize])),
        });
        op.push_term(OpTerm::ALaplacian { dof: 0, coef: -1.3 });
        op.push_term(OpTerm::ADiff { dof: 1, coef: 0.9 });
        op.push_term(OpTerm::GaugeGen {
            site: 0,
            pref: 1.1,
            angle_at_site: Arc::new(vec![2.0 * core::f64::consts::PI / 3.0]),
            angle_background: -0.3,
        });
        assert!(op.hermiticity_residual().unwrap() < 1e-12);
    }

    #[test]
    fn entries_stream_matches_dense() {
        let space = space_131();
        let mut op = KernelOperator::zero(&space, OpTag::Hamiltonian);
        op.push_term(OpTerm::ZHop { n: 0, a: 0, step: 1, coef: -0.5, anti: false, src_sites: None });
        op.push_term(OpTerm::ADiff { dof: 2, coef: 0.4 });
        op.push_term(OpTerm::GaugeGen {
            site: 1,
            pref: 0.8,
            angle_at_site: Arc::new(vec![2.0 * core::f64::consts::PI / 3.0]),
            angle_background: 0.1,
        });
        let k = space.len();
        let mut acc = vec![C64::new(0.0, 0.0); k * k];
        op.for_each_entry(|i, j, v| acc[i * k + j] += v);
        let dense = op.to_dense().unwrap();
        for (a, b) in acc.iter().zip(dense.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn norm_estimate_close_for_diagonal() {
        let space = space_131();
        let k = space.len();
        let diag: Vec<f64> = (0..k).map(|i| (i % 5) as f64 - 2.0).collect();
        let op = KernelOperator::diagonal(&space, diag, OpTag::Observable).unwrap();
        let est = op.norm_estimate(80);
        assert!((est - 2.0).abs() < 0.2, "est {est}");
    }
}
