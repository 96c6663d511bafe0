//! Dense Hermitian eigendecomposition and propagation for small
//! configuration spaces.
//!
//! A complex Hermitian `H = X + iY` is embedded as the real symmetric
//! `[[X, -Y], [Y, X]]` and diagonalized with cyclic Jacobi rotations; each
//! complex eigenvector appears twice in the embedding (as `(x; y)` and
//! `(-y; x)`), so the complex spectrum is recovered by orthonormal
//! filtering. Used for eigenstate initial conditions, the matrix-exponential
//! propagation oracle, and physical-subspace spectra at desk scale.

use crate::error::{EdError, Result};
use crate::linalg;
use crate::math;
use crate::C64;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Eigendecomposition of a real symmetric matrix (row-major, n x n) by
/// cyclic Jacobi. Returns eigenvalues ascending and eigenvectors as rows.
pub fn eigh_real(n: usize, a_in: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if a_in.len() != n * n {
        return Err(EdError::LengthMismatch { expected: n * n, got: a_in.len() });
    }
    let mut a = a_in.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let max_sweeps = 64;
    for _sweep in 0..max_sweeps {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if math::sqrt(2.0 * off) < 1e-14 * (1.0 + linalg::norm2_r(&a)) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if math::abs(apq) < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + math::sqrt(1.0 + tau * tau))
                } else {
                    -1.0 / (-tau + math::sqrt(1.0 + tau * tau))
                };
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = t * c;
                // A <- J^T A J on rows/columns p, q
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                // accumulate eigenvectors (rows of v)
                for k in 0..n {
                    let vpk = v[p * n + k];
                    let vqk = v[q * n + k];
                    v[p * n + k] = c * vpk - s * vqk;
                    v[q * n + k] = s * vpk + c * vqk;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[i * n + i]
            .partial_cmp(&a[j * n + j])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let vals: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let vecs: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| v[i * n..(i + 1) * n].to_vec())
        .collect();
    Ok((vals, vecs))
}

/// Eigendecomposition of a complex Hermitian matrix (row-major, k x k).
/// Returns eigenvalues ascending and orthonormal eigenvectors.
pub fn eigh_hermitian(k: usize, h: &[C64]) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    if h.len() != k * k {
        return Err(EdError::LengthMismatch { expected: k * k, got: h.len() });
    }
    let n = 2 * k;
    let mut m = vec![0.0; n * n];
    for i in 0..k {
        for j in 0..k {
            let z = h[i * k + j];
            m[i * n + j] = z.re;
            m[i * n + (k + j)] = -z.im;
            m[(k + i) * n + j] = z.im;
            m[(k + i) * n + (k + j)] = z.re;
        }
    }
    let (vals, vecs) = eigh_real(n, &m)?;
    // Each complex eigenvector appears twice in the embedding; keep k
    // independent ones by Gram-Schmidt within (numerically) equal
    // eigenvalues.
    let mut out_vals: Vec<f64> = Vec::with_capacity(k);
    let mut out_vecs: Vec<Vec<C64>> = Vec::with_capacity(k);
    for (idx, val) in vals.iter().enumerate() {
        if out_vecs.len() == k {
            break;
        }
        let r = &vecs[idx];
        let mut cv: Vec<C64> = (0..k).map(|i| C64::new(r[i], r[k + i])).collect();
        for (pv, pval) in out_vecs.iter().zip(out_vals.iter()) {
            if math::abs(pval - val) < 1e-8 * (1.0 + math::abs(*val)) {
                let overlap = linalg::dot_c(pv, &cv);
                for (x, y) in cv.iter_mut().zip(pv.iter()) {
                    *x -= overlap * y;
                }
            }
        }
        let nrm = linalg::norm2_c(&cv);
        if nrm < 1e-7 {
            continue;
        }
        let inv = C64::new(1.0 / nrm, 0.0);
        cv.iter_mut().for_each(|x| *x *= inv);
        out_vals.push(*val);
        out_vecs.push(cv);
    }
    if out_vecs.len() != k {
        return Err(EdError::Numerical(format!(
            "complex eigenvector extraction found {} of {} vectors",
            out_vecs.len(),
            k
        )));
    }
    Ok((out_vals, out_vecs))
}

/// Apply `exp(-i H t / hbar)` to `psi` through the dense eigendecomposition.
pub fn expm_apply(k: usize, h: &[C64], psi: &[C64], t: f64, hbar: f64) -> Result<Vec<C64>> {
    let (vals, vecs) = eigh_hermitian(k, h)?;
    let mut out = vec![C64::new(0.0, 0.0); k];
    for (val, vec_) in vals.iter().zip(vecs.iter()) {
        let amp = linalg::dot_c(vec_, psi);
        let phase = math::cis(-val * t / hbar);
        for (o, v) in out.iter_mut().zip(vec_.iter()) {
            *o += phase * amp * v;
        }
    }
    Ok(out)
}
