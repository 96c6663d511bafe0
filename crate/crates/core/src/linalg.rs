//! Small dense-free linear algebra on `Vec<f64>` / `Vec<C64>`: inner
//! products, norms, and a conjugate-gradient solve for Hermitian
//! positive-definite operators given as closures.

use crate::error::{EdError, Result};
use crate::math;
use crate::C64;
use alloc::vec;
use alloc::vec::Vec;

pub fn dot_c(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = C64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x.conj() * y;
    }
    acc
}

pub fn norm2_c(a: &[C64]) -> f64 {
    let mut acc = 0.0;
    for x in a {
        acc += x.norm_sqr();
    }
    math::sqrt(acc)
}

pub fn dot_r(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn norm2_r(a: &[f64]) -> f64 {
    math::sqrt(a.iter().map(|x| x * x).sum())
}

pub fn max_abs_r(a: &[f64]) -> f64 {
    let mut m = 0.0;
    for x in a {
        m = math::fmax(m, math::abs(*x));
    }
    m
}

pub fn max_abs_c(a: &[C64]) -> f64 {
    let mut m = 0.0;
    for x in a {
        m = math::fmax(m, x.norm());
    }
    m
}

pub fn scale_c(a: &mut [C64], s: C64) {
    for x in a {
        *x *= s;
    }
}

pub fn axpy_c(out: &mut [C64], s: C64, x: &[C64]) {
    for (o, v) in out.iter_mut().zip(x.iter()) {
        *o += s * v;
    }
}

/// Normalize to unit l2 norm; returns the previous norm.
pub fn normalize_c(a: &mut [C64]) -> f64 {
    let n = norm2_c(a);
    if n > 0.0 {
        let inv = C64::new(1.0 / n, 0.0);
        scale_c(a, inv);
    }
    n
}

/// Conjugate gradients for a Hermitian positive-definite operator.
///
/// `apply(x, out)` must compute `out = A x`. Stops when the residual norm
/// drops below `tol * ||b||`. Returns `(x, final_residual, iterations)`.
pub fn cg_hpd<F>(apply: F, b: &[C64], tol: f64, max_iter: usize) -> Result<(Vec<C64>, f64, usize)>
where
    F: Fn(&[C64], &mut [C64]),
{
    let n = b.len();
    let bnorm = norm2_c(b);
    if bnorm == 0.0 {
        return Ok((vec![C64::new(0.0, 0.0); n], 0.0, 0));
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![C64::new(0.0, 0.0); n];
    let mut rs_old = dot_c(&r, &r).re;
    let target = tol * bnorm;
    for it in 0..max_iter {
        let rnorm = math::sqrt(rs_old);
        if rnorm <= target {
            return Ok((x, rnorm, it));
        }
        apply(&p, &mut ap);
        let pap = dot_c(&p, &ap).re;
        if pap <= 0.0 {
            return Err(EdError::SolverFailure {
                residual: rnorm,
                iterations: it,
            });
        }
        let alpha = rs_old / pap;
        for i in 0..n {
            x[i] += C64::new(alpha, 0.0) * p[i];
            r[i] -= C64::new(alpha, 0.0) * ap[i];
        }
        let rs_new = dot_c(&r, &r).re;
        let beta = rs_new / rs_old;
        for i in 0..n {
            p[i] = r[i] + C64::new(beta, 0.0) * p[i];
        }
        rs_old = rs_new;
    }
    let rnorm = math::sqrt(rs_old);
    if rnorm <= target {
        Ok((x, rnorm, max_iter))
    } else {
        Err(EdError::SolverFailure {
            residual: rnorm,
            iterations: max_iter,
        })
    }
}

/// CG for a real symmetric positive-definite operator on `Vec<f64>`.
pub fn cg_spd<F>(apply: F, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, f64, usize)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm2_r(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], 0.0, 0));
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rs_old = dot_r(&r, &r);
    let target = tol * bnorm;
    for it in 0..max_iter {
        let rnorm = math::sqrt(rs_old);
        if rnorm <= target {
            return Ok((x, rnorm, it));
        }
        apply(&p, &mut ap);
        let pap = dot_r(&p, &ap);
        if pap <= 0.0 {
            return Err(EdError::SolverFailure {
                residual: rnorm,
                iterations: it,
            });
        }
        let alpha = rs_old / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot_r(&r, &r);
        let beta = rs_new / rs_old;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs_old = rs_new;
    }
    let rnorm = math::sqrt(rs_old);
    if rnorm <= target {
        Ok((x, rnorm, max_iter))
    } else {
        Err(EdError::SolverFailure {
            residual: rnorm,
            iterations: max_iter,
        })
    }
}

/// Gaussian elimination with partial pivoting for small dense real systems.
/// Used by the MaxEnt dual Newton step (a handful of multipliers).
pub fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if math::abs(a[row][col]) > math::abs(a[piv][col]) {
                piv = row;
            }
        }
        if math::abs(a[piv][col]) < 1e-300 {
            return Err(EdError::Numerical(alloc::format!(
                "singular {n}x{n} system in Newton step"
            )));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        for row in col + 1..n {
            let f = a[row][col] / d;
            if f != 0.0 {
                for k in col..n {
                    let v = a[col][k];
                    a[row][k] -= f * v;
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cg_solves_diagonal_complex() {
        let d = [2.0, 3.0, 5.0, 7.0];
        let apply = |x: &[C64], out: &mut [C64]| {
            for i in 0..4 {
                out[i] = C64::new(d[i], 0.0) * x[i];
            }
        };
        let b = vec![C64::new(1.0, -1.0); 4];
        let (x, res, _) = cg_hpd(apply, &b, 1e-14, 100).unwrap();
        assert!(res < 1e-12);
        for i in 0..4 {
            assert!((x[i] - b[i] / C64::new(d[i], 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn small_solver_roundtrip() {
        let a = vec![vec![4.0, 1.0], vec![1.0, 3.0]];
        let x = solve_small(a, vec![1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-12);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-12);
    }
}
