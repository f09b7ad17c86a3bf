//! Small dense linear algebra: pivoted LU, Hermitian tridiagonalization,
//! Sturm-sequence bisection and a Jacobi eigensolver for tiny blocks.
//!
//! Matrices are row-major `Vec`s with an explicit dimension.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result, C64};

/// LU factorization with partial pivoting of a square real matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    /// Factor the `n × n` row-major matrix `a`.
    pub fn new(mut a: Vec<f64>, n: usize) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::SizeMismatch { expected: n * n, got: a.len() });
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for i in k + 1..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                a[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        a[i * n + j] -= f * a[k * n + j];
                    }
                }
            }
        }
        Ok(Lu { n, lu: a, perm, sign, singular })
    }

    /// Sign and natural log of `|det|`; `ln_abs = -∞` when singular.
    pub fn log_det(&self) -> (f64, f64) {
        if self.singular {
            return (0.0, f64::NEG_INFINITY);
        }
        let mut s = self.sign;
        let mut l = 0.0;
        for k in 0..self.n {
            let d = self.lu[k * self.n + k];
            if d < 0.0 {
                s = -s;
            }
            l += d.abs().ln();
        }
        (s, l)
    }

    /// Determinant, or a scaled-determinant error when it leaves the f64 range.
    pub fn det(&self) -> Result<f64> {
        let (s, l) = self.log_det();
        if s == 0.0 {
            return Ok(0.0);
        }
        if l > 700.0 || l < -740.0 {
            return Err(Error::ScaledDeterminant { ln_abs: l });
        }
        Ok(s * l.exp())
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::SizeMismatch { expected: n, got: b.len() });
        }
        if self.singular {
            return Err(Error::Singular { cond: f64::INFINITY });
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        Ok(x)
    }

    /// Explicit inverse, row-major.
    pub fn inverse(&self) -> Result<Vec<f64>> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e)?;
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        Ok(inv)
    }
}

/// Matrix 1-norm (max absolute column sum).
pub fn norm1(a: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|j| (0..n).map(|i| a[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 1-norm condition number computed from the explicit inverse.
pub fn cond1(a: &[f64], n: usize) -> Result<f64> {
    let lu = Lu::new(a.to_vec(), n)?;
    if lu.singular {
        return Ok(f64::INFINITY);
    }
    let inv = lu.inverse()?;
    Ok(norm1(a, n) * norm1(&inv, n))
}

/// Determinant of a real square matrix.
pub fn det(a: Vec<f64>, n: usize) -> Result<f64> {
    Lu::new(a, n)?.det()
}

/// Reduce a Hermitian matrix to real symmetric tridiagonal form by Householder
/// reflections. Returns the diagonal `d` (length `n`) and off-diagonal
/// magnitudes `e` (length `n − 1`); the spectrum is unchanged.
pub fn hermitian_tridiagonalize(mut a: Vec<C64>, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.len() != n * n {
        return Err(Error::SizeMismatch { expected: n * n, got: a.len() });
    }
    let mut e = vec![0.0; n.saturating_sub(1)];
    let mut v = vec![C64::new(0.0, 0.0); n];
    let mut p = vec![C64::new(0.0, 0.0); n];
    for k in 0..n.saturating_sub(1) {
        let m = n - k - 1;
        let norm = (k + 1..n).map(|i| a[i * n + k].norm_sqr()).sum::<f64>().sqrt();
        if m == 1 || norm == 0.0 {
            e[k] = norm;
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        let phase = if x0.norm() == 0.0 { C64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        for i in 0..m {
            v[i] = a[(k + 1 + i) * n + k];
        }
        v[0] -= alpha;
        let vnorm2: f64 = v[..m].iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            e[k] = norm;
            continue;
        }
        let tau = 2.0 / vnorm2;
        // p = tau * A22 v
        for i in 0..m {
            let row = (k + 1 + i) * n + k + 1;
            let mut s = C64::new(0.0, 0.0);
            for j in 0..m {
                s += a[row + j] * v[j];
            }
            p[i] = s * tau;
        }
        let vp: C64 = v[..m].iter().zip(&p[..m]).map(|(vi, pi)| vi.conj() * pi).sum();
        let half = 0.5 * tau * vp.re;
        for i in 0..m {
            p[i] -= v[i] * half;
        }
        for i in 0..m {
            let row = (k + 1 + i) * n + k + 1;
            for j in 0..m {
                a[row + j] -= v[i] * p[j].conj() + p[i] * v[j].conj();
            }
        }
        e[k] = norm;
        for i in 0..m {
            a[(k + 1 + i) * n + k] = C64::new(0.0, 0.0);
            a[k * n + k + 1 + i] = C64::new(0.0, 0.0);
        }
    }
    let d = (0..n).map(|i| a[i * n + i].re).collect();
    Ok((d, e))
}

/// Number of eigenvalues strictly below `sigma` of the symmetric tridiagonal
/// matrix with diagonal `d` and off-diagonal `e`.
pub fn sturm_count(d: &[f64], e: &[f64], sigma: f64) -> usize {
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..d.len() {
        let off = if i == 0 { 0.0 } else { e[i - 1] * e[i - 1] / q };
        q = d[i] - sigma - off;
        if q == 0.0 {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gershgorin interval enclosing the spectrum of a symmetric tridiagonal matrix.
pub fn gershgorin(d: &[f64], e: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..d.len() {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i < e.len() { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    (lo, hi)
}

/// `idx`-th smallest eigenvalue (0-based) by bisection on any monotone
/// eigenvalue-count function `count(σ) = #{λ < σ}` inside `[lo, hi]`.
pub fn bisect_eigenvalue(mut lo: f64, mut hi: f64, idx: usize, count: impl Fn(f64) -> usize) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count(mid) > idx {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest and largest eigenvalue of a symmetric tridiagonal matrix.
pub fn tridiagonal_extremes(d: &[f64], e: &[f64]) -> (f64, f64) {
    let (lo, hi) = gershgorin(d, e);
    let n = d.len();
    let pad = 1e-12 * (hi.abs() + lo.abs() + 1.0);
    let cnt = |s: f64| sturm_count(d, e, s);
    let min = bisect_eigenvalue(lo - pad, hi + pad, 0, cnt);
    let max = bisect_eigenvalue(lo - pad, hi + pad, n - 1, cnt);
    (min, max)
}

/// Eigenvalues of a small Hermitian matrix, ascending, via cyclic Jacobi on the
/// real 2n × 2n embedding `[[Re, −Im], [Im, Re]]`.
pub fn hermitian_eigenvalues(a: &[C64], n: usize) -> Vec<f64> {
    let m = 2 * n;
    let mut s = vec![0.0; m * m];
    for i in 0..n {
        for j in 0..n {
            let z = a[i * n + j];
            s[i * m + j] = z.re;
            s[(i + n) * m + j + n] = z.re;
            s[(i + n) * m + j] = z.im;
            s[i * m + j + n] = -z.im;
        }
    }
    let mut ev = symmetric_jacobi(s, m);
    ev.sort_by(|x, y| x.total_cmp(y));
    // every eigenvalue appears twice in the embedding
    ev.into_iter().step_by(2).collect()
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi (unsorted).
pub fn symmetric_jacobi(mut s: Vec<f64>, m: usize) -> Vec<f64> {
    for _sweep in 0..60 {
        let off: f64 = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| s[i * m + j] * s[i * m + j])
            .sum();
        let diag: f64 = (0..m).map(|i| s[i * m + i] * s[i * m + i]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = s[p * m + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (s[q * m + q] - s[p * m + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..m {
                    let akp = s[k * m + p];
                    let akq = s[k * m + q];
                    s[k * m + p] = c * akp - sn * akq;
                    s[k * m + q] = sn * akp + c * akq;
                }
                for k in 0..m {
                    let apk = s[p * m + k];
                    let aqk = s[q * m + k];
                    s[p * m + k] = c * apk - sn * aqk;
                    s[q * m + k] = sn * apk + c * aqk;
                }
            }
        }
    }
    (0..m).map(|i| s[i * m + i]).collect()
}
