//! Gauss–Legendre rules and the domain maps used for Nyström discretization.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
///
/// Newton iteration on the three-term recurrence; accurate to roughly machine
/// precision for the sizes used here (up to a few thousand nodes).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped affinely to `[a, b]`.
pub fn gauss_legendre_on(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (t, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    (t.iter().map(|t| c + h * t).collect(), w.iter().map(|w| h * w).collect())
}

/// Composite Gauss–Legendre rule: `pieces` equal panels of `n` nodes on `[a, b]`.
pub fn composite_gauss_legendre(a: f64, b: f64, pieces: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (t, w) = gauss_legendre(n);
    let mut xs = Vec::with_capacity(pieces * n);
    let mut ws = Vec::with_capacity(pieces * n);
    let step = (b - a) / pieces as f64;
    for p in 0..pieces {
        let lo = a + step * p as f64;
        let h = 0.5 * step;
        for (ti, wi) in t.iter().zip(&w) {
            xs.push(lo + h * (ti + 1.0));
            ws.push(h * wi);
        }
    }
    (xs, ws)
}

/// Integration domain of a [`QuadratureRule`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainMap {
    /// Finite interval `[a, b]`, affine map.
    Interval {
        /// Left end.
        a: f64,
        /// Right end.
        b: f64,
    },
    /// `(x, ∞)` via `t ↦ x + L(1 − t)/(1 + t)`.
    SemiInfinite {
        /// Left end.
        x: f64,
        /// Map scale `L`.
        scale: f64,
    },
}

/// Nodes and strictly positive weights with the map that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    /// Nodes, strictly increasing.
    pub nodes: Vec<f64>,
    /// Weights, strictly positive.
    pub weights: Vec<f64>,
    /// Domain descriptor.
    pub map: DomainMap,
}

impl QuadratureRule {
    /// Build an `n`-node Gauss–Legendre rule on `map` (`n ≥ 4`).
    pub fn new(map: DomainMap, n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::domain("quadrature rules need at least 4 nodes"));
        }
        let (t, w) = gauss_legendre(n);
        let (nodes, weights) = match map {
            DomainMap::Interval { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(Error::domain("interval must satisfy a < b"));
                }
                let h = 0.5 * (b - a);
                let c = 0.5 * (b + a);
                (t.iter().map(|t| c + h * t).collect(), w.iter().map(|w| h * w).collect())
            }
            DomainMap::SemiInfinite { x, scale } => {
                if !(x.is_finite() && scale > 0.0 && scale.is_finite()) {
                    return Err(Error::domain("semi-infinite map needs finite x and L > 0"));
                }
                // reversed so nodes ascend
                let mut nodes = Vec::with_capacity(n);
                let mut weights = Vec::with_capacity(n);
                for (ti, wi) in t.iter().zip(&w).rev() {
                    let d = 1.0 + ti;
                    nodes.push(x + scale * (1.0 - ti) / d);
                    weights.push(wi * 2.0 * scale / (d * d));
                }
                (nodes, weights)
            }
        };
        Ok(QuadratureRule { nodes, weights, map })
    }

    /// Gauss–Legendre on `[a, b]`.
    pub fn interval(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::new(DomainMap::Interval { a, b }, n)
    }

    /// Rational map onto `(x, ∞)` with scale `L`.
    pub fn semi_infinite(x: f64, scale: f64, n: usize) -> Result<Self> {
        Self::new(DomainMap::SemiInfinite { x, scale }, n)
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Always false for a constructed rule; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_i f(x_i)`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}
