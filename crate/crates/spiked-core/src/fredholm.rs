//! Nyström discretization of integral operators, Fredholm determinants,
//! resolvents and 2 × 2 block determinants.
//!
//! A kernel `K` on a rule with nodes `x_i` and weights `w_i` becomes the matrix
//! `√w_i K(x_i, x_j) √w_j`, so `det(I − K)` and resolvents reduce to dense
//! linear algebra.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{cond1, Lu};
use crate::quad::QuadratureRule;
use crate::{Error, Result};

/// Resolvent systems with a larger 1-norm condition number are rejected.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Weighted Nyström matrix of a kernel on a quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedOperator {
    /// Row-major `n × n` matrix `√w_i K(x_i, x_j) √w_j`.
    pub matrix: Vec<f64>,
    /// Rule the kernel was sampled on.
    pub rule: QuadratureRule,
    /// Free-form kernel identity tag.
    pub tag: String,
}

impl DiscretizedOperator {
    /// Dimension (number of nodes).
    pub fn dim(&self) -> usize {
        self.rule.len()
    }
}

/// Sample `kernel` on `rule` with symmetric weighting.
pub fn discretize(
    kernel: impl Fn(f64, f64) -> f64,
    rule: &QuadratureRule,
    tag: &str,
) -> Result<DiscretizedOperator> {
    let n = rule.len();
    let sw: Vec<f64> = rule.weights.iter().map(|w| w.sqrt()).collect();
    let mut matrix = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let k = kernel(rule.nodes[i], rule.nodes[j]);
            if !k.is_finite() {
                return Err(Error::KernelEval { i, j });
            }
            matrix[i * n + j] = sw[i] * k * sw[j];
        }
    }
    Ok(DiscretizedOperator { matrix, rule: rule.clone(), tag: tag.into() })
}

fn identity_minus(m: &[f64], n: usize) -> Vec<f64> {
    let mut a: Vec<f64> = m.iter().map(|v| -v).collect();
    for i in 0..n {
        a[i * n + i] += 1.0;
    }
    a
}

/// `det(I − M)` for a square row-major matrix `M`.
pub fn det_identity_minus(m: &[f64], n: usize) -> Result<f64> {
    Lu::new(identity_minus(m, n), n)?.det()
}

/// Fredholm determinant `det(I − K)` of a discretized operator.
pub fn fredholm_det(op: &DiscretizedOperator) -> Result<f64> {
    det_identity_minus(&op.matrix, op.dim())
}

/// Values of `(I − K)^{-1} f` at the rule nodes.
pub fn resolvent_apply(op: &DiscretizedOperator, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let values: Vec<f64> = op.rule.nodes.iter().map(|&x| f(x)).collect();
    resolvent_apply_values(op, &values)
}

/// As [`resolvent_apply`], with `f` already sampled at the nodes.
pub fn resolvent_apply_values(op: &DiscretizedOperator, f: &[f64]) -> Result<Vec<f64>> {
    let n = op.dim();
    if f.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: f.len() });
    }
    let a = identity_minus(&op.matrix, n);
    let cond = cond1(&a, n)?;
    if !(cond <= SINGULAR_CONDITION) {
        return Err(Error::Singular { cond });
    }
    let sw: Vec<f64> = op.rule.weights.iter().map(|w| w.sqrt()).collect();
    let rhs: Vec<f64> = f.iter().zip(&sw).map(|(v, s)| v * s).collect();
    let y = Lu::new(a, n)?.solve(&rhs)?;
    Ok(y.iter().zip(&sw).map(|(v, s)| v / s).collect())
}

/// `Σ w_i f_i g(x_i)`.
pub fn inner_product(rule: &QuadratureRule, f: &[f64], g: impl Fn(f64) -> f64) -> Result<f64> {
    if f.len() != rule.len() {
        return Err(Error::SizeMismatch { expected: rule.len(), got: f.len() });
    }
    Ok(rule.nodes.iter().zip(&rule.weights).zip(f).map(|((&x, &w), &fi)| w * fi * g(x)).sum())
}

/// Dense rectangular block, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    /// Row count.
    pub rows: usize,
    /// Column count.
    pub cols: usize,
    /// Entries, row-major.
    pub data: Vec<f64>,
}

impl Block {
    /// Block from raw parts; `data.len()` must equal `rows * cols`.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::SizeMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Block { rows, cols, data })
    }

    /// All-zero block.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Block { rows, cols, data: vec![0.0; rows * cols] }
    }
}

impl From<&DiscretizedOperator> for Block {
    fn from(op: &DiscretizedOperator) -> Self {
        Block { rows: op.dim(), cols: op.dim(), data: op.matrix.clone() }
    }
}

/// `det(I − [[K11, K12], [K21, K22]])` for conformable blocks.
pub fn block_det_2x2(k11: &Block, k12: &Block, k21: &Block, k22: &Block) -> Result<f64> {
    let (n1, n2) = (k11.rows, k22.rows);
    let conform = k11.cols == n1
        && k22.cols == n2
        && k12.rows == n1
        && k12.cols == n2
        && k21.rows == n2
        && k21.cols == n1;
    if !conform {
        return Err(Error::SizeMismatch { expected: n1 + n2, got: k12.cols + k21.rows });
    }
    let n = n1 + n2;
    let mut m = vec![0.0; n * n];
    for i in 0..n1 {
        m[i * n..i * n + n1].copy_from_slice(&k11.data[i * n1..(i + 1) * n1]);
        m[i * n + n1..(i + 1) * n].copy_from_slice(&k12.data[i * n2..(i + 1) * n2]);
    }
    for i in 0..n2 {
        let r = (n1 + i) * n;
        m[r..r + n1].copy_from_slice(&k21.data[i * n1..(i + 1) * n1]);
        m[r + n1..r + n].copy_from_slice(&k22.data[i * n2..(i + 1) * n2]);
    }
    det_identity_minus(&m, n)
}
