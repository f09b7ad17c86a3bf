//! Error type shared by every module.

use alloc::string::String;

/// Result alias for this crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes of the numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument outside the documented domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// An integration contour violating its geometric invariants.
    #[error("contour error: {0}")]
    Contour(String),
    /// A kernel returned a non-finite value at node pair `(i, j)`.
    #[error("kernel evaluation failed at nodes ({i}, {j})")]
    KernelEval {
        /// Row node.
        i: usize,
        /// Column node.
        j: usize,
    },
    /// Determinant magnitude outside the representable range.
    #[error("determinant out of range: ln|det| = {ln_abs}")]
    ScaledDeterminant {
        /// Natural log of the determinant magnitude.
        ln_abs: f64,
    },
    /// Linear system too close to singular.
    #[error("near-singular system, condition estimate {cond:e}")]
    Singular {
        /// Estimated 1-norm condition number.
        cond: f64,
    },
    /// Result failed a sanity bound (e.g. a CDF overshooting [0, 1]).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Vector or block sizes disagree.
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch {
        /// Expected length.
        expected: usize,
        /// Supplied length.
        got: usize,
    },
    /// Gaussian branch requested for a spike that is not beyond threshold.
    #[error("threshold violation: {0}")]
    Threshold(String),
    /// Spike inside the closed threshold interval where no separated limit exists.
    #[error("spike {ell} is not separated from the bulk")]
    NotSeparated {
        /// Offending spike.
        ell: f64,
    },
    /// Problem size above the desk-scale guard of the oracle.
    #[error("size guard exceeded: {0}")]
    Guard(String),
    /// Quadrature did not settle under refinement.
    #[error("quadrature did not converge: change {delta:e} under doubling")]
    Convergence {
        /// Change observed under doubling.
        delta: f64,
    },
    /// Exponent too large even after log scaling.
    #[error("magnitude overflow: exponent {exponent}")]
    Overflow {
        /// Natural-log exponent that overflowed.
        exponent: f64,
    },
    /// Operation invoked for a regime it does not cover.
    #[error("regime mismatch: {0}")]
    Regime(String),
    /// Paired inputs that do not come from the same replicates.
    #[error("unpaired samples: {0}")]
    Unpaired(String),
    /// Eigensolver failure in one replicate.
    #[error("eigensolver failed in replicate {0}")]
    Eigen(usize),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
