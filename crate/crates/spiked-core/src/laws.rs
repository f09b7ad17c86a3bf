//! Limiting laws of the extreme eigenvalues and the maps that put sample
//! eigenvalues on their scale.
//!
//! * `F_k`: generalized Tracy–Widom law, `det(I − A_x)` times a `k × k`
//!   correction built from `s^(m)` and `t^(n)`; `F_0` is the GUE Tracy–Widom law.
//! * `G_k`: law of the largest eigenvalue of a `k × k` GUE matrix with density
//!   proportional to `e^{−tr H²/2}`; `G_1` is the standard normal CDF.
//!
//! Spikes at `1 ± 1/γ` on the `ℓ` scale are critical (Tracy–Widom branch with
//! `k` = multiplicity); spikes beyond are separated (Gaussian branch).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::fredholm::{discretize, inner_product, resolvent_apply_values};
use crate::linalg::Lu;
use crate::quad::{gauss_legendre_on, QuadratureRule};
use crate::special::{airy, airy_kernel_from, factorial, hermite_he, s_batch, t_batch};
use crate::{Error, Result};

/// Default Nyström node count for `F_k`.
pub const DEFAULT_NODES: usize = 64;
/// Scale `L` of the map onto `(x, ∞)`.
pub const DEFAULT_MAP_SCALE: f64 = 10.0;
/// Below this argument `F_k` is reported as 0 with a tail flag.
pub const F_LEFT_CAP: f64 = -10.0;
/// Largest supported `k` for either family.
pub const MAX_K: usize = 8;
/// Lower truncation of the `G_k` integrals.
pub const G_LOWER: f64 = -8.0;
/// Gauss–Legendre nodes used per `G_k` Gram entry.
pub const G_NODES: usize = 96;

/// Spike value with multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spike {
    /// Population eigenvalue `ℓ > 0`.
    pub value: f64,
    /// Number of repeats.
    pub multiplicity: usize,
}

impl Spike {
    /// Convenience constructor.
    pub fn new(value: f64, multiplicity: usize) -> Self {
        Spike { value, multiplicity }
    }
}

/// Population model: `N × M` data, covariance `diag(spikes, 1, …, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikedModel {
    /// Dimension `N`.
    pub n: usize,
    /// Sample count `M`.
    pub m: usize,
    /// `γ = √(M/N) > 1`.
    pub gamma: f64,
    /// Spikes, sorted by value descending, equal values merged.
    pub spikes: Vec<Spike>,
}

impl SpikedModel {
    /// Validate and canonicalize.
    pub fn new(n: usize, m: usize, spikes: Vec<Spike>) -> Result<Self> {
        if n == 0 || m <= n {
            return Err(Error::domain(format!("need M > N >= 1, got N = {n}, M = {m}")));
        }
        let mut merged: Vec<Spike> = Vec::new();
        let mut sorted = spikes;
        sorted.retain(|s| s.multiplicity > 0);
        for s in &sorted {
            if !(s.value > 0.0 && s.value.is_finite()) {
                return Err(Error::domain(format!("spike values must be positive, got {}", s.value)));
            }
        }
        sorted.sort_by(|a, b| b.value.total_cmp(&a.value));
        for s in sorted {
            match merged.last_mut() {
                Some(last) if last.value == s.value => last.multiplicity += s.multiplicity,
                _ => merged.push(s),
            }
        }
        let total: usize = merged.iter().map(|s| s.multiplicity).sum();
        if total > n {
            return Err(Error::domain(format!("spike multiplicities sum to {total} > N = {n}")));
        }
        Ok(SpikedModel { n, m, gamma: (m as f64 / n as f64).sqrt(), spikes: merged })
    }

    /// Model with `M = ⌈γ² N⌉`.
    pub fn with_gamma(n: usize, gamma: f64, spikes: Vec<Spike>) -> Result<Self> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(Error::domain("gamma must lie in (1, ∞)"));
        }
        let m = (gamma * gamma * n as f64 - 1e-9).ceil() as usize;
        Self::new(n, m, spikes)
    }

    /// Unspiked model.
    pub fn null(n: usize, m: usize) -> Result<Self> {
        Self::new(n, m, Vec::new())
    }

    /// Row variances `ℓ_1 ≥ … ` followed by the unit bulk, length `N`.
    pub fn row_variances(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n);
        for s in &self.spikes {
            v.extend(core::iter::repeat_n(s.value, s.multiplicity));
        }
        v.resize(self.n, 1.0);
        v
    }

    /// Number of spiked rows `r` (rows placed before the bulk).
    pub fn spiked_rows(&self) -> usize {
        self.spikes.iter().map(|s| s.multiplicity).sum()
    }

    /// `π_i = 1/ℓ_i` for all `N` rows.
    pub fn pis(&self) -> Vec<f64> {
        self.row_variances().iter().map(|l| 1.0 / l).collect()
    }

    /// Smallest population eigenvalue with its multiplicity (bulk counts as 1).
    pub fn smallest(&self) -> Spike {
        let bulk = self.n - self.spiked_rows();
        let low = self.spikes.iter().rev().find(|s| s.value < 1.0).copied();
        match low {
            Some(s) => s,
            None => match self.spikes.last() {
                Some(s) if bulk == 0 => *s,
                _ => Spike::new(1.0, bulk),
            },
        }
    }

    /// Largest population eigenvalue with its multiplicity (bulk counts as 1).
    pub fn largest(&self) -> Spike {
        let bulk = self.n - self.spiked_rows();
        match self.spikes.first() {
            Some(s) if s.value > 1.0 || bulk == 0 => *s,
            _ => Spike::new(1.0, bulk),
        }
    }
}

/// Which extreme eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    /// `λ_min`.
    Min,
    /// `λ_max`.
    Max,
}

/// Law family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// Generalized Tracy–Widom `F_k`.
    TracyWidomGeneralized,
    /// GUE-edge law `G_k`.
    GueEdge,
}

/// Limiting law with its centering `μ`, scale `ν` and exponent `α`:
/// `λ̃_min = M^α (μ − λ)/ν`, `λ̃_max = M^α (λ − μ)/ν`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LawSpec {
    /// Family.
    pub family: Family,
    /// Index `k`.
    pub k: usize,
    /// Side.
    pub side: Side,
    /// Centering.
    pub mu: f64,
    /// Scale, positive.
    pub nu: f64,
    /// `2/3` for Tracy–Widom, `1/2` for Gaussian.
    pub alpha: f64,
}

impl LawSpec {
    /// CDF of the law at `x`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        match self.family {
            Family::TracyWidomGeneralized => f_k(self.k, x, DEFAULT_NODES),
            Family::GueEdge => g_k(self.k, x),
        }
    }

    /// Scaled value of a raw eigenvalue for sample size `m`.
    pub fn scale(&self, lambda: f64, m: usize) -> f64 {
        let f = (m as f64).powf(self.alpha) / self.nu;
        match self.side {
            Side::Min => f * (self.mu - lambda),
            Side::Max => f * (lambda - self.mu),
        }
    }

    /// Inverse of [`LawSpec::scale`].
    pub fn unscale(&self, x: f64, m: usize) -> f64 {
        let d = x * self.nu / (m as f64).powf(self.alpha);
        match self.side {
            Side::Min => self.mu - d,
            Side::Max => self.mu + d,
        }
    }
}

/// Fluctuation branch of one side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Branch {
    /// Soft edge, `F_k` with `k` critical spikes.
    TracyWidom {
        /// Number of spikes exactly at threshold.
        k: usize,
    },
    /// Separated spike `ℓ` of multiplicity `k`, `G_k`.
    Gaussian {
        /// Multiplicity.
        k: usize,
        /// Spike value.
        ell: f64,
    },
}

/// Regime classification of both sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regime {
    /// Multiplicity of the smallest spike when at or below `1 − 1/γ`, else 0.
    pub k1: usize,
    /// Multiplicity of the largest spike when at or above `1 + 1/γ`, else 0.
    pub k2: usize,
    /// Branch of `λ_min`.
    pub min: Branch,
    /// Branch of `λ_max`.
    pub max: Branch,
}

/// Marčenko–Pastur edges `((1 − 1/γ)², (1 + 1/γ)²)`.
pub fn mp_edges(gamma: f64) -> Result<(f64, f64)> {
    if !(gamma > 1.0) {
        return Err(Error::domain("mp_edges requires gamma > 1"));
    }
    let g = 1.0 / gamma;
    Ok(((1.0 - g) * (1.0 - g), (1.0 + g) * (1.0 + g)))
}

const TIE: f64 = 1e-12;

/// Classify both sides of `model`.
pub fn classify(model: &SpikedModel) -> Regime {
    let g = 1.0 / model.gamma;
    let lo = model.smallest();
    let hi = model.largest();
    let (k1, min) = if (lo.value - (1.0 - g)).abs() <= TIE {
        (lo.multiplicity, Branch::TracyWidom { k: lo.multiplicity })
    } else if lo.value < 1.0 - g {
        (lo.multiplicity, Branch::Gaussian { k: lo.multiplicity, ell: lo.value })
    } else {
        (0, Branch::TracyWidom { k: 0 })
    };
    let (k2, max) = if (hi.value - (1.0 + g)).abs() <= TIE {
        (hi.multiplicity, Branch::TracyWidom { k: hi.multiplicity })
    } else if hi.value > 1.0 + g {
        (hi.multiplicity, Branch::Gaussian { k: hi.multiplicity, ell: hi.value })
    } else {
        (0, Branch::TracyWidom { k: 0 })
    };
    Regime { k1, k2, min, max }
}

/// Almost-sure limit `ℓ + ℓγ⁻²/(ℓ − 1)` of the eigenvalue pulled out by a separated spike.
pub fn almost_sure_limit(ell: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 1.0) {
        return Err(Error::domain("gamma must exceed 1"));
    }
    let g = 1.0 / gamma;
    if ell >= 1.0 - g && ell <= 1.0 + g {
        return Err(Error::NotSeparated { ell });
    }
    Ok(ell + ell * g * g / (ell - 1.0))
}

/// Gaussian-branch constants `(μ, ν)` for a separated spike on `side`.
pub fn gaussian_scaling(ell: f64, gamma: f64, side: Side) -> Result<(f64, f64)> {
    let g2 = 1.0 / (gamma * gamma);
    let nu2 = match side {
        Side::Min => ell * ell - ell * ell * g2 / ((1.0 - ell) * (1.0 - ell)),
        Side::Max => ell * ell * (1.0 - g2 / ((ell - 1.0) * (ell - 1.0))),
    };
    let beyond = match side {
        Side::Min => ell < 1.0,
        Side::Max => ell > 1.0,
    };
    if !(nu2 > 0.0) || !beyond {
        return Err(Error::Threshold(format!("spike {ell} is not beyond the {side:?} threshold")));
    }
    Ok((ell + ell * g2 / (ell - 1.0), nu2.sqrt()))
}

/// Law and scaling of `side` for `model`.
pub fn scaling_for(model: &SpikedModel, side: Side) -> Result<LawSpec> {
    let regime = classify(model);
    let gamma = model.gamma;
    let branch = match side {
        Side::Min => regime.min,
        Side::Max => regime.max,
    };
    Ok(match branch {
        Branch::TracyWidom { k } => {
            let (mu, nu) = match side {
                Side::Min => ((1.0 - 1.0 / gamma).powi(2), (gamma - 1.0).powf(4.0 / 3.0) / gamma),
                Side::Max => ((1.0 + 1.0 / gamma).powi(2), (gamma + 1.0).powf(4.0 / 3.0) / gamma),
            };
            LawSpec { family: Family::TracyWidomGeneralized, k, side, mu, nu, alpha: 2.0 / 3.0 }
        }
        Branch::Gaussian { k, ell } => {
            let (mu, nu) = gaussian_scaling(ell, gamma, side)?;
            LawSpec { family: Family::GueEdge, k, side, mu, nu, alpha: 0.5 }
        }
    })
}

/// `F_k(x)` with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkValue {
    /// Value after clamping tiny overshoots into `[0, 1]`.
    pub value: f64,
    /// Unclamped determinant.
    pub raw: f64,
    /// True when `x` is below the left cap and the value was set to 0.
    pub tail: bool,
}

fn check_k(k: usize) -> Result<()> {
    if k > MAX_K {
        return Err(Error::domain(format!("k = {k} exceeds the supported maximum {MAX_K}")));
    }
    Ok(())
}

fn clamp_probability(raw: f64) -> Result<f64> {
    if !raw.is_finite() {
        return Err(Error::Numerical(format!("non-finite probability {raw}")));
    }
    if raw < -1e-8 || raw > 1.0 + 1e-8 {
        return Err(Error::Numerical(format!("probability {raw} outside [0, 1]")));
    }
    Ok(raw.clamp(0.0, 1.0))
}

/// `F_k(x)` via the bordered determinant
/// `det[[I − K, B], [C, I_k]] = det(I − K) det(I − C (I − K)^{-1} B)` with
/// `B_{im} = √w_i s^(m)(x_i)`, `C_{ni} = √w_i t^(n)(x_i)`.
pub fn f_k_eval(k: usize, x: f64, nodes: usize) -> Result<FkValue> {
    check_k(k)?;
    if !x.is_finite() {
        return Err(Error::domain("F_k: non-finite argument"));
    }
    if x < F_LEFT_CAP {
        return Ok(FkValue { value: 0.0, raw: 0.0, tail: true });
    }
    let rule = QuadratureRule::semi_infinite(x, DEFAULT_MAP_SCALE, nodes)?;
    let n = rule.len();
    let pairs: Vec<(f64, f64)> = rule.nodes.iter().map(|&u| airy(u)).collect();
    let sw: Vec<f64> = rule.weights.iter().map(|w| w.sqrt()).collect();
    let dim = n + k;
    let mut a = vec![0.0; dim * dim];
    for i in 0..n {
        for j in 0..n {
            let kij = airy_kernel_from(rule.nodes[i], pairs[i], rule.nodes[j], pairs[j]);
            a[i * dim + j] = -sw[i] * kij * sw[j];
        }
        a[i * dim + i] += 1.0;
    }
    if k > 0 {
        for i in 0..n {
            let s = s_batch(k, rule.nodes[i]);
            let t = t_batch(k, rule.nodes[i]);
            for m in 0..k {
                a[i * dim + n + m] = sw[i] * s[m];
                a[(n + m) * dim + i] = sw[i] * t[m];
            }
        }
        for m in 0..k {
            a[(n + m) * dim + n + m] = 1.0;
        }
    }
    let raw = Lu::new(a, dim)?.det()?;
    Ok(FkValue { value: clamp_probability(raw)?, raw, tail: false })
}

/// `F_k(x)` (bordered-determinant route).
pub fn f_k(k: usize, x: f64, nodes: usize) -> Result<f64> {
    Ok(f_k_eval(k, x, nodes)?.value)
}

/// `F_k(x)` via the resolvent: `det(I − A_x) · det(δ_mn − ⟨(I − A_x)^{-1}s^(m), t^(n)⟩)`.
///
/// Independent of [`f_k`] except for the shared kernel samples; fails with a
/// singularity error deep in the left tail where `I − A_x` degenerates.
pub fn f_k_resolvent(k: usize, x: f64, nodes: usize) -> Result<f64> {
    check_k(k)?;
    if x < F_LEFT_CAP {
        return Ok(0.0);
    }
    let rule = QuadratureRule::semi_infinite(x, DEFAULT_MAP_SCALE, nodes)?;
    let op = discretize(crate::special::airy_kernel, &rule, "airy")?;
    let d0 = crate::fredholm::fredholm_det(&op)?;
    if k == 0 {
        return clamp_probability(d0);
    }
    let s: Vec<Vec<f64>> = rule.nodes.iter().map(|&u| s_batch(k, u)).collect();
    let mut corr = vec![0.0; k * k];
    for m in 0..k {
        let sm: Vec<f64> = s.iter().map(|row| row[m]).collect();
        let r = resolvent_apply_values(&op, &sm)?;
        for nn in 0..k {
            let ip = inner_product(&rule, &r, |v| t_batch(nn + 1, v)[nn])?;
            corr[m * k + nn] = if m == nn { 1.0 } else { 0.0 } - ip;
        }
    }
    clamp_probability(d0 * Lu::new(corr, k)?.det()?)
}

/// `G_k(x) = det(∫_{−∞}^x He_i He_j e^{−t²/2} dt)_{i,j<k} / ∏_{j<k} √(2π) j!`.
pub fn g_k(k: usize, x: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::domain("G_k requires k >= 1"));
    }
    check_k(k)?;
    if !x.is_finite() {
        return Err(Error::domain("G_k: non-finite argument"));
    }
    if x <= G_LOWER {
        return Ok(0.0);
    }
    let top = x.min(-G_LOWER + 2.0);
    let (t, w) = gauss_legendre_on(G_LOWER, top, G_NODES);
    let norm: Vec<f64> = (0..k).map(|j| ((2.0 * core::f64::consts::PI).sqrt() * factorial(j)).sqrt()).collect();
    let mut gram = vec![0.0; k * k];
    for (ti, wi) in t.iter().zip(&w) {
        let he: Vec<f64> = (0..k).map(|j| hermite_he(j, *ti)).collect();
        let g = wi * (-0.5 * ti * ti).exp();
        for i in 0..k {
            for j in 0..k {
                gram[i * k + j] += g * he[i] * he[j] / (norm[i] * norm[j]);
            }
        }
    }
    clamp_probability(Lu::new(gram, k)?.det()?)
}

/// Tabulated CDF with linear interpolation and bisection inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct LawTable {
    /// Grid, ascending and equally spaced.
    pub xs: Vec<f64>,
    /// CDF values, made nondecreasing.
    pub values: Vec<f64>,
}

impl LawTable {
    /// Tabulate `law` on `[lo, hi]` with spacing `step`.
    pub fn tabulate(law: &LawSpec, lo: f64, hi: f64, step: f64) -> Result<Self> {
        let count = ((hi - lo) / step).round() as usize + 1;
        let xs: Vec<f64> = (0..count).map(|i| lo + step * i as f64).collect();
        let values = xs.iter().map(|&x| law.cdf(x)).collect::<Result<Vec<_>>>()?;
        Ok(Self::from_values(xs, values))
    }

    /// Table from precomputed values; a running maximum removes roundoff dips.
    pub fn from_values(xs: Vec<f64>, mut values: Vec<f64>) -> Self {
        let mut run = 0.0f64;
        for v in values.iter_mut() {
            run = run.max(*v);
            *v = run;
        }
        LawTable { xs, values }
    }

    /// Interpolated CDF (0 below, last value above the grid).
    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return if x == self.xs[0] { self.values[0] } else { 0.0 };
        }
        if x >= self.xs[n - 1] {
            return self.values[n - 1];
        }
        let idx = self.xs.partition_point(|&g| g <= x) - 1;
        let t = (x - self.xs[idx]) / (self.xs[idx + 1] - self.xs[idx]);
        self.values[idx] + t * (self.values[idx + 1] - self.values[idx])
    }

    /// Smallest grid-interpolated `x` with `cdf(x) ≥ p`, by bisection.
    pub fn inverse(&self, p: f64) -> f64 {
        let (mut lo, mut hi) = (self.xs[0], self.xs[self.xs.len() - 1]);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) >= p {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}
