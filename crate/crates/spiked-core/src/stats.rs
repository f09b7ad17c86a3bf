//! Goodness of fit, independence diagnostics, condition numbers and the
//! two-sided extreme-eigenvalue test.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand_core::RngCore;

use crate::ensemble::{check_paired, EmpiricalDistribution};
use crate::laws::{classify, scaling_for, Branch, LawSpec, LawTable, Side, SpikedModel};
use crate::{Error, Result};

/// Default quantile grid per axis for the independence defect.
pub const DEFAULT_GRID: usize = 21;
/// Quantile levels of the grid run over `[TAIL_CUT, 1 − TAIL_CUT]`.
pub const TAIL_CUT: f64 = 0.01;

/// One-sample Kolmogorov–Smirnov result.
#[derive(Debug, Clone, PartialEq)]
pub struct GoFReport {
    /// `sup |ecdf − law|`.
    pub ks: f64,
    /// Sample size.
    pub n: usize,
    /// Law tested against.
    pub law: LawSpec,
    /// `(x, ecdf(x), law(x))` at each distinct sample value.
    pub grid: Vec<(f64, f64, f64)>,
}

/// Exact one-sample KS of `dist` against `law`.
pub fn ks_statistic(dist: &EmpiricalDistribution, law: &LawSpec) -> Result<GoFReport> {
    ks_statistic_with(&dist.sorted, law, |x| law.cdf(x))
}

/// As [`ks_statistic`] with the CDF supplied separately (e.g. a [`LawTable`]).
pub fn ks_statistic_with(
    sorted: &[f64],
    law: &LawSpec,
    mut cdf: impl FnMut(f64) -> Result<f64>,
) -> Result<GoFReport> {
    let n = sorted.len();
    if n == 0 {
        return Err(Error::domain("KS statistic of an empty sample"));
    }
    let nf = n as f64;
    let mut ks = 0.0f64;
    let mut grid = Vec::new();
    let mut i = 0;
    while i < n {
        let x = sorted[i];
        let mut j = i;
        while j < n && sorted[j] == x {
            j += 1;
        }
        let f = cdf(x)?;
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::Numerical(format!("law value {f} at x = {x}")));
        }
        let (below, upto) = (i as f64 / nf, j as f64 / nf);
        ks = ks.max(upto - f).max(f - below);
        grid.push((x, upto, f));
        i = j;
    }
    Ok(GoFReport { ks, n, law: *law, grid })
}

/// Two-sample KS distance between ascending samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Factorization defect of a paired sample.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceReport {
    /// `max |Ĥ(x, y) − F̂(x) Ĝ(y)|` over the grid.
    pub defect: f64,
    /// Pearson correlation of the pairs.
    pub correlation: f64,
    /// Grid points per axis.
    pub grid: usize,
    /// Grid point `(x, y)` attaining the defect.
    pub argmax: (f64, f64),
}

/// Independence defect of the scaled `(λ̃_min, λ̃_max)` pairs of one run.
pub fn independence_defect(
    dmin: &EmpiricalDistribution,
    dmax: &EmpiricalDistribution,
    grid: usize,
) -> Result<IndependenceReport> {
    check_paired(dmin, dmax)?;
    independence_defect_pairs(&dmin.by_replicate, &dmax.by_replicate, grid)
}

/// Empirical quantile `x_(⌈pn⌉)` of an ascending sample.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let idx = ((p * n as f64).ceil() as usize).clamp(1, n) - 1;
    sorted[idx]
}

fn quantile_grid(values: &[f64], grid: usize) -> Vec<f64> {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    (0..grid)
        .map(|i| {
            let p = if grid == 1 { 0.5 } else { TAIL_CUT + (1.0 - 2.0 * TAIL_CUT) * i as f64 / (grid - 1) as f64 };
            empirical_quantile(&s, p)
        })
        .collect()
}

// Index of the first cut at or above each value; a sample counts towards
// grid cell (i, j) iff its bins are at most (i, j).
fn bins(values: &[f64], cuts: &[f64]) -> Vec<usize> {
    values.iter().map(|&v| cuts.partition_point(|&c| c < v)).collect()
}

fn defect_from_bins(bx: &[usize], by: &[usize], cx: &[f64], cy: &[f64]) -> (f64, (f64, f64)) {
    let g = cx.len();
    let w = g + 1;
    let mut h = vec![0u32; w * w];
    for (&i, &j) in bx.iter().zip(by) {
        h[i * w + j] += 1;
    }
    for i in 0..w {
        for j in 0..w {
            let mut v = h[i * w + j];
            if i > 0 {
                v += h[(i - 1) * w + j];
            }
            if j > 0 {
                v += h[i * w + j - 1];
            }
            if i > 0 && j > 0 {
                v -= h[(i - 1) * w + j - 1];
            }
            h[i * w + j] = v;
        }
    }
    let n = bx.len() as f64;
    let mut best = (0.0, (cx[0], cy[0]));
    for i in 0..g {
        let fx = h[i * w + g] as f64 / n;
        for j in 0..g {
            let fy = h[g * w + j] as f64 / n;
            let d = (h[i * w + j] as f64 / n - fx * fy).abs();
            if d > best.0 {
                best = (d, (cx[i], cy[j]));
            }
        }
    }
    best
}

fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Independence defect of raw pairs `(x_r, y_r)`.
pub fn independence_defect_pairs(x: &[f64], y: &[f64], grid: usize) -> Result<IndependenceReport> {
    if x.len() != y.len() {
        return Err(Error::Unpaired(format!("{} vs {} samples", x.len(), y.len())));
    }
    if x.is_empty() || grid == 0 {
        return Err(Error::domain("independence defect needs samples and a nonempty grid"));
    }
    let (cx, cy) = (quantile_grid(x, grid), quantile_grid(y, grid));
    let (defect, argmax) = defect_from_bins(&bins(x, &cx), &bins(y, &cy), &cx, &cy);
    Ok(IndependenceReport { defect, correlation: correlation(x, y), grid, argmax })
}

/// Defects of the sample with its pairing destroyed by random shuffles.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationEnvelope {
    /// Defect of each shuffle, ascending.
    pub defects: Vec<f64>,
}

impl PermutationEnvelope {
    /// Empirical `level` quantile of the shuffled defects.
    pub fn quantile(&self, level: f64) -> f64 {
        empirical_quantile(&self.defects, level)
    }
}

fn below(rng: &mut impl RngCore, n: usize) -> usize {
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}

/// Null distribution of the defect under independence: shuffle the second
/// coordinate `shuffles` times and recompute.
pub fn permutation_envelope<R: RngCore>(
    x: &[f64],
    y: &[f64],
    grid: usize,
    shuffles: usize,
    rng: &mut R,
) -> Result<PermutationEnvelope> {
    if x.len() != y.len() || x.is_empty() || grid == 0 || shuffles == 0 {
        return Err(Error::domain("permutation envelope needs paired samples, a grid and shuffles"));
    }
    let (cx, cy) = (quantile_grid(x, grid), quantile_grid(y, grid));
    let bx = bins(x, &cx);
    let mut by = bins(y, &cy);
    let mut defects = Vec::with_capacity(shuffles);
    for _ in 0..shuffles {
        for i in (1..by.len()).rev() {
            by.swap(i, below(rng, i + 1));
        }
        defects.push(defect_from_bins(&bx, &by, &cx, &cy).0);
    }
    defects.sort_by(|a, b| a.total_cmp(b));
    Ok(PermutationEnvelope { defects })
}

/// Regime of the condition-number limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionRegime {
    /// Both edges soft, `M^{2/3}` scale.
    SoftSoft,
    /// Separated smallest spike.
    SeparatedMin,
    /// Separated largest spike.
    SeparatedMax,
    /// Both separated.
    SeparatedBoth,
}

/// One term `c · X` of a composite law, `X` independent across terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeTerm {
    /// Coefficient.
    pub coefficient: f64,
    /// Law of `X` (its `side` says which eigenvalue it comes from).
    pub law: LawSpec,
}

/// Limit law of the centered condition-number statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeLaw {
    /// Regime.
    pub regime: ConditionRegime,
    /// Exponent `α` of the `M^α` prefactor.
    pub alpha: f64,
    /// `μ_min / μ_max`, the constant multiplying `κ²`.
    pub centering: f64,
    /// Terms with nonzero weight in the limit.
    pub terms: Vec<CompositeTerm>,
}

/// Per-replicate statistic with its predicted limit.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionNumberStat {
    /// `M^α [c κ² − 1]` per replicate.
    pub statistic: Vec<f64>,
    /// Limit descriptor.
    pub law: CompositeLaw,
}

/// Composite law for `model`.
pub fn composite_law(model: &SpikedModel) -> Result<CompositeLaw> {
    let regime = classify(model);
    let sep_min = matches!(regime.min, Branch::Gaussian { .. });
    let sep_max = matches!(regime.max, Branch::Gaussian { .. });
    let kind = match (sep_min, sep_max) {
        (false, false) => ConditionRegime::SoftSoft,
        (true, false) => ConditionRegime::SeparatedMin,
        (false, true) => ConditionRegime::SeparatedMax,
        (true, true) => ConditionRegime::SeparatedBoth,
    };
    let (lmin, lmax) = (scaling_for(model, Side::Min)?, scaling_for(model, Side::Max)?);
    let alpha = lmin.alpha.min(lmax.alpha);
    let terms = [lmin, lmax]
        .into_iter()
        .filter(|l| l.alpha == alpha)
        .map(|l| CompositeTerm { coefficient: l.nu / l.mu, law: l })
        .collect();
    Ok(CompositeLaw { regime: kind, alpha, centering: lmin.mu / lmax.mu, terms })
}

/// Centered condition-number statistic for each `(λ_min, λ_max)` pair.
pub fn condition_number_stat(pairs: &[(f64, f64)], model: &SpikedModel) -> Result<ConditionNumberStat> {
    let law = composite_law(model)?;
    let scale = (model.m as f64).powf(law.alpha);
    let statistic = pairs
        .iter()
        .enumerate()
        .map(|(r, &(lo, hi))| {
            if !(lo > 0.0) {
                return Err(Error::domain(format!("replicate {r}: lambda_min = {lo} is not positive")));
            }
            Ok(scale * (law.centering * hi / lo - 1.0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionNumberStat { statistic, law })
}

/// Right-hand side of the exact finite-`M` decomposition
/// `(μ_min/λ_min) · Σ_side (ν/μ) M^{α − α_side} λ̃_side`,
/// which equals the statistic of [`condition_number_stat`] identically.
pub fn condition_bracket(lambda_min: f64, lambda_max: f64, model: &SpikedModel) -> Result<f64> {
    let (lmin, lmax) = (scaling_for(model, Side::Min)?, scaling_for(model, Side::Max)?);
    let alpha = lmin.alpha.min(lmax.alpha);
    let m = model.m as f64;
    let term = |l: &LawSpec, lambda: f64| l.nu / l.mu * m.powf(alpha - l.alpha) * l.scale(lambda, model.m);
    Ok(lmin.mu / lambda_min * (term(&lmin, lambda_min) + term(&lmax, lambda_max)))
}

/// Outcome of the two-sided extreme-eigenvalue test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    /// `(1 − F_min(λ̃_min)) (1 − F_max(λ̃_max))`.
    pub t: f64,
    /// `t ≤ α`.
    pub reject: bool,
    /// Scaled smallest eigenvalue.
    pub scaled_min: f64,
    /// Scaled largest eigenvalue.
    pub scaled_max: f64,
}

/// The test for one model, optionally with tabulated laws.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisTest {
    /// Law of `λ̃_min`.
    pub law_min: LawSpec,
    /// Law of `λ̃_max`.
    pub law_max: LawSpec,
    /// Sample size `M`.
    pub m: usize,
    tables: Option<(LawTable, LawTable)>,
}

fn upper_tail(x: f64, cdf: impl FnOnce(f64) -> Result<f64>) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::domain("scaled eigenvalue is NaN"));
    }
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    if x == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    Ok(1.0 - cdf(x)?)
}

impl HypothesisTest {
    /// Test evaluating the laws directly.
    pub fn new(model: &SpikedModel) -> Result<Self> {
        Ok(HypothesisTest {
            law_min: scaling_for(model, Side::Min)?,
            law_max: scaling_for(model, Side::Max)?,
            m: model.m,
            tables: None,
        })
    }

    /// Test reading the laws from tables on `[lo, hi]` with spacing `step`.
    pub fn tabulated(model: &SpikedModel, lo: f64, hi: f64, step: f64) -> Result<Self> {
        let mut t = Self::new(model)?;
        t.tables = Some((LawTable::tabulate(&t.law_min, lo, hi, step)?, LawTable::tabulate(&t.law_max, lo, hi, step)?));
        Ok(t)
    }

    /// `T` at already scaled values.
    pub fn statistic_scaled(&self, x_min: f64, x_max: f64) -> Result<f64> {
        let (a, b) = match &self.tables {
            Some((tmin, tmax)) => (upper_tail(x_min, |x| Ok(tmin.cdf(x)))?, upper_tail(x_max, |x| Ok(tmax.cdf(x)))?),
            None => (upper_tail(x_min, |x| self.law_min.cdf(x))?, upper_tail(x_max, |x| self.law_max.cdf(x))?),
        };
        Ok(a * b)
    }

    /// Scale raw eigenvalues, compute `T` and decide at level `alpha`.
    pub fn run(&self, lambda_min: f64, lambda_max: f64, alpha: f64) -> Result<TestOutcome> {
        let scaled_min = self.law_min.scale(lambda_min, self.m);
        let scaled_max = self.law_max.scale(lambda_max, self.m);
        let t = self.statistic_scaled(scaled_min, scaled_max)?;
        Ok(TestOutcome { t, reject: t <= alpha, scaled_min, scaled_max })
    }
}

/// One-shot test of `(λ_min, λ_max)` against `model` at level `alpha`.
pub fn hypothesis_test(lambda_min: f64, lambda_max: f64, model: &SpikedModel, alpha: f64) -> Result<TestOutcome> {
    HypothesisTest::new(model)?.run(lambda_min, lambda_max, alpha)
}
