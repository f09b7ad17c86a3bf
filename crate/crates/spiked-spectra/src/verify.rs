//! Verification suites: each runs one acceptance experiment and records a
//! pass/fail line per assertion. Module errors become failed assertions.

use std::fmt::Display;

use anyhow::{anyhow, Result};
use rand_core::RngCore;
use serde::Serialize;
use spiked_core::ensemble::{replicate_rng, scale_extremes, EmpiricalDistribution, EnsembleRun, Sampler};
use spiked_core::laws::{almost_sure_limit, f_k, g_k, scaling_for, Family, LawSpec, LawTable, Side, Spike, SpikedModel};
use spiked_core::oracle::{
    gap_probability_joint, gap_probability_min, scaled_kernel_limit_check, NystromSizes, OracleContours,
    OracleProblem,
};
use spiked_core::stats::{
    condition_number_stat, independence_defect, ks_statistic_with, ks_two_sample, permutation_envelope, DEFAULT_GRID,
};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::simulate::sample_parallel;
use crate::tables::law_table;

/// Suite names accepted by `verify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
pub enum Suite {
    /// Soft-edge limits `F_k` of `λ_min`.
    #[value(name = "thm1-case1")]
    #[serde(rename = "thm1-case1")]
    Thm1Case1,
    /// Separated-spike limits `G_k` of `λ_min`.
    #[value(name = "thm1-case2")]
    #[serde(rename = "thm1-case2")]
    Thm1Case2,
    /// Asymptotic independence of the extremes.
    #[value(name = "thm2")]
    #[serde(rename = "thm2")]
    Thm2,
    /// Condition-number fluctuations.
    #[value(name = "cor2.1")]
    #[serde(rename = "cor2.1")]
    Cor21,
    /// Kernel convergence rates.
    #[value(name = "prop-rate")]
    #[serde(rename = "prop-rate")]
    PropRate,
    /// Finite-size oracle checks.
    #[value(name = "oracle")]
    #[serde(rename = "oracle")]
    Oracle,
}

impl Suite {
    /// Every suite in order.
    pub const ALL: [Suite; 6] =
        [Suite::Thm1Case1, Suite::Thm1Case2, Suite::Thm2, Suite::Cor21, Suite::PropRate, Suite::Oracle];

    /// Command-line name.
    pub fn name(self) -> &'static str {
        match self {
            Suite::Thm1Case1 => "thm1-case1",
            Suite::Thm1Case2 => "thm1-case2",
            Suite::Thm2 => "thm2",
            Suite::Cor21 => "cor2.1",
            Suite::PropRate => "prop-rate",
            Suite::Oracle => "oracle",
        }
    }
}

/// Sizes and seeds of the experiments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteParams {
    /// Dimension of the main runs.
    pub n: usize,
    /// Smaller dimension for the KS-decrease check.
    pub small_n: usize,
    /// Aspect ratio.
    pub gamma: f64,
    /// Replicates per run.
    pub replicates: usize,
    /// Master seed.
    pub seed: u64,
    /// Worker threads.
    pub jobs: usize,
    /// Permutation shuffles for the independence envelope.
    pub shuffles: usize,
    /// Draws from the composite condition-number law.
    pub composite_draws: usize,
    /// Replicates of the oracle's Monte Carlo comparison.
    pub oracle_replicates: usize,
}

impl Default for SuiteParams {
    fn default() -> Self {
        SuiteParams {
            n: 200,
            small_n: 50,
            gamma: 2.0,
            replicates: 4000,
            seed: 20_240_601,
            jobs: 0,
            shuffles: 200,
            composite_draws: 10_000,
            oracle_replicates: 1_000_000,
        }
    }
}

/// One checked quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    /// What was checked.
    pub name: String,
    /// Measured value (`null` in JSON when not finite).
    pub value: f64,
    /// Human-readable bound.
    pub bound: String,
    /// Outcome.
    pub pass: bool,
}

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    /// Suite name.
    pub suite: String,
    /// Parameters used.
    pub params: SuiteParams,
    /// Assertions in evaluation order.
    pub assertions: Vec<Assertion>,
    /// Conjunction of all assertions.
    pub pass: bool,
}

impl SuiteReport {
    /// Empty passing report.
    pub fn new(suite: &str, params: &SuiteParams) -> Self {
        SuiteReport { suite: suite.into(), params: params.clone(), assertions: Vec::new(), pass: true }
    }

    /// Record one assertion; a NaN value always fails.
    pub fn check(&mut self, name: impl Into<String>, value: f64, bound: impl Display, pass: bool) {
        let pass = pass && !value.is_nan();
        self.pass &= pass;
        self.assertions.push(Assertion { name: name.into(), value, bound: bound.to_string(), pass });
    }

    fn fail(&mut self, name: impl Into<String>, err: impl Display) {
        self.pass = false;
        self.assertions.push(Assertion { name: name.into(), value: f64::NAN, bound: format!("error: {err}"), pass: false });
    }

    fn guard(&mut self, name: &str, r: Result<()>) {
        if let Err(e) = r {
            self.fail(name, e);
        }
    }
}

/// Run one suite.
pub fn run_suite(suite: Suite, params: &SuiteParams) -> SuiteReport {
    let mut rep = SuiteReport::new(suite.name(), params);
    let r = match suite {
        Suite::Thm1Case1 => thm1_case1(params, &mut rep),
        Suite::Thm1Case2 => thm1_case2(params, &mut rep),
        Suite::Thm2 => thm2(params, &mut rep),
        Suite::Cor21 => cor21(params, &mut rep),
        Suite::PropRate => prop_rate(&mut rep),
        Suite::Oracle => oracle(params, &mut rep),
    };
    rep.guard(suite.name(), r);
    rep
}

struct Scaled {
    min: EmpiricalDistribution,
    max: EmpiricalDistribution,
    pairs: Vec<(f64, f64)>,
}

fn scaled_run(model: &SpikedModel, p: &SuiteParams) -> Result<Scaled> {
    let run = EnsembleRun::new(model.clone(), p.replicates, p.seed)?;
    let s = sample_parallel(&run, Sampler::Banded, p.jobs)?;
    if !s.failures.is_empty() {
        return Err(anyhow!("{} replicates failed", s.failures.len()));
    }
    Ok(Scaled {
        min: scale_extremes(&s, model, Side::Min, p.seed, p.replicates)?,
        max: scale_extremes(&s, model, Side::Max, p.seed, p.replicates)?,
        pairs: s.pairs,
    })
}

fn unit_law(family: Family, k: usize) -> LawSpec {
    let alpha = if family == Family::GueEdge { 0.5 } else { 2.0 / 3.0 };
    LawSpec { family, k, side: Side::Min, mu: 0.0, nu: 1.0, alpha }
}

/// Interpolated `F_k` on `[−10, 6]`, step 0.02.
pub fn f_table(k: usize) -> Result<LawTable> {
    law_table(&unit_law(Family::TracyWidomGeneralized, k), -10.0, 6.0, 0.02)
}

fn ks_table(d: &EmpiricalDistribution, t: &LawTable) -> Result<f64> {
    Ok(ks_statistic_with(&d.sorted, &d.law, |x| Ok(t.cdf(x)))?.ks)
}

fn thm1_case1(p: &SuiteParams, rep: &mut SuiteReport) -> Result<()> {
    let cases: [(&str, Vec<Spike>, usize); 3] = [
        ("null", vec![], 0),
        ("critical k=1", vec![Spike::new(1.0 - 1.0 / p.gamma, 1)], 1),
        ("critical k=2", vec![Spike::new(1.0 - 1.0 / p.gamma, 2)], 2),
    ];
    for (label, spikes, k) in cases {
        let table = f_table(k)?;
        let mut ks = Vec::new();
        for n in [p.small_n, p.n] {
            let model = SpikedModel::with_gamma(n, p.gamma, spikes.clone())?;
            let law = scaling_for(&model, Side::Min)?;
            if law.family != Family::TracyWidomGeneralized || law.k != k {
                return Err(anyhow!("{label}: expected F_{k}, classified as {:?} k = {}", law.family, law.k));
            }
            ks.push(ks_table(&scaled_run(&model, p)?.min, &table)?);
        }
        rep.check(format!("{label}: KS(λ̃_min, F_{k}) at N = {}", p.n), ks[1], "≤ 0.08", ks[1] <= 0.08);
        rep.check(
            format!("{label}: KS at N = {} minus KS at N = {}", p.n, p.small_n),
            ks[1] - ks[0],
            "< 0",
            ks[1] < ks[0],
        );
    }
    Ok(())
}

fn thm1_case2(p: &SuiteParams, rep: &mut SuiteReport) -> Result<()> {
    for k in [1, 2] {
        let model = SpikedModel::with_gamma(p.n, p.gamma, vec![Spike::new(0.25, k)])?;
        let law = scaling_for(&model, Side::Min)?;
        let s = scaled_run(&model, p)?;
        let ks = ks_statistic_with(&s.min.sorted, &law, |x| Ok(g_k(k, x)?))?.ks;
        rep.check(format!("ℓ_N = 0.25 ×{k}: KS(λ̃_min, G_{k})"), ks, "≤ 0.06", ks <= 0.06);
        let mean = s.pairs.iter().map(|q| q.0).sum::<f64>() / s.pairs.len() as f64;
        let target = almost_sure_limit(0.25, p.gamma)?;
        rep.check(
            format!("ℓ_N = 0.25 ×{k}: |mean λ_min − {target:.6}|"),
            (mean - target).abs(),
            "≤ 0.01",
            (mean - target).abs() <= 0.01,
        );
    }
    Ok(())
}

fn thm2(p: &SuiteParams, rep: &mut SuiteReport) -> Result<()> {
    let quadrants: [(&str, Vec<Spike>); 4] = [
        ("null", vec![]),
        ("ℓ_1 = 3", vec![Spike::new(3.0, 1)]),
        ("ℓ_N = 0.25", vec![Spike::new(0.25, 1)]),
        ("both", vec![Spike::new(3.0, 1), Spike::new(0.25, 1)]),
    ];
    for (i, (label, spikes)) in quadrants.into_iter().enumerate() {
        let model = SpikedModel::with_gamma(p.n, p.gamma, spikes)?;
        let s = scaled_run(&model, p)?;
        let r = independence_defect(&s.min, &s.max, DEFAULT_GRID)?;
        let mut rng = replicate_rng(p.seed ^ 0x5eed, i as u64);
        let env = permutation_envelope(&s.min.by_replicate, &s.max.by_replicate, DEFAULT_GRID, p.shuffles, &mut rng)?;
        let e99 = env.quantile(0.99);
        rep.check(format!("{label}: defect D"), r.defect, format!("≤ permutation 99% quantile {e99:.5}"), r.defect <= e99);
        rep.check(format!("{label}: |corr(λ̃_min, λ̃_max)|"), r.correlation.abs(), "< 0.06", r.correlation.abs() < 0.06);
    }
    Ok(())
}

fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn cor21(p: &SuiteParams, rep: &mut SuiteReport) -> Result<()> {
    let model = SpikedModel::with_gamma(p.n, p.gamma, vec![])?;
    let s = scaled_run(&model, p)?;
    let stat = condition_number_stat(&s.pairs, &model)?;
    // right-hand side written out for the soft/soft regime
    let g = p.gamma;
    let (c1, c2) = (g / (g - 1.0).powf(2.0 / 3.0), g / (g + 1.0).powf(2.0 / 3.0));
    let mut worst = 0.0f64;
    for (r, lhs) in stat.statistic.iter().enumerate() {
        let rhs = (1.0 - 1.0 / g).powi(2) / s.pairs[r].0 * (c1 * s.min.by_replicate[r] + c2 * s.max.by_replicate[r]);
        worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
    }
    rep.check("identity: max relative |LHS − RHS|", worst, "≤ 1e-12", worst <= 1e-12);
    let coef: Vec<f64> = stat.law.terms.iter().map(|t| t.coefficient).collect();
    let coef_err = (coef[0] - c1).abs().max((coef[1] - c2).abs());
    rep.check("composite coefficients vs γ/(γ∓1)^{2/3}", coef_err, "≤ 1e-14", coef.len() == 2 && coef_err <= 1e-14);
    let table = f_table(0)?;
    let mut rng = replicate_rng(p.seed ^ 0xc0ffee, 0);
    let mut draws: Vec<f64> = (0..p.composite_draws)
        .map(|_| c1 * table.inverse(uniform(&mut rng)) + c2 * table.inverse(uniform(&mut rng)))
        .collect();
    draws.sort_by(f64::total_cmp);
    let mut sample = stat.statistic.clone();
    sample.sort_by(f64::total_cmp);
    let ks = ks_two_sample(&sample, &draws);
    rep.check("KS(statistic, composite F_0 law)", ks, "≤ 0.05", ks <= 0.05);
    Ok(())
}

fn prop_rate(rep: &mut SuiteReport) -> Result<()> {
    let grid = [(1.0, 1.0)];
    let ratio = |spikes: Vec<Spike>| -> Result<f64> {
        let a = scaled_kernel_limit_check(&SpikedModel::new(64, 256, spikes.clone())?, 0.0, &grid, 1.0)?;
        let b = scaled_kernel_limit_check(&SpikedModel::new(512, 2048, spikes)?, 0.0, &grid, 1.0)?;
        Ok(b.max_error() / a.max_error())
    };
    let r1 = ratio(vec![])?;
    rep.check("edge case: error ratio M = 256 → 2048", r1, "in [0.3, 0.8]", (0.3..=0.8).contains(&r1));
    for k in [1, 2] {
        let r2 = ratio(vec![Spike::new(0.25, k)])?;
        rep.check(format!("separated case k = {k}: error ratio M = 256 → 2048"), r2, "in [0.2, 0.6]", (0.2..=0.6).contains(&r2));
    }
    Ok(())
}

/// `Q(n, x) = e^{−x} Σ_{j<n} x^j/j!`, the regularized upper incomplete gamma at integer `n`.
pub fn upper_gamma_q(n: usize, x: f64) -> f64 {
    let mut term = (-x).exp();
    let mut sum = term;
    for j in 1..n {
        term *= x / j as f64;
        sum += term;
    }
    sum
}

fn min_gap(model: &SpikedModel, q: Option<(f64, f64)>, xi: f64) -> Result<f64> {
    let prob = match q {
        Some((q1, q2)) => OracleProblem::new(model.clone(), q1, q2, xi, None)?,
        None => OracleProblem::with_default_strip(model.clone(), xi, None)?,
    };
    Ok(gap_probability_min(&prob, &OracleContours::default_for(&prob), NystromSizes::default())?.value)
}

fn oracle(p: &SuiteParams, rep: &mut SuiteReport) -> Result<()> {
    let one = SpikedModel::null(1, 20)?;
    for xi in [0.5, 1.0, 1.5] {
        let err = (min_gap(&one, None, xi)? - upper_gamma_q(20, 20.0 * xi)).abs();
        rep.check(format!("N = 1, M = 20, ξ = {xi}: |det − Q(20, 20ξ)|"), err, "≤ 1e-6", err <= 1e-6);
    }
    let four = SpikedModel::null(4, 16)?;
    let run = EnsembleRun::new(four.clone(), p.oracle_replicates, p.seed)?;
    let s = sample_parallel(&run, Sampler::Dense, p.jobs)?;
    let n = s.pairs.len() as f64;
    for xi in [0.05, 0.1, 0.2] {
        let d = min_gap(&four, None, xi)?;
        let mc = s.pairs.iter().filter(|q| q.0 >= xi).count() as f64 / n;
        let se = (mc * (1.0 - mc) / n).sqrt().max(1.0 / n);
        let z = (d - mc).abs() / se;
        rep.check(format!("N = 4, M = 16, ξ = {xi}: |det − MC| / SE"), z, "≤ 4", z <= 4.0);
    }
    let vals: Vec<f64> =
        [(1.3, 0.6), (1.5, 0.5), (1.7, 0.7)].iter().map(|&q| min_gap(&four, Some(q), 0.1)).collect::<Result<_>>()?;
    let spread = vals.iter().fold(0.0f64, |a, v| a.max((v - vals[0]).abs()));
    rep.check("(q₁, q₂)-invariance spread", spread, "≤ 1e-8", spread <= 1e-8);
    let two = SpikedModel::null(2, 8)?;
    let prob = OracleProblem::new(two, 1.4, 0.6, 0.2, Some(2.5))?;
    let c = OracleContours::default_for(&prob);
    let w: Vec<f64> = [1.0, 10.0, 1000.0]
        .iter()
        .map(|&w| Ok(gap_probability_joint(&prob, &c, NystromSizes::default(), w)?.value))
        .collect::<Result<_>>()?;
    let spread = w.iter().fold(0.0f64, |a, v| a.max((v - w[0]).abs()));
    rep.check("W-invariance of the joint determinant", spread, "≤ 1e-9", spread <= 1e-9);
    Ok(())
}

/// Law sanity: monotone, in-range `F_0..F_2`, `G_1..G_3` on `[−8, 5]` step 0.1,
/// and `G_1` against the normal CDF on 41 points of `[−4, 4]`.
pub fn law_sanity() -> SuiteReport {
    let mut rep = SuiteReport::new("laws", &SuiteParams::default());
    let r = (|| -> Result<()> {
        let xs: Vec<f64> = (0..=130).map(|i| -8.0 + 0.1 * i as f64).collect();
        let laws: Vec<(String, LawSpec)> = (0..=2)
            .map(|k| (format!("F_{k}"), unit_law(Family::TracyWidomGeneralized, k)))
            .chain((1..=3).map(|k| (format!("G_{k}"), unit_law(Family::GueEdge, k))))
            .collect();
        for (name, law) in laws {
            let v = crate::tables::evaluate(&law, &xs, spiked_core::laws::DEFAULT_NODES)?;
            let worst_dip = v.windows(2).map(|w| w[0] - w[1]).fold(0.0f64, f64::max);
            rep.check(format!("{name}: largest decrease on the grid"), worst_dip, "= 0", worst_dip <= 0.0);
            let in_range = v.iter().all(|x| (-1e-8..=1.0 + 1e-8).contains(x));
            rep.check(format!("{name}: values in [−1e-8, 1 + 1e-8]"), if in_range { 1.0 } else { 0.0 }, "all", in_range);
        }
        let normal = Normal::standard();
        let mut worst = 0.0f64;
        for i in 0..=40 {
            let x = -4.0 + 0.2 * i as f64;
            worst = worst.max((g_k(1, x)? - normal.cdf(x)).abs());
        }
        rep.check("G_1 vs normal CDF, max error", worst, "≤ 1e-8", worst <= 1e-8);
        let f0 = f_k(0, 6.0, spiked_core::laws::DEFAULT_NODES)?;
        rep.check("1 − F_0(6)", 1.0 - f0, "≤ 1e-6", 1.0 - f0 <= 1e-6);
        Ok(())
    })();
    rep.guard("laws", r);
    rep
}
