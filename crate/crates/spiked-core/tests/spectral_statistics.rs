use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use spiked_core::ensemble::{
    replicate_rng, sample_extremes, scale_extremes, DistMeta, EmpiricalDistribution, EnsembleRun, Sampler,
};
use spiked_core::laws::{f_k, g_k, Family, LawSpec, LawTable, Side, Spike, SpikedModel};
use spiked_core::stats::{
    composite_law, condition_bracket, condition_number_stat, hypothesis_test, independence_defect,
    independence_defect_pairs, ks_statistic, ks_statistic_with, ks_two_sample, permutation_envelope,
    ConditionRegime, HypothesisTest, DEFAULT_GRID,
};
use spiked_core::Error;

fn normal_law() -> LawSpec {
    LawSpec { family: Family::GueEdge, k: 1, side: Side::Max, mu: 0.0, nu: 1.0, alpha: 0.5 }
}

fn dist(values: Vec<f64>, law: LawSpec, seed: u64) -> EmpiricalDistribution {
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let n = values.len();
    EmpiricalDistribution {
        sorted,
        by_replicate: values,
        indices: (0..n).collect(),
        side: law.side,
        law,
        meta: DistMeta { n: 1, m: 1, gamma: 2.0, spikes: vec![], seed, replicates: n },
    }
}

fn bisect(f: impl Fn(f64) -> f64, p: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= p {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn run(model: &SpikedModel, reps: usize, seed: u64) -> (EmpiricalDistribution, EmpiricalDistribution, Vec<(f64, f64)>) {
    let r = EnsembleRun::new(model.clone(), reps, seed).unwrap();
    let s = sample_extremes(&r, Sampler::Banded);
    assert!(s.failures.is_empty());
    let lo = scale_extremes(&s, model, Side::Min, seed, reps).unwrap();
    let hi = scale_extremes(&s, model, Side::Max, seed, reps).unwrap();
    (lo, hi, s.pairs)
}

#[test]
fn ks_of_inverse_cdf_sample_is_small() {
    let law = normal_law();
    let table = LawTable::tabulate(&law, -10.0, 6.0, 0.02).unwrap();
    let mut rng = replicate_rng(5, 0);
    let xs: Vec<f64> = (0..10_000).map(|_| table.inverse(rng.random::<f64>())).collect();
    let r = ks_statistic(&dist(xs, law, 5), &law).unwrap();
    println!("KS = {}", r.ks);
    assert!(r.ks < 0.03);
    assert_eq!(r.n, 10_000);
}

#[test]
fn ks_degenerate_samples() {
    let law = normal_law();
    let r = ks_statistic(&dist(vec![0.0; 50], law, 0), &law).unwrap();
    assert!((r.ks - 0.5).abs() < 1e-12, "{}", r.ks);
    let x1 = 0.7;
    let f = g_k(1, x1).unwrap();
    let r = ks_statistic(&dist(vec![x1], law, 0), &law).unwrap();
    assert!((r.ks - f.max(1.0 - f)).abs() < 1e-15);
    assert!(ks_statistic(&dist(vec![], law, 0), &law).is_err());
}

#[test]
fn ks_reports_law_failure() {
    let law = normal_law();
    let bad = ks_statistic_with(&[0.0, 1.0], &law, |x| if x > 0.5 { Err(Error::Numerical("boom".into())) } else { Ok(0.5) });
    assert!(bad.is_err());
}

#[test]
fn two_sample_ks_matches_brute_force() {
    let mut rng = replicate_rng(9, 1);
    let mut a: Vec<f64> = (0..300).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut b: Vec<f64> = (0..200).map(|_| 0.3 + rng.sample::<f64, _>(StandardNormal)).collect();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let cdf = |s: &[f64], x: f64| s.iter().filter(|v| **v <= x).count() as f64 / s.len() as f64;
    let brute = a.iter().chain(&b).map(|&x| (cdf(&a, x) - cdf(&b, x)).abs()).fold(0.0, f64::max);
    assert!((ks_two_sample(&a, &b) - brute).abs() < 1e-15);
}

#[test]
fn independent_normals_have_small_defect() {
    let mut rng = replicate_rng(17, 0);
    let x: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
    let y: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
    let r = independence_defect_pairs(&x, &y, DEFAULT_GRID).unwrap();
    println!("D = {}, corr = {}", r.defect, r.correlation);
    assert!(r.defect < 0.025);
    assert!(r.correlation.abs() < 0.05);
}

#[test]
fn comonotone_pairs_have_large_defect() {
    let law = normal_law();
    let table = LawTable::tabulate(&law, -10.0, 6.0, 0.02).unwrap();
    let mut rng = replicate_rng(2, 0);
    let x: Vec<f64> = (0..4000).map(|_| table.inverse(rng.random::<f64>())).collect();
    let r = independence_defect_pairs(&x, &x, DEFAULT_GRID).unwrap();
    assert!(r.defect >= 0.2, "{}", r.defect);
    assert!((r.correlation - 1.0).abs() < 1e-12);
}

#[test]
fn unpaired_inputs_are_rejected() {
    let law = normal_law();
    let a = dist(vec![0.0, 1.0], law, 1);
    let b = dist(vec![0.0, 1.0], law, 2);
    assert!(matches!(independence_defect(&a, &b, 5), Err(Error::Unpaired(_))));
    assert!(matches!(independence_defect_pairs(&[1.0], &[1.0, 2.0], 5), Err(Error::Unpaired(_))));
}

#[test]
fn null_model_defect_is_within_permutation_envelope() {
    let model = SpikedModel::with_gamma(100, 2.0, vec![]).unwrap();
    let (lo, hi, _) = run(&model, 2000, 31);
    let r = independence_defect(&lo, &hi, DEFAULT_GRID).unwrap();
    let env = permutation_envelope(&lo.by_replicate, &hi.by_replicate, DEFAULT_GRID, 200, &mut replicate_rng(32, 0)).unwrap();
    println!("D = {}, envelope99 = {}, corr = {}", r.defect, env.quantile(0.99), r.correlation);
    assert!(r.defect <= env.quantile(0.99));
}

#[test]
fn shuffled_comonotone_pairs_fall_inside_the_envelope() {
    let mut rng = replicate_rng(3, 3);
    let x: Vec<f64> = (0..2000).map(|_| rng.sample(StandardNormal)).collect();
    let env = permutation_envelope(&x, &x, 11, 50, &mut replicate_rng(3, 4)).unwrap();
    let d = independence_defect_pairs(&x, &x, 11).unwrap().defect;
    assert!(env.quantile(0.99) < 0.05 && d > 0.2);
}

#[test]
fn soft_soft_coefficients() {
    let model = SpikedModel::with_gamma(200, 2.0, vec![]).unwrap();
    assert_eq!(model.m, 800);
    let law = composite_law(&model).unwrap();
    assert_eq!(law.regime, ConditionRegime::SoftSoft);
    let c: Vec<f64> = law.terms.iter().map(|t| t.coefficient).collect();
    let g: f64 = 2.0;
    assert!((c[0] - g / (g - 1.0).powf(2.0 / 3.0)).abs() < 1e-14 && (c[0] - 2.0).abs() < 1e-14);
    assert!((c[1] - g / (g + 1.0).powf(2.0 / 3.0)).abs() < 1e-14 && (c[1] - 0.96150).abs() < 1e-5);
    assert_eq!(law.terms[0].law.side, Side::Min);
}

#[test]
fn separated_regime_coefficients() {
    let g: f64 = 2.0;
    let (lo, hi) = (0.25, 3.0);
    let coef_min = (1.0 - (g * (1.0 - lo)).powi(-2)).sqrt() / (1.0 - g.powi(-2) / (1.0 - lo));
    let coef_max = (1.0 - (g * (hi - 1.0)).powi(-2)).sqrt() / (1.0 + g.powi(-2) / (hi - 1.0));
    let cases = [
        (vec![Spike::new(lo, 1)], ConditionRegime::SeparatedMin, vec![coef_min]),
        (vec![Spike::new(hi, 2)], ConditionRegime::SeparatedMax, vec![coef_max]),
        (vec![Spike::new(lo, 1), Spike::new(hi, 1)], ConditionRegime::SeparatedBoth, vec![coef_min, coef_max]),
    ];
    for (spikes, regime, coefs) in cases {
        let model = SpikedModel::with_gamma(100, g, spikes).unwrap();
        let law = composite_law(&model).unwrap();
        assert_eq!(law.regime, regime);
        assert_eq!(law.alpha, 0.5);
        assert_eq!(law.terms.len(), coefs.len());
        for (t, c) in law.terms.iter().zip(&coefs) {
            assert!((t.coefficient - c).abs() < 1e-13, "{regime:?}: {} vs {c}", t.coefficient);
        }
        let mu_min = if regime == ConditionRegime::SeparatedMax { (1.0 - 1.0 / g).powi(2) } else { lo - lo / (g * g * (1.0 - lo)) };
        let mu_max = if regime == ConditionRegime::SeparatedMin { (1.0 + 1.0 / g).powi(2) } else { hi + hi / (g * g * (hi - 1.0)) };
        assert!((law.centering - mu_min / mu_max).abs() < 1e-14);
    }
}

#[test]
fn centered_ratio_gives_zero_statistic() {
    let model = SpikedModel::with_gamma(200, 2.0, vec![]).unwrap();
    let g: f64 = 0.5;
    let ratio = ((1.0 + g) / (1.0 - g)).powi(2);
    let s = condition_number_stat(&[(0.3, 0.3 * ratio)], &model).unwrap();
    assert!(s.statistic[0].abs() < 1e-12, "{}", s.statistic[0]);
    assert!(condition_number_stat(&[(0.3, 2.0), (0.0, 2.0)], &model).is_err());
}

#[test]
fn bracket_identity_holds_per_replicate() {
    let g: f64 = 2.0;
    for spikes in [vec![], vec![Spike::new(0.25, 1)], vec![Spike::new(3.0, 1)], vec![Spike::new(0.25, 1), Spike::new(3.0, 1)]] {
        let model = SpikedModel::with_gamma(60, g, spikes).unwrap();
        let (_, _, pairs) = run(&model, 200, 4);
        let s = condition_number_stat(&pairs, &model).unwrap();
        for (&(lo, hi), lhs) in pairs.iter().zip(&s.statistic) {
            let rhs = condition_bracket(lo, hi, &model).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
        }
    }
    // regime-1 form written out: (1 − 1/γ)²/λ_min · [γ/(γ−1)^{2/3} λ̃_min + γ/(γ+1)^{2/3} λ̃_max]
    let model = SpikedModel::with_gamma(200, g, vec![]).unwrap();
    let (lo, hi, pairs) = run(&model, 100, 6);
    let s = condition_number_stat(&pairs, &model).unwrap();
    for r in 0..pairs.len() {
        let rhs = (1.0 - 1.0 / g).powi(2) / pairs[r].0
            * (g / (g - 1.0).powf(2.0 / 3.0) * lo.by_replicate[r] + g / (g + 1.0).powf(2.0 / 3.0) * hi.by_replicate[r]);
        assert!((s.statistic[r] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }
}

#[test]
fn hypothesis_test_examples() {
    let model = SpikedModel::with_gamma(200, 2.0, vec![]).unwrap();
    let median = bisect(|x| f_k(0, x, 64).unwrap(), 0.5, -4.0, 2.0);
    let t = HypothesisTest::new(&model).unwrap();
    let lmin = t.law_min.unscale(median, model.m);
    let lmax = t.law_max.unscale(median, model.m);
    let out = hypothesis_test(lmin, lmax, &model, 0.05).unwrap();
    assert!((out.t - 0.25).abs() < 1e-6, "{}", out.t);
    assert!(!out.reject);
    let far = t.run(lmin, f64::INFINITY, 1e-12).unwrap();
    assert_eq!(far.t, 0.0);
    assert!(far.reject);
    let big = t.run(lmin, 4.0, 1e-3).unwrap();
    assert!(big.t < 1e-3 && big.reject);
}

#[test]
fn null_rejection_rate_is_reported_in_range() {
    let model = SpikedModel::with_gamma(200, 2.0, vec![]).unwrap();
    let test = HypothesisTest::tabulated(&model, -10.0, 6.0, 0.02).unwrap();
    let (_, _, pairs) = run(&model, 2000, 77);
    let rejects = pairs.iter().filter(|&&(lo, hi)| test.run(lo, hi, 0.05).unwrap().reject).count();
    let rate = rejects as f64 / pairs.len() as f64;
    // independent uniform tails: P(UV ≤ α) = α(1 − ln α)
    let alpha: f64 = 0.05;
    let limit = alpha * (1.0 - alpha.ln());
    println!("empirical size at alpha = 0.05: {rate} (limit {limit}, inside [0.005, 0.15]: {})", (0.005..=0.15).contains(&rate));
    assert!((rate - limit).abs() < 0.05);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn ks_is_rank_invariant(xs in prop::collection::vec(-3.0f64..3.0, 1..60), a in 0.1f64..3.0, b in -2.0f64..2.0) {
        let law = normal_law();
        let mut s = xs.clone();
        s.sort_by(f64::total_cmp);
        let base = ks_statistic_with(&s, &law, |x| g_k(1, x)).unwrap().ks;
        // y = exp(a x + b), law argument mapped back through the inverse
        let t: Vec<f64> = s.iter().map(|x| (a * x + b).exp()).collect();
        let moved = ks_statistic_with(&t, &law, |y| g_k(1, (y.ln() - b) / a)).unwrap().ks;
        prop_assert!((base - moved).abs() < 1e-12);
    }

    #[test]
    fn defect_is_copula_invariant(seed in 0u64..1000, a in 0.1f64..4.0, b in -3.0f64..3.0) {
        let mut rng = replicate_rng(seed, 0);
        let x: Vec<f64> = (0..400).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + rng.sample::<f64, _>(StandardNormal)).collect();
        let base = independence_defect_pairs(&x, &y, 11).unwrap();
        let tx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let ty: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        let moved = independence_defect_pairs(&tx, &ty, 11).unwrap();
        prop_assert!((base.defect - moved.defect).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&base.defect));
        prop_assert!((-1.0..=1.0).contains(&base.correlation));
    }

    #[test]
    fn t_is_nonincreasing_in_each_argument(x in -6.0f64..4.0, y in -6.0f64..4.0, dx in 0.0f64..2.0, dy in 0.0f64..2.0) {
        let model = SpikedModel::with_gamma(50, 2.0, vec![Spike::new(0.25, 1)]).unwrap();
        let t = HypothesisTest::new(&model).unwrap();
        let base = t.statistic_scaled(x, y).unwrap();
        prop_assert!(t.statistic_scaled(x + dx, y).unwrap() <= base + 1e-12);
        prop_assert!(t.statistic_scaled(x, y + dy).unwrap() <= base + 1e-12);
        prop_assert!((0.0..=1.0).contains(&base));
    }
}
