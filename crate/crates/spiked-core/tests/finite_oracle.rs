use spiked_core::ensemble::{sample_extremes, EnsembleRun, Sampler};
use spiked_core::laws::{Spike, SpikedModel};
use spiked_core::oracle::{
    edge_limits, gap_probability_joint, gap_probability_max, gap_probability_min, h1_j1, kernel_k,
    off_diagonal_kernels, scaled_kernel_limit_check, ContourKind, ContourSpec, LimitCase, NystromSizes,
    OracleContours, OracleProblem,
};
use spiked_core::quad::QuadratureRule;
use spiked_core::special::{airy_ai, s_m_real_line, t_m_real_line};
use spiked_core::{Error, C64};

/// Q(n, x) for integer n.
fn upper_gamma_q(n: usize, x: f64) -> f64 {
    let mut term = (-x).exp();
    let mut sum = term;
    for k in 1..n {
        term *= x / k as f64;
        sum += term;
    }
    sum
}

fn min_gap(model: SpikedModel, xi: f64) -> f64 {
    let p = OracleProblem::with_default_strip(model, xi, None).unwrap();
    let c = OracleContours::default_for(&p);
    gap_probability_min(&p, &c, NystromSizes::default()).unwrap().value
}

#[test]
fn one_row_gap_is_incomplete_gamma() {
    for xi in [0.5, 1.0, 1.5] {
        let d = min_gap(SpikedModel::null(1, 20).unwrap(), xi);
        let q = upper_gamma_q(20, 20.0 * xi);
        println!("ξ = {xi}: det = {d:.12}, Q = {q:.12}");
        assert!((d - q).abs() < 1e-6);
    }
}

#[test]
fn tiny_gap_is_certain() {
    let d = min_gap(SpikedModel::null(4, 16).unwrap(), 1e-8);
    assert!((d - 1.0).abs() < 1e-6);
}

#[test]
fn four_rows_match_monte_carlo() {
    let model = SpikedModel::null(4, 16).unwrap();
    let run = EnsembleRun::new(model.clone(), 1_000_000, 8).unwrap();
    let s = sample_extremes(&run, Sampler::Dense);
    let n = s.pairs.len() as f64;
    for xi in [0.05, 0.1, 0.2] {
        let d = min_gap(model.clone(), xi);
        let p = s.pairs.iter().filter(|x| x.0 >= xi).count() as f64 / n;
        let se = (p * (1.0 - p) / n).sqrt().max(1.0 / n);
        println!("ξ = {xi}: det {d:.6} MC {p:.6} z {:.2}", (d - p) / se);
        assert!((d - p).abs() < 4.0 * se);
    }
}

#[test]
fn strip_constants_do_not_change_the_determinant() {
    let model = SpikedModel::null(4, 16).unwrap();
    let mut vals = vec![];
    for (q1, q2) in [(1.3, 0.6), (1.5, 0.5), (1.7, 0.7)] {
        let p = OracleProblem::new(model.clone(), q1, q2, 0.1, None).unwrap();
        let c = OracleContours::default_for(&p);
        vals.push(gap_probability_min(&p, &c, NystromSizes::default()).unwrap().value);
    }
    let spread = vals.iter().fold(0.0f64, |a, v| a.max((v - vals[0]).abs()));
    println!("q-invariance spread {spread:e} over {vals:?}");
    assert!(spread < 1e-8);
    // the kernel itself does move
    let k = |q1| {
        let p = OracleProblem::new(model.clone(), q1, 0.6, 0.1, None).unwrap();
        kernel_k(1, 1, 0.1, 0.05, &p, &OracleContours::default_for(&p)).unwrap().value
    };
    let (a, b) = (k(1.3), k(1.6));
    assert!((a - b).abs() > 0.1 * a.abs());
}

#[test]
fn kernel_is_real_and_stable_under_doubling() {
    let p = OracleProblem::with_default_strip(SpikedModel::null(4, 16).unwrap(), 0.2, None).unwrap();
    let c = OracleContours::default_for(&p);
    let k = kernel_k(1, 1, 0.1, 0.1, &p, &c).unwrap();
    println!("K11(0.1, 0.1) = {} residual {:e} delta {:e}", k.value, k.residual, k.doubling_delta);
    assert!(k.doubling_delta < 1e-8 && k.residual < 1e-8 * (1.0 + k.value.abs()));
}

/// −∫₀^∞ H₁(y−η) J₁(y−ζ) dy with H₁ = i h, J₁ = i j.
fn factorized(eta: f64, zeta: f64, p: &OracleProblem, c: &OracleContours) -> f64 {
    let rule = QuadratureRule::semi_infinite(0.0, 0.5, 80).unwrap();
    rule.integrate(|y| {
        let (h, _) = h1_j1(y - eta, 0.0, p, c).unwrap();
        let (_, j) = h1_j1(0.0, y - zeta, p, c).unwrap();
        h * j
    })
}

#[test]
fn kernel_matches_factorized_form() {
    for (model, xi) in [(SpikedModel::null(1, 8).unwrap(), 0.5), (SpikedModel::null(4, 16).unwrap(), 0.3)] {
        let p = OracleProblem::with_default_strip(model, xi, None).unwrap();
        let c = OracleContours::default_for(&p);
        for (eta, zeta) in [(0.05, 0.1), (0.2, 0.2), (0.1, 0.25), (0.28, 0.02), (0.15, 0.07)] {
            let k = kernel_k(1, 1, eta, zeta, &p, &c).unwrap().value;
            let f = factorized(eta, zeta, &p, &c);
            println!("K11({eta}, {zeta}) = {k:.10e}, factorized {f:.10e}");
            assert!((k - f).abs() < 1e-7 * (1.0 + k.abs()));
        }
    }
}

#[test]
fn h1_decays_in_eta() {
    let p = OracleProblem::with_default_strip(SpikedModel::null(2, 10).unwrap(), 0.5, None).unwrap();
    let c = OracleContours::default_for(&p);
    let vals: Vec<f64> = (1..8).map(|i| h1_j1(0.1 * i as f64, 0.0, &p, &c).unwrap().0.abs()).collect();
    assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
    let a = h1_j1(0.3, 0.3, &p, &c).unwrap();
    let b = h1_j1(0.3, 0.3, &p, &c.doubled()).unwrap();
    assert!((a.0 - b.0).abs() < 1e-9 * (1.0 + a.0.abs()) && (a.1 - b.1).abs() < 1e-9 * (1.0 + a.1.abs()));
}

fn joint(model: &SpikedModel, xi1: f64, xi2: f64, w: f64) -> f64 {
    let p = OracleProblem::new(model.clone(), 1.4, 0.6 * model.pis().iter().copied().fold(f64::INFINITY, f64::min), xi1, Some(xi2))
        .unwrap();
    let c = OracleContours::default_for(&p);
    gap_probability_joint(&p, &c, NystromSizes::default(), w).unwrap().value
}

#[test]
fn joint_gap_full_space_and_w_invariance() {
    let model = SpikedModel::null(2, 8).unwrap();
    assert!((joint(&model, 1e-8, 50.0, 1.0) - 1.0).abs() < 1e-5);
    let vals: Vec<f64> = [1.0, 10.0, 1000.0].iter().map(|&w| joint(&model, 0.2, 2.5, w)).collect();
    println!("W-invariance: {vals:?}");
    assert!(vals.iter().all(|v| (v - vals[0]).abs() < 1e-9));
}

#[test]
fn joint_gap_matches_monte_carlo() {
    let model = SpikedModel::null(2, 8).unwrap();
    let run = EnsembleRun::new(model.clone(), 200_000, 31).unwrap();
    let s = sample_extremes(&run, Sampler::Dense);
    let n = s.pairs.len() as f64;
    for (a, b) in [(0.2, 2.5), (0.4, 2.0)] {
        let d = joint(&model, a, b, 1.0);
        let p = s.pairs.iter().filter(|x| x.0 >= a && x.1 <= b).count() as f64 / n;
        let se = (p * (1.0 - p) / n).sqrt();
        println!("({a}, {b}): det {d:.6} MC {p:.6} z {:.2}", (d - p) / se);
        assert!((d - p).abs() < 4.0 * se);
    }
}

#[test]
fn joint_gap_with_spikes_matches_monte_carlo() {
    let model = SpikedModel::new(2, 8, vec![Spike::new(3.0, 1)]).unwrap();
    let run = EnsembleRun::new(model.clone(), 200_000, 32).unwrap();
    let s = sample_extremes(&run, Sampler::Dense);
    let n = s.pairs.len() as f64;
    let (a, b) = (0.2, 5.0);
    let p = OracleProblem::new(model.clone(), 1.4, 0.2, a, Some(b)).unwrap();
    let d = gap_probability_joint(&p, &OracleContours::default_for(&p), NystromSizes::default(), 1.0).unwrap().value;
    let mc = s.pairs.iter().filter(|x| x.0 >= a && x.1 <= b).count() as f64 / n;
    let se = (mc * (1.0 - mc) / n).sqrt();
    println!("spiked: det {d:.6} MC {mc:.6} z {:.2}", (d - mc) / se);
    assert!((d - mc).abs() < 4.0 * se);
}

#[test]
fn joint_factorizes_as_cuts_leave_the_bulk() {
    let model = SpikedModel::null(4, 16).unwrap();
    let mut prev = f64::INFINITY;
    for (a, b) in [(0.15, 2.2), (0.08, 2.8), (0.03, 3.6)] {
        let j = joint(&model, a, b, 1.0);
        let pmin = min_gap(model.clone(), a);
        let pm = OracleProblem::new(model.clone(), 1.4, 0.6, 0.0, Some(b)).unwrap();
        let pmax = gap_probability_max(&pm, &OracleContours::default_for(&pm), NystromSizes::default()).unwrap().value;
        let defect = (j - pmin * pmax).abs();
        println!("({a}, {b}): joint {j:.8} product {:.8} defect {defect:e}", pmin * pmax);
        assert!(defect < prev);
        prev = defect;
    }
}

#[test]
fn guard_and_contour_validation() {
    let p = OracleProblem::with_default_strip(SpikedModel::null(20, 80).unwrap(), 0.5, None).unwrap();
    let c = OracleContours::default_for(&p);
    assert!(matches!(gap_probability_min(&p, &c, NystromSizes::default()), Err(Error::Guard(_))));
    assert!(OracleProblem::new(SpikedModel::null(2, 8).unwrap(), 0.9, 0.5, 0.1, None).is_err());
    let p = OracleProblem::with_default_strip(SpikedModel::null(2, 8).unwrap(), 0.5, None).unwrap();
    let mut c = OracleContours::default_for(&p);
    c.gamma = ContourSpec { kind: ContourKind::GammaLoop { left: 1.1, right: 1.2, half_height: 0.2 }, nodes: 256 };
    assert!(matches!(c.validate(&p), Err(Error::Contour(_))));
    let mut c = OracleContours::default_for(&p);
    c.sigma1 = ContourSpec::vertical_line(1.0, 10.0, 1.0, 1.0);
    assert!(matches!(c.validate(&p), Err(Error::Contour(_))));
}

#[test]
fn edge_limits_reduce_to_airy_functions() {
    let i = C64::new(0.0, 1.0);
    for u in [-1.0, 0.0, 1.5] {
        let (h, j) = edge_limits(0, u, u, 0.3);
        let ai = airy_ai(u).unwrap();
        assert!((h - i * (-0.3 * u).exp() * ai).norm() < 1e-10);
        assert!((j - i * (0.3 * u).exp() * ai).norm() < 1e-10);
        for k in 1..3 {
            let (h, j) = edge_limits(k, u, u, 0.0);
            println!("k={k} u={u}: H {h} vs i s^{k} {}, J {j} vs i t^{} {}", s_m_real_line(k, u), k + 1, t_m_real_line(k + 1, u));
            assert!((h - i * s_m_real_line(k, u)).norm() < 1e-9);
            assert!((j - i * t_m_real_line(k + 1, u)).norm() < 1e-9);
        }
    }
}

fn rate(model_small: SpikedModel, model_big: SpikedModel) -> (f64, f64, f64) {
    let a = scaled_kernel_limit_check(&model_small, 0.0, &[(1.0, 1.0)], 1.0).unwrap();
    let b = scaled_kernel_limit_check(&model_big, 0.0, &[(1.0, 1.0)], 1.0).unwrap();
    (a.max_error(), b.max_error(), b.max_error() / a.max_error())
}

#[test]
fn edge_case_rate() {
    let (a, b, r) = rate(SpikedModel::null(64, 256).unwrap(), SpikedModel::null(512, 2048).unwrap());
    println!("edge errors {a:e} → {b:e}, ratio {r}");
    assert!((0.3..=0.8).contains(&r));
}

#[test]
fn edge_case_with_critical_spike_rate() {
    let m = |n: usize| SpikedModel::new(n, 4 * n, vec![Spike::new(0.5, 1)]).unwrap();
    let (a, b, r) = rate(m(64), m(512));
    println!("critical edge errors {a:e} → {b:e}, ratio {r}");
    assert!(b < a);
}

#[test]
fn separated_case_rate() {
    for k in [1, 2] {
        let m = |n: usize| SpikedModel::new(n, 4 * n, vec![Spike::new(0.25, k)]).unwrap();
        let c = scaled_kernel_limit_check(&m(64), 0.0, &[(1.0, 1.0)], 1.0).unwrap();
        assert_eq!(c.case, LimitCase::Separated);
        let (a, b, r) = rate(m(64), m(512));
        println!("separated k={k} errors {a:e} → {b:e}, ratio {r}");
        assert!((0.2..=0.6).contains(&r));
    }
}

#[test]
fn limit_errors_decay_in_u() {
    let model = SpikedModel::null(64, 256).unwrap();
    let t = scaled_kernel_limit_check(&model, 0.0, &[(0.0, 0.0), (4.0, 4.0)], 1.0).unwrap();
    println!("{:?}", t.rows);
    assert!(t.rows[1].h_error < t.rows[0].h_error && t.rows[1].j_error < t.rows[0].j_error);
}

#[test]
fn limit_check_rejects_too_small_m() {
    let model = SpikedModel::null(4, 16).unwrap();
    assert!(scaled_kernel_limit_check(&model, 0.0, &[(1.0, 1.0)], 1.0).is_err());
}

#[test]
fn off_diagonal_kernels_shrink() {
    let k = |n: usize| off_diagonal_kernels(&SpikedModel::null(n, 4 * n).unwrap(), 0.0, 0.0, 1.0, 1.0, 1.0, 256).unwrap();
    let (a, b) = (k(16), k(128));
    println!("M=64 {a:?}\nM=512 {b:?}");
    assert!(b.k12.abs() < a.k12.abs() && b.k21.abs() < a.k21.abs());
    let fine = off_diagonal_kernels(&SpikedModel::null(16, 64).unwrap(), 0.0, 0.0, 1.0, 1.0, 1.0, 512).unwrap();
    assert!((fine.k12 - a.k12).abs() < 1e-10 && (fine.k21 - a.k21).abs() < 1e-10);
}
