//! Airy, contour-function, kernel and Hermite checks.
//!
//! Reference Airy values were generated offline with mpmath at 30 digits.

use spiked_core::special::*;

const AIRY_TABLE: &[(f64, f64, f64)] = &[
    (-20.0, -0.17640612707798469, 0.89286285673647124),
    (-15.0, 0.27821749087082893, 0.27237420430864202),
    (-10.0, 0.040241238486443191, 0.99626504413279006),
    (-8.5, -0.33029023763020888, -0.032313348284639136),
    (-7.0, 0.18428083525050564, -0.77100816841012655),
    (-6.0, -0.32914517362982311, 0.34593548728134289),
    (-5.0, 0.35076100902411432, 0.32719281855444314),
    (-4.5, 0.29215278105595947, -0.5233625323157477),
    (-3.0, -0.37881429367765807, 0.31458376921659881),
    (-2.0, 0.22740742820168558, 0.61825902074169104),
    (-1.0, 0.53556088329235212, -0.010160567116645209),
    (-0.5, 0.47572809161053959, -0.20408167033954739),
    (0.5, 0.23169360648083349, -0.22491053266468389),
    (1.0, 0.13529241631288142, -0.15914744129679321),
    (2.0, 0.034924130423274379, -0.053090384433653632),
    (3.0, 0.0065911393574607191, -0.011912976705951318),
    (3.5, 0.002584098786989635, -0.0050044139679525828),
    (4.0, 0.00095156385120480187, -0.0019586409502041789),
    (5.0, 0.00010834442813607442, -0.00024741389086846248),
    (6.0, 9.9476943602528896e-6, -2.4765200397034955e-5),
    (7.0, 7.4921288639971671e-7, -2.008150894738792e-6),
    (7.9, 6.2396400972839342e-8, -1.7729958329430335e-7),
    (8.5, 1.0997009755195507e-8, -3.2377254404476023e-8),
    (10.0, 1.1047532552898686e-10, -3.5206336767389236e-10),
    (12.0, 1.3931846888753608e-13, -4.8547365549853085e-13),
    (15.0, 2.1649625207379923e-18, -8.4205679540177728e-18),
    (20.0, 1.6916728686705403e-27, -7.586391625748355e-27),
];

#[test]
fn airy_matches_reference_table() {
    for &(x, ai, aip) in AIRY_TABLE {
        let (a, ap) = airy(x);
        let ea = (a - ai).abs() / ai.abs();
        let ep = (ap - aip).abs() / aip.abs();
        println!("{x:6} {ea:.2e} {ep:.2e}");
    }
    for &(x, ai, aip) in AIRY_TABLE {
        let (a, ap) = airy(x);
        assert!((a - ai).abs() <= 1e-10 * ai.abs(), "Ai({x}) = {a}, want {ai}");
        assert!((ap - aip).abs() <= 1e-9 * aip.abs(), "Ai'({x}) = {ap}, want {aip}");
    }
}

// (u, ∫_u^∞ Ai, ∫_0^∞ y Ai(u+y) dy, ∫ y² Ai, ∫ y³ Ai), mpmath quadrature
const TAIL_TABLE: &[(f64, f64, f64, f64, f64)] = &[
    (-10.0, 1.0990317364675463, 9.99405232054267, 99.9807644439132, 1002.00570791207),
    (-6.0, 1.0660085896008189, 6.05011605032357, 35.9715511283116, 217.961323949071),
    (-4.0, 0.81134082976259501, 4.03599189441896, 16.0737020447266, 65.9174898384314),
    (-1.0, 0.79900731680040195, 0.809167883917047, 1.3447287672094, 2.9427434008102),
    (0.0, 0.33333333333333333, 0.258819403792807, 0.355028053887817, 0.666666666666667),
    (2.0, 0.020800577552653642, 0.0114892293283463, 0.0119456717665817, 0.0177098115721439),
    (4.0, 0.00044068794721120636, 0.000195889161359353, 0.000168007205767388, 0.00020934707135286),
    (6.0, 3.8816280948189418e-6, 1.4754318281213e-6, 1.09510339152507e-6, 1.19263584048748e-6),
    (10.0, 3.4164317390540094e-11, 1.04201937684914e-11, 6.27338784407265e-12, 5.59475634035366e-12),
];

#[test]
fn s_functions_reproduce_airy_moments() {
    // s^(m)(u) − P_m(u) = (−1)^m/(m−1)! ∫ y^{m−1} Ai(u+y) dy
    for &(u, i0, i1, i2, i3) in TAIL_TABLE {
        assert!((airy_tail_integral(u) - i0).abs() <= 1e-12 * i0.abs().max(1e-3), "tail {u}");
        let s = s_batch(4, u);
        let p = [1.0, u, u * u / 2.0, u * u * u / 6.0 - 1.0 / 3.0];
        let want = [p[0] - i0, p[1] + i1, p[2] - i2 / 2.0, p[3] + i3 / 6.0];
        for m in 0..4 {
            let tol = 1e-11 * (1.0 + want[m].abs());
            assert!((s[m] - want[m]).abs() <= tol, "s^({}) at {u}: {} vs {}", m + 1, s[m], want[m]);
        }
    }
}

/// Maclaurin series of Ai, used only as an independent oracle for |u| ≤ 3.
fn ai_series(u: f64) -> f64 {
    let (mut f, mut g) = (1.0, u);
    let (mut tf, mut tg) = (1.0, u);
    for k in 1..80 {
        let k = k as f64;
        tf *= u * u * u / ((3.0 * k - 1.0) * (3.0 * k));
        tg *= u * u * u / ((3.0 * k) * (3.0 * k + 1.0));
        f += tf;
        g += tg;
    }
    AI0 * f - AIP0_NEG * g
}

#[test]
fn airy_examples() {
    assert!((airy_ai(0.0).unwrap() - 0.3550280538878172).abs() < 1e-15);
    assert!((airy_ai_prime(0.0).unwrap() + 0.2588194037928068).abs() < 1e-15);
    let a10 = airy_ai(10.0).unwrap();
    assert!(a10 > 0.0 && a10 < 1e-9);
    assert!(airy_ai(f64::NAN).is_err() && airy_ai_prime(f64::INFINITY).is_err());
    // first zero by bisection on the series oracle
    let (mut lo, mut hi) = (-2.5, -2.2);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if ai_series(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    assert!((lo - (-2.338107)).abs() < 1e-6, "zero at {lo}");
    assert!(airy_ai(-2.338107).unwrap().abs() < 1e-5);
    assert!(airy_ai(lo).unwrap().abs() < 1e-13);
    for u in [-3.0, -1.7, -0.2, 0.9, 2.5] {
        assert!((airy_ai(u).unwrap() - ai_series(u)).abs() < 1e-13);
    }
}

#[test]
fn airy_prime_matches_finite_difference() {
    let h = 1e-5;
    let fd = (airy_ai(1.0 + h).unwrap() - airy_ai(1.0 - h).unwrap()) / (2.0 * h);
    assert!((airy_ai_prime(1.0).unwrap() - fd).abs() <= 1e-8);
    let mut prev = airy_ai_prime(1.0).unwrap();
    for u in [2.0, 4.0, 6.0, 9.0, 14.0] {
        let d = airy_ai_prime(u).unwrap();
        assert!(d < 0.0 && d.abs() < prev.abs());
        prev = d;
    }
}

#[test]
fn contour_exponent_zero_and_t1_reproduce_airy() {
    let c = AiryContour::default();
    for u in [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0] {
        let a = airy_ai(u).unwrap();
        let s0 = c.s_integral(0, u);
        let t1 = t_m(1, u, &c).unwrap();
        assert!((s0.value - a).abs() < 1e-9, "s0 at {u}: {} vs {a}", s0.value);
        assert!((t1.value - a).abs() < 1e-9, "t1 at {u}");
        assert!(s0.residual < 1e-9 && t1.residual < 1e-9);
    }
}

#[test]
fn s1_at_five_and_refinement_stability() {
    let c = AiryContour::default();
    let big = AiryContour::new(24.0, 1.0, 400).unwrap();
    let a = s_m(1, 5.0, &c).unwrap().value;
    let b = s_m(1, 5.0, &big).unwrap().value;
    // with the path below 0, s^(1)(u) = 1 − ∫_u^∞ Ai → 1
    assert!((1.0 - a).abs() < 1e-3, "s1(5) = {a}");
    assert!((a - b).abs() < 1e-10);
    let fine = AiryContour::new(12.0, 1.0, 800).unwrap();
    let s2 = s_m(2, 0.0, &c).unwrap().value;
    assert!((s2 - s_m(2, 0.0, &fine).unwrap().value).abs() < 1e-9);
}

#[test]
fn contour_quadratures_are_refinement_stable() {
    let c = AiryContour::default();
    let r = AiryContour::new(18.0, 1.0, 800).unwrap();
    for m in 1..=4 {
        for u in [-2.0, 0.0, 1.5] {
            let (a, b) = (s_m(m, u, &c).unwrap().value, s_m(m, u, &r).unwrap().value);
            assert!((a - b).abs() < 1e-9, "s^({m})({u})");
            let (a, b) = (t_m(m, u, &c).unwrap().value, t_m(m, u, &r).unwrap().value);
            assert!((a - b).abs() < 1e-9, "t^({m})({u})");
        }
    }
}

#[test]
fn real_line_batches_match_contour_quadrature() {
    let c = AiryContour::default();
    for u in [-3.0, -1.0, 0.0, 0.7, 2.0, 4.0] {
        let s = s_batch(4, u);
        let t = t_batch(4, u);
        for m in 1..=4u32 {
            let sc = s_m(m, u, &c).unwrap().value;
            let tc = t_m(m, u, &c).unwrap().value;
            assert!((s[m as usize - 1] - sc).abs() < 1e-9 * (1.0 + sc.abs()), "s^({m})({u}) {} vs {sc}", s[m as usize - 1]);
            assert!((t[m as usize - 1] - tc).abs() < 1e-9 * (1.0 + tc.abs()), "t^({m})({u})");
        }
    }
}

#[test]
fn t_examples() {
    let c = AiryContour::default();
    assert!((t_m(1, 0.0, &c).unwrap().value - AI0).abs() < 1e-9);
    let h = 1e-5;
    let fd = (airy_ai(1.0 + h).unwrap() - airy_ai(1.0 - h).unwrap()) / (2.0 * h);
    assert!((t_m(2, 1.0, &c).unwrap().value + fd).abs() < 1e-7);
    let t8 = t_m(1, 8.0, &c).unwrap().value;
    assert!(t8 > 0.0 && t8 < 1e-7, "{t8}");
    assert!(s_m(0, 0.0, &c).is_err() && t_m(0, 0.0, &c).is_err());
}

#[test]
fn contour_geometry_is_validated() {
    let c = AiryContour::default();
    assert!((c.segments[0].0.arg() - 5.0 * std::f64::consts::PI / 6.0).abs() < 1e-12);
    assert!((c.segments[1].1.arg() - std::f64::consts::PI / 6.0).abs() < 1e-12);
    assert!(AiryContour::new(12.0, -0.5, 400).is_err());
    assert!(AiryContour::new(12.0, 1.0, 2).is_err());
    let mut broken = c.clone();
    broken.segments[1].0 += num_complex::Complex::new(0.1, 0.0);
    assert!(broken.validate().is_err());
}

#[test]
fn airy_kernel_examples() {
    assert!((airy_kernel(0.0, 0.0) - 0.2588194037928068f64.powi(2)).abs() < 1e-15);
    assert!((airy_kernel(0.0, 0.0) - 0.06698748962).abs() < 1e-8);
    assert_eq!(airy_kernel(1.3, -0.7), airy_kernel(-0.7, 1.3));
    let (y, w) = spiked_core::quad::composite_gauss_legendre(0.0, 30.0, 30, 20);
    let integral: f64 = y.iter().zip(&w).map(|(y, w)| w * airy_ai(1.0 + y).unwrap() * airy_ai(2.0 + y).unwrap()).sum();
    assert!((airy_kernel(1.0, 2.0) - integral).abs() < 1e-8);
    for u in [-6.0, -3.0, -1.0, 0.0, 0.5, 2.0, 5.0] {
        assert!(airy_kernel(u, u) >= 0.0);
        // diagonal branch agrees with the off-diagonal formula just outside it
        assert!((airy_kernel(u, u) - airy_kernel(u, u + 2e-6)).abs() < 1e-5);
    }
}

#[test]
fn hermite_examples() {
    for x in [-2.0, 0.0, 3.5] {
        assert_eq!(hermite_he(0, x), 1.0);
    }
    assert!((hermite_he(2, 3.0) - 8.0).abs() < 1e-14);
    // (−1)^5 e^{x²/2} d⁵/dx⁵ e^{−x²/2} = x⁵ − 10x³ + 15x
    let x: f64 = 1.5;
    assert!((hermite_he(5, x) - (x.powi(5) - 10.0 * x.powi(3) + 15.0 * x)).abs() < 1e-8);
    let h = 1e-6;
    for k in 1..=10 {
        for x in [-1.3, 0.4, 2.2] {
            let fd = (hermite_he(k, x + h) - hermite_he(k, x - h)) / (2.0 * h);
            let exact = k as f64 * hermite_he(k - 1, x);
            assert!((fd - exact).abs() <= 1e-7 * (1.0 + exact.abs()), "He_{k}' at {x}");
        }
    }
}

#[test]
fn gaussian_limit_examples() {
    for u in [-3.0, 0.0, 1.0, 4.0] {
        assert!((h_inf_case2(1, u, 0.3).unwrap() - (-0.3 * u).exp()).abs() < 1e-15);
    }
    assert_eq!(j_inf_case2(1, 0.0, 0.2).unwrap(), 0.0);
    let h = h_inf_case2(2, 2.0, 0.1).unwrap();
    assert!((h - (-0.2f64).exp() * 2.0).abs() < 1e-14 && (h - 1.63746).abs() < 1e-5);
    assert!(h_inf_case2(0, 0.0, 0.1).is_err() && j_inf_case2(0, 0.0, 0.1).is_err());
}
