use proptest::prelude::*;
use rand::Rng;
use spiked_core::ensemble::replicate_rng;
use spiked_core::fredholm::*;
use spiked_core::quad::QuadratureRule;
use spiked_core::special::{airy_ai, airy_kernel, s_m_real_line};

fn airy_op(s: f64, n: usize) -> DiscretizedOperator {
    discretize(airy_kernel, &QuadratureRule::semi_infinite(s, 10.0, n).unwrap(), "airy").unwrap()
}

/// Singular values of a small square matrix via eigenvalues of AᵀA (nalgebra).
fn singular_values(m: &[f64], n: usize) -> Vec<f64> {
    let a = nalgebra::DMatrix::from_row_slice(n, n, m);
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

#[test]
fn rule_invariants() {
    for r in [QuadratureRule::interval(-1.0, 2.0, 16).unwrap(), QuadratureRule::semi_infinite(-3.0, 10.0, 16).unwrap()] {
        assert!(r.weights.iter().all(|w| *w > 0.0));
        assert!(r.nodes.windows(2).all(|p| p[0] < p[1]));
    }
    assert!(QuadratureRule::interval(0.0, 1.0, 3).is_err());
    assert!(QuadratureRule::interval(1.0, 0.0, 8).is_err());
    let r = QuadratureRule::interval(0.0, 1.0, 8).unwrap();
    assert!((r.integrate(|_| 1.0) - 1.0).abs() < 1e-12);
}

#[test]
fn discretize_examples() {
    let r = QuadratureRule::interval(0.0, 2.0, 12).unwrap();
    let zero = discretize(|_, _| 0.0, &r, "zero").unwrap();
    assert!(zero.matrix.iter().all(|v| *v == 0.0));
    assert_eq!(zero.dim(), 12);
    let phi = |x: f64| (-x).exp() * (1.0 + x);
    let sep = discretize(|x, y| phi(x) * phi(y), &r, "sep").unwrap();
    let sv = singular_values(&sep.matrix, 12);
    assert!(sv[0] > 0.1 && sv[1] < 1e-10);
    let op = airy_op(-1.0, 24);
    for i in 0..24 {
        for j in 0..24 {
            assert!((op.matrix[i * 24 + j] - op.matrix[j * 24 + i]).abs() < 1e-12);
        }
    }
    assert!(discretize(|_, _| f64::NAN, &r, "nan").is_err());
}

#[test]
fn airy_determinant_self_converges() {
    let a = fredholm_det(&airy_op(0.0, 40)).unwrap();
    let b = fredholm_det(&airy_op(0.0, 80)).unwrap();
    assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    let c = fredholm_det(&airy_op(0.0, 160)).unwrap();
    assert!((b - c).abs() < 1e-8);
}

#[test]
fn fredholm_examples() {
    let r = QuadratureRule::interval(0.0, 1.0, 16).unwrap();
    assert_eq!(fredholm_det(&discretize(|_, _| 0.0, &r, "z").unwrap()).unwrap(), 1.0);
    assert!(fredholm_det(&discretize(|_, _| 1.0, &r, "one").unwrap()).unwrap().abs() < 1e-10);
    // rank one: det = 1 − ⟨φ, φ⟩
    let c = 0.5;
    let d = fredholm_det(&discretize(|_, _| c, &r, "c").unwrap()).unwrap();
    assert!((d - 0.5).abs() < 1e-12);
}

#[test]
fn weighting_similarity_leaves_determinant_unchanged() {
    let r = QuadratureRule::semi_infinite(-2.0, 10.0, 48).unwrap();
    let op = discretize(airy_kernel, &r, "airy").unwrap();
    let n = r.len();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = r.weights[i] * airy_kernel(r.nodes[i], r.nodes[j]);
        }
    }
    let a = fredholm_det(&op).unwrap();
    let b = det_identity_minus(&m, n).unwrap();
    assert!((a - b).abs() < 1e-10);
}

#[test]
fn airy_determinant_is_monotone_in_the_cut() {
    let mut prev = 0.0;
    for i in 0..=30 {
        let x = -6.0 + 0.3 * i as f64;
        let d = fredholm_det(&airy_op(x, 64)).unwrap();
        assert!(d >= prev - 1e-12, "det dips at {x}");
        prev = d;
    }
}

#[test]
fn resolvent_examples() {
    let r = QuadratureRule::interval(0.0, 1.0, 16).unwrap();
    let f = |x: f64| x.sin() + 2.0;
    let zero = discretize(|_, _| 0.0, &r, "z").unwrap();
    let out = resolvent_apply(&zero, f).unwrap();
    for (x, v) in r.nodes.iter().zip(&out) {
        assert!((v - f(*x)).abs() < 1e-14);
    }
    // φ⊗φ with ⟨φ, φ⟩ = c: (I − K)^{-1} φ = φ/(1 − c)
    let phi = |x: f64| 0.8 * x;
    let c = 0.64 / 3.0;
    let sep = discretize(|x, y| phi(x) * phi(y), &r, "sep").unwrap();
    let out = resolvent_apply(&sep, phi).unwrap();
    for (x, v) in r.nodes.iter().zip(&out) {
        assert!((v - phi(*x) / (1.0 - c)).abs() < 1e-9);
    }
    let one = discretize(|_, _| 1.0, &r, "one").unwrap();
    assert!(matches!(resolvent_apply(&one, f), Err(spiked_core::Error::Singular { .. })));
    assert!(resolvent_apply_values(&zero, &[1.0]).is_err());
}

#[test]
fn airy_resolvent_self_converges() {
    let ip = |n: usize| {
        let op = airy_op(-1.0, n);
        let r = resolvent_apply(&op, |u| s_m_real_line(1, u)).unwrap();
        inner_product(&op.rule, &r, |v| airy_ai(v).unwrap()).unwrap()
    };
    let (a, b) = (ip(48), ip(96));
    assert!((a - b).abs() < 1e-7, "{a} vs {b}");
}

#[test]
fn inner_product_examples() {
    let r = QuadratureRule::interval(0.0, 1.0, 8).unwrap();
    assert_eq!(inner_product(&r, &vec![0.0; 8], |_| 0.0).unwrap(), 0.0);
    assert!((inner_product(&r, &vec![1.0; 8], |_| 1.0).unwrap() - 1.0).abs() < 1e-12);
    let s = QuadratureRule::semi_infinite(0.0, 10.0, 64).unwrap();
    let ai: Vec<f64> = s.nodes.iter().map(|&x| airy_ai(x).unwrap()).collect();
    let v = inner_product(&s, &ai, |x| airy_ai(x).unwrap()).unwrap();
    assert!((v - airy_kernel(0.0, 0.0)).abs() < 1e-8);
    assert!(inner_product(&r, &[1.0], |_| 1.0).is_err());
}

#[test]
fn block_determinant_examples() {
    let a = airy_op(-1.0, 16);
    let b = airy_op(0.5, 12);
    let (da, db) = (fredholm_det(&a).unwrap(), fredholm_det(&b).unwrap());
    let z12 = Block::zeros(16, 12);
    let z21 = Block::zeros(12, 16);
    let d = block_det_2x2(&Block::from(&a), &z12, &z21, &Block::from(&b)).unwrap();
    assert!((d - da * db).abs() < 1e-12);
    let d = block_det_2x2(&Block::zeros(3, 3), &Block::zeros(3, 2), &Block::zeros(2, 3), &Block::zeros(2, 2)).unwrap();
    assert_eq!(d, 1.0);
    assert!(block_det_2x2(&Block::zeros(3, 3), &Block::zeros(2, 2), &Block::zeros(2, 3), &Block::zeros(2, 2)).is_err());
    assert!(Block::new(2, 2, vec![0.0; 3]).is_err());
}

fn random_block(rows: usize, cols: usize, scale: f64, seed: u64) -> Block {
    let mut rng = replicate_rng(seed, (rows * 31 + cols) as u64);
    Block::new(rows, cols, (0..rows * cols).map(|_| scale * (rng.random::<f64>() - 0.5)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn block_determinant_matches_dense_assembly(n1 in 1usize..6, n2 in 1usize..6, seed in 0u64..10_000) {
        let n = n1 + n2;
        // entries in ±0.05 keep the spectral norm of the assembled matrix below 0.5
        let (k11, k12, k21, k22) = (
            random_block(n1, n1, 0.1, seed),
            random_block(n1, n2, 0.1, seed + 1),
            random_block(n2, n1, 0.1, seed + 2),
            random_block(n2, n2, 0.1, seed + 3),
        );
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let v = match (i < n1, j < n1) {
                    (true, true) => k11.data[i * n1 + j],
                    (true, false) => k12.data[i * n2 + j - n1],
                    (false, true) => k21.data[(i - n1) * n1 + j],
                    (false, false) => k22.data[(i - n1) * n2 + j - n1],
                };
                m[i * n + j] = if i == j { 1.0 } else { 0.0 } - v;
            }
        }
        let sv = singular_values(&{
            let mut k = m.clone();
            for i in 0..n { k[i * n + i] -= 1.0; }
            k
        }, n);
        prop_assert!(sv[0] < 0.5);
        let dense = nalgebra::DMatrix::from_row_slice(n, n, &m).determinant();
        let got = block_det_2x2(&k11, &k12, &k21, &k22).unwrap();
        prop_assert!((dense - got).abs() < 1e-12);
    }

    #[test]
    fn block_diagonal_factorizes(n1 in 1usize..6, n2 in 1usize..6, seed in 0u64..10_000) {
        let (k11, k22) = (random_block(n1, n1, 0.3, seed), random_block(n2, n2, 0.3, seed + 7));
        let d = block_det_2x2(&k11, &Block::zeros(n1, n2), &Block::zeros(n2, n1), &k22).unwrap();
        let a = det_identity_minus(&k11.data, n1).unwrap();
        let b = det_identity_minus(&k22.data, n2).unwrap();
        prop_assert!((d - a * b).abs() < 1e-12);
    }
}
