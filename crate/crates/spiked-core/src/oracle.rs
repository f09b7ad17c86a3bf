//! Exact finite-`(N, M)` gap probabilities from the double-contour kernel
//!
//! `K_{βα}(η, ζ) = −M/(2π)² ∮_Γ dz ∫_{Σ_α} dw e^{−ηM(z−q_β) + ζM(w−q_α)} /(w−z)
//!                 · Π_k (w−π_k)/(z−π_k) · (z/w)^M`,
//!
//! with `q₂ < min π ≤ max π < q₁`, `Γ` a loop around every `π_k` inside the
//! strip, `Σ₁` the upward line `Re w = A > q₁` and `Σ₂` a counterclockwise
//! circle about the origin. Gap probabilities are Nyström determinants of
//! these kernels. All products and powers are exponentiated from sums of
//! principal logarithms; every factor carries an integer exponent, so the
//! branch choice never changes the value.
//!
//! The module also hosts the two asymptotic diagnostics that work on the same
//! integrands at large `M`: the scaled-kernel limit check and the balanced
//! off-diagonal kernels.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::fredholm::{block_det_2x2, det_identity_minus, Block};
use crate::laws::{classify, gaussian_scaling, Branch, Side, SpikedModel};
use crate::quad::{gauss_legendre, gauss_legendre_on, QuadratureRule};
use crate::special::{airy_ai, h_inf_case2, j_inf_case2};
use crate::{Error, Result, C64};

/// Largest `N` accepted by the gap-probability routines.
pub const GUARD_N: usize = 16;
/// Largest `M` accepted by the gap-probability routines.
pub const GUARD_M: usize = 64;
/// Gauss–Legendre nodes per panel of the vertical line.
pub const LINE_PANEL_NODES: usize = 32;
/// Doubling deltas above this make a gap probability fail.
pub const DOUBLING_TOLERANCE: f64 = 1e-7;

const EXP_LIMIT: f64 = 700.0;

/// Contour shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContourKind {
    /// Counterclockwise rectangle `[left, right] × [−h, h]`.
    GammaLoop {
        /// Left side abscissa.
        left: f64,
        /// Right side abscissa.
        right: f64,
        /// Half height.
        half_height: f64,
    },
    /// Upward line `A + it`, `|t| ≤ height`, split into Gauss–Legendre panels
    /// whose width grows like `|t|/4` from `base_width` up to `max_width`.
    Sigma1VerticalLine {
        /// Abscissa `A`.
        abscissa: f64,
        /// Truncation height `T`.
        height: f64,
        /// Panel width at `t = 0`.
        base_width: f64,
        /// Largest panel width.
        max_width: f64,
    },
    /// Counterclockwise circle `|w| = radius`.
    Sigma2Circle {
        /// Radius.
        radius: f64,
    },
}

/// Contour with its node budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSpec {
    /// Shape.
    pub kind: ContourKind,
    /// Total nodes (a multiple of 4 for loops; derived from the panels for lines).
    pub nodes: usize,
}

/// Panel edges on `[0, height]` for the vertical line.
fn line_edges(height: f64, base: f64, max: f64) -> Vec<f64> {
    let mut edges = vec![0.0];
    let mut t = 0.0;
    while t < height {
        let w = (0.25 * t).max(base).min(max);
        t = (t + w).min(height);
        edges.push(t);
    }
    edges
}

/// Discretized contour: points and complex weights `dz`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContourPoints {
    /// Points.
    pub z: Vec<C64>,
    /// Weights including `dz/dt`.
    pub dz: Vec<C64>,
}

impl ContourPoints {
    fn push_segment(&mut self, a: C64, b: C64, n: usize) {
        let (t, w) = gauss_legendre_on(0.0, 1.0, n);
        for (ti, wi) in t.iter().zip(&w) {
            self.z.push(a + (b - a) * *ti);
            self.dz.push((b - a) * *wi);
        }
    }

    fn push_arc(&mut self, c: C64, r: f64, th0: f64, th1: f64, n: usize) {
        let (t, w) = gauss_legendre_on(th0, th1, n);
        for (ti, wi) in t.iter().zip(&w) {
            let e = C64::from_polar(r, *ti);
            self.z.push(c + e);
            self.dz.push(C64::new(0.0, 1.0) * e * *wi);
        }
    }

    fn push_circle(&mut self, c: C64, r: f64, n: usize) {
        for i in 0..n {
            let e = C64::from_polar(r, 2.0 * PI * (i as f64 + 0.5) / n as f64);
            self.z.push(c + e);
            self.dz.push(C64::new(0.0, 1.0) * e * (2.0 * PI / n as f64));
        }
    }

    /// `Im = base + L (1+x)/(1−x)` on `Re = a`, `x` Gauss–Legendre on `(−1, 1)`.
    fn push_half_line(&mut self, a: f64, base: f64, scale: f64, n: usize) {
        let (x, w) = gauss_legendre(n);
        for (xi, wi) in x.iter().zip(&w) {
            let y = base + scale * (1.0 + xi) / (1.0 - xi);
            self.z.push(C64::new(a, y));
            self.dz.push(C64::new(0.0, wi * 2.0 * scale / ((1.0 - xi) * (1.0 - xi))));
        }
    }

    /// Close an upper-half-plane path by its mirror image, traversed first and reversed.
    fn mirrored(self) -> Self {
        let mut out = ContourPoints::default();
        for (z, dz) in self.z.iter().zip(&self.dz).rev() {
            out.z.push(z.conj());
            out.dz.push(-dz.conj());
        }
        out.z.extend(self.z);
        out.dz.extend(self.dz);
        out
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.z.len()
    }

    /// True when empty.
    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

impl ContourSpec {
    /// Nodes of the discretization.
    pub fn discretize(&self) -> ContourPoints {
        let mut p = ContourPoints::default();
        match self.kind {
            ContourKind::GammaLoop { left, right, half_height: h } => {
                let c = [
                    C64::new(left, -h),
                    C64::new(right, -h),
                    C64::new(right, h),
                    C64::new(left, h),
                    C64::new(left, -h),
                ];
                for s in c.windows(2) {
                    p.push_segment(s[0], s[1], self.nodes / 4);
                }
            }
            ContourKind::Sigma1VerticalLine { abscissa, height, base_width, max_width } => {
                let e = line_edges(height, base_width, max_width);
                let mut ts: Vec<(f64, f64)> = e.windows(2).rev().map(|w| (-w[1], -w[0])).collect();
                ts.extend(e.windows(2).map(|w| (w[0], w[1])));
                for (lo, hi) in ts {
                    p.push_segment(C64::new(abscissa, lo), C64::new(abscissa, hi), LINE_PANEL_NODES);
                }
            }
            ContourKind::Sigma2Circle { radius } => p.push_circle(C64::new(0.0, 0.0), radius, self.nodes),
        }
        p
    }

    /// Vertical line with its node count filled in.
    pub fn vertical_line(abscissa: f64, height: f64, base_width: f64, max_width: f64) -> Self {
        let panels = line_edges(height, base_width, max_width).len() - 1;
        ContourSpec {
            kind: ContourKind::Sigma1VerticalLine { abscissa, height, base_width, max_width },
            nodes: 2 * panels * LINE_PANEL_NODES,
        }
    }

    /// Refined copy: loops get twice the nodes, the line twice the height at
    /// half the panel widths.
    pub fn doubled(&self) -> Self {
        match self.kind {
            ContourKind::Sigma1VerticalLine { abscissa, height, base_width, max_width } => {
                Self::vertical_line(abscissa, 2.0 * height, 0.5 * base_width, 0.5 * max_width)
            }
            _ => ContourSpec { kind: self.kind, nodes: 2 * self.nodes },
        }
    }

    /// Exact winding number around `a` for closed contours; `None` for the line
    /// or when `a` lies on the contour.
    pub fn winding_number(&self, a: C64) -> Option<i32> {
        match self.kind {
            ContourKind::GammaLoop { left, right, half_height: h } => {
                let on_x = (a.re - left).abs() < 1e-300 || (a.re - right).abs() < 1e-300;
                let on_y = (a.im.abs() - h).abs() < 1e-300;
                if (on_x && a.im.abs() <= h) || (on_y && a.re >= left && a.re <= right) {
                    return None;
                }
                let c = [C64::new(left, -h), C64::new(right, -h), C64::new(right, h), C64::new(left, h)];
                let mut total = 0.0;
                for i in 0..4 {
                    total += ((c[(i + 1) % 4] - a) / (c[i] - a)).arg();
                }
                Some((total / (2.0 * PI)).round() as i32)
            }
            ContourKind::Sigma2Circle { radius } => {
                let r = a.norm();
                if (r - radius).abs() < 1e-300 {
                    None
                } else {
                    Some(i32::from(r < radius))
                }
            }
            ContourKind::Sigma1VerticalLine { .. } => None,
        }
    }
}

/// Gap-probability problem `P(ξ₁ ≤ λ_min ≤ λ_max ≤ ξ₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleProblem {
    /// Population model.
    pub model: SpikedModel,
    /// `π_k = 1/ℓ_k`, all `N` of them.
    pub pis: Vec<f64>,
    /// Right strip constant.
    pub q1: f64,
    /// Left strip constant.
    pub q2: f64,
    /// Lower gap end, `0` for a max-only problem.
    pub xi1: f64,
    /// Upper gap end, `None` for `+∞`.
    pub xi2: Option<f64>,
}

impl OracleProblem {
    /// Problem with explicit `q₁, q₂`.
    pub fn new(model: SpikedModel, q1: f64, q2: f64, xi1: f64, xi2: Option<f64>) -> Result<Self> {
        let pis = model.pis();
        let (lo, hi) = pis.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &p| (a.min(p), b.max(p)));
        if !(0.0 < q2 && q2 < lo && hi < q1 && q1.is_finite()) {
            return Err(Error::domain(format!("need 0 < q2 < min π = {lo} ≤ max π = {hi} < q1, got q1 = {q1}, q2 = {q2}")));
        }
        if !(xi1 >= 0.0 && xi1.is_finite()) {
            return Err(Error::domain("xi1 must be finite and nonnegative"));
        }
        if let Some(x2) = xi2 {
            if !(x2 > xi1 && x2.is_finite()) {
                return Err(Error::domain("xi2 must exceed xi1"));
            }
        }
        Ok(OracleProblem { model, pis, q1, q2, xi1, xi2 })
    }

    /// Problem with `q₂ = 0.6 min π`, `q₁ = max π + 0.3`.
    pub fn with_default_strip(model: SpikedModel, xi1: f64, xi2: Option<f64>) -> Result<Self> {
        let pis = model.pis();
        let lo = pis.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = pis.iter().copied().fold(0.0, f64::max);
        Self::new(model, hi + 0.3, 0.6 * lo, xi1, xi2)
    }

    /// Desk-scale guard `N ≤ 16`, `M ≤ 64`.
    pub fn check_guard(&self) -> Result<()> {
        if self.model.n > GUARD_N || self.model.m > GUARD_M {
            return Err(Error::Guard(format!(
                "oracle limited to N ≤ {GUARD_N}, M ≤ {GUARD_M}; got N = {}, M = {}",
                self.model.n, self.model.m
            )));
        }
        Ok(())
    }

    fn min_pi(&self) -> f64 {
        self.pis.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn max_pi(&self) -> f64 {
        self.pis.iter().copied().fold(0.0, f64::max)
    }
}

/// The three contours of a problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleContours {
    /// Loop `Γ` around the `π_k`.
    pub gamma: ContourSpec,
    /// Vertical line `Σ₁`.
    pub sigma1: ContourSpec,
    /// Circle `Σ₂`.
    pub sigma2: ContourSpec,
}

impl OracleContours {
    /// Default contours: rectangle halfway into the strip (64 nodes a side),
    /// line at `q₁ + 0.1` truncated where the integrand has decayed by `1e-18`,
    /// circle of radius `0.8 q₂` (256 nodes).
    pub fn default_for(prob: &OracleProblem) -> Self {
        let (lo, hi) = (prob.min_pi(), prob.max_pi());
        let gamma = ContourSpec {
            kind: ContourKind::GammaLoop {
                left: lo - 0.5 * (lo - prob.q2),
                right: hi + 0.5 * (prob.q1 - hi),
                half_height: 0.2,
            },
            nodes: 256,
        };
        let a = prob.q1 + 0.1;
        let m = prob.model.m as f64;
        let decay = |t: f64| {
            let w = C64::new(a, t);
            let mut l = -m * (w.norm() / a).ln();
            for &p in &prob.pis {
                l += ((w - p).norm() / (a - p)).ln();
            }
            l
        };
        let mut height = 1.0;
        while decay(height) > -18.0 * core::f64::consts::LN_10 && height < 1e6 {
            height *= 2.0;
        }
        // a 32-node panel resolves about six periods of e^{iζMt}
        let max_width = 40.0 / (prob.xi1.max(1e-3) * m);
        let sigma1 = ContourSpec::vertical_line(a, height, 1.5f64.min(max_width), max_width);
        let sigma2 = ContourSpec { kind: ContourKind::Sigma2Circle { radius: 0.8 * prob.q2 }, nodes: 256 };
        OracleContours { gamma, sigma1, sigma2 }
    }

    /// Every contour refined once.
    pub fn doubled(&self) -> Self {
        OracleContours { gamma: self.gamma.doubled(), sigma1: self.sigma1.doubled(), sigma2: self.sigma2.doubled() }
    }

    /// Check the admissibility conditions against `prob`.
    pub fn validate(&self, prob: &OracleProblem) -> Result<()> {
        let ContourKind::GammaLoop { left, right, half_height } = self.gamma.kind else {
            return Err(Error::Contour("gamma must be a loop".into()));
        };
        if !(prob.q2 < left && right < prob.q1 && half_height > 0.0) {
            return Err(Error::Contour(format!("loop [{left}, {right}] leaves the strip ({}, {})", prob.q2, prob.q1)));
        }
        for &p in &prob.pis {
            if self.gamma.winding_number(C64::new(p, 0.0)) != Some(1) {
                return Err(Error::Contour(format!("loop does not wind once around π = {p}")));
            }
        }
        for q in [prob.q1, prob.q2] {
            if self.gamma.winding_number(C64::new(q, 0.0)) != Some(0) {
                return Err(Error::Contour(format!("loop winds around q = {q}")));
            }
        }
        match self.sigma1.kind {
            ContourKind::Sigma1VerticalLine { abscissa, height, base_width, max_width }
                if abscissa > prob.q1 && height > 0.0 && base_width > 0.0 && max_width > 0.0 => {}
            _ => return Err(Error::Contour("sigma1 must be a vertical line right of q1".into())),
        }
        match self.sigma2.kind {
            ContourKind::Sigma2Circle { radius } if radius > 0.0 && radius < prob.q1 && radius < left => {}
            _ => return Err(Error::Contour("sigma2 must be a circle of radius in (0, q1) clear of the loop".into())),
        }
        if self.gamma.nodes < 4 || self.sigma2.nodes < 4 || self.sigma1.nodes < LINE_PANEL_NODES {
            return Err(Error::Contour("too few contour nodes".into()));
        }
        Ok(())
    }
}

struct Prepared {
    pts: Vec<C64>,
    dz: Vec<C64>,
    log_f: Vec<C64>,
}

fn prepare(c: &ContourSpec, m: f64, pis: &[f64], sign: f64) -> Prepared {
    let p = c.discretize();
    let log_f = p
        .z
        .iter()
        .map(|&z| {
            let mut l = z.ln() * m;
            for &pi in pis {
                l -= (z - pi).ln();
            }
            l * sign
        })
        .collect();
    Prepared { pts: p.z, dz: p.dz, log_f }
}

fn checked_exp(e: C64) -> Result<C64> {
    if e.re > EXP_LIMIT {
        return Err(Error::Overflow { exponent: e.re });
    }
    Ok(e.exp())
}

struct Engine {
    m: f64,
    q: [f64; 2],
    gamma: Prepared,
    sigma: [Prepared; 2],
}

impl Engine {
    fn new(prob: &OracleProblem, c: &OracleContours) -> Result<Self> {
        c.validate(prob)?;
        let m = prob.model.m as f64;
        Ok(Engine {
            m,
            q: [prob.q1, prob.q2],
            gamma: prepare(&c.gamma, m, &prob.pis, 1.0),
            sigma: [prepare(&c.sigma1, m, &prob.pis, -1.0), prepare(&c.sigma2, m, &prob.pis, -1.0)],
        })
    }

    /// `K_{βα}(η_i, ζ_j)` for all pairs, row-major `etas × zetas`.
    fn block(&self, beta: usize, alpha: usize, etas: &[f64], zetas: &[f64]) -> Result<Vec<C64>> {
        let (g, s) = (&self.gamma, &self.sigma[alpha - 1]);
        let (qb, qa, m) = (self.q[beta - 1], self.q[alpha - 1], self.m);
        let (nz, nw, nj) = (g.pts.len(), s.pts.len(), zetas.len());
        let mut fw = vec![C64::new(0.0, 0.0); nw * nj];
        for b in 0..nw {
            for (j, &zeta) in zetas.iter().enumerate() {
                fw[b * nj + j] = checked_exp((s.pts[b] - qa) * (zeta * m) + s.log_f[b])? * s.dz[b];
            }
        }
        let mut t = vec![C64::new(0.0, 0.0); nz * nj];
        for a in 0..nz {
            let row = &mut t[a * nj..(a + 1) * nj];
            for b in 0..nw {
                let c = (s.pts[b] - g.pts[a]).inv();
                for (r, f) in row.iter_mut().zip(&fw[b * nj..(b + 1) * nj]) {
                    *r += c * f;
                }
            }
        }
        let scale = -m / (4.0 * PI * PI);
        let mut out = vec![C64::new(0.0, 0.0); etas.len() * nj];
        for (i, &eta) in etas.iter().enumerate() {
            for a in 0..nz {
                let f = checked_exp(-(g.pts[a] - qb) * (eta * m) + g.log_f[a])? * g.dz[a] * scale;
                for j in 0..nj {
                    out[i * nj + j] += f * t[a * nj + j];
                }
            }
        }
        if out.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Numerical("non-finite kernel value".into()));
        }
        Ok(out)
    }
}

/// Real kernel value with its imaginary residual and doubling change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    /// Real part on the refined contours.
    pub value: f64,
    /// Absolute imaginary part.
    pub residual: f64,
    /// Change between the base and refined contours.
    pub doubling_delta: f64,
}

fn check_indices(beta: usize, alpha: usize) -> Result<()> {
    if !(1..=2).contains(&beta) || !(1..=2).contains(&alpha) {
        return Err(Error::domain("kernel indices must be 1 or 2"));
    }
    Ok(())
}

/// `K_{βα}(η, ζ)` by double contour quadrature, checked under one refinement.
pub fn kernel_k(
    beta: usize,
    alpha: usize,
    eta: f64,
    zeta: f64,
    prob: &OracleProblem,
    contours: &OracleContours,
) -> Result<KernelValue> {
    check_indices(beta, alpha)?;
    let base = Engine::new(prob, contours)?.block(beta, alpha, &[eta], &[zeta])?[0];
    let fine = Engine::new(prob, &contours.doubled())?.block(beta, alpha, &[eta], &[zeta])?[0];
    let delta = (fine.re - base.re).abs();
    let scale = 1.0 + fine.re.abs();
    if delta > 1e-8 * scale {
        return Err(Error::Convergence { delta });
    }
    if fine.im.abs() > 1e-8 * scale {
        return Err(Error::Numerical(format!("kernel imaginary residual {:e}", fine.im.abs())));
    }
    Ok(KernelValue { value: fine.re, residual: fine.im.abs(), doubling_delta: delta })
}

/// `(Im H₁(η), Im J₁(ζ))`: both single contour integrals
/// `H₁(η) = M/2π ∮_Γ e^{ηM(z−q₁)} z^M Π 1/(z−π) dz` and
/// `J₁(ζ) = M/2π ∫_{Σ₁} e^{−ζM(w−q₁)} w^{−M} Π (w−π) dw` are purely imaginary,
/// so `K₁₁(η, ζ) = −∫₀^∞ H₁(y−η) J₁(y−ζ) dy = ∫₀^∞ h(y−η) j(y−ζ) dy`.
pub fn h1_j1(eta: f64, zeta: f64, prob: &OracleProblem, contours: &OracleContours) -> Result<(f64, f64)> {
    let e = Engine::new(prob, contours)?;
    let (m, q1) = (e.m, prob.q1);
    let mut h = C64::new(0.0, 0.0);
    for a in 0..e.gamma.pts.len() {
        h += checked_exp((e.gamma.pts[a] - q1) * (eta * m) + e.gamma.log_f[a])? * e.gamma.dz[a];
    }
    let s = &e.sigma[0];
    let mut j = C64::new(0.0, 0.0);
    for b in 0..s.pts.len() {
        j += checked_exp(-(s.pts[b] - q1) * (zeta * m) + s.log_f[b])? * s.dz[b];
    }
    let f = m / (2.0 * PI);
    Ok(((h * f).im, (j * f).im))
}

/// Nyström sizes for the gap determinants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NystromSizes {
    /// Gauss–Legendre nodes on `(0, ξ₁)`.
    pub n1: usize,
    /// Mapped Gauss–Legendre nodes on `(ξ₂, ∞)`.
    pub n2: usize,
}

impl Default for NystromSizes {
    fn default() -> Self {
        NystromSizes { n1: 40, n2: 48 }
    }
}

/// Gap probability with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapValue {
    /// Probability (refined contours), clamped into `[0, 1]`.
    pub value: f64,
    /// Unclamped determinant.
    pub raw: f64,
    /// True when clamping changed the value.
    pub clamped: bool,
    /// Largest weighted imaginary kernel entry.
    pub residual: f64,
    /// Change between base and refined contours.
    pub doubling_delta: f64,
    /// Nyström dimension.
    pub dim: usize,
}

fn real_block(vals: &[C64], sr: &[f64], sc: &[f64], factor: f64) -> (Block, f64) {
    let (r, c) = (sr.len(), sc.len());
    let mut data = vec![0.0; r * c];
    let mut residual = 0.0f64;
    for i in 0..r {
        for j in 0..c {
            let v = vals[i * c + j] * (sr[i] * sc[j] * factor);
            data[i * c + j] = v.re;
            residual = residual.max(v.im.abs());
        }
    }
    (Block { rows: r, cols: c, data }, residual)
}

struct Grids {
    t1: Option<QuadratureRule>,
    t2: Option<QuadratureRule>,
}

impl Grids {
    fn new(prob: &OracleProblem, sizes: NystromSizes) -> Result<Self> {
        let t1 = if prob.xi1 > 0.0 { Some(QuadratureRule::interval(0.0, prob.xi1, sizes.n1)?) } else { None };
        let t2 = match prob.xi2 {
            Some(x2) => Some(QuadratureRule::semi_infinite(x2, 4.0 / prob.model.m as f64, sizes.n2)?),
            None => None,
        };
        Ok(Grids { t1, t2 })
    }
}

fn sqrt_weights(r: &QuadratureRule) -> Vec<f64> {
    r.weights.iter().map(|w| w.sqrt()).collect()
}

fn gap_det(engine: &Engine, grids: &Grids, w: f64) -> Result<(f64, f64, usize)> {
    match (&grids.t1, &grids.t2) {
        (Some(a), None) => one_block(engine, 1, a),
        (None, Some(b)) => one_block(engine, 2, b),
        (Some(a), Some(b)) => {
            let (s1, s2) = (sqrt_weights(a), sqrt_weights(b));
            let (k11, r11) = real_block(&engine.block(1, 1, &a.nodes, &a.nodes)?, &s1, &s1, 1.0);
            let (k12, r12) = real_block(&engine.block(1, 2, &a.nodes, &b.nodes)?, &s1, &s2, 1.0 / w);
            let (k21, r21) = real_block(&engine.block(2, 1, &b.nodes, &a.nodes)?, &s2, &s1, w);
            let (k22, r22) = real_block(&engine.block(2, 2, &b.nodes, &b.nodes)?, &s2, &s2, 1.0);
            let d = block_det_2x2(&k11, &k12, &k21, &k22)?;
            Ok((d, r11.max(r12).max(r21).max(r22), a.len() + b.len()))
        }
        (None, None) => Ok((1.0, 0.0, 0)),
    }
}

fn one_block(engine: &Engine, idx: usize, rule: &QuadratureRule) -> Result<(f64, f64, usize)> {
    let s = sqrt_weights(rule);
    let (k, r) = real_block(&engine.block(idx, idx, &rule.nodes, &rule.nodes)?, &s, &s, 1.0);
    Ok((det_identity_minus(&k.data, k.rows)?, r, k.rows))
}

fn gap(prob: &OracleProblem, contours: &OracleContours, sizes: NystromSizes, w: f64) -> Result<GapValue> {
    prob.check_guard()?;
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::domain("conjugation constant W must be positive"));
    }
    let grids = Grids::new(prob, sizes)?;
    let (d0, _, _) = gap_det(&Engine::new(prob, contours)?, &grids, w)?;
    let (d1, residual, dim) = gap_det(&Engine::new(prob, &contours.doubled())?, &grids, w)?;
    let delta = (d1 - d0).abs();
    if delta > DOUBLING_TOLERANCE {
        return Err(Error::Convergence { delta });
    }
    if !(-1e-8..=1.0 + 1e-8).contains(&d1) {
        return Err(Error::Numerical(format!("gap determinant {d1} outside [0, 1]")));
    }
    let value = d1.clamp(0.0, 1.0);
    Ok(GapValue { value, raw: d1, clamped: value != d1, residual, doubling_delta: delta, dim })
}

/// `P(λ_min ≥ ξ₁) = det(I − K₁₁)` on `L²(0, ξ₁)`; `xi2` must be `None`.
pub fn gap_probability_min(prob: &OracleProblem, contours: &OracleContours, sizes: NystromSizes) -> Result<GapValue> {
    if prob.xi2.is_some() || prob.xi1 <= 0.0 {
        return Err(Error::domain("min-side gap needs xi1 > 0 and xi2 = ∞"));
    }
    gap(prob, contours, sizes, 1.0)
}

/// `P(λ_max ≤ ξ₂) = det(I − K₂₂)` on `L²(ξ₂, ∞)`; `xi1` must be `0`.
pub fn gap_probability_max(prob: &OracleProblem, contours: &OracleContours, sizes: NystromSizes) -> Result<GapValue> {
    if prob.xi1 != 0.0 || prob.xi2.is_none() {
        return Err(Error::domain("max-side gap needs xi1 = 0 and finite xi2"));
    }
    gap(prob, contours, sizes, 1.0)
}

/// `P(ξ₁ ≤ λ_min ≤ λ_max ≤ ξ₂)` from the 2 × 2 block determinant with the
/// off-diagonal blocks conjugated by `W`.
pub fn gap_probability_joint(
    prob: &OracleProblem,
    contours: &OracleContours,
    sizes: NystromSizes,
    w: f64,
) -> Result<GapValue> {
    if prob.xi1 <= 0.0 || prob.xi2.is_none() {
        return Err(Error::domain("joint gap needs 0 < xi1 < xi2 < ∞"));
    }
    gap(prob, contours, sizes, w)
}

/// Summary of one oracle evaluation, for export.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    /// `N`.
    pub n: usize,
    /// `M`.
    pub m: usize,
    /// `q₁`.
    pub q1: f64,
    /// `q₂`.
    pub q2: f64,
    /// `ξ₁`.
    pub xi1: f64,
    /// `ξ₂`, `None` for `∞`.
    pub xi2: Option<f64>,
    /// Base node counts `(Γ, Σ₁, Σ₂)`.
    pub contour_nodes: (usize, usize, usize),
    /// Result.
    pub gap: GapValue,
}

impl OracleReport {
    /// Bundle a problem, its contours and a result.
    pub fn new(prob: &OracleProblem, contours: &OracleContours, gap: GapValue) -> Self {
        OracleReport {
            n: prob.model.n,
            m: prob.model.m,
            q1: prob.q1,
            q2: prob.q2,
            xi1: prob.xi1,
            xi2: prob.xi2,
            contour_nodes: (contours.gamma.nodes, contours.sigma1.nodes, contours.sigma2.nodes),
            gap,
        }
    }
}

// ---------------------------------------------------------------------------
// Scaled limits

/// Which min-side scaling the limit check uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitCase {
    /// Tracy–Widom edge, `α = 2/3`, centered at the saddle `p = γ/(γ−1)`.
    Edge,
    /// Separated smallest spike, `α = 1/2`, centered at `π_N`.
    Separated,
}

/// One grid point of the limit check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitRow {
    /// `u`.
    pub u: f64,
    /// `v`.
    pub v: f64,
    /// `|Z_M 𝓗(x+u) − 𝓗∞(x+u)|`.
    pub h_error: f64,
    /// `|Z_M⁻¹ 𝓙(x+v) − 𝓙∞(x+v)|`.
    pub j_error: f64,
}

/// Limit-check table.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitCheck {
    /// Case.
    pub case: LimitCase,
    /// `M`.
    pub m: usize,
    /// Multiplicity `k`.
    pub k: usize,
    /// Rows.
    pub rows: Vec<LimitRow>,
}

impl LimitCheck {
    /// `max(h_error, j_error)` over the table.
    pub fn max_error(&self) -> f64 {
        self.rows.iter().fold(0.0, |a, r| a.max(r.h_error).max(r.j_error))
    }
}

struct Scaled {
    m: f64,
    c: f64,
    mu: f64,
    s: f64,
    q: f64,
    ratio_nm: f64,
    k: usize,
    r: usize,
    others: Vec<f64>,
}

impl Scaled {
    /// `M(f(z) − f(c))` with `f(z) = −μ(z−q) + log z − (N/M) log(z−1)`.
    fn mf(&self, z: C64) -> C64 {
        let c = C64::new(self.c, 0.0);
        ((z - c) * (-self.mu) + (z / c).ln() - ((z - 1.0).ln() - (c - 1.0).ln()) * self.ratio_nm) * self.m
    }

    /// `log g(z) − log g(c)` with `g(z) = (z−1)^{−r} Π_{others}(z−π)`.
    fn log_g_ratio(&self, z: C64) -> C64 {
        let c = C64::new(self.c, 0.0);
        let mut l = -((z - 1.0).ln() - (c - 1.0).ln()) * self.r as f64;
        for &p in &self.others {
            l += (z - p).ln() - (c - p).ln();
        }
        l
    }

    fn h(&self, u: f64, g: &ContourPoints) -> Result<C64> {
        let mut acc = C64::new(0.0, 0.0);
        for (&z, &dz) in g.z.iter().zip(&g.dz) {
            let e = (z - self.q) * (self.s * u) + self.mf(z) - self.log_g_ratio(z)
                - (((z - self.c) * self.s).ln() * self.k as f64);
            acc += checked_exp(e)? * dz;
        }
        Ok(acc * (self.s / (2.0 * PI)))
    }

    fn j(&self, v: f64, sig: &ContourPoints) -> Result<C64> {
        let mut acc = C64::new(0.0, 0.0);
        for (&w, &dw) in sig.z.iter().zip(&sig.dz) {
            let mut e = -(w - self.q) * (self.s * v) - self.mf(w) + self.log_g_ratio(w);
            if self.k > 0 {
                e += ((w - self.c) * self.s).ln() * self.k as f64;
            }
            acc += checked_exp(e)? * dw;
        }
        Ok(acc * (self.s / (2.0 * PI)))
    }
}

/// Edge-case limits `𝓗∞(u) = e^{−εu}/2π ∫ e^{ua − a³/3} a^{−k} da` (rays at
/// `±2π/3` through `a = 1`) and `𝓙∞(v) = e^{εv}/2π ∫ e^{−vb + b³/3} b^k db`
/// (rays at `±π/3` through `0`).
pub fn edge_limits(k: usize, u: f64, v: f64, eps: f64) -> (C64, C64) {
    let mut g = ContourPoints::default();
    let up = C64::from_polar(1.0, 2.0 * PI / 3.0);
    ray(&mut g, C64::new(1.0, 0.0), up, 2.0, 160);
    let g = g.mirrored();
    let mut h = C64::new(0.0, 0.0);
    for (&a, &da) in g.z.iter().zip(&g.dz) {
        h += (a * u - a * a * a / 3.0).exp() * a.powi(-(k as i32)) * da;
    }
    let mut s = ContourPoints::default();
    ray(&mut s, C64::new(0.0, 0.0), C64::from_polar(1.0, PI / 3.0), 2.0, 160);
    let s = s.mirrored();
    let mut j = C64::new(0.0, 0.0);
    for (&b, &db) in s.z.iter().zip(&s.dz) {
        j += (-b * v + b * b * b / 3.0).exp() * b.powi(k as i32) * db;
    }
    (h * ((-eps * u).exp() / (2.0 * PI)), j * ((eps * v).exp() / (2.0 * PI)))
}

fn ray(p: &mut ContourPoints, start: C64, dir: C64, scale: f64, n: usize) {
    let (x, w) = gauss_legendre(n);
    for (xi, wi) in x.iter().zip(&w) {
        let t = scale * (1.0 + xi) / (1.0 - xi);
        p.z.push(start + dir * t);
        p.dz.push(dir * (wi * 2.0 * scale / ((1.0 - xi) * (1.0 - xi))));
    }
}

/// `|Z_M 𝓗 − 𝓗∞|` and `|Z_M⁻¹ 𝓙 − 𝓙∞|` on `grid` for the min side of `model`
/// (edge case when the smallest spike is at or above the threshold, separated
/// case otherwise), evaluated at `x + u`, `x + v`.
pub fn scaled_kernel_limit_check(model: &SpikedModel, x: f64, grid: &[(f64, f64)], eps: f64) -> Result<LimitCheck> {
    if !(eps > 0.0) {
        return Err(Error::domain("epsilon must be positive"));
    }
    let gamma = model.gamma;
    let m = model.m as f64;
    let ratio_nm = model.n as f64 / m;
    let nonunit: Vec<f64> = model.pis().into_iter().filter(|&p| (p - 1.0).abs() > 1e-12).collect();
    let r = nonunit.len();
    let regime = classify(model);
    let (case, scaled, gpts, spts) = match regime.min {
        Branch::TracyWidom { k } => {
            let p = gamma / (gamma - 1.0);
            let others: Vec<f64> = nonunit.iter().copied().filter(|&q| (q - p).abs() > 1e-9).collect();
            let sc = Scaled {
                m,
                c: p,
                mu: (1.0 - 1.0 / gamma).powi(2),
                s: (gamma - 1.0).powf(4.0 / 3.0) / gamma * m.cbrt(),
                q: 0.0,
                ratio_nm,
                k,
                r,
                others,
            };
            let sc = Scaled { q: p + eps / sc.s, ..sc };
            let delta = eps / (2.0 * sc.s);
            let t_end = (3f64.sqrt() - 1.0) * (p - 1.0);
            if delta >= 0.5 * t_end {
                return Err(Error::Contour("M too small for the edge contour".into()));
            }
            let dir = C64::from_polar(1.0, 2.0 * PI / 3.0);
            let zs = dir * t_end + p;
            let radius = (zs - 1.0).norm();
            for &o in &sc.others {
                if !(o > 1.0 - radius + 0.05 && o < p - delta - 0.05) {
                    return Err(Error::Contour(format!("spike π = {o} too close to the edge contour")));
                }
            }
            let n = 200;
            let mut g = ContourPoints::default();
            g.push_arc(C64::new(p, 0.0), delta, 0.0, 2.0 * PI / 3.0, n);
            let t_mid = delta + 0.2 * (t_end - delta);
            g.push_segment(dir * delta + p, dir * t_mid + p, n);
            g.push_segment(dir * t_mid + p, zs, n);
            g.push_arc(C64::new(1.0, 0.0), radius, (zs - 1.0).arg(), PI, n);
            let mut s = ContourPoints::default();
            let up = C64::from_polar(1.0, PI / 3.0);
            s.push_segment(C64::new(p, 0.0), up * 0.2 + p, n);
            s.push_segment(up * 0.2 + p, up + p, n);
            s.push_half_line(p + 0.5, up.im, 3.0, 400);
            (LimitCase::Edge, sc, g.mirrored(), s.mirrored())
        }
        Branch::Gaussian { k, ell } => {
            let pi_n = 1.0 / ell;
            let (mu, nu) = gaussian_scaling(ell, gamma, Side::Min)?;
            let s = nu * m.sqrt();
            let others: Vec<f64> = nonunit.iter().copied().filter(|&q| (q - pi_n).abs() > 1e-9).collect();
            let z2 = 1.0 / (mu * pi_n);
            let r_bulk = (z2 - 1.0).abs();
            if 2.0 / s + r_bulk >= pi_n - 1.0 {
                return Err(Error::Contour("loops around π_N and 1 overlap; M too small".into()));
            }
            for &o in &others {
                if (o - 1.0).abs() > r_bulk - 0.05 {
                    return Err(Error::Contour(format!("spike π = {o} outside the bulk loop")));
                }
            }
            let sc = Scaled { m, c: pi_n, mu, s, q: pi_n + eps / s, ratio_nm, k, r, others };
            let mut g = ContourPoints::default();
            g.push_circle(C64::new(pi_n, 0.0), 2.0 / s, 256);
            g.push_circle(C64::new(1.0, 0.0), r_bulk, 512);
            let mut sig = ContourPoints::default();
            let (xs, ws) = gauss_legendre(600);
            let l = 3.0 / s;
            for (xi, wi) in xs.iter().zip(&ws) {
                let d = 1.0 - xi * xi;
                sig.z.push(C64::new(pi_n + 2.0 * eps / s, l * xi / d));
                sig.dz.push(C64::new(0.0, wi * l * (1.0 + xi * xi) / (d * d)));
            }
            (LimitCase::Separated, sc, g, sig)
        }
    };
    let i = C64::new(0.0, 1.0);
    let mut rows = Vec::with_capacity(grid.len());
    for &(u, v) in grid {
        let (hu, jv) = (x + u, x + v);
        let (h_inf, j_inf) = match case {
            LimitCase::Edge if scaled.k == 0 => {
                (i * (-eps * hu).exp() * airy_ai(hu)?, i * (eps * jv).exp() * airy_ai(jv)?)
            }
            LimitCase::Edge => edge_limits(scaled.k, hu, jv, eps),
            LimitCase::Separated => (
                i * h_inf_case2(scaled.k, hu, eps)?,
                i * (j_inf_case2(scaled.k, jv, eps)? / (2.0 * PI).sqrt()),
            ),
        };
        let h = scaled.h(hu, &gpts)?;
        let j = scaled.j(jv, &spts)?;
        rows.push(LimitRow { u, v, h_error: (h - h_inf).norm(), j_error: (j - j_inf).norm() });
    }
    Ok(LimitCheck { case, m: model.m, k: scaled.k, rows })
}

// ---------------------------------------------------------------------------
// Off-diagonal blocks

/// Balanced off-diagonal kernels `W⁻¹𝒦₁₂(u, v)` and `W𝒦₂₁(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffDiagonal {
    /// `W⁻¹𝒦₁₂`.
    pub k12: f64,
    /// `W𝒦₂₁`.
    pub k21: f64,
    /// Largest imaginary residual.
    pub residual: f64,
}

/// Off-diagonal kernels of the joint `(λ_min, λ_max)` operator under the
/// edge scalings of both sides, for a null model. `Γ₁` is the circle through
/// `p₁` and `(p₂+1)/2`, `Σ₂` the circle `|ω| = p₂`, `Γ₂` the circle through
/// `p₂` and `(1+p₁)/2`, `Σ₁` the line `Re ω = p₁`.
pub fn off_diagonal_kernels(
    model: &SpikedModel,
    x: f64,
    y: f64,
    u: f64,
    v: f64,
    eps: f64,
    nodes: usize,
) -> Result<OffDiagonal> {
    if !model.spikes.iter().all(|s| s.value == 1.0) {
        return Err(Error::Regime("off-diagonal kernels implemented for the null model".into()));
    }
    let (g, m) = (model.gamma, model.m as f64);
    let c = model.n as f64 / m;
    let (p1, p2) = (g / (g - 1.0), g / (g + 1.0));
    let (mu1, mu2) = ((1.0 - 1.0 / g).powi(2), (1.0 + 1.0 / g).powi(2));
    let s1 = (g - 1.0).powf(4.0 / 3.0) / g * m.cbrt();
    let s2 = (g + 1.0).powf(4.0 / 3.0) / g * m.cbrt();
    let (q1, q2) = (p1 + eps / s1, p2 - eps / s2);
    // M(f_i(z) − f_i(p_i)); the q_i shift cancels.
    let mf = |z: C64, p: f64, mu: f64| {
        let pc = C64::new(p, 0.0);
        ((z - pc) * (-mu) + (z / pc).ln() - ((z - 1.0).ln() - (pc - 1.0).ln()) * c) * m
    };
    let circle = |center: f64, radius: f64| {
        let mut p = ContourPoints::default();
        p.push_circle(C64::new(center, 0.0), radius, nodes);
        p
    };
    let a = 0.5 * (p2 + 1.0);
    let gamma1 = circle(0.5 * (p1 + a), 0.5 * (p1 - a));
    let sigma2 = circle(0.0, p2);
    let b = 0.5 * (1.0 + p1);
    let gamma2 = circle(0.5 * (p2 + b), 0.5 * (b - p2));
    let mut sigma1 = ContourPoints::default();
    let (xs, ws) = gauss_legendre(nodes);
    for (xi, wi) in xs.iter().zip(&ws) {
        let d = 1.0 - xi * xi;
        sigma1.z.push(C64::new(p1, xi / d));
        sigma1.dz.push(C64::new(0.0, wi * (1.0 + xi * xi) / (d * d)));
    }
    let double = |gz: &ContourPoints, fz: &dyn Fn(C64) -> C64, sw: &ContourPoints, fw: &dyn Fn(C64) -> C64| {
        let hz: Vec<C64> = gz.z.iter().zip(&gz.dz).map(|(&z, &dz)| fz(z) * dz).collect();
        let jw: Vec<C64> = sw.z.iter().zip(&sw.dz).map(|(&w, &dw)| fw(w) * dw).collect();
        let mut acc = C64::new(0.0, 0.0);
        for (z, h) in gz.z.iter().zip(&hz) {
            for (w, j) in sw.z.iter().zip(&jw) {
                acc += h * j / (w - z);
            }
        }
        acc
    };
    let h1 = |z: C64| (mf(z, p1, mu1) + (z - q1) * (s1 * (x + u))).exp();
    let j2 = |w: C64| (-mf(w, p2, mu2) + (w - q2) * (s2 * (y + v))).exp();
    let k12 = double(&gamma1, &h1, &sigma2, &j2) * (-1.0 / s1);
    let h2 = |z: C64| (mf(z, p2, mu2) - (z - q2) * (s2 * (y + u))).exp();
    let j1 = |w: C64| (-mf(w, p1, mu1) - (w - q1) * (s1 * (x + v))).exp();
    let k21 = double(&gamma2, &h2, &sigma1, &j1) * (-1.0 / s2);
    if !(k12.re.is_finite() && k21.re.is_finite()) {
        return Err(Error::Numerical("non-finite off-diagonal kernel".into()));
    }
    Ok(OffDiagonal { k12: k12.re, k21: k21.re, residual: k12.im.abs().max(k21.im.abs()) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_winding() {
        let c = ContourSpec { kind: ContourKind::GammaLoop { left: 0.5, right: 1.5, half_height: 0.2 }, nodes: 256 };
        assert_eq!(c.winding_number(C64::new(1.0, 0.0)), Some(1));
        assert_eq!(c.winding_number(C64::new(2.0, 0.0)), Some(0));
        assert_eq!(c.winding_number(C64::new(0.5, 0.0)), None);
        let p = c.discretize();
        let w: C64 = p.z.iter().zip(&p.dz).map(|(z, dz)| dz / (z - 1.0)).sum();
        assert!((w - C64::new(0.0, 2.0 * PI)).norm() < 1e-10);
    }

    #[test]
    fn mirrored_path_is_closed_loop() {
        let mut p = ContourPoints::default();
        p.push_arc(C64::new(0.0, 0.0), 1.0, 0.0, PI, 64);
        let p = p.mirrored();
        let w: C64 = p.z.iter().zip(&p.dz).map(|(z, dz)| dz / z).sum();
        assert!((w - C64::new(0.0, 2.0 * PI)).norm() < 1e-12);
    }
}
