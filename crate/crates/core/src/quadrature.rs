//! Periodic quadrature for integrands carrying a logarithmic singularity,
//! and the boundary integrals shared by the contour and dynamics modules.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::bessel::{self, EULER_GAMMA};
use crate::kernels::{KernelSet, PlanePoint};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, QuadratureError>;

/// Weights W_l(t) with ∫_0^{2π} log|2 sin((t−η)/2)| f(η) dη ≈ Σ_l W_l(t) f(η_l),
/// η_l = 2πl/n. Exact for trigonometric polynomials of degree below n/2.
pub fn log_weights(n: usize, t: f64) -> Result<Vec<f64>> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(QuadratureError::InvalidArgument(format!("node count {n} must be even and at least 4")));
    }
    Ok(LogWeights::new(n).at(t).weights)
}

/// Planned FFT for repeated weight construction on one node count.
pub(crate) struct LogWeights {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl LogWeights {
    pub fn new(n: usize) -> Self {
        LogWeights { n, fft: FftPlanner::new().plan_fft_forward(n) }
    }

    pub fn at(&self, t: f64) -> ProductRow {
        let n = self.n;
        let nf = n as f64;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (m, b) in buf.iter_mut().enumerate().take(n / 2).skip(1) {
            *b = Complex64::from_polar(-2.0 * PI / (nf * m as f64), m as f64 * t);
        }
        buf[n / 2] = Complex64::from_polar(-2.0 * PI / (nf * nf), 0.5 * nf * t);
        self.fft.process(&mut buf);
        let h = 2.0 * PI / nf;
        let log_sin = (0..n)
            .map(|l| {
                let sn = (2.0 * (0.5 * (t - h * l as f64)).sin()).abs();
                if sn < 1e-13 {
                    f64::NEG_INFINITY
                } else {
                    sn.ln()
                }
            })
            .collect();
        ProductRow { t, weights: buf.iter().map(|c| c.re).collect(), log_sin }
    }
}

/// Product weights and log|2 sin((t − η_l)/2)| for one target parameter t;
/// −∞ marks the node coinciding with t.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ProductRow {
    pub t: f64,
    pub weights: Vec<f64>,
    pub log_sin: Vec<f64>,
}

/// (1/2π)∫_0^{2π} log|1 − x e^{iθ}| cos(nθ) dθ for 0 ≤ x ≤ 1, equal to −x^n/(2n).
///
/// Uses the trapezoidal rule for x < 1 and product integration at x = 1.
pub fn log_cosine_moment(x: f64, n: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(QuadratureError::InvalidArgument(format!("x = {x} outside [0, 1]")));
    }
    let nf = n as f64;
    if x == 1.0 {
        let nodes = (4 * n as usize + 64).next_power_of_two();
        let w = LogWeights::new(nodes).at(0.0).weights;
        let h = 2.0 * PI / nodes as f64;
        let s: f64 = w.iter().enumerate().map(|(l, wl)| wl * (nf * h * l as f64).cos()).sum();
        return Ok(s / (2.0 * PI));
    }
    let decay = if x > 0.0 { 30.0 / -x.ln() } else { 1.0 };
    let nodes = (decay.ceil() as usize).max(1024).max(4 * n as usize).next_power_of_two();
    let h = 2.0 * PI / nodes as f64;
    let s: f64 = (0..nodes)
        .map(|l| {
            let t = h * l as f64;
            let mod2 = 1.0 - 2.0 * x * t.cos() + x * x;
            0.5 * mod2.ln() * (nf * t).cos()
        })
        .sum();
    Ok(s / nodes as f64)
}

/// K_0(√u) for complex u off the negative real axis, by the ascending series.
fn k0_complex_sqrt(u: Complex64) -> Complex64 {
    let q = u * 0.25;
    let mut term = Complex64::new(1.0, 0.0);
    let mut i0 = term;
    let mut s = Complex64::new(0.0, 0.0);
    let mut harm = 0.0;
    let mut m = 0u32;
    loop {
        m += 1;
        let mf = m as f64;
        term = term * q / (mf * mf);
        harm += 1.0 / mf;
        i0 += term;
        s += term * harm;
        if term.norm() * harm <= 1e-18 * s.norm().max(i0.norm()) && q.norm() < 0.5 * mf * mf {
            break;
        }
    }
    -(q.ln() * 0.5 + EULER_GAMMA) * i0 + s
}

/// (1/2π)∫_0^{2π} K_0(λ|x − y e^{iθ}|) cos(nθ) dθ for 0 < x ≤ y, equal to I_n(λx)K_n(λy).
///
/// For x < y the integral is moved to the circle |w| = (y/x)^{3/4} inside the
/// annulus of analyticity, where the n-th coefficient no longer decays; for
/// x = y the logarithmic singularity is integrated with product weights.
pub fn screened_cosine_moment(lambda: f64, x: f64, y: f64, n: u32) -> Result<f64> {
    if !(lambda > 0.0 && x > 0.0 && x <= y && y.is_finite()) {
        return Err(QuadratureError::InvalidArgument(format!("need λ > 0 and 0 < x ≤ y, got λ = {lambda}, x = {x}, y = {y}")));
    }
    let nf = n as f64;
    if x == y {
        let nodes = (4 * n as usize + 128).next_power_of_two();
        let w = LogWeights::new(nodes).at(0.0).weights;
        let h = 2.0 * PI / nodes as f64;
        let shift = (0.5 * lambda).ln() + EULER_GAMMA;
        let (mut prod, mut smooth) = (0.0, 0.0);
        for (l, wl) in w.iter().enumerate() {
            let t = h * l as f64;
            let z = 2.0 * lambda * x * (0.5 * t).sin().abs();
            let (i0m1, ser) = bessel::i0m1_and_harmonic_series(z);
            let c = (nf * t).cos();
            // K_0(z) = −log|2 sin(t/2)|·I_0(z) − (log(λx/2) + γ)·I_0(z) + S(z)
            prod -= wl * (1.0 + i0m1) * c;
            smooth += (-(shift + x.ln()) * (1.0 + i0m1) + ser) * c;
        }
        return Ok((prod + h * smooth) / (2.0 * PI));
    }
    let ratio_ln = (y / x).ln();
    let rho = (0.75 * ratio_ln).exp();
    let nodes = ((120.0 / ratio_ln).ceil() as usize).max(256).max(4 * n as usize).next_power_of_two();
    let h = 2.0 * PI / nodes as f64;
    let l2 = lambda * lambda;
    let mut acc = Complex64::new(0.0, 0.0);
    for l in 0..nodes {
        let t = h * l as f64;
        let w = Complex64::from_polar(rho, t);
        let u = (Complex64::new(x, 0.0) - w * y) * (Complex64::new(x, 0.0) - w.inv() * y) * l2;
        acc += k0_complex_sqrt(u) * Complex64::from_polar(rho.powi(-(n as i32)), -nf * t);
    }
    Ok(acc.re / nodes as f64)
}

/// A closed curve sampled at η_l = 2πl/n: positions and parameter derivatives.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CurveSamples {
    pub z: Vec<PlanePoint>,
    pub dz: Vec<PlanePoint>,
}

impl CurveSamples {
    pub fn len(&self) -> usize {
        self.z.len()
    }
}

/// A kernel G(r) = a(r)·log r + s(r) with a, s smooth in r².
pub(crate) trait SplitKernel {
    fn value(&self, r: f64) -> f64;
    /// (G(r), a(r), s(r)).
    fn parts(&self, r: f64) -> (f64, f64, f64);
}

/// G_{k,j} of a layer pair.
pub(crate) struct LayerKernel<'a> {
    pub ks: &'a KernelSet,
    pub k: usize,
    pub j: usize,
}

impl SplitKernel for LayerKernel<'_> {
    #[inline]
    fn value(&self, r: f64) -> f64 {
        self.ks.g(self.k, self.j, r)
    }

    #[inline]
    fn parts(&self, r: f64) -> (f64, f64, f64) {
        self.ks.parts(self.k, self.j, r)
    }
}

/// Discretization of one source curve for one target.
#[derive(Clone, Copy)]
pub(crate) enum Rule<'a> {
    Trapezoid,
    /// Product integration about source node `shift`, using the row built for η_0
    /// shifted cyclically, or about the row's own parameter when `shift` is 0.
    Product { row: &'a ProductRow, shift: usize },
}

/// V = ∫_0^{2π} G(|p − z(η)|) z′(η) dη.
pub(crate) fn curve_integral<K: SplitKernel>(kernel: &K, p: PlanePoint, src: &CurveSamples, rule: Rule) -> PlanePoint {
    let n = src.len();
    let h = 2.0 * PI / n as f64;
    let (mut ax, mut ay) = (0.0, 0.0);
    match rule {
        Rule::Trapezoid => {
            for (z, dz) in src.z.iter().zip(&src.dz) {
                let g = kernel.value((p - *z).norm());
                ax += g * dz.x;
                ay += g * dz.y;
            }
            PlanePoint::new(h * ax, h * ay)
        }
        Rule::Product { row, shift } => {
            let (mut wx, mut wy) = (0.0, 0.0);
            for l in 0..n {
                let (z, dz) = (src.z[l], src.dz[l]);
                let (g, a, s) = kernel.parts((p - z).norm());
                let idx = (l + n - shift) % n;
                let ls = row.log_sin[idx];
                let rem = if ls == f64::NEG_INFINITY { s + a * dz.norm().ln() } else { g - a * ls };
                let wa = row.weights[idx] * a;
                wx += wa * dz.x;
                wy += wa * dz.y;
                ax += rem * dz.x;
                ay += rem * dz.y;
            }
            PlanePoint::new(wx + h * ax, wy + h * ay)
        }
    }
}

/// How the interaction between two distinct curves is discretized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum CrossRule {
    Trapezoid,
    Refined(usize),
    Aligned,
}

/// Strip width needed for trapezoidal accuracy, in units of node spacing.
const STRIP_NODES: f64 = 40.0;
pub(crate) const MAX_REFINE: usize = 64;

pub(crate) fn cross_rule(gap: f64, scale: f64, n: usize) -> CrossRule {
    let a = gap / scale;
    if a * n as f64 >= STRIP_NODES {
        return CrossRule::Trapezoid;
    }
    let f = (STRIP_NODES / (a * n as f64)).ceil();
    if f.is_finite() && f <= MAX_REFINE as f64 {
        CrossRule::Refined((f as usize).next_power_of_two())
    } else {
        CrossRule::Aligned
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_integrate_cosines() {
        let n = 32;
        let t = 0.37;
        let w = log_weights(n, t).unwrap();
        for m in 0..n / 2 {
            let s: f64 = w.iter().enumerate().map(|(l, wl)| wl * (m as f64 * 2.0 * PI * l as f64 / n as f64).cos()).sum();
            let exact = if m == 0 { 0.0 } else { -PI / m as f64 * (m as f64 * t).cos() };
            assert!((s - exact).abs() < 1e-13, "m={m}: {s} vs {exact}");
        }
        assert!(log_weights(7, 0.0).is_err());
    }

    #[test]
    fn rule_selection() {
        assert_eq!(cross_rule(0.3, 1.0, 256), CrossRule::Trapezoid);
        assert_eq!(cross_rule(0.05, 1.0, 256), CrossRule::Refined(4));
        assert_eq!(cross_rule(0.0, 1.0, 256), CrossRule::Aligned);
    }
}
