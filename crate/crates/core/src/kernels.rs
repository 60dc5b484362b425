//! Model parameters and the interaction kernels of the two-layer system.

use std::f64::consts::{E, PI};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bessel::{self, EULER_GAMMA};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("kernel evaluated at the origin")]
    AtOrigin,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("layer index {0} is not 1 or 2")]
    LayerIndex(usize),
}

pub type Result<T> = std::result::Result<T, KernelError>;

/// Layer thickness ratio δ, interface rigidity λ and the disc radii b1 ≥ b2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub delta: f64,
    pub lambda: f64,
    pub b1: f64,
    pub b2: f64,
}

impl LayerParams {
    pub fn new(delta: f64, lambda: f64, b1: f64, b2: f64) -> Result<Self> {
        let p = LayerParams { delta, lambda, b1, b2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.delta, self.lambda, self.b1, self.b2].iter().all(|v| v.is_finite());
        if !finite {
            return Err(KernelError::InvalidParams("non-finite value".into()));
        }
        if !(self.delta > 0.0) {
            return Err(KernelError::InvalidParams(format!("delta = {} must be positive", self.delta)));
        }
        if !(self.lambda > 0.0) {
            return Err(KernelError::InvalidParams(format!("lambda = {} must be positive", self.lambda)));
        }
        if !(self.b2 > 0.0 && self.b2 <= self.b1) {
            return Err(KernelError::InvalidParams(format!(
                "radii must satisfy 0 < b2 <= b1, got b1 = {}, b2 = {}",
                self.b1, self.b2
            )));
        }
        Ok(())
    }

    /// μ = λ√(1+δ).
    pub fn mu(&self) -> f64 {
        self.lambda * (1.0 + self.delta).sqrt()
    }

    /// b = b2/b1.
    pub fn b(&self) -> f64 {
        self.b2 / self.b1
    }

    /// Disc radius of layer `k` (1 or 2).
    pub fn radius(&self, k: usize) -> f64 {
        if k == 1 {
            self.b1
        } else {
            self.b2
        }
    }

    /// δ ≥ b², the regime in which the spectral statements are proved.
    pub fn proven_regime(&self) -> bool {
        self.delta >= self.b() * self.b()
    }

    pub fn with_b2(&self, b2: f64) -> Self {
        LayerParams { b2, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanePoint {
    pub x: f64,
    pub y: f64,
}

impl PlanePoint {
    pub const fn new(x: f64, y: f64) -> Self {
        PlanePoint { x, y }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        PlanePoint { x: r * theta.cos(), y: r * theta.sin() }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// (−y, x)
    pub fn perp(self) -> Self {
        PlanePoint { x: -self.y, y: self.x }
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product.
    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        PlanePoint { x: c * self.x - s * self.y, y: s * self.x + c * self.y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for PlanePoint {
    type Output = PlanePoint;
    fn add(self, o: Self) -> Self {
        PlanePoint { x: self.x + o.x, y: self.y + o.y }
    }
}

impl Sub for PlanePoint {
    type Output = PlanePoint;
    fn sub(self, o: Self) -> Self {
        PlanePoint { x: self.x - o.x, y: self.y - o.y }
    }
}

impl Mul<f64> for PlanePoint {
    type Output = PlanePoint;
    fn mul(self, s: f64) -> Self {
        PlanePoint { x: self.x * s, y: self.y * s }
    }
}

impl Neg for PlanePoint {
    type Output = PlanePoint;
    fn neg(self) -> Self {
        PlanePoint { x: -self.x, y: -self.y }
    }
}

fn nonzero_norm(p: PlanePoint) -> Result<f64> {
    let r = p.norm();
    if r > 0.0 {
        Ok(r)
    } else {
        Err(KernelError::AtOrigin)
    }
}

fn check_layer(k: usize) -> Result<()> {
    if k == 1 || k == 2 {
        Ok(())
    } else {
        Err(KernelError::LayerIndex(k))
    }
}

/// G(p) = −log|p|/(2π).
pub fn green_log(p: PlanePoint) -> Result<f64> {
    Ok(-nonzero_norm(p)?.ln() / (2.0 * PI))
}

/// G_ε(p) = K_0(ε|p|)/(2π).
pub fn green_screened(eps: f64, p: PlanePoint) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(KernelError::InvalidParams(format!("eps = {eps} must be positive")));
    }
    let r = nonzero_norm(p)?;
    Ok(bessel::k0(eps * r) / (2.0 * PI))
}

/// Q(r) = −K_0(μr) − log r, continuous at r = 0 with value log(μ/2) + γ.
pub fn kernel_q(params: &LayerParams, r: f64) -> f64 {
    let mu = params.mu();
    q_regular(mu, (0.5 * mu).ln() + EULER_GAMMA, r)
}

/// Q(r) given μ and log(μ/2) + γ.
#[inline]
pub(crate) fn q_regular(mu: f64, log_half_mu_gamma: f64, r: f64) -> f64 {
    let z = mu * r;
    if z <= 2.0 {
        let (i0m1, s) = bessel::i0m1_and_harmonic_series(z);
        let lr = if r > 0.0 { r.ln() * i0m1 } else { 0.0 };
        lr + log_half_mu_gamma * (1.0 + i0m1) - s
    } else {
        -bessel::k0(z) - r.ln()
    }
}

/// G_{k,j}(p) for layers k, j ∈ {1, 2}.
pub fn kernel_g(params: &LayerParams, k: usize, j: usize, p: PlanePoint) -> Result<f64> {
    check_layer(k)?;
    check_layer(j)?;
    let r = nonzero_norm(p)?;
    let d = params.delta;
    let c = 1.0 / (2.0 * PI * (d + 1.0));
    let dk = d.powi(k as i32 - 1);
    if k == j {
        Ok(r.ln() / (2.0 * PI) + dk * c * kernel_q(params, r))
    } else {
        Ok(-dk * c * kernel_q(params, r))
    }
}

/// k_+(p) = −p^⊥/(2π|p|²).
pub fn biot_savart_plus(p: PlanePoint) -> Result<PlanePoint> {
    let r = nonzero_norm(p)?;
    Ok(p.perp() * (-1.0 / (2.0 * PI * r * r)))
}

/// k_−(p) = −(p^⊥/|p|) K_1(|p|).
pub fn biot_savart_minus(p: PlanePoint) -> Result<PlanePoint> {
    let r = nonzero_norm(p)?;
    let (_, k1) = bessel::k0_k1(r);
    Ok(p.perp() * (-k1 / r))
}

/// ℓ(r): 0 at 0, r log(e/r) on (0, 1], 1 beyond.
pub fn log_lipschitz_ell(r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else if r <= 1.0 {
        r * (E / r).ln()
    } else {
        1.0
    }
}

/// Precomputed constants for repeated evaluation of G_{k,j} on boundaries.
#[derive(Debug, Clone, Copy)]
pub(crate) struct KernelSet {
    pub mu: f64,
    pub log_half_mu_gamma: f64,
    /// δ^{k−1}/(2π(δ+1)) for k = 1, 2.
    pub q_weight: [f64; 2],
}

impl KernelSet {
    pub fn new(params: &LayerParams) -> Self {
        let mu = params.mu();
        let c = 1.0 / (2.0 * PI * (params.delta + 1.0));
        KernelSet {
            mu,
            log_half_mu_gamma: (0.5 * mu).ln() + EULER_GAMMA,
            q_weight: [c, params.delta * c],
        }
    }

    #[inline]
    pub fn q(&self, r: f64) -> f64 {
        q_regular(self.mu, self.log_half_mu_gamma, r)
    }

    /// G_{k,j}(p) for k, j ∈ {0, 1} as a function of r = |p| > 0.
    #[inline]
    pub fn g(&self, k: usize, j: usize, r: f64) -> f64 {
        if k == j {
            r.ln() / (2.0 * PI) + self.q_weight[k] * self.q(r)
        } else {
            -self.q_weight[k] * self.q(r)
        }
    }

    /// (G_{k,j}(r), a(r), s(r)) with G_{k,j} = a·log r + s and a, s smooth in r².
    /// At r = 0 the first entry is −∞ on the diagonal and s(0) off it.
    pub fn parts(&self, k: usize, j: usize, r: f64) -> (f64, f64, f64) {
        let z = self.mu * r;
        let (i0m1, qs) = if z <= 2.0 {
            let (i0m1, ser) = bessel::i0m1_and_harmonic_series(z);
            (i0m1, self.log_half_mu_gamma * (1.0 + i0m1) - ser)
        } else {
            let i0m1 = bessel::i0_minus_one(z);
            let lr = r.ln();
            (i0m1, -bessel::k0(z) - lr - i0m1 * lr)
        };
        let w = self.q_weight[k];
        let (a, s) = if k == j { (1.0 / (2.0 * PI) + w * i0m1, w * qs) } else { (-w * i0m1, -w * qs) };
        let g = if r > 0.0 {
            a * r.ln() + s
        } else if a == 0.0 {
            s
        } else {
            f64::NEG_INFINITY
        };
        (g, a, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parts_recombine() {
        let p = LayerParams::new(2.0, 0.9, 1.0, 0.5).unwrap();
        let ks = KernelSet::new(&p);
        for &r in &[1e-6, 0.3, 2.2, 5.0] {
            for k in 0..2 {
                for j in 0..2 {
                    let (g, a, _) = ks.parts(k, j, r);
                    assert!((g - ks.g(k, j, r)).abs() < 1e-13 * (1.0 + g.abs()));
                    let t = ks.q_weight[k] * bessel::i0_minus_one(ks.mu * r);
                    let expect = if k == j { 1.0 / (2.0 * PI) + t } else { -t };
                    assert!((a - expect).abs() < 1e-15);
                }
            }
        }
        assert_eq!(ks.parts(0, 1, 0.0).0, ks.parts(0, 1, 0.0).2);
    }

    #[test]
    fn q_paths_agree_at_switch() {
        let p = LayerParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let mu = p.mu();
        for &z in &[1.999_999, 2.000_001] {
            let r = z / mu;
            let direct = -bessel::k0(z) - r.ln();
            assert!((kernel_q(&p, r) - direct).abs() < 1e-13);
        }
    }
}
