//! Linear theory around the two-disc steady state: the Fourier multipliers
//! M_n(Ω), their eigen-branches Ω_n^±, kernel vectors and collision scans.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bessel::{bessel_ik_product, BesselError};
use crate::kernels::LayerParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error(transparent)]
    Bessel(#[from] BesselError),
    #[error("kernel direction degenerates: both components vanish for m = {0}")]
    DegenerateDirection(u32),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, SpectrumError>;

pub type Matrix2 = [[f64; 2]; 2];

/// Which eigen-branch Ω_n^− or Ω_n^+.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "-")]
    Minus,
    #[serde(rename = "+")]
    Plus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Minus => -1.0,
            Branch::Plus => 1.0,
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Minus => "-",
            Branch::Plus => "+",
        })
    }
}

impl FromStr for Branch {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "-" | "minus" | "m" => Ok(Branch::Minus),
            "+" | "plus" | "p" => Ok(Branch::Plus),
            other => Err(format!("unknown branch sign '{other}', expected + or -")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub n: u32,
    pub a_n: f64,
    pub b_n: f64,
    pub gamma_n: f64,
    pub omega_minus: f64,
    pub omega_plus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFlowCoeffs {
    pub v: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionRecord {
    pub m: u32,
    pub n: u32,
    pub b2_root: f64,
    pub residual: f64,
    /// Set when the root is a touching point of the branches or two roots merged.
    pub tangency: bool,
    /// δ ≥ (b2_root/b1)².
    pub proven_regime: bool,
}

fn check_mode(n: u32) -> Result<()> {
    if n == 0 {
        Err(SpectrumError::InvalidArgument("mode index must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// I_n(xμ)K_n(yμ) products needed by the multipliers.
struct Products {
    outer: f64,
    inner: f64,
    cross: f64,
}

fn products(params: &LayerParams, n: u32) -> Result<Products> {
    let mu = params.mu();
    let (x1, x2) = (params.b1 * mu, params.b2 * mu);
    Ok(Products {
        outer: bessel_ik_product(n, x1, x1)?,
        inner: bessel_ik_product(n, x2, x2)?,
        cross: bessel_ik_product(n, x2, x1)?,
    })
}

/// V and W, the angular velocities induced on each disc by the steady state.
pub fn mean_flow_coeffs(params: &LayerParams) -> Result<MeanFlowCoeffs> {
    let d = params.delta;
    let b = params.b();
    let p = products(params, 1)?;
    let v = -(d + b * b) / (2.0 * (1.0 + d)) - (p.outer - b * p.cross) / (1.0 + d);
    let w = -0.5 - d * (p.inner - p.cross / b) / (1.0 + d);
    Ok(MeanFlowCoeffs { v, w })
}

/// (A_n, B_n).
pub fn coeffs_ab(params: &LayerParams, n: u32) -> Result<(f64, f64)> {
    check_mode(n)?;
    let d = params.delta;
    let mf = mean_flow_coeffs(params)?;
    let p = products(params, n)?;
    let nf = n as f64;
    let a = (d + 1.0) * mf.v + d / (2.0 * nf) + p.outer;
    let b = (d + 1.0) * mf.w + 1.0 / (2.0 * nf) + d * p.inner;
    Ok((a, b))
}

/// γ_n = b^n/(2n) − I_n(b2μ)K_n(b1μ).
pub fn gamma_n(params: &LayerParams, n: u32) -> Result<f64> {
    check_mode(n)?;
    let mu = params.mu();
    let nf = n as f64;
    Ok(params.b().powi(n as i32) / (2.0 * nf) - bessel_ik_product(n, params.b2 * mu, params.b1 * mu)?)
}

/// M_n(Ω) assembled from given A_n, B_n, γ_n.
pub fn matrix_from(delta: f64, a: f64, b: f64, gamma: f64, omega: f64) -> Matrix2 {
    let s = 1.0 / (delta + 1.0);
    [[omega + a * s, gamma * s], [delta * gamma * s, omega + b * s]]
}

/// M_n(Ω).
pub fn matrix_m(params: &LayerParams, n: u32, omega: f64) -> Result<Matrix2> {
    let (a, b) = coeffs_ab(params, n)?;
    let g = gamma_n(params, n)?;
    Ok(matrix_from(params.delta, a, b, g, omega))
}

/// Roots of det M_n(Ω) = 0 from given A_n, B_n, γ_n.
pub fn omega_pm_from(delta: f64, a: f64, b: f64, gamma: f64) -> (f64, f64) {
    let disc = ((a - b) * (a - b) + 4.0 * delta * gamma * gamma).sqrt();
    let den = 2.0 * (delta + 1.0);
    ((-(a + b) - disc) / den, (-(a + b) + disc) / den)
}

/// (Ω_n^−, Ω_n^+).
pub fn omega_pm(params: &LayerParams, n: u32) -> Result<(f64, f64)> {
    let (a, b) = coeffs_ab(params, n)?;
    let g = gamma_n(params, n)?;
    Ok(omega_pm_from(params.delta, a, b, g))
}

pub fn omega_branch(params: &LayerParams, n: u32, branch: Branch) -> Result<f64> {
    let (lo, hi) = omega_pm(params, n)?;
    Ok(match branch {
        Branch::Minus => lo,
        Branch::Plus => hi,
    })
}

/// x + σ√(x² + 4δγ²), evaluated without cancellation.
fn stable_shift(x: f64, sigma: f64, root: f64, four_dg2: f64) -> f64 {
    if x * sigma >= 0.0 {
        x + sigma * root
    } else {
        -four_dg2 / (x - sigma * root)
    }
}

/// Ω_n^± together with M_n(Ω_n^±), whose diagonal entries are formed directly
/// from A_n − B_n instead of by subtracting nearly equal numbers.
pub fn matrix_at_branch(params: &LayerParams, n: u32, branch: Branch) -> Result<(f64, Matrix2)> {
    let (a, b) = coeffs_ab(params, n)?;
    let g = gamma_n(params, n)?;
    let d = params.delta;
    let d1 = d + 1.0;
    let s = b - a;
    let sigma = branch.sign();
    let four_dg2 = 4.0 * d * g * g;
    let root = (s * s + four_dg2).sqrt();
    let omega = (-(a + b) + sigma * root) / (2.0 * d1);
    let m11 = stable_shift(-s, sigma, root, four_dg2) / (2.0 * d1);
    let m22 = stable_shift(s, sigma, root, four_dg2) / (2.0 * d1);
    Ok((omega, [[m11, g / d1], [d * g / d1, m22]]))
}

/// Generator of ker M_m(Ω_m^±), normalized to a positive first component.
pub fn kernel_vector(params: &LayerParams, m: u32, branch: Branch) -> Result<[f64; 2]> {
    let (_, mat) = matrix_at_branch(params, m, branch)?;
    let v = [mat[1][1], -mat[1][0]];
    if v[0] == 0.0 && v[1] == 0.0 {
        return Err(SpectrumError::DegenerateDirection(m));
    }
    let flip = v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0);
    Ok(if flip { [-v[0], -v[1]] } else { v })
}

pub fn determinant(m: &Matrix2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn trace(m: &Matrix2) -> f64 {
    m[0][0] + m[1][1]
}

pub fn frobenius(m: &Matrix2) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn apply(m: &Matrix2, v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// A_∞ − B_∞, identically zero at b1 = b2.
pub fn a_minus_b_infinity(params: &LayerParams) -> Result<f64> {
    let d = params.delta;
    let b = params.b();
    let p = products(params, 1)?;
    Ok((1.0 - b * b) / 2.0 - p.outer + d * p.inner + (b * b - d) / b * p.cross)
}

/// (A_∞, B_∞).
pub fn ab_infinity(params: &LayerParams) -> Result<(f64, f64)> {
    let mf = mean_flow_coeffs(params)?;
    let d1 = params.delta + 1.0;
    Ok((d1 * mf.v, d1 * mf.w))
}

pub fn spectrum_table(params: &LayerParams, n_max: u32) -> Result<Vec<SpectrumRow>> {
    check_mode(n_max)?;
    (1..=n_max)
        .map(|n| {
            let (a, b) = coeffs_ab(params, n)?;
            let g = gamma_n(params, n)?;
            let (lo, hi) = omega_pm_from(params.delta, a, b, g);
            Ok(SpectrumRow { n, a_n: a, b_n: b, gamma_n: g, omega_minus: lo, omega_plus: hi })
        })
        .collect()
}

fn collision_gap(params: &LayerParams, m: u32, n: u32, b2: f64) -> Result<f64> {
    let p = params.with_b2(b2);
    Ok(omega_pm(&p, m)?.0 - omega_pm(&p, n)?.1)
}

fn bisect<F: Fn(f64) -> Result<f64>>(f: F, mut lo: f64, mut hi: f64, mut flo: f64) -> Result<(f64, f64)> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok((mid, 0.0));
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (f(lo)?, f(hi)?);
    Ok(if flo.abs() <= fhi.abs() { (lo, flo.abs()) } else { (hi, fhi.abs()) })
}

fn golden_min<F: Fn(f64) -> Result<f64>>(f: F, mut lo: f64, mut hi: f64) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..120 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 < f2 { (x1, f1) } else { (x2, f2) })
}

/// Roots in (0, b1) of b2 ↦ Ω_m^−(b2) − Ω_n^+(b2), n = 1..=n_max, sorted by b2.
pub fn collision_scan(params_base: &LayerParams, m: u32, n_max: u32, grid: usize) -> Result<Vec<CollisionRecord>> {
    check_mode(m)?;
    if grid < 16 {
        return Err(SpectrumError::InvalidArgument(format!("grid = {grid} must be at least 16")));
    }
    let b1 = params_base.b1;
    let nodes: Vec<f64> = (1..grid).map(|i| b1 * i as f64 / grid as f64).collect();
    let mut records = Vec::new();
    for n in 1..=n_max.max(m + 1) {
        if n == m {
            continue;
        }
        let gap = |b2: f64| collision_gap(params_base, m, n, b2);
        let values = nodes.iter().map(|&b2| gap(b2)).collect::<Result<Vec<_>>>()?;
        let mut roots: Vec<(f64, f64, bool)> = Vec::new();
        for i in 0..nodes.len() {
            let fi = values[i];
            if fi == 0.0 {
                roots.push((nodes[i], 0.0, false));
                continue;
            }
            if i + 1 < nodes.len() && values[i + 1] != 0.0 && (fi < 0.0) != (values[i + 1] < 0.0) {
                let (x, res) = bisect(gap, nodes[i], nodes[i + 1], fi)?;
                roots.push((x, res, false));
            }
            let interior = i > 0 && i + 1 < nodes.len();
            if interior {
                let (l, r) = (values[i - 1], values[i + 1]);
                let same_sign = (l < 0.0) == (fi < 0.0) && (r < 0.0) == (fi < 0.0);
                if same_sign && fi.abs() < l.abs() && fi.abs() <= r.abs() && fi.abs() < 1e-3 {
                    let (x, res) = golden_min(|b2| gap(b2).map(f64::abs), nodes[i - 1], nodes[i + 1])?;
                    if res <= 1e-10 {
                        roots.push((x, res, true));
                    }
                }
            }
        }
        roots.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64, bool)> = Vec::new();
        for r in roots {
            match merged.last_mut() {
                Some(last) if (r.0 - last.0).abs() <= 1e-9 => {
                    last.2 = true;
                    if r.1 < last.1 {
                        last.0 = r.0;
                        last.1 = r.1;
                    }
                }
                _ => merged.push(r),
            }
        }
        for (b2, residual, tangency) in merged {
            let b = b2 / b1;
            records.push(CollisionRecord {
                m,
                n,
                b2_root: b2,
                residual,
                tangency,
                proven_regime: params_base.delta >= b * b,
            });
        }
    }
    records.sort_by(|a, b| a.b2_root.total_cmp(&b.b2_root).then(a.n.cmp(&b.n)));
    Ok(records)
}

/// Smallest m0 ≤ m_max such that every m in m0..=m_max scans collision-free.
pub fn first_collision_free_m(params_base: &LayerParams, m_max: u32, n_max: u32, grid: usize) -> Result<Option<u32>> {
    let mut first = None;
    for m in (1..=m_max).rev() {
        if collision_scan(params_base, m, n_max, grid)?.is_empty() {
            first = Some(m);
        } else {
            break;
        }
    }
    Ok(first)
}

/// Ω_∞^− = lim Ω_n^−, from the limits A_∞, B_∞ and γ_∞ = 0.
pub fn omega_minus_infinity(params: &LayerParams) -> Result<f64> {
    let (a, b) = ab_infinity(params)?;
    Ok(omega_pm_from(params.delta, a, b, 0.0).0)
}

/// Smallest p ≤ p_max with Ω_p^+ > Ω_∞^−; then Ω_n^+ > Ω_m^− for all n, m ≥ p.
pub fn threshold_p0(params: &LayerParams, p_max: u32) -> Result<Option<u32>> {
    let limit = omega_minus_infinity(params)?;
    for p in 1..=p_max {
        if omega_pm(params, p)?.1 > limit {
            return Ok(Some(p));
        }
    }
    Ok(None)
}

/// Equal-radii collision: the x0 = b1μ solving I_1K_1(x0) = 1/(2n), with its residual.
pub fn equal_radii_collision(n: u32) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(SpectrumError::InvalidArgument("equal-radii collisions need n >= 2".into()));
    }
    let target = 1.0 / (2.0 * n as f64);
    let f = |x: f64| -> Result<f64> { Ok(bessel_ik_product(1, x, x)? - target) };
    let lo = 1e-6;
    let mut hi = 1.0;
    while f(hi)? > 0.0 {
        hi *= 2.0;
    }
    bisect(f, lo, hi, f(lo)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_parse() {
        assert_eq!("+".parse::<Branch>().unwrap(), Branch::Plus);
        assert_eq!("minus".parse::<Branch>().unwrap(), Branch::Minus);
        assert!("x".parse::<Branch>().is_err());
    }
}
