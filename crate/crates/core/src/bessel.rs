//! Integer-order Bessel functions J_n, I_n, K_n and the products I_n(x)K_n(y).
//!
//! I_n is summed from its power series, K_0 and K_1 come from the logarithmic
//! series below x = 2 and from Steed's continued fraction above, and higher
//! K_n follow by upward recurrence. Intermediate values are carried with a
//! separate binary exponent so that large orders neither overflow nor
//! underflow before the final product is formed.

use std::f64::consts::{LN_2, PI};
use std::sync::OnceLock;

use thiserror::Error;

/// Euler's constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const LN2_HI: f64 = 6.931_471_803_691_238e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
const SERIES_EPS: f64 = 1e-17;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum BesselError {
    #[error("{function}: argument {x} is outside the domain")]
    Domain { function: &'static str, x: f64 },
    #[error("{function}: result overflows at x = {x}")]
    Overflow { function: &'static str, x: f64 },
}

pub type Result<T> = std::result::Result<T, BesselError>;

/// A positive real stored as `mant * 2^exp` with `mant` in `[0.5, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Wide {
    mant: f64,
    exp: i64,
}

fn frexp(x: f64) -> (f64, i64) {
    if x == 0.0 || !x.is_finite() {
        return (x, 0);
    }
    let (x, bias) = if x.abs() < f64::MIN_POSITIVE {
        (x * 2f64.powi(64), -64)
    } else {
        (x, 0)
    };
    let bits = x.to_bits();
    let e = ((bits >> 52) & 0x7ff) as i64 - 1022;
    let m = f64::from_bits((bits & !(0x7ff << 52)) | (1022 << 52));
    (m, e + bias)
}

fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
        if x.is_infinite() {
            return x;
        }
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(e as i32)
}

impl Wide {
    pub(crate) const ZERO: Wide = Wide { mant: 0.0, exp: 0 };

    pub(crate) fn new(x: f64) -> Self {
        let (mant, exp) = frexp(x);
        Wide { mant, exp }
    }

    /// `e^y` without overflow.
    pub(crate) fn exp(y: f64) -> Self {
        let k = (y / LN_2).round();
        let r = (y - k * LN2_HI) - k * LN2_LO;
        let w = Wide::new(r.exp());
        Wide { mant: w.mant, exp: w.exp + k as i64 }
    }

    pub(crate) fn mul(self, other: Wide) -> Self {
        if self.mant == 0.0 || other.mant == 0.0 {
            return Wide::ZERO;
        }
        let w = Wide::new(self.mant * other.mant);
        Wide { mant: w.mant, exp: w.exp + self.exp + other.exp }
    }

    pub(crate) fn scale(self, f: f64) -> Self {
        self.mul(Wide::new(f))
    }

    pub(crate) fn shift(self, e: i64) -> Self {
        Wide { mant: self.mant, exp: self.exp + e }
    }

    pub(crate) fn to_f64(self) -> f64 {
        ldexp(self.mant, self.exp)
    }

    pub(crate) fn ln(self) -> f64 {
        self.mant.ln() + self.exp as f64 * LN_2
    }
}

/// Φ(m+1) = H_m − γ, so `phi_harmonic(0)` is Φ(1) = −γ.
pub fn phi_harmonic(m: u32) -> f64 {
    (1..=m).map(|k| 1.0 / k as f64).sum::<f64>() - EULER_GAMMA
}

/// J_n(x) for any finite x.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let sign = if x < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    let ax = x.abs();
    let nf = n as f64;
    let v = if ax <= 8.0 {
        j_series(n, ax)
    } else if ax >= 30.0 + nf * nf {
        j_hankel(n, ax)
    } else {
        j_trapezoid(n, ax)
    };
    sign * v
}

fn j_series(n: u32, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut pre = 1.0;
    for k in 1..=n {
        pre *= h / k as f64;
    }
    let q = h * h;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut m = 0u32;
    loop {
        m += 1;
        term *= -q / (m as f64 * (n + m) as f64);
        sum += term;
        if term.abs() < SERIES_EPS * sum.abs() && q < 0.5 * (m * (n + m)) as f64 {
            break;
        }
    }
    pre * sum
}

fn j_trapezoid(n: u32, x: f64) -> f64 {
    let nodes = 2 * (x.ceil() as usize + n as usize) + 64;
    let h = 2.0 * PI / nodes as f64;
    let s: f64 = (0..nodes)
        .map(|i| {
            let t = i as f64 * h;
            (n as f64 * t - x * t.sin()).cos()
        })
        .sum();
    s / nodes as f64
}

fn j_hankel(n: u32, x: f64) -> f64 {
    let mu = 4.0 * (n as f64) * (n as f64);
    let (mut p, mut q) = (0.0, 0.0);
    let mut term: f64 = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..200u32 {
        if term.abs() > last {
            break;
        }
        last = term.abs();
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
        if term.abs() < 1e-17 {
            break;
        }
        let j = (2 * k + 1) as f64;
        term *= (mu - j * j) / ((k + 1) as f64 * 8.0 * x);
    }
    let chi = x - (0.5 * n as f64 + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

pub(crate) fn i_wide(n: u32, x: f64) -> Wide {
    if x == 0.0 {
        return if n == 0 { Wide::new(1.0) } else { Wide::ZERO };
    }
    let nf = n as f64;
    if x > 1000.0 && x > 4.0 * nf * nf {
        return i_hankel_scaled(n, x).mul(Wide::exp(x));
    }
    let h = 0.5 * x;
    let mut pre = Wide::new(1.0);
    for k in 1..=n {
        pre = pre.scale(h / k as f64);
    }
    let q = h * h;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut shift = 0i64;
    let mut m = 0u32;
    loop {
        m += 1;
        let mf = m as f64;
        term *= q / (mf * (nf + mf));
        sum += term;
        if term < SERIES_EPS * sum && q < 0.5 * mf * (nf + mf) {
            break;
        }
        if sum > 1e280 {
            sum *= 2f64.powi(-900);
            term *= 2f64.powi(-900);
            shift += 900;
        }
    }
    pre.scale(sum).shift(shift)
}

fn i_hankel_scaled(n: u32, x: f64) -> Wide {
    let mu = 4.0 * (n as f64) * (n as f64);
    let mut term: f64 = 1.0;
    let mut sum: f64 = 0.0;
    let mut last = f64::INFINITY;
    for k in 0..400u32 {
        if term.abs() > last || term.abs() < 1e-17 * sum.abs() {
            break;
        }
        last = term.abs();
        sum += term;
        let j = (2 * k + 1) as f64;
        term *= -(mu - j * j) / ((k + 1) as f64 * 8.0 * x);
    }
    Wide::new(sum / (2.0 * PI * x).sqrt())
}

const SERIES_TERMS: usize = 13;

/// 1/(m!)² and H_m/(m!)² for m = 1..=13.
const SERIES_COEFFS: ([f64; SERIES_TERMS], [f64; SERIES_TERMS]) = {
    let mut a = [0.0; SERIES_TERMS];
    let mut b = [0.0; SERIES_TERMS];
    let mut t = 1.0;
    let mut h = 0.0;
    let mut m = 1;
    while m <= SERIES_TERMS {
        let mf = m as f64;
        t /= mf * mf;
        h += 1.0 / mf;
        a[m - 1] = t;
        b[m - 1] = t * h;
        m += 1;
    }
    (a, b)
};

/// Series values of I_0(z) − 1 and of S(z) = Σ_{m≥1} (z/2)^{2m} H_m / (m!)².
pub(crate) fn i0m1_and_harmonic_series(z: f64) -> (f64, f64) {
    let q = 0.25 * z * z;
    if q <= 1.0 {
        let (a, b) = &SERIES_COEFFS;
        let mut i0m1 = a[SERIES_TERMS - 1];
        let mut s = b[SERIES_TERMS - 1];
        for m in (0..SERIES_TERMS - 1).rev() {
            i0m1 = i0m1 * q + a[m];
            s = s * q + b[m];
        }
        return (i0m1 * q, s * q);
    }
    let mut term = 1.0;
    let mut i0m1 = 0.0;
    let mut s = 0.0;
    let mut harm = 0.0;
    let mut m = 0u32;
    loop {
        m += 1;
        let mf = m as f64;
        term *= q / (mf * mf);
        harm += 1.0 / mf;
        i0m1 += term;
        s += term * harm;
        if term * harm <= SERIES_EPS * s && q < 0.5 * mf * mf {
            break;
        }
    }
    (i0m1, s)
}

/// I_0(z) − 1 without cancellation.
pub(crate) fn i0_minus_one(z: f64) -> f64 {
    let q = 0.25 * z * z;
    if q <= 1.0 {
        return i0m1_and_harmonic_series(z).0;
    }
    let mut term = 1.0;
    let mut sum = 0.0;
    let mut m = 0u32;
    loop {
        m += 1;
        let mf = m as f64;
        term *= q / (mf * mf);
        sum += term;
        if term <= SERIES_EPS * sum && q < 0.5 * mf * mf {
            break;
        }
    }
    sum
}

fn k01_series(x: f64) -> (f64, f64) {
    let h = 0.5 * x;
    let q = h * h;
    let lg = h.ln() + EULER_GAMMA;
    let (i0m1, s0) = i0m1_and_harmonic_series(x);
    let k0 = -lg * (1.0 + i0m1) + s0;
    // c_m = q^m / (m! (m+1)!), I_1 = h Σ c_m
    let mut c = 1.0;
    let mut hm = 0.0;
    let mut sum_c = 1.0;
    let mut sum_h = 1.0;
    let mut m = 0u32;
    loop {
        m += 1;
        let mf = m as f64;
        c *= q / (mf * (mf + 1.0));
        hm += 1.0 / mf;
        sum_c += c;
        let t = c * (2.0 * hm + 1.0 / (mf + 1.0));
        sum_h += t;
        if t < SERIES_EPS * sum_h {
            break;
        }
    }
    let i1 = h * sum_c;
    let k1 = 1.0 / x + lg * i1 - 0.5 * h * sum_h;
    (k0, k1)
}

/// Steed's continued fraction for e^x K_0(x), e^x K_1(x); accurate for x ≥ 2.
fn k01_scaled_cf(x: f64) -> (f64, f64) {
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000u32 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 0.5 * f64::EPSILON {
            break;
        }
    }
    let h = a1 * h;
    let k0 = (PI / (2.0 * x)).sqrt() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

/// (K_0(x), K_1(x)) for x > 0 as plain doubles; underflows to 0 beyond x ≈ 700.
pub(crate) fn k0_k1(x: f64) -> (f64, f64) {
    if x <= 2.0 {
        k01_series(x)
    } else {
        let (a, b) = k01_scaled_cf(x);
        let e = (-x).exp();
        (a * e, b * e)
    }
}

pub(crate) fn k0(x: f64) -> f64 {
    if x <= 2.0 {
        let (i0m1, s0) = i0m1_and_harmonic_series(x);
        -((0.5 * x).ln() + EULER_GAMMA) * (1.0 + i0m1) + s0
    } else {
        k0_scaled_cheb(x) * (-x).exp()
    }
}

const K0_CHEB_DEGREE: usize = 32;

/// Chebyshev coefficients of √x·e^x·K_0(x) in u = 4/x − 1 on x ≥ 2, sampled from the continued fraction.
fn k0_cheb_coeffs() -> &'static [f64; K0_CHEB_DEGREE] {
    static COEFFS: OnceLock<[f64; K0_CHEB_DEGREE]> = OnceLock::new();
    COEFFS.get_or_init(|| {
        let n = K0_CHEB_DEGREE;
        let samples: Vec<f64> = (0..n)
            .map(|j| {
                let u = (PI * (j as f64 + 0.5) / n as f64).cos();
                let x = 4.0 / (u + 1.0);
                x.sqrt() * k01_scaled_cf(x).0
            })
            .collect();
        let mut c = [0.0; K0_CHEB_DEGREE];
        for (k, ck) in c.iter_mut().enumerate() {
            let sum: f64 = samples
                .iter()
                .enumerate()
                .map(|(j, f)| f * (PI * k as f64 * (j as f64 + 0.5) / n as f64).cos())
                .sum();
            *ck = 2.0 * sum / n as f64;
        }
        c
    })
}

fn k0_scaled_cheb(x: f64) -> f64 {
    let c = k0_cheb_coeffs();
    let u = 4.0 / x - 1.0;
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c[1..].iter().rev() {
        let b0 = 2.0 * u * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    (u * b1 - b2 + 0.5 * c[0]) / x.sqrt()
}

pub(crate) fn k_wide(n: u32, x: f64) -> Wide {
    let (k0, k1, base) = if x <= 2.0 {
        let (a, b) = k01_series(x);
        (a, b, Wide::new(1.0))
    } else {
        let (a, b) = k01_scaled_cf(x);
        (a, b, Wide::exp(-x))
    };
    if n == 0 {
        return base.scale(k0);
    }
    let mut prev = k0;
    let mut cur = k1;
    let mut shift = 0i64;
    for j in 1..n {
        let next = prev + (2.0 * j as f64 / x) * cur;
        prev = cur;
        cur = next;
        if cur > 1e250 {
            prev *= 2f64.powi(-800);
            cur *= 2f64.powi(-800);
            shift += 800;
        }
    }
    base.scale(cur).shift(shift)
}

fn check_finite(function: &'static str, v: f64, x: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(BesselError::Overflow { function, x })
    }
}

/// I_n(x) for x ≥ 0.
pub fn bessel_i(n: u32, x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(BesselError::Domain { function: "bessel_i", x });
    }
    check_finite("bessel_i", i_wide(n, x).to_f64(), x)
}

/// e^{−x} I_n(x) for x ≥ 0.
pub fn bessel_i_scaled(n: u32, x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(BesselError::Domain { function: "bessel_i_scaled", x });
    }
    Ok(i_wide(n, x).mul(Wide::exp(-x)).to_f64())
}

/// K_n(x) for x > 0.
pub fn bessel_k(n: u32, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(BesselError::Domain { function: "bessel_k", x });
    }
    check_finite("bessel_k", k_wide(n, x).to_f64(), x)
}

/// e^{x} K_n(x) for x > 0.
pub fn bessel_k_scaled(n: u32, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(BesselError::Domain { function: "bessel_k_scaled", x });
    }
    check_finite("bessel_k_scaled", k_wide(n, x).mul(Wide::exp(x)).to_f64(), x)
}

/// I_n(x) K_n(y) for 0 < x ≤ y, formed from wide-exponent factors.
pub fn bessel_ik_product(n: u32, x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(BesselError::Domain { function: "bessel_ik_product", x });
    }
    if !(y >= x) || !y.is_finite() {
        return Err(BesselError::Domain { function: "bessel_ik_product", x: y });
    }
    Ok(i_wide(n, x).mul(k_wide(n, y)).to_f64())
}

/// Natural log of I_n(x) K_n(y); finite even where the product underflows.
pub fn ln_bessel_ik_product(n: u32, x: f64, y: f64) -> Result<f64> {
    bessel_ik_product(n, x, y)?;
    Ok(i_wide(n, x).mul(k_wide(n, y)).ln())
}

/// |x (I_n K_{n+1} + I_{n+1} K_n)(x) − 1|.
pub fn wronskian_defect(n: u32, x: f64) -> Result<f64> {
    bessel_ik_product(n, x, x)?;
    let s = i_wide(n, x).mul(k_wide(n + 1, x)).to_f64()
        + i_wide(n + 1, x).mul(k_wide(n, x)).to_f64();
    Ok((x * s - 1.0).abs())
}

/// Order monotonicity: I_{n+1}K_{n+1}(x) < I_nK_n(x) for n = 1..n_max−1.
pub fn ik_decreasing_in_order(x: f64, n_max: u32) -> Result<bool> {
    let mut prev = bessel_ik_product(1, x, x)?;
    for n in 2..=n_max {
        let cur = bessel_ik_product(n, x, x)?;
        if !(cur < prev) {
            return Ok(false);
        }
        prev = cur;
    }
    Ok(true)
}

/// Argument monotonicity of x ↦ I_nK_n(x) on an increasing grid.
pub fn ik_decreasing_in_argument(n: u32, grid: &[f64]) -> Result<bool> {
    let vals = grid
        .iter()
        .map(|&x| bessel_ik_product(n, x, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(vals.windows(2).all(|w| w[1] < w[0]))
}

/// 0 < (x/y)^n/(2n) − I_n(x)K_n(y) ≤ 1/(2n).
pub fn ik_gap_bound_holds(n: u32, x: f64, y: f64) -> Result<bool> {
    let p = bessel_ik_product(n, x, y)?;
    let lead = (x / y).powi(n as i32) / (2.0 * n as f64);
    let gap = lead - p;
    Ok(gap > 0.0 && gap <= 1.0 / (2.0 * n as f64))
}

/// x ↦ I_1(x)/x strictly increasing on an increasing grid.
pub fn i1_over_x_increasing(grid: &[f64]) -> Result<bool> {
    let vals = grid
        .iter()
        .map(|&x| bessel_i(1, x).map(|v| v / x))
        .collect::<Result<Vec<_>>>()?;
    Ok(vals.windows(2).all(|w| w[1] > w[0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wide_roundtrip() {
        for &v in &[1.0, 3.5e-300, 7.25e300, 0.1] {
            assert_eq!(Wide::new(v).to_f64(), v);
        }
        let e = Wide::exp(-800.0).mul(Wide::exp(790.0)).to_f64();
        assert!((e / (-10f64).exp() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn series_and_fraction_agree_near_two() {
        for &x in &[1.9, 2.0, 2.1] {
            let (a0, a1) = k01_series(x);
            let (b0, b1) = k01_scaled_cf(x);
            let e = (-x).exp();
            assert!((a0 / (b0 * e) - 1.0).abs() < 1e-14, "{x}");
            assert!((a1 / (b1 * e) - 1.0).abs() < 1e-14, "{x}");
        }
    }

    #[test]
    fn chebyshev_k0_matches_fraction() {
        let mut worst: f64 = 0.0;
        for i in 0..4000 {
            let x = 2.0 * 1.0015f64.powi(i);
            let rel = (k0_scaled_cheb(x) / k01_scaled_cf(x).0 - 1.0).abs();
            worst = worst.max(rel);
        }
        assert!(worst < 1e-14, "{worst:e}");
    }
}
