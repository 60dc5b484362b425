#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Exact partial sum of the I_n power series at the rational argument p/q.
pub fn i_series_exact(n: u32, p: i64, q: i64, terms: usize) -> f64 {
    let h = BigRational::new(BigInt::from(p), BigInt::from(2 * q));
    let h2 = &h * &h;
    let mut term = BigRational::one();
    for k in 1..=n {
        term = term * &h / BigRational::from_integer(BigInt::from(k));
    }
    let mut sum = BigRational::zero();
    for m in 0..terms {
        sum += &term;
        let d = BigInt::from((m as u64 + 1) * (n as u64 + m as u64 + 1));
        term = term * &h2 / BigRational::from_integer(d);
    }
    sum.to_f64().unwrap()
}

/// K_n(x) = ∫_0^∞ exp(−x cosh t) cosh(nt) dt by the trapezoidal rule on the even extension.
pub fn k_quadrature(n: u32, x: f64) -> f64 {
    let h = 0.01;
    let f = |t: f64| {
        let a = -x * t.cosh();
        0.5 * ((a + n as f64 * t).exp() + (a - n as f64 * t).exp())
    };
    let mut s = 0.5 * f(0.0);
    let mut k = 1;
    let mut peaked = false;
    loop {
        let v = f(k as f64 * h);
        s += v;
        if v > 1e-300 {
            peaked = true;
        }
        if peaked && v < 1e-22 * s {
            break;
        }
        k += 1;
    }
    s * h
}
