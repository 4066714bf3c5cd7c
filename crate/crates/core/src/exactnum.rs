//! Exact rationals, the working complex type and the derived problem parameters.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Q = BigRational;

/// Working complex type. The numeric backend is IEEE binary64, see [`PRECISION_BITS`].
pub type ComplexHP = Complex64;

/// Mantissa width of the numeric backend.
pub const PRECISION_BITS: u32 = 53;

pub fn q(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

pub fn qi(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

pub fn to_f64(x: &Q) -> f64 {
    match x.to_f64() {
        Some(v) if v.is_finite() => v,
        _ => {
            // very large numerator/denominator: go through the bit lengths
            let nb = x.numer().bits() as i64;
            let db = x.denom().bits() as i64;
            let shift = nb.max(db) - 1000;
            let num = x.numer() >> shift.max(0) as usize;
            let den = x.denom() >> shift.max(0) as usize;
            num.to_f64().unwrap_or(0.0) / den.to_f64().unwrap_or(f64::INFINITY)
        }
    }
}

pub fn factorial(k: u32) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

pub fn factorial_q(k: u32) -> Q {
    Q::from_integer(factorial(k))
}

/// Generalized binomial coefficient C(x, k) for rational x.
pub fn binom_q(x: &Q, k: u32) -> Q {
    pochhammer(x, k) / factorial_q(k)
}

/// Falling product λ(λ−1)…(λ−β+1); empty product is 1.
pub fn pochhammer(lambda: &Q, beta: u32) -> Q {
    let mut acc = Q::one();
    let mut cur = lambda.clone();
    for _ in 0..beta {
        acc *= &cur;
        cur -= Q::one();
    }
    acc
}

pub fn pochhammer_c(lambda: ComplexHP, beta: u32) -> ComplexHP {
    (0..beta).fold(ComplexHP::new(1.0, 0.0), |acc, i| acc * (lambda - i as f64))
}

pub fn qpow(x: &Q, e: u32) -> Q {
    (0..e).fold(Q::one(), |acc, _| acc * x)
}

/// Absolute plus relative tolerance pair.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tol {
    fn default() -> Self {
        Tol { abs: 1e-10, rel: 1e-8 }
    }
}

impl Tol {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tol { abs, rel }
    }

    pub fn close(&self, a: ComplexHP, b: ComplexHP) -> bool {
        (a - b).norm() <= self.abs + self.rel * a.norm().max(b.norm())
    }
}

/// Relative closeness guaranteed by the backend for a quantity of unit condition.
pub fn precision_eps() -> f64 {
    2f64.powi(-(PRECISION_BITS as i32 - 16))
}

#[derive(Clone, Debug, Serialize)]
pub struct Params {
    pub n: u32,
    pub m: u32,
    #[serde(serialize_with = "ser_q")]
    pub theta: Q,
    #[serde(serialize_with = "ser_q")]
    pub gamma: Q,
    #[serde(serialize_with = "ser_q")]
    pub alpha: Q,
    #[serde(serialize_with = "ser_q")]
    pub s0: Q,
    #[serde(serialize_with = "ser_q")]
    pub r: Q,
    pub c1: ComplexHP,
    pub c0: f64,
    pub precision_bits: u32,
}

pub fn ser_q<S: serde::Serializer>(x: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}", x))
}

impl Params {
    pub fn theta_f(&self) -> f64 {
        to_f64(&self.theta)
    }
    pub fn gamma_f(&self) -> f64 {
        to_f64(&self.gamma)
    }
    pub fn s0_f(&self) -> f64 {
        to_f64(&self.s0)
    }
    pub fn r_f(&self) -> f64 {
        to_f64(&self.r)
    }
    /// Weight exponent of the image kernel, r + 2γ.
    pub fn r_prime(&self) -> Q {
        &self.r + &self.gamma * qi(2)
    }
    /// E_k = 4k(n+1) + 2n + 1.
    pub fn eigenvalue(&self, k: u32) -> f64 {
        even_eigenvalue(self.n, k) as f64
    }
    /// Constant ((2m−1)/(2mi))^{2m} multiplying every reduced operator.
    pub fn kprime(&self) -> ComplexHP {
        let m = self.m as f64;
        let base = ComplexHP::new(0.0, -(2.0 * m - 1.0) / (2.0 * m));
        base.powu(2 * self.m)
    }
    /// Constant term of Θ_k: (2mi/(2m−1))^{2m} E_k.
    pub fn theta_const(&self, k: u32) -> ComplexHP {
        let m = self.m as f64;
        ComplexHP::new(0.0, 2.0 * m / (2.0 * m - 1.0)).powu(2 * self.m) * self.eigenvalue(k)
    }
    /// c_k = (2m/(2m−1)) E_k^{1/2m}.
    pub fn c_k(&self, k: u32) -> f64 {
        let m = self.m as f64;
        2.0 * m / (2.0 * m - 1.0) * self.eigenvalue(k).powf(1.0 / (2.0 * m))
    }
}

pub fn even_eigenvalue(n: u32, k: u32) -> u64 {
    4 * k as u64 * (n as u64 + 1) + 2 * n as u64 + 1
}

pub fn odd_eigenvalue(n: u32, k: u32) -> u64 {
    4 * k as u64 * (n as u64 + 1) + 2 * n as u64 + 3
}

/// Coefficient of ρ^{-1}∂^{2m-1} (constant part) in the reduced operator, as a function of r.
///
/// Obtained by expanding the two Tech_L3 families with p = 2m and p = 2m−1 and combining
/// them with the weight −mθ; evaluates to m(4m−1)/(2m−1) + 2mr.
pub fn p10(m: u32, r: &Q) -> Q {
    let mi = m as i64;
    q(mi * (4 * mi - 1), 2 * mi - 1) + qi(2 * mi) * r
}

/// The same constant in the form (4m−1)2m/(2m−1) + 2mr, kept for comparison.
pub fn p10_alt(m: u32, r: &Q) -> Q {
    let mi = m as i64;
    q(2 * mi * (4 * mi - 1), 2 * mi - 1) + qi(2 * mi) * r
}

/// Coefficient of ρ^{-1}(t∂_t)∂^{2m-1}: 2m²/((n+1)(2m−1)).
pub fn p11(n: u32, m: u32) -> Q {
    let mi = m as i64;
    q(2 * mi * mi, (n as i64 + 1) * (2 * mi - 1))
}

/// δ_0^{0,1} = −(2n+1)/2.
pub fn delta00_1(n: u32) -> Q {
    q(-(2 * n as i64 + 1), 2)
}

/// The unique r with p10(r) + p11·δ_0^{0,1} = 0.
pub fn solve_r(n: u32, m: u32) -> Q {
    let c = p11(n, m) * delta00_1(n);
    let base = p10(m, &Q::zero());
    -(base + c) / qi(2 * m as i64)
}

/// Root of the alternate-constant variant of the cancellation condition.
pub fn solve_r_alt(n: u32, m: u32) -> Q {
    let c = p11(n, m) * delta00_1(n);
    let base = p10_alt(m, &Q::zero());
    -(base + c) / qi(2 * m as i64)
}

pub fn derive_params(n: u32, m: u32) -> Result<Params> {
    if m == 0 {
        return Err(Error::InvalidParams("m must be at least 1".into()));
    }
    let mi = m as i64;
    let theta = q(2 * mi, 2 * mi - 1);
    let gamma = q(mi, (n as i64 + 1) * (2 * mi - 1));
    let alpha = q(-1, 2 * n as i64 + 2);
    let r = solve_r(n, m);
    let mf = m as f64;
    let mag = 2.0 * mf / (2.0 * mf - 1.0) * ((2 * n + 1) as f64).powf(1.0 / (2.0 * mf));
    let ang = PI / (2.0 * mf);
    let c1 = ComplexHP::new(mag * ang.sin(), -mag * ang.cos());
    Ok(Params {
        n,
        m,
        s0: theta.clone(),
        theta,
        gamma,
        alpha,
        r,
        c0: c1.re,
        c1,
        precision_bits: PRECISION_BITS,
    })
}

pub fn is_nonneg(x: &Q) -> bool {
    !x.is_negative()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pochhammer_examples() {
        assert_eq!(pochhammer(&qi(3), 2), qi(6));
        assert_eq!(pochhammer(&q(7, 3), 0), qi(1));
        assert_eq!(pochhammer(&q(1, 2), 3), q(3, 8));
        let z = pochhammer_c(ComplexHP::new(0.5, 0.0), 3);
        assert!((z.re - 0.375).abs() < 1e-15);
    }

    #[test]
    fn params_metivier() {
        let p = derive_params(0, 1).unwrap();
        assert_eq!(p.theta, qi(2));
        assert_eq!(p.gamma, qi(1));
        assert_eq!(p.alpha, q(-1, 2));
        assert_eq!(p.s0, qi(2));
        assert!((p.c1 - ComplexHP::new(2.0, 0.0)).norm() < 1e-15);
        assert!((p.c0 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn params_n1_m2() {
        let p = derive_params(1, 2).unwrap();
        assert_eq!(p.theta, q(4, 3));
        assert_eq!(p.gamma, q(1, 3));
    }

    #[test]
    fn rejects_m_zero() {
        assert!(derive_params(0, 0).is_err());
    }

    #[test]
    fn r_cancels() {
        for n in 0..4 {
            for m in 1..5 {
                let r = solve_r(n, m);
                assert!((p10(m, &r) + p11(n, m) * delta00_1(n)).is_zero());
            }
        }
        assert_eq!(solve_r(0, 1), qi(-1));
        assert_eq!(solve_r(1, 1), q(-3, 4));
        assert_eq!(solve_r_alt(0, 1), q(-5, 2));
    }

    #[test]
    fn seed_root() {
        for n in 0..3 {
            for m in 1..4 {
                let p = derive_params(n, m).unwrap();
                let lhs = p.c1.powu(2 * m) + p.theta_const(0);
                let scale = p.c1.norm().powi(2 * m as i32);
                assert!(lhs.norm() <= precision_eps() * scale, "n={n} m={m}");
            }
        }
    }
}
