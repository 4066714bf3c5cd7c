//! Dense polynomials with exact rational coefficients.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::ops::{Add, Mul, Neg, Sub};

use crate::exactnum::{to_f64, Q};

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct QPoly {
    c: Vec<Q>,
}

impl QPoly {
    pub fn zero() -> Self {
        QPoly { c: Vec::new() }
    }

    pub fn one() -> Self {
        QPoly::constant(Q::one())
    }

    pub fn constant(v: Q) -> Self {
        QPoly::from_coeffs(vec![v])
    }

    pub fn monomial(deg: usize, coeff: Q) -> Self {
        let mut c = vec![Q::zero(); deg + 1];
        c[deg] = coeff;
        QPoly::from_coeffs(c)
    }

    pub fn from_coeffs(mut c: Vec<Q>) -> Self {
        while c.last().map_or(false, |x| x.is_zero()) {
            c.pop();
        }
        QPoly { c }
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.c
    }

    pub fn coeff(&self, i: usize) -> Q {
        self.c.get(i).cloned().unwrap_or_else(Q::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.c.len().checked_sub(1)
    }

    /// Nonzero terms as (degree, coefficient).
    pub fn terms(&self) -> impl Iterator<Item = (usize, &Q)> {
        self.c.iter().enumerate().filter(|(_, v)| !v.is_zero())
    }

    pub fn scale(&self, k: &Q) -> Self {
        if k.is_zero() {
            return QPoly::zero();
        }
        QPoly::from_coeffs(self.c.iter().map(|x| x * k).collect())
    }

    /// Multiplication by t^k.
    pub fn shift(&self, k: usize) -> Self {
        if self.is_zero() {
            return QPoly::zero();
        }
        let mut c = vec![Q::zero(); k];
        c.extend(self.c.iter().cloned());
        QPoly { c }
    }

    pub fn deriv(&self) -> Self {
        QPoly::from_coeffs(
            self.c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, x)| x * Q::from_integer(BigInt::from(i)))
                .collect(),
        )
    }

    /// Substitute s = a·t^d.
    pub fn compose_monomial(&self, a: &Q, d: usize) -> Self {
        let mut out = vec![Q::zero(); self.c.len().saturating_sub(1) * d + 1];
        let mut pw = Q::one();
        for (i, x) in self.c.iter().enumerate() {
            out[i * d] = x * &pw;
            pw *= a;
        }
        QPoly::from_coeffs(out)
    }

    pub fn eval(&self, t: &Q) -> Q {
        self.c.iter().rev().fold(Q::zero(), |acc, x| acc * t + x)
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, x| acc * t + to_f64(x))
    }

    pub fn to_f64_coeffs(&self) -> Vec<f64> {
        self.c.iter().map(to_f64).collect()
    }

    /// Sign and natural log of |P(j / 2^s)|, computed in exact integer arithmetic.
    pub fn eval_dyadic_log(&self, j: u64, s: u32) -> (i8, f64) {
        IntPoly::new(self).dyadic_log(j, s)
    }
}

/// P = (Σ num_i t^i) / den with integer numerators, for repeated exact evaluation.
#[derive(Clone, Debug)]
pub struct IntPoly {
    num: Vec<BigInt>,
    den: BigInt,
}

impl IntPoly {
    pub fn new(p: &QPoly) -> Self {
        let den = p.c.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
        let num = p.c.iter().map(|x| x.numer() * (&den / x.denom())).collect();
        IntPoly { num, den }
    }

    /// Sign and natural log of |P(j / 2^s)|.
    pub fn dyadic_log(&self, j: u64, s: u32) -> (i8, f64) {
        if self.num.is_empty() {
            return (0, f64::NEG_INFINITY);
        }
        let deg = self.num.len() - 1;
        let jj = BigInt::from(j);
        let mut acc = BigInt::zero();
        for (i, ni) in self.num.iter().enumerate().rev() {
            acc = acc * &jj + (ni << (s as usize * (deg - i)));
        }
        if acc.is_zero() {
            return (0, f64::NEG_INFINITY);
        }
        let sign = if acc.sign() == Sign::Minus { -1 } else { 1 };
        let l = big_ln(&acc.abs()) - big_ln(&self.den) - (s as f64) * (deg as f64) * std::f64::consts::LN_2;
        (sign, l)
    }
}

/// Natural log of a positive big integer.
pub fn big_ln(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return to_f64(&Q::from_integer(x.clone())).ln();
    }
    let shift = bits - 64;
    let top: BigInt = x >> shift as usize;
    to_f64(&Q::from_integer(top)).ln() + shift as f64 * std::f64::consts::LN_2
}

impl Add for &QPoly {
    type Output = QPoly;
    fn add(self, o: &QPoly) -> QPoly {
        let len = self.c.len().max(o.c.len());
        QPoly::from_coeffs((0..len).map(|i| self.coeff(i) + o.coeff(i)).collect())
    }
}

impl Sub for &QPoly {
    type Output = QPoly;
    fn sub(self, o: &QPoly) -> QPoly {
        let len = self.c.len().max(o.c.len());
        QPoly::from_coeffs((0..len).map(|i| self.coeff(i) - o.coeff(i)).collect())
    }
}

impl Neg for &QPoly {
    type Output = QPoly;
    fn neg(self) -> QPoly {
        QPoly { c: self.c.iter().map(|x| -x).collect() }
    }
}

impl Mul for &QPoly {
    type Output = QPoly;
    fn mul(self, o: &QPoly) -> QPoly {
        if self.is_zero() || o.is_zero() {
            return QPoly::zero();
        }
        let mut c = vec![Q::zero(); self.c.len() + o.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.c.iter().enumerate() {
                if !b.is_zero() {
                    c[i + j] += a * b;
                }
            }
        }
        QPoly::from_coeffs(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::{q, qi};

    #[test]
    fn ring_basics() {
        let p = QPoly::from_coeffs(vec![qi(1), qi(-2), qi(3)]);
        assert_eq!(p.deriv(), QPoly::from_coeffs(vec![qi(-2), qi(6)]));
        assert_eq!(p.eval(&q(1, 2)), q(3, 4));
        assert_eq!((&p - &p).degree(), None);
        assert_eq!((&p * &p).degree(), Some(4));
        let s = p.compose_monomial(&q(1, 2), 2);
        assert_eq!(s.coeff(4), q(3, 4));
    }

    #[test]
    fn dyadic_log_matches_float() {
        let p = QPoly::from_coeffs(vec![q(1, 3), qi(-5), q(7, 2)]);
        let (sg, l) = p.eval_dyadic_log(3, 2);
        let v = p.eval_f64(0.75);
        assert_eq!(sg as f64, v.signum());
        assert!((l - v.abs().ln()).abs() < 1e-12);
    }
}
