//! Smooth cutoffs χ_ℓ and ω_ℓ with derivatives from truncated Taylor arithmetic.
//!
//! χ_ℓ is the exp(−1/x) smoothstep on [2R₁(ℓ+1), 4R₁(ℓ+1)]. ω_ℓ rises on
//! [2R(ℓ+1), 4R(ℓ+1)]: a Gevrey-(1+1/2m) step of half that width convolved with a
//! cardinal B-spline of order 3ℓ+1 covering the other half. The B-spline factor keeps
//! the first 3ℓ derivatives analytic-like and uniform in ℓ; the step supplies the
//! Gevrey bound beyond.

use crate::quad::gauss_legendre;

/// Taylor coefficients f^{(k)}(x₀)/k!, k = 0..=order.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet(pub Vec<f64>);

impl Jet {
    pub fn constant(v: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = v;
        Jet(c)
    }

    pub fn variable(x0: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = x0;
        if order > 0 {
            c[1] = 1.0;
        }
        Jet(c)
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    /// k-th derivative at the expansion point.
    pub fn deriv(&self, k: usize) -> f64 {
        self.0[k] * (1..=k).map(|i| i as f64).product::<f64>()
    }

    pub fn scale(&self, s: f64) -> Self {
        Jet(self.0.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, o: &Jet) -> Self {
        Jet(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn add_const(&self, v: f64) -> Self {
        let mut c = self.0.clone();
        c[0] += v;
        Jet(c)
    }

    pub fn mul(&self, o: &Jet) -> Self {
        let n = self.0.len();
        let mut c = vec![0.0; n];
        for i in 0..n {
            for j in 0..n - i {
                c[i + j] += self.0[i] * o.0[j];
            }
        }
        Jet(c)
    }

    pub fn recip(&self) -> Self {
        let n = self.0.len();
        let mut c = vec![0.0; n];
        c[0] = 1.0 / self.0[0];
        for k in 1..n {
            let s: f64 = (1..=k).map(|j| self.0[j] * c[k - j]).sum();
            c[k] = -s * c[0];
        }
        Jet(c)
    }

    pub fn div(&self, o: &Jet) -> Self {
        self.mul(&o.recip())
    }

    pub fn powi(&self, e: u32) -> Self {
        let mut out = Jet::constant(1.0, self.order());
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    pub fn exp(&self) -> Self {
        let n = self.0.len();
        let mut c = vec![0.0; n];
        c[0] = self.0[0].exp();
        for k in 1..n {
            let s: f64 = (1..=k).map(|j| j as f64 * self.0[j] * c[k - j]).sum();
            c[k] = s / k as f64;
        }
        Jet(c)
    }
}

/// exp(−x^{−a}) for x > 0 and 0 otherwise, as a jet at x₀.
fn flat(x0: f64, a: u32, order: usize) -> Jet {
    if x0 <= 0.0 || x0.powi(-(a as i32)) > 700.0 {
        return Jet::constant(0.0, order);
    }
    Jet::variable(x0, order).powi(a).recip().scale(-1.0).exp()
}

/// ψ(x)/(ψ(x)+ψ(1−x)) with ψ(x) = exp(−x^{−a}): 0 for x ≤ 0, 1 for x ≥ 1.
pub fn smoothstep(x0: f64, a: u32, order: usize) -> Jet {
    if x0 <= 0.0 {
        return Jet::constant(0.0, order);
    }
    if x0 >= 1.0 {
        return Jet::constant(1.0, order);
    }
    let p = flat(x0, a, order);
    let q = flat(1.0 - x0, a, order);
    // ψ(1−x) in x: flip odd coefficients
    let q = Jet(q.0.iter().enumerate().map(|(k, c)| if k % 2 == 1 { -c } else { *c }).collect());
    if p.0[0] == 0.0 {
        return Jet::constant(0.0, order);
    }
    if q.0[0] == 0.0 {
        return Jet::constant(1.0, order);
    }
    p.div(&p.add(&q))
}

/// Derivatives 0..=order of the rescaled step S((ρ−a)/w).
fn scaled_step(rho: f64, a: f64, w: f64, exp_a: u32, order: usize) -> Vec<f64> {
    let j = smoothstep((rho - a) / w, exp_a, order);
    (0..=order).map(|k| j.deriv(k) / w.powi(k as i32)).collect()
}

/// χ_ℓ and its derivatives up to `order` at ρ.
pub fn chi(ell: u32, r1: f64, rho: f64, order: usize) -> Vec<f64> {
    let a = 2.0 * r1 * (ell as f64 + 1.0);
    scaled_step(rho, a, a, 1, order)
}

/// Cardinal B-spline of order N on [0, N] (unit knots), by Cox–de Boor.
pub fn bspline(order: usize, x: f64) -> f64 {
    if x <= 0.0 || x >= order as f64 {
        return 0.0;
    }
    let i = x.floor() as usize;
    // values of order-1 splines on the knot cell
    let mut b = vec![0.0; order + 1];
    b[i] = 1.0;
    for k in 2..=order {
        for j in 0..order {
            let left = (x - j as f64) / (k - 1) as f64 * b[j];
            let right = (j as f64 + k as f64 - x) / (k - 1) as f64 * b[j + 1];
            b[j] = left + right;
        }
    }
    b[0]
}

/// The Gevrey cutoff family ω_ℓ for fixed (m, R).
#[derive(Clone, Debug)]
pub struct Omega {
    pub m: u32,
    pub r: f64,
    rule: (Vec<f64>, Vec<f64>),
}

impl Omega {
    pub fn new(m: u32, r: f64) -> Self {
        Omega { m, r, rule: gauss_legendre(20) }
    }

    pub fn ramp(&self, ell: u32) -> (f64, f64) {
        let a = 2.0 * self.r * (ell as f64 + 1.0);
        (a, 2.0 * a)
    }

    /// Number of B-spline pieces for level ℓ.
    pub fn spline_order(ell: u32) -> usize {
        3 * ell as usize + 1
    }

    /// ω_ℓ^{(k)}(ρ), k = 0..=order.
    pub fn eval(&self, ell: u32, rho: f64, order: usize) -> Vec<f64> {
        let (a, b) = self.ramp(ell);
        let mut out = vec![0.0; order + 1];
        if rho <= a {
            return out;
        }
        if rho >= b {
            out[0] = 1.0;
            return out;
        }
        let half = 0.5 * (b - a);
        let n = Self::spline_order(ell);
        let eps = half / n as f64;
        // ω(ρ) = ∫ S((ρ − a − s)/half) M(s) ds, M the B-spline of total width `half`
        let (xs, ws) = &self.rule;
        for piece in 0..n {
            let s0 = piece as f64 * eps;
            for (x, w) in xs.iter().zip(ws) {
                let s = s0 + 0.5 * eps * (x + 1.0);
                let mval = bspline(n, s / eps) / eps;
                if mval == 0.0 {
                    continue;
                }
                let d = scaled_step(rho - s, a, half, 2 * self.m, order);
                let wt = 0.5 * eps * w * mval;
                for k in 0..=order {
                    out[k] += wt * d[k];
                }
            }
        }
        out
    }

    /// Sup of |ω_ℓ^{(a)}| over the ramp, sampled on `samples` points.
    pub fn sup_deriv(&self, ell: u32, order: usize, samples: usize) -> Vec<f64> {
        let (a, b) = self.ramp(ell);
        let mut sup = vec![0.0f64; order + 1];
        for i in 1..samples {
            let rho = a + (b - a) * i as f64 / samples as f64;
            for (k, v) in self.eval(ell, rho, order).into_iter().enumerate() {
                sup[k] = sup[k].max(v.abs());
            }
        }
        sup
    }
}

/// Fitted constants of the two derivative regimes of ω_ℓ.
#[derive(Clone, Debug, serde::Serialize)]
pub struct OmegaBounds {
    /// least C with |∂^a ω_ℓ| ≤ C^{a+1} R^{−a} for a ≤ 3ℓ
    pub c_low: f64,
    /// least C with |∂^a ω_ℓ| ≤ (C R)^{a+1} a!^σ ρ^{−a} over the ramp, for all sampled a
    pub c_gevrey: f64,
    pub sigma: f64,
}

pub fn omega_bounds(om: &Omega, ell_max: u32, a_max: usize) -> OmegaBounds {
    let sigma = 1.0 + 1.0 / (2.0 * om.m as f64);
    let mut c_low = 0.0f64;
    let mut c_gevrey = 0.0f64;
    for ell in 0..=ell_max {
        let sup = om.sup_deriv(ell, a_max, 200);
        let (lo, _) = om.ramp(ell);
        for (a, s) in sup.iter().enumerate() {
            if *s == 0.0 {
                continue;
            }
            let af = a as f64;
            if a <= 3 * ell as usize {
                c_low = c_low.max((s * om.r.powf(af)).powf(1.0 / (af + 1.0)));
            }
            let lf = crate::spectral::ln_factorial(a as u32);
            let ln = s.ln() - sigma * lf + af * lo.ln();
            c_gevrey = c_gevrey.max((ln / (af + 1.0)).exp() / om.r);
        }
    }
    OmegaBounds { c_low, c_gevrey, sigma }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_arithmetic() {
        // 1/(1 − x) at 0.5 and exp(x²) at 1
        let x = Jet::variable(0.5, 4);
        let r = x.scale(-1.0).add_const(1.0).recip();
        assert!((r.deriv(3) - 6.0 / 0.5f64.powi(4)).abs() < 1e-10);
        let e = Jet::variable(1.0, 3).powi(2).exp();
        assert!((e.deriv(1) - 2.0 * 1f64.exp()).abs() < 1e-12);
        assert!((e.deriv(2) - 6.0 * 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn step_symmetry() {
        for &x in &[0.1, 0.3, 0.5, 0.77] {
            let a = smoothstep(x, 2, 3);
            let b = smoothstep(1.0 - x, 2, 3);
            assert!((a.0[0] + b.0[0] - 1.0).abs() < 1e-14);
            assert!((a.deriv(1) - b.deriv(1)).abs() < 1e-12);
        }
    }

    #[test]
    fn bspline_partition_of_unity() {
        for &x in &[0.3, 1.7, 2.2, 3.9] {
            let s: f64 = (-5..6).map(|k| bspline(4, x + k as f64)).sum();
            assert!((s - 1.0).abs() < 1e-14, "{s}");
        }
        assert!((bspline(2, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn omega_profile() {
        let om = Omega::new(1, 2.0);
        for ell in 0..3 {
            let (a, b) = om.ramp(ell);
            assert_eq!(om.eval(ell, a - 0.1, 2), vec![0.0; 3]);
            assert_eq!(om.eval(ell, b + 0.1, 2)[0], 1.0);
            let mid = om.eval(ell, 0.5 * (a + b), 3);
            assert!(mid[0] > 0.0 && mid[0] < 1.0 && mid[1] > 0.0);
            // derivative against a central difference
            let h = 1e-4;
            let x = a + 0.37 * (b - a);
            let fd = (om.eval(ell, x + h, 0)[0] - om.eval(ell, x - h, 0)[0]) / (2.0 * h);
            assert!((fd - om.eval(ell, x, 1)[1]).abs() < 1e-7);
        }
    }

    #[test]
    fn chi_support() {
        assert_eq!(chi(1, 2.0, 7.9, 0)[0], 0.0);
        assert_eq!(chi(1, 2.0, 16.1, 0)[0], 1.0);
        let v = chi(1, 2.0, 12.0, 0)[0];
        assert!((v - 0.5).abs() < 1e-14);
    }
}
