//! Green's functions of Θ = ∂_ρ^{2m} + (−1)^m c^{2m} and convolution against them.
//!
//! G(ρ) = Σ_{j<m} a_j e^{iμ_j|ρ|} with μ_j = cλ_j, λ_j = e^{iπ(1+2j)/2m} and
//! a_j = i(−1)^m / (2m μ_j^{2m−1}). Convolutions are carried out on a [`PanelGrid`] by
//! propagating one exponential mode integral per root across panels.

use std::f64::consts::PI;

use crate::cutoff::Jet;
use crate::error::{Error, Result};
use crate::exactnum::{ComplexHP, Params};
use crate::quad::{gauss_legendre, lagrange, PanelGrid, NODES_PER_PANEL};

const I: ComplexHP = ComplexHP { re: 0.0, im: 1.0 };

fn czero() -> ComplexHP {
    ComplexHP::new(0.0, 0.0)
}

/// Θ_k = ∂^{2m} + (−1)^m c_k^{2m}, c_k = (2m/(2m−1)) E_k^{1/2m}.
#[derive(Clone, Debug, serde::Serialize)]
pub struct OdeOperator {
    pub m: u32,
    pub e: f64,
    pub c: f64,
}

impl OdeOperator {
    pub fn new(m: u32, e: f64) -> Self {
        let mf = m as f64;
        OdeOperator { m, e, c: 2.0 * mf / (2.0 * mf - 1.0) * e.powf(1.0 / (2.0 * mf)) }
    }

    pub fn for_level(params: &Params, k: u32) -> Self {
        OdeOperator::new(params.m, params.eigenvalue(k))
    }

    pub fn const_term(&self) -> f64 {
        let s = if self.m % 2 == 0 { 1.0 } else { -1.0 };
        s * self.c.powi(2 * self.m as i32)
    }

    /// Θφ from the derivatives φ, φ', …, φ^{(2m)}.
    pub fn apply(&self, derivs: &[f64]) -> f64 {
        derivs[2 * self.m as usize] + self.const_term() * derivs[0]
    }
}

#[derive(Clone, Debug)]
pub struct GreensFn {
    pub op: OdeOperator,
    /// μ_j = cλ_j, j < m; all in the upper half plane
    pub modes: Vec<ComplexHP>,
    pub amps: Vec<ComplexHP>,
}

impl GreensFn {
    pub fn new(op: OdeOperator) -> Self {
        let m = op.m;
        let mut modes = Vec::new();
        let mut amps = Vec::new();
        let sgn = if m % 2 == 0 { 1.0 } else { -1.0 };
        for j in 0..m {
            let mu = ComplexHP::from_polar(op.c, PI * (1 + 2 * j) as f64 / (2 * m) as f64);
            modes.push(mu);
            amps.push(I * sgn / (mu.powu(2 * m - 1) * (2 * m) as f64));
        }
        GreensFn { op, modes, amps }
    }

    pub fn m(&self) -> u32 {
        self.op.m
    }

    pub fn eval(&self, rho: f64) -> ComplexHP {
        self.modes.iter().zip(&self.amps).map(|(mu, a)| a * (I * mu * rho.abs()).exp()).sum()
    }

    /// G^{(ℓ)}(ρ) for ℓ < 2m. At ρ = 0 odd orders return the (vanishing) mean of both sides.
    pub fn deriv(&self, ell: usize, rho: f64) -> Result<ComplexHP> {
        let max = 2 * self.m() as usize - 1;
        if ell > max {
            return Err(Error::DerivativeOrder { order: ell, max });
        }
        if rho == 0.0 && ell % 2 == 1 {
            return Ok(czero());
        }
        let s = if rho < 0.0 { -1.0 } else { 1.0 };
        Ok(self
            .modes
            .iter()
            .zip(&self.amps)
            .map(|(mu, a)| a * (I * mu * s).powu(ell as u32) * (I * mu * rho.abs()).exp())
            .sum())
    }

    /// Amplitudes in the alternate residue form, i / (2m (icλ_j)^{2m−1}).
    pub fn alt_amps(&self) -> Vec<ComplexHP> {
        let m = self.m();
        self.modes.iter().map(|mu| I / ((I * mu).powu(2 * m - 1) * (2 * m) as f64)).collect()
    }

    /// The alternate exponential-sum form.
    pub fn eval_alt(&self, rho: f64) -> ComplexHP {
        self.modes.iter().zip(self.alt_amps()).map(|(mu, a)| a * (I * mu * rho.abs()).exp()).sum()
    }

    /// The alternate trigonometric form (ic)^{−(2m−1)} (1/m) Σ 2^{−[sin θ_j]} e^{−c sin θ_j |ρ|} sin(c|ρ| cos θ_j + θ_j).
    pub fn eval_alt_trig(&self, rho: f64) -> ComplexHP {
        let m = self.m();
        let c = self.op.c;
        let x = rho.abs();
        let mut s = 0.0;
        for j in 0..=((m - 1) / 2) {
            let th = PI * (1 + 2 * j) as f64 / (2 * m) as f64;
            let w = if (th.sin() - 1.0).abs() < 1e-14 { 0.5 } else { 1.0 };
            s += w * (-c * th.sin() * x).exp() * (c * x * th.cos() + th).sin();
        }
        (I * c).powi(-(2 * m as i32 - 1)) * (s / m as f64)
    }

    /// Ratio alternate / true amplitude, per mode.
    pub fn discrepancy(&self) -> Vec<ComplexHP> {
        self.alt_amps().iter().zip(&self.amps).map(|(p, a)| p / a).collect()
    }

    /// sup_ρ |G(ρ)| c^{2m−1} e^{c sin(π/2m)|ρ|}, sampled on [0, span].
    pub fn decay_constant(&self, span: f64, samples: usize) -> f64 {
        let m = self.m();
        let c = self.op.c;
        let rate = c * (PI / (2 * m) as f64).sin();
        (0..=samples)
            .map(|i| {
                let x = span * i as f64 / samples as f64;
                self.eval(x).norm() * c.powi(2 * m as i32 - 1) * (rate * x).exp()
            })
            .fold(0.0, f64::max)
    }
}

/// Bump exp(−1/(1−u²)), u = (ρ−s)/w, with derivatives up to `order`.
pub fn bump(rho: f64, center: f64, width: f64, order: usize) -> Vec<f64> {
    let u = (rho - center) / width;
    if u.abs() >= 1.0 {
        return vec![0.0; order + 1];
    }
    let x = Jet::variable(u, order);
    let inner = x.mul(&x).scale(-1.0).add_const(1.0).recip().scale(-1.0);
    let j = inner.exp();
    (0..=order).map(|k| j.deriv(k) / width.powi(k as i32)).collect()
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct WeakDeltaReport {
    pub m: u32,
    pub e: f64,
    pub max_residual: f64,
    /// (center, width, |∫ G Θφ − φ(0)|)
    pub probes: Vec<(f64, f64, f64)>,
}

/// ∫ f, splitting [a, b] at the listed breakpoints and doubling panels until successive
/// values agree to `tol` relative to ∫|f|.
pub fn adaptive_integral<F: Fn(f64) -> ComplexHP>(a: f64, b: f64, breaks: &[f64], tol: f64, f: F) -> Result<ComplexHP> {
    let rule = gauss_legendre(20);
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|x| *x > a && *x < b));
    pts.push(b);
    let eval = |panels: usize| -> (ComplexHP, f64) {
        let mut s = czero();
        let mut mass = 0.0;
        for w in pts.windows(2) {
            let h = (w[1] - w[0]) / panels as f64;
            for k in 0..panels {
                let lo = w[0] + h * k as f64;
                s += crate::quad::integrate(lo, lo + h, &rule, &f);
                mass += crate::quad::integrate(lo, lo + h, &rule, |x| ComplexHP::new(f(x).norm(), 0.0)).re;
            }
        }
        (s, mass)
    };
    let mut prev = eval(4).0;
    let mut panels = 8;
    while panels <= 4096 {
        let (cur, mass) = eval(panels);
        if (cur - prev).norm() <= tol * mass.max(1e-300) {
            return Ok(cur);
        }
        prev = cur;
        panels *= 2;
    }
    Err(Error::Quadrature(format!("no convergence on [{a}, {b}]")))
}

/// Bump (center, width) pairs; narrower bumps lose digits to the 2m-th derivative.
pub const DEFAULT_PROBES: [(f64, f64); 4] = [(0.0, 1.0), (0.3, 1.2), (-0.5, 1.5), (0.9, 2.0)];

/// Checks ∫ G Θφ = φ(0) on bump test functions at the given (center, width) pairs.
pub fn weak_delta_check(g: &GreensFn, probes: &[(f64, f64)]) -> Result<WeakDeltaReport> {
    let order = 2 * g.m() as usize;
    let mut out = Vec::new();
    let mut worst = 0.0f64;
    for &(s, w) in probes {
        let val = adaptive_integral(s - w, s + w, &[0.0], 1e-13, |x| g.eval(x) * g.op.apply(&bump(x, s, w, order)))?;
        let res = (val - bump(0.0, s, w, 0)[0]).norm();
        worst = worst.max(res);
        out.push((s, w, res));
    }
    Ok(WeakDeltaReport { m: g.m(), e: g.op.e, max_residual: worst, probes: out })
}

/// Precomputed panel propagators for one exponential e^{iν·}.
#[derive(Clone, Debug)]
pub struct PanelKernel {
    pub nu: ComplexHP,
    step: ComplexHP,
    phase_f: Vec<ComplexHP>,
    phase_b: Vec<ComplexHP>,
    fwd: Vec<Vec<ComplexHP>>,
    fwd_end: Vec<ComplexHP>,
    bwd: Vec<Vec<ComplexHP>>,
    bwd_start: Vec<ComplexHP>,
}

impl PanelKernel {
    pub fn new(nu: ComplexHP, grid: &PanelGrid) -> Self {
        let hh = 0.5 * grid.h;
        let k = I * nu * hh;
        let npts = 32 + (4.0 * (nu.norm() * grid.h)).ceil() as usize;
        let rule = gauss_legendre(npts);
        let xi = &grid.xi;
        let bary = &grid.bary;
        // (h/2) ∫_lo^hi e^{k·sign·(arg)} L_r(ξ) dξ
        let weights = |lo: f64, hi: f64, phase: &dyn Fn(f64) -> ComplexHP| -> Vec<ComplexHP> {
            let mut w = vec![czero(); NODES_PER_PANEL];
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (x, wt) in rule.0.iter().zip(&rule.1) {
                let z = mid + half * x;
                let e = phase(z) * (wt * half * hh);
                for (r, slot) in w.iter_mut().enumerate() {
                    *slot += e * lagrange(xi, bary, r, z);
                }
            }
            w
        };
        let mut fwd = Vec::new();
        let mut bwd = Vec::new();
        let mut phase_f = Vec::new();
        let mut phase_b = Vec::new();
        for &xq in xi {
            fwd.push(weights(-1.0, xq, &|z| (k * (xq - z)).exp()));
            bwd.push(weights(xq, 1.0, &|z| (k * (z - xq)).exp()));
            phase_f.push((k * (xq + 1.0)).exp());
            phase_b.push((k * (1.0 - xq)).exp());
        }
        let fwd_end = weights(-1.0, 1.0, &|z| (k * (1.0 - z)).exp());
        let bwd_start = weights(-1.0, 1.0, &|z| (k * (z + 1.0)).exp());
        PanelKernel { nu, step: (k * 2.0).exp(), phase_f, phase_b, fwd, fwd_end, bwd, bwd_start }
    }

    /// A(ρ) = ∫_lo^ρ e^{iν(ρ−σ)} f(σ) dσ at every node.
    pub fn forward(&self, grid: &PanelGrid, f: &[ComplexHP]) -> (Vec<ComplexHP>, ComplexHP) {
        let mut out = vec![czero(); f.len()];
        let mut acc = czero();
        for p in 0..grid.npan {
            let fs = &f[p * NODES_PER_PANEL..(p + 1) * NODES_PER_PANEL];
            for q in 0..NODES_PER_PANEL {
                let mut v = self.phase_f[q] * acc;
                for (w, fv) in self.fwd[q].iter().zip(fs) {
                    v += w * fv;
                }
                out[p * NODES_PER_PANEL + q] = v;
            }
            let mut next = self.step * acc;
            for (w, fv) in self.fwd_end.iter().zip(fs) {
                next += w * fv;
            }
            acc = next;
        }
        (out, acc)
    }

    /// B(ρ) = ∫_ρ^hi e^{iν(σ−ρ)} f(σ) dσ + e^{iν(hi−ρ)} tail at every node.
    pub fn backward(&self, grid: &PanelGrid, f: &[ComplexHP], tail: ComplexHP) -> Vec<ComplexHP> {
        let mut out = vec![czero(); f.len()];
        let mut acc = tail;
        for p in (0..grid.npan).rev() {
            let fs = &f[p * NODES_PER_PANEL..(p + 1) * NODES_PER_PANEL];
            for q in 0..NODES_PER_PANEL {
                let mut v = self.phase_b[q] * acc;
                for (w, fv) in self.bwd[q].iter().zip(fs) {
                    v += w * fv;
                }
                out[p * NODES_PER_PANEL + q] = v;
            }
            let mut next = self.step * acc;
            for (w, fv) in self.bwd_start.iter().zip(fs) {
                next += w * fv;
            }
            acc = next;
        }
        out
    }
}

/// f(σ) ≈ Σ_k c_k (X/σ)^k on the upper part of the grid, X = grid end.
#[derive(Clone, Debug)]
pub struct TailFit {
    pub x: f64,
    pub k_min: usize,
    pub coeffs: Vec<ComplexHP>,
    pub rms_residual: f64,
}

pub const TAIL_TERMS: usize = 9;

pub fn fit_tail(grid: &PanelGrid, f: &[ComplexHP], k_min: usize) -> TailFit {
    let x = grid.hi();
    let start = grid.lo.max(0.5 * x);
    let idx: Vec<usize> = (0..f.len()).filter(|&i| grid.node(i) >= start).collect();
    let cols: Vec<Vec<f64>> = (0..TAIL_TERMS)
        .map(|t| idx.iter().map(|&i| (x / grid.node(i)).powi((k_min + t) as i32)).collect())
        .collect();
    let re: Vec<f64> = idx.iter().map(|&i| f[i].re).collect();
    let im: Vec<f64> = idx.iter().map(|&i| f[i].im).collect();
    let cr = crate::spectral::lstsq(&cols, &re);
    let ci = crate::spectral::lstsq(&cols, &im);
    let coeffs: Vec<ComplexHP> = cr.iter().zip(&ci).map(|(a, b)| ComplexHP::new(*a, *b)).collect();
    let mut ss = 0.0;
    for (row, &i) in idx.iter().enumerate() {
        let mut v = czero();
        for t in 0..TAIL_TERMS {
            v += coeffs[t] * cols[t][row];
        }
        ss += (v - f[i]).norm_sqr();
    }
    TailFit { x, k_min, coeffs, rms_residual: (ss / idx.len() as f64).sqrt() }
}

/// ∫_X^∞ e^{iν(σ−X)} (X/σ)^k dσ.
pub fn tail_power_integral(nu: ComplexHP, x: f64, k: usize) -> Result<ComplexHP> {
    if nu.norm() * x < 1e-12 {
        if k < 2 {
            return Err(Error::Quadrature(format!("divergent tail: ν = 0, power {k}")));
        }
        return Ok(ComplexHP::new(x / (k as f64 - 1.0), 0.0));
    }
    if nu.norm() * x > k as f64 + 45.0 {
        // integration by parts: T_k = −1/(iν) + (k/(iνX)) T_{k+1}, summed from the far end
        let inv = 1.0 / (I * nu);
        let mut terms = Vec::new();
        let mut coef = -inv;
        let mut kk = k;
        for _ in 0..400 {
            terms.push(coef);
            coef = coef * (kk as f64) * inv / x;
            kk += 1;
            if coef.norm() < 1e-18 * terms[0].norm() {
                break;
            }
        }
        return Ok(terms.into_iter().sum());
    }
    if nu.im <= 0.0 {
        return Err(Error::Quadrature(format!("tail with ν = {nu} needs |ν|X larger")));
    }
    let len = 60.0 / nu.im;
    adaptive_integral(x, x + len, &[], 1e-14, |s| (I * nu * (s - x)).exp() * (x / s).powi(k as i32))
}

pub fn tail_integral(nu: ComplexHP, fit: &TailFit) -> Result<ComplexHP> {
    let mut s = czero();
    for (t, c) in fit.coeffs.iter().enumerate() {
        s += c * tail_power_integral(nu, fit.x, fit.k_min + t)?;
    }
    Ok(s)
}

/// One root's contribution to a convolution.
#[derive(Clone, Debug)]
pub struct ModeData {
    pub mu: ComplexHP,
    pub amp: ComplexHP,
    /// true when the mode decays no faster than the scale factor and was split off
    pub marginal: bool,
    /// causal part (forward integral) or, for marginal modes, minus the anti-causal tail
    pub left: Vec<ComplexHP>,
    /// anti-causal part ∫_ρ^∞ e^{iμ(σ−ρ)} f dσ (scaled)
    pub right: Vec<ComplexHP>,
    /// K_j = ∫ e^{−iμσ} f(σ) dσ over the whole grid (marginal modes only)
    pub hom: ComplexHP,
}

/// Scaled convolution ĝ = e^{−iμ_s ρ}(G ∗ f), stored as mode integrals at the grid nodes.
#[derive(Clone, Debug)]
pub struct Convolution {
    pub scale: ComplexHP,
    pub modes: Vec<ModeData>,
    pub tail_residual: f64,
}

impl Convolution {
    /// e^{−iμ_s ρ} ∂^k(G ∗ f − Σ h_j) at node `idx`, k < 2m.
    pub fn deriv_at(&self, k: usize, idx: usize) -> ComplexHP {
        let mut s = czero();
        for md in &self.modes {
            let w = I * md.mu;
            s += md.amp * (w.powu(k as u32) * md.left[idx] + (-w).powu(k as u32) * md.right[idx]);
        }
        s
    }

    pub fn deriv_nodes(&self, k: usize) -> Vec<ComplexHP> {
        (0..self.modes[0].left.len()).map(|i| self.deriv_at(k, i)).collect()
    }

    /// Homogeneous pieces h_j = a_j K_j e^{iμ_j ρ} removed from marginal modes, as (j, a_j K_j).
    pub fn marginal_corrections(&self) -> Vec<(usize, ComplexHP)> {
        self.modes
            .iter()
            .enumerate()
            .filter(|(_, md)| md.marginal)
            .map(|(j, md)| (j, md.amp * md.hom))
            .collect()
    }
}

/// Convolve G with f = e^{iμ_s σ} f̂(σ), f̂ given at the grid nodes and vanishing below the grid.
///
/// With `subtract_marginal`, modes whose rate matches the scale are replaced by their
/// anti-causal part, which removes the homogeneous solution a_j K_j e^{iμ_j ρ}.
pub fn convolve(g: &GreensFn, grid: &PanelGrid, f_hat: &[ComplexHP], scale: ComplexHP, subtract_marginal: bool) -> Result<Convolution> {
    if f_hat.len() != grid.len() {
        return Err(Error::Mismatch(format!("{} values for {} nodes", f_hat.len(), grid.len())));
    }
    let fit0 = fit_tail(grid, f_hat, 0);
    let fit2 = fit_tail(grid, f_hat, 2);
    let mut modes = Vec::new();
    for (mu, amp) in g.modes.iter().zip(&g.amps) {
        let nu_f = mu - scale;
        let nu_b = mu + scale;
        let marginal = subtract_marginal && nu_f.im.abs() <= 1e-9 * mu.norm();
        if nu_f.im < -1e-9 * mu.norm() {
            return Err(Error::InvalidParams(format!("mode {mu} decays slower than the scale {scale}")));
        }
        let pick = |nu: ComplexHP| if nu.norm() * grid.hi() < 1e-12 { &fit2 } else { &fit0 };
        let kb = PanelKernel::new(nu_b, grid);
        let right = kb.backward(grid, f_hat, tail_integral(nu_b, pick(nu_b))?);
        let kf = PanelKernel::new(nu_f, grid);
        let (fwd, end) = kf.forward(grid, f_hat);
        let (left, hom) = if marginal {
            let nu_c = -nu_f;
            let tail = tail_integral(nu_c, pick(nu_c))?;
            let kc = PanelKernel::new(nu_c, grid);
            let c: Vec<ComplexHP> = kc.backward(grid, f_hat, tail).into_iter().map(|v| -v).collect();
            let hom = (-I * nu_f * grid.hi()).exp() * (end + tail);
            (c, hom)
        } else {
            (fwd, czero())
        };
        modes.push(ModeData { mu: *mu, amp: *amp, marginal, left, right, hom });
    }
    let scale_f = f_hat.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    Ok(Convolution { scale, modes, tail_residual: fit0.rms_residual / scale_f })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(m: u32) -> GreensFn {
        GreensFn::new(OdeOperator::new(m, 1.0))
    }

    #[test]
    fn closed_form_m1() {
        let g = unit(1);
        assert!((g.op.c - 2.0).abs() < 1e-15);
        for &x in &[-1.3, 0.0, 0.4, 2.0] {
            assert!((g.eval(x) - ComplexHP::new(-0.25 * (-2.0 * f64::abs(x)).exp(), 0.0)).norm() < 1e-14);
        }
        let d = g.deriv(1, 0.7).unwrap();
        assert!((d - ComplexHP::new(0.5 * (-1.4f64).exp(), 0.0)).norm() < 1e-14);
        assert!(g.deriv(2, 0.7).is_err());
    }

    #[test]
    fn roots_annihilate_symbol() {
        for m in 1..=4 {
            let g = GreensFn::new(OdeOperator::new(m, 7.0));
            for mu in &g.modes {
                let v = (I * mu).powu(2 * m) + g.op.const_term();
                assert!(v.norm() < 1e-10 * g.op.const_term().abs());
                assert!(mu.im > 0.0);
            }
        }
    }

    #[test]
    fn jump_and_evenness() {
        for m in 1..=3 {
            let g = GreensFn::new(OdeOperator::new(m, 5.0));
            let k = 2 * m as usize - 1;
            let jump = g.deriv(k, 1e-12).unwrap() - g.deriv(k, -1e-12).unwrap();
            assert!((jump - ComplexHP::new(1.0, 0.0)).norm() < 1e-9, "m={m} jump {jump}");
            for &x in &[0.3, 1.7] {
                assert!((g.eval(x) - g.eval(-x)).norm() < 1e-15);
                assert!(g.eval(x).im.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn derivative_matches_difference() {
        let g = unit(2);
        let h = 1e-3;
        let x = 0.8;
        let fd = (g.deriv(2, x + h).unwrap() - g.deriv(2, x - h).unwrap()) / (2.0 * h);
        assert!((fd - g.deriv(3, x).unwrap()).norm() < 1e-6);
    }

    #[test]
    fn alternate_forms_are_i_times_true() {
        for m in 1..=4 {
            let g = GreensFn::new(OdeOperator::new(m, 3.0));
            for d in g.discrepancy() {
                assert!((d - I).norm() < 1e-12);
            }
            for &x in &[0.2, 1.1, 2.5] {
                assert!((g.eval_alt(x) - I * g.eval(x)).norm() < 1e-13);
                assert!((g.eval_alt_trig(x) - I * g.eval(x)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn weak_delta() {
        for m in 1..=3 {
            let g = GreensFn::new(OdeOperator::new(m, 3.0));
            let r = weak_delta_check(&g, &DEFAULT_PROBES).unwrap();
            assert!(r.max_residual < 1e-9, "m={m}: {}", r.max_residual);
            assert!(g.decay_constant(20.0, 2000) <= 1.0);
        }
    }

    #[test]
    fn convolution_against_exponential() {
        // (G ∗ e^{−2σ}1_{σ>0})(ρ) = −¼ e^{−2ρ}(ρ + ¼) for m = 1, E = 1
        let g = unit(1);
        let grid = PanelGrid::new(0.0, 30.0, 0.25);
        let f = vec![ComplexHP::new(1.0, 0.0); grid.len()];
        let conv = convolve(&g, &grid, &f, ComplexHP::new(0.0, 2.0), false).unwrap();
        for idx in [3, 100, 700] {
            let x = grid.node(idx);
            let want = -0.25 * (x + 0.25);
            assert!((conv.deriv_at(0, idx) - want).norm() < 1e-12, "{x}");
            let want1 = -0.25 * (0.5 - 2.0 * x);
            assert!((conv.deriv_at(1, idx) - want1).norm() < 1e-12, "{x}");
        }
    }

    #[test]
    fn marginal_split_reconstructs_full_convolution() {
        let g = unit(2);
        let mu0 = g.modes[0];
        let grid = PanelGrid::new(1.0, 60.0, 0.25);
        let f: Vec<ComplexHP> = grid
            .nodes()
            .iter()
            .map(|&x| ComplexHP::new(1.0 / (x * x), 0.3 / (x * x * x)) * crate::cutoff::chi(0, 1.0, x, 0)[0])
            .collect();
        let full = convolve(&g, &grid, &f, mu0, false).unwrap();
        let split = convolve(&g, &grid, &f, mu0, true).unwrap();
        let corr = split.marginal_corrections();
        assert_eq!(corr.len(), 2);
        for idx in [200, 900, 1800] {
            let x = grid.node(idx);
            for k in 0..4 {
                let mut h = czero();
                for &(j, c) in &corr {
                    let mu = g.modes[j];
                    h += c * (I * mu).powu(k as u32) * (I * (mu - mu0) * x).exp();
                }
                let diff = full.deriv_at(k, idx) - split.deriv_at(k, idx) - h;
                assert!(diff.norm() < 1e-9, "k={k} x={x} diff={diff}");
            }
        }
    }
}
