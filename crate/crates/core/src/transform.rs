//! The kernel 𝒦[ũ](x, y) = ∫ e^{iyρ^θ} ρ^r ũ(ρ^γx, ρ) dρ, the image of the operator under it,
//! the level remainders w_ℓ, the Fourier trace in y and stretched-exponential fits.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exactnum::{q, qi, qpow, to_f64, ComplexHP, Q};
use crate::quad::{lagrange, PanelGrid, NODES_PER_PANEL};
use crate::solver::{Assembled, FastExp, LevelFn};
use crate::spectral::{eigenfunction, lstsq, weighted_integral, ExpPoly, Parity};

const I: ComplexHP = ComplexHP { re: 0.0, im: 1.0 };

fn czero() -> ComplexHP {
    ComplexHP::new(0.0, 0.0)
}

/// K' = ((2m−1)/(2mi))^{2m}, which is real.
pub fn kprime_exact(m: u32) -> Q {
    let k = qpow(&q(2 * m as i64 - 1, 2 * m as i64), 2 * m);
    if m % 2 == 1 {
        -k
    } else {
        k
    }
}

fn div_t(f: &ExpPoly, k: usize) -> Result<ExpPoly> {
    let c = f.poly.coeffs();
    if c.iter().take(k).any(|x| !num_traits::Zero::is_zero(x)) {
        return Err(Error::Mismatch(format!("t^{k} does not divide the bracket")));
    }
    let rest = c.iter().skip(k).cloned().collect();
    Ok(ExpPoly::new(f.n, crate::poly::QPoly::from_coeffs(rest)))
}

/// Exact t-brackets of the reduced operator acting on v_p.
#[derive(Clone, Debug)]
pub struct Brackets {
    pub m: usize,
    pub p_max: usize,
    /// t^{−2n}(−∂² + t^{4n+2})v_p
    pub pot: Vec<ExpPoly>,
    /// K'𝒫_i(t∂_t)v_p, indexed [i][p]
    pub pi: Vec<Vec<ExpPoly>>,
    /// Π₀ coefficients of `pot` and `pi`
    pub pot_proj: Vec<Q>,
    pub pi_proj: Vec<Vec<Q>>,
    v0: FastExp,
    pot_perp: Vec<FastExp>,
    pi_perp: Vec<Vec<FastExp>>,
    full_pot: Vec<FastExp>,
    full_pi: Vec<Vec<FastExp>>,
}

impl Brackets {
    pub fn new(params: &crate::Params, table: &crate::coeffs::OperatorTable, p_max: usize) -> Result<Self> {
        let n = params.n;
        let m = params.m as usize;
        let kp = kprime_exact(params.m);
        let v: Vec<ExpPoly> = (0..=p_max).map(|p| eigenfunction(Parity::Even, p as u32, n).rep).collect();
        let v0 = &v[0];
        let norm0 = weighted_integral(n, &(&v0.poly * &v0.poly), Parity::Even)?.coeff;
        let proj = |f: &ExpPoly| -> Result<Q> {
            Ok(weighted_integral(n, &(&f.poly * &v0.poly), Parity::Even)?.coeff / &norm0)
        };
        let mut full_pot = Vec::new();
        let mut pot = Vec::new();
        for vp in &v {
            let f = vp.deriv_n(2).scale(&qi(-1)).add(&vp.mul_t(4 * n as usize + 2));
            full_pot.push(FastExp::new(&f));
            pot.push(div_t(&f, 2 * n as usize)?);
        }
        let mut pi = Vec::new();
        let mut full_pi = Vec::new();
        for i in 0..=2 * m {
            let mut row = Vec::new();
            let mut full_row = Vec::new();
            for vp in &v {
                let mut acc = ExpPoly::zero(n);
                let mut dj = vp.clone();
                for j in 0..=i {
                    acc = acc.add(&dj.scale(&table.rows.get(i, j)));
                    dj = dj.euler();
                }
                let b = acc.scale(&kp);
                full_row.push(FastExp::new(&b.mul_t(2 * n as usize)));
                row.push(b);
            }
            pi.push(row);
            full_pi.push(full_row);
        }
        let pot_proj = pot.iter().map(&proj).collect::<Result<Vec<_>>>()?;
        let pi_proj = pi.iter().map(|row| row.iter().map(&proj).collect::<Result<Vec<_>>>()).collect::<Result<Vec<_>>>()?;
        let perp = |f: &ExpPoly, c: &Q| FastExp::new(&f.sub(&v0.scale(c)));
        let pot_perp = pot.iter().zip(&pot_proj).map(|(f, c)| perp(f, c)).collect();
        let pi_perp = pi
            .iter()
            .zip(&pi_proj)
            .map(|(row, cs)| row.iter().zip(cs).map(|(f, c)| perp(f, c)).collect())
            .collect();
        Ok(Brackets {
            m,
            p_max,
            v0: FastExp::new(v0),
            pot,
            pi,
            pot_proj,
            pi_proj,
            pot_perp,
            pi_perp,
            full_pot,
            full_pi,
        })
    }
}

/// e^{−iμ₀ρ}∂_ρ^k(ω_ℓ g_{ℓ,p}) at a node, by Leibniz.
fn cut_deriv(asm: &Assembled, f: &LevelFn, k: usize, idx: usize) -> ComplexHP {
    let om = &asm.omega_tab[f.ell as usize];
    let mut s = czero();
    let mut binom = 1.0;
    for j in 0..=k {
        let w = om[j][idx];
        if w != 0.0 {
            s += f.derivs[k - j][idx] * (binom * w);
        }
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    s
}

pub const REMAINDER_TOL: f64 = 1e-6;
pub const REMAINDER_T: [f64; 6] = [0.0, 0.3, 0.7, 1.2, 1.8, 2.5];

#[derive(Clone, Debug, Serialize)]
pub struct RemainderRow {
    pub ell: u32,
    /// 4R(ℓ+1)
    pub outer_start: f64,
    /// 2R(ℓ+1−2m)
    pub inner_end: f64,
    /// max over samples of Σ|terms|
    pub scale: f64,
    /// max |w_ℓ| / scale on ρ > outer_start
    pub outer_max_rel: f64,
    /// max |w_ℓ| on ρ < inner_end
    pub inner_max_abs: f64,
    /// max |w_ℓ| / scale in between
    pub mid_max_rel: f64,
    pub outer_samples: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RemainderReport {
    pub rows: Vec<RemainderRow>,
    pub tol: f64,
    pub pass: bool,
}

/// Value and absolute mass of e^{−iμ₀ρ}t^{−2n}w_L at (t, node).
///
/// w_L = (1−Π₀)Σ_{i≤2m} ρ^{−i}𝒫_i(ω u)_{L−i} + Π₀[𝒫_0(ω u)_L + Σ_{i≥1} ρ^{−i}𝒫_i(ω u)_{L+1−i}].
pub fn remainder_at(asm: &Assembled, br: &Brackets, ell: u32, t: f64, idx: usize) -> (ComplexHP, f64) {
    let m = br.m;
    let rho = asm.sol.grid.node(idx);
    let v0 = br.v0.eval(t);
    let mut sum = czero();
    let mut mass = 0.0;
    let mut add = |z: ComplexHP| {
        sum += z;
        mass += z.norm();
    };
    let levels = &asm.sol.levels;
    for i in 0..=2 * m {
        let rinv = rho.powi(-(i as i32));
        if ell as usize >= i {
            for f in &levels[ell as usize - i] {
                let p = f.p as usize;
                if i == 0 {
                    add(cut_deriv(asm, f, 0, idx) * br.pot_perp[p].eval(t));
                }
                add(cut_deriv(asm, f, 2 * m - i, idx) * (rinv * br.pi_perp[i][p].eval(t)));
            }
        }
        let src = if i == 0 { Some(ell as usize) } else { (ell as usize + 1).checked_sub(i) };
        if let Some(lv) = src {
            for f in &levels[lv] {
                let p = f.p as usize;
                if i == 0 {
                    add(cut_deriv(asm, f, 0, idx) * (to_f64(&br.pot_proj[p]) * v0));
                }
                let c = to_f64(&br.pi_proj[i][p]);
                if c != 0.0 {
                    add(cut_deriv(asm, f, 2 * m - i, idx) * (rinv * c * v0));
                }
            }
        }
    }
    (sum, mass)
}

/// Support gate for every w_ℓ, ℓ ≤ ℓ_max, sampled at all nodes below 0.8ρ_max.
pub fn remainder(asm: &Assembled, br: &Brackets) -> Result<RemainderReport> {
    let sol = asm.sol;
    let m = br.m as f64;
    let r = sol.config.r;
    let rho_top = 0.8 * sol.config.rho_max;
    let idxs: Vec<usize> = (0..sol.grid.len()).filter(|&i| sol.grid.node(i) <= rho_top).collect();
    let mut rows = Vec::new();
    for ell in 0..=asm.ell_max {
        let outer = 4.0 * r * (ell as f64 + 1.0);
        let inner = 2.0 * r * (ell as f64 + 1.0 - 2.0 * m);
        let samples: Vec<(f64, f64, f64)> = idxs
            .par_iter()
            .flat_map_iter(|&idx| {
                let rho = sol.grid.node(idx);
                REMAINDER_T.iter().map(move |&t| {
                    let (w, mass) = remainder_at(asm, br, ell, t, idx);
                    (rho, w.norm(), mass)
                })
            })
            .collect();
        let scale = samples.iter().map(|s| s.2).fold(0.0, f64::max);
        let mut row = RemainderRow {
            ell,
            outer_start: outer,
            inner_end: inner,
            scale,
            outer_max_rel: 0.0,
            inner_max_abs: 0.0,
            mid_max_rel: 0.0,
            outer_samples: 0,
        };
        for &(rho, w, _) in &samples {
            if rho > outer {
                row.outer_max_rel = row.outer_max_rel.max(w / scale);
                row.outer_samples += 1;
            } else if rho < inner {
                row.inner_max_abs = row.inner_max_abs.max(w);
            } else {
                row.mid_max_rel = row.mid_max_rel.max(w / scale);
            }
        }
        if row.outer_samples == 0 {
            return Err(Error::GridExhausted(format!("no samples beyond ρ = {outer} for ℓ = {ell}")));
        }
        rows.push(row);
    }
    let pass = rows.iter().all(|r| r.outer_max_rel <= REMAINDER_TOL && r.inner_max_abs == 0.0);
    Ok(RemainderReport { rows, tol: REMAINDER_TOL, pass })
}

/// Kernel quadrature: Gauss–Legendre subpanels inside each solver panel, with the
/// coefficient tables interpolated onto the subnodes once.
pub struct KernelTable<'a> {
    pub asm: &'a Assembled<'a>,
    pub rho: Vec<f64>,
    pub w: Vec<f64>,
    /// ρ^r e^{iμ₀ρ}
    weight: Vec<ComplexHP>,
    /// Σ_ℓ ω_ℓ ĝ_{ℓ,p}, indexed [p][node]
    u: Vec<Vec<ComplexHP>>,
    /// Σ_ℓ e^{−iμ₀ρ}∂^{2m−i}(ω_ℓ g_{ℓ,p}), indexed [i][p][node]
    op: Vec<Vec<Vec<ComplexHP>>>,
    pub sub: usize,
    pub rho_cut: f64,
    theta: f64,
    gamma: f64,
    two_gamma: f64,
}

/// Number of subpanels per solver panel so that the phase turns by at most ~3 radians in each.
pub fn subdivisions(asm: &Assembled, y_max: f64, x_max: f64, rho_cut: f64) -> usize {
    let p = &asm.sol.params;
    let (th, ga) = (p.theta_f(), p.gamma_f());
    let rate = y_max.abs() * th * rho_cut.powf(th - 1.0)
        + (asm.sol.mu0.re).abs()
        + x_max.abs() * ga * rho_cut.powf(ga - 1.0) * 12.0;
    ((asm.sol.grid.h * rate / 3.0).ceil() as usize).max(1)
}

/// ρ beyond which e^{−c₀(ρ−lo)} < e^{−42}.
pub fn cut_radius(asm: &Assembled) -> f64 {
    let g = &asm.sol.grid;
    (g.lo + 42.0 / asm.sol.params.c0).min(g.hi())
}

impl<'a> KernelTable<'a> {
    pub fn new(asm: &'a Assembled<'a>, sub: usize) -> Self {
        let sol = asm.sol;
        let grid: &PanelGrid = &sol.grid;
        let m = sol.m() as usize;
        let rho_cut = cut_radius(asm);
        let npan = (((rho_cut - grid.lo) / grid.h).ceil() as usize).min(grid.npan);
        let np = asm.ell_max as usize + 1;
        let sub = sub.max(1);
        let hs = grid.h / sub as f64;
        let mut lmat = Vec::new();
        let mut loc = Vec::new();
        for j in 0..sub {
            for q in 0..NODES_PER_PANEL {
                let off = hs * (j as f64 + 0.5 * (grid.xi[q] + 1.0));
                let xi = 2.0 * off / grid.h - 1.0;
                lmat.push((0..NODES_PER_PANEL).map(|r| lagrange(&grid.xi, &grid.bary, r, xi)).collect::<Vec<f64>>());
                loc.push((off, 0.5 * hs * grid.wi[q]));
            }
        }
        let nodal: Vec<Vec<Vec<ComplexHP>>> = (0..=2 * m)
            .map(|k| {
                (0..np)
                    .map(|p| {
                        (0..npan * NODES_PER_PANEL)
                            .into_par_iter()
                            .map(|idx| {
                                let mut s = czero();
                                for lv in &sol.levels[..=asm.ell_max as usize] {
                                    if let Some(f) = lv.iter().find(|f| f.p as usize == p) {
                                        s += cut_deriv(asm, f, k, idx);
                                    }
                                }
                                s
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let total = npan * loc.len();
        let mut rho = Vec::with_capacity(total);
        let mut w = Vec::with_capacity(total);
        for k in 0..npan {
            for &(off, wt) in &loc {
                rho.push(grid.panel_start(k) + off);
                w.push(wt);
            }
        }
        let interp = |vals: &[ComplexHP]| -> Vec<ComplexHP> {
            (0..total)
                .into_par_iter()
                .map(|s| {
                    let k = s / loc.len();
                    let l = &lmat[s % loc.len()];
                    let base = k * NODES_PER_PANEL;
                    let mut z = czero();
                    for r in 0..NODES_PER_PANEL {
                        z += vals[base + r] * l[r];
                    }
                    z
                })
                .collect()
        };
        let u = (0..np).map(|p| interp(&nodal[0][p])).collect();
        let op = (0..=2 * m).map(|i| (0..np).map(|p| interp(&nodal[2 * m - i][p])).collect()).collect();
        let r = sol.params.r_f();
        let weight = rho.iter().map(|&x| (I * sol.mu0 * x).exp() * x.powf(r)).collect();
        let p = &sol.params;
        KernelTable {
            asm,
            rho,
            w,
            weight,
            u,
            op,
            sub,
            rho_cut,
            theta: p.theta_f(),
            gamma: p.gamma_f(),
            two_gamma: 2.0 * p.gamma_f(),
        }
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// ρ^r ũ(ρ^γx, ρ) at the subnodes.
    pub fn profile(&self, x: f64) -> Vec<ComplexHP> {
        let basis = &self.asm.basis;
        (0..self.len())
            .into_par_iter()
            .map(|s| {
                let t = self.rho[s].powf(self.gamma) * x;
                let mut z = czero();
                for (p, up) in self.u.iter().enumerate() {
                    z += up[s] * basis[p].eval(t);
                }
                z * self.weight[s]
            })
            .collect()
    }

    /// ρ^{r+2γ}[Σ_i ρ^{−i}𝒫_i ũ](ρ^γx, ρ) at the subnodes.
    pub fn image_profile(&self, br: &Brackets, x: f64) -> Vec<ComplexHP> {
        let m = br.m;
        (0..self.len())
            .into_par_iter()
            .map(|s| {
                let rho = self.rho[s];
                let t = rho.powf(self.gamma) * x;
                let mut z = czero();
                for p in 0..self.u.len() {
                    z += self.u[p][s] * br.full_pot[p].eval(t);
                    for i in 0..=2 * m {
                        z += self.op[i][p][s] * (rho.powi(-(i as i32)) * br.full_pi[i][p].eval(t));
                    }
                }
                z * self.weight[s] * rho.powf(self.two_gamma)
            })
            .collect()
    }

    /// Σ w e^{iyρ^θ} prof.
    pub fn integrate(&self, prof: &[ComplexHP], y: f64) -> ComplexHP {
        let mut s = czero();
        for k in 0..prof.len() {
            let ph = y * self.rho[k].powf(self.theta);
            s += prof[k] * ComplexHP::new(ph.cos(), ph.sin()) * self.w[k];
        }
        s
    }

    /// Bound on the part of the integral beyond the cut, from the last profile value.
    pub fn tail_estimate(&self, prof: &[ComplexHP]) -> f64 {
        prof.last().map(|z| z.norm() / self.asm.sol.params.c0).unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64, y: f64) -> ComplexHP {
        self.integrate(&self.profile(x), y)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelEval {
    pub x: f64,
    pub y: f64,
    pub re: f64,
    pub im: f64,
    /// relative change when every subpanel is halved
    pub refinement: f64,
    pub tail: f64,
}

/// 𝒦[ũ](x, y) with a refinement error estimate.
pub fn kernel_eval(asm: &Assembled, x: f64, y: f64) -> KernelEval {
    let sub = subdivisions(asm, y, x, cut_radius(asm));
    let a = KernelTable::new(asm, sub);
    let b = KernelTable::new(asm, 2 * sub);
    let pa = a.profile(x);
    let za = a.integrate(&pa, y);
    let zb = b.eval(x, y);
    KernelEval { x, y, re: zb.re, im: zb.im, refinement: (za - zb).norm() / zb.norm(), tail: a.tail_estimate(&pa) }
}

pub const OPERATOR_TOL: f64 = 1e-4;
pub const OPERATOR_POINTS: [(f64, f64); 5] = [(0.3, 0.5), (-0.7, 0.2), (0.5, -0.9), (0.9, 0.8), (-0.2, -0.4)];
pub const FD_STEPS: [f64; 4] = [0.04, 0.02, 0.01, 0.005];

const D2_8: [f64; 9] = [-1.0 / 560.0, 8.0 / 315.0, -0.2, 1.6, -205.0 / 72.0, 1.6, -0.2, 8.0 / 315.0, -1.0 / 560.0];
const D1_8: [f64; 9] = [1.0 / 280.0, -4.0 / 105.0, 0.2, -0.8, 0.0, 0.8, -0.2, 4.0 / 105.0, -1.0 / 280.0];
const D2_6: [f64; 9] = [0.0, 1.0 / 90.0, -0.15, 1.5, -49.0 / 18.0, 1.5, -0.15, 1.0 / 90.0, 0.0];
const D1_6: [f64; 9] = [0.0, -1.0 / 60.0, 0.15, -0.75, 0.0, 0.75, -0.15, 1.0 / 60.0, 0.0];

fn stencil(c: &[f64; 9], v: &[ComplexHP], h: f64, pow: i32) -> ComplexHP {
    c.iter().zip(v).map(|(a, z)| z * *a).sum::<ComplexHP>() / h.powi(pow)
}

#[derive(Clone, Debug, Serialize)]
pub struct OperatorPoint {
    pub x: f64,
    pub y: f64,
    pub lhs_re: f64,
    pub lhs_im: f64,
    pub rhs_re: f64,
    pub rhs_im: f64,
    pub rel: f64,
    /// step with the smallest 6th/8th-order disagreement
    pub step: f64,
    /// that disagreement relative to |rhs|
    pub fd_estimate: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OperatorReport {
    pub ell_max: u32,
    pub points: Vec<OperatorPoint>,
    pub max_rel: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Compares finite differences of 𝒦[ũ] under M with 𝒦_{r+2γ}[Σ ρ^{−i}𝒫_i ũ].
pub fn operator_apply_check(asm: &Assembled, br: &Brackets, points: &[(f64, f64)]) -> OperatorReport {
    let p = &asm.sol.params;
    let (n, m) = (p.n as i32, p.m as i32);
    let hmax = FD_STEPS[0] * 4.0;
    let ym = points.iter().map(|q| q.1.abs()).fold(0.0, f64::max) + hmax;
    let xm = points.iter().map(|q| q.0.abs()).fold(0.0, f64::max) + hmax;
    let table = KernelTable::new(asm, subdivisions(asm, ym, xm, cut_radius(asm)));
    let mut out = Vec::new();
    for &(x, y) in points {
        let rhs = table.integrate(&table.image_profile(br, x), y);
        let prof = table.profile(x);
        let mut best: Option<(f64, f64, ComplexHP)> = None;
        for &h in &FD_STEPS {
            let xs: Vec<ComplexHP> = (-4..=4).map(|j| table.eval(x + j as f64 * h, y)).collect();
            let ys: Vec<ComplexHP> = (-4..=4).map(|j| table.integrate(&prof, y + j as f64 * h)).collect();
            let apply = |d2: &[f64; 9], d1: &[f64; 9]| {
                let kxx = stencil(d2, &xs, h, 2);
                let kyy = stencil(d2, &ys, h, 2);
                let ky = stencil(d1, &ys, h, 1);
                -kxx - kyy * x.powi(4 * n + 2) - (kyy * y.powi(2 * m) + ky * (m as f64 * y.powi(2 * m - 1))) * x.powi(2 * n)
            };
            let l8 = apply(&D2_8, &D1_8);
            let l6 = apply(&D2_6, &D1_6);
            let est = (l8 - l6).norm();
            if best.map_or(true, |b| est < b.1) {
                best = Some((h, est, l8));
            }
        }
        let (h, est, lhs) = best.expect("at least one step");
        let den = rhs.norm().max(f64::MIN_POSITIVE);
        out.push(OperatorPoint {
            x,
            y,
            lhs_re: lhs.re,
            lhs_im: lhs.im,
            rhs_re: rhs.re,
            rhs_im: rhs.im,
            rel: (lhs - rhs).norm() / den,
            step: h,
            fd_estimate: est / den,
        });
    }
    let max_rel = out.iter().map(|q| q.rel).fold(0.0, f64::max);
    OperatorReport { ell_max: asm.ell_max, points: out, max_rel, tol: OPERATOR_TOL, pass: max_rel <= OPERATOR_TOL }
}

/// F(η) = (2π/s0)η^{(r+1)/s0−1}ũ(0, η^{1/s0}), kept as log-modulus and phase.
#[derive(Clone, Debug, Serialize)]
pub struct FourierTrace {
    pub eta: Vec<f64>,
    pub log_abs: Vec<f64>,
    pub phase: Vec<f64>,
    pub s0: f64,
    /// exponent of the algebraic prefactor, (r+1)/s0 − 1
    pub mu: f64,
    pub c0: f64,
}

impl FourierTrace {
    pub fn value(&self, k: usize) -> ComplexHP {
        ComplexHP::from_polar(self.log_abs[k].exp(), self.phase[k])
    }
}

/// Log-modulus and phase of F at one η.
pub fn trace_point(asm: &Assembled, eta: f64) -> (f64, f64) {
    let p = &asm.sol.params;
    let s0 = p.s0_f();
    let rho = eta.powf(1.0 / s0);
    let uh = asm.u_scaled(0.0, rho);
    // ũ = e^{iμ₀ρ}û and iμ₀ = −c₁
    let lin = -p.c1 * rho;
    let mu = (p.r_f() + 1.0) / s0 - 1.0;
    let la = (2.0 * std::f64::consts::PI / s0).ln() + mu * eta.ln() + lin.re + uh.norm().ln();
    (la, lin.im + uh.arg())
}

/// Trace on a log-spaced grid with η^{1/s0} ∈ [rho_lo, rho_hi].
pub fn fourier_trace(asm: &Assembled, rho_lo: f64, rho_hi: f64, points: usize) -> Result<FourierTrace> {
    let g = &asm.sol.grid;
    if rho_lo < g.lo || rho_hi > g.hi() || rho_lo >= rho_hi || points < 2 {
        return Err(Error::GridExhausted(format!(
            "trace window [{rho_lo}, {rho_hi}] outside solved support [{}, {}]",
            g.lo,
            g.hi()
        )));
    }
    let p = &asm.sol.params;
    let s0 = p.s0_f();
    let (a, b) = (rho_lo.powf(s0).ln(), rho_hi.powf(s0).ln());
    let eta: Vec<f64> = (0..points).map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp()).collect();
    let vals: Vec<(f64, f64)> = eta.par_iter().map(|&e| trace_point(asm, e)).collect();
    Ok(FourierTrace {
        log_abs: vals.iter().map(|v| v.0).collect(),
        phase: vals.iter().map(|v| v.1).collect(),
        eta,
        s0,
        mu: (p.r_f() + 1.0) / s0 - 1.0,
        c0: p.c0,
    })
}

/// Fit window η^{1/s0} ∈ [4R, 0.8ρ_max].
pub fn fit_window(asm: &Assembled) -> (f64, f64) {
    (4.0 * asm.sol.config.r, 0.8 * asm.sol.config.rho_max)
}

#[derive(Clone, Debug, Serialize)]
pub struct GevreyFit {
    pub s_hat: f64,
    pub c_hat: f64,
    pub a_hat: f64,
    /// coefficient of log η when the nuisance column is enabled
    pub mu_hat: Option<f64>,
    pub rss: f64,
    /// ŝ from the lower and upper halves of the window
    pub s_halves: (f64, f64),
    pub spread: f64,
    /// relative rise of the residual at ŝ·(1 ± 5%)
    pub sharpness: f64,
}

const S_GRID: (f64, f64, f64) = (1.02, 4.0, 0.005);

fn fit_at(eta: &[f64], y: &[f64], s: f64, log_term: bool) -> (Vec<f64>, f64) {
    let mut cols = vec![vec![1.0; eta.len()], eta.iter().map(|e| -e.powf(1.0 / s)).collect()];
    if log_term {
        cols.push(eta.iter().map(|e| e.ln()).collect());
    }
    let beta = lstsq(&cols, y);
    let rss = (0..y.len())
        .map(|k| {
            let f: f64 = cols.iter().zip(&beta).map(|(c, b)| c[k] * b).sum();
            (y[k] - f).powi(2)
        })
        .sum();
    (beta, rss)
}

fn best_s(eta: &[f64], y: &[f64], log_term: bool) -> f64 {
    let (lo, hi, ds) = S_GRID;
    let steps = ((hi - lo) / ds).round() as usize;
    let rss = |s: f64| fit_at(eta, y, s, log_term).1;
    let mut s_best = lo;
    let mut r_best = f64::INFINITY;
    for k in 0..=steps {
        let s = lo + ds * k as f64;
        let r = rss(s);
        if r < r_best {
            r_best = r;
            s_best = s;
        }
    }
    // golden section on the bracketing cell
    let (mut a, mut b) = ((s_best - ds).max(lo), (s_best + ds).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if rss(c) < rss(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

/// Least-squares fit of log|F| ≈ a − cη^{1/s} (optionally + μ log η) over a grid of s.
pub fn gevrey_fit(eta: &[f64], log_abs: &[f64], log_term: bool) -> Result<GevreyFit> {
    if eta.len() < 8 || eta.len() != log_abs.len() {
        return Err(Error::Fit(format!("{} samples", eta.len())));
    }
    let s_hat = best_s(eta, log_abs, log_term);
    let (beta, rss) = fit_at(eta, log_abs, s_hat, log_term);
    let mean = log_abs.iter().sum::<f64>() / log_abs.len() as f64;
    let tss: f64 = log_abs.iter().map(|v| (v - mean).powi(2)).sum();
    let side = fit_at(eta, log_abs, s_hat * 1.05, log_term).1.min(fit_at(eta, log_abs, s_hat / 1.05, log_term).1);
    let sharpness = (side - rss) / tss.max(f64::MIN_POSITIVE);
    if !(sharpness > 1e-10) {
        return Err(Error::Fit(format!("flat residual landscape near s = {s_hat} (rise {sharpness:e})")));
    }
    let h = eta.len() / 2;
    let s1 = best_s(&eta[..h], &log_abs[..h], log_term);
    let s2 = best_s(&eta[h..], &log_abs[h..], log_term);
    Ok(GevreyFit {
        s_hat,
        c_hat: beta[1],
        a_hat: beta[0],
        mu_hat: if log_term { Some(beta[2]) } else { None },
        rss,
        s_halves: (s1, s2),
        spread: (s1 - s2).abs(),
        sharpness,
    })
}

/// Slope of log|F| against η^{1/s} at fixed s.
pub fn fixed_exponent_slope(eta: &[f64], log_abs: &[f64], s: f64) -> f64 {
    -fit_at(eta, log_abs, s, false).0[1]
}

#[derive(Clone, Debug, Serialize)]
pub struct SyntheticCheck {
    pub s: f64,
    pub c: f64,
    pub fit: GevreyFit,
    pub s_rel: f64,
    pub c_rel: f64,
}

/// Fits exact samples of exp(−cη^{1/s}) on the given η grid.
pub fn synthetic_selftest(s: f64, c: f64, eta: &[f64]) -> Result<SyntheticCheck> {
    let y: Vec<f64> = eta.iter().map(|e| -c * e.powf(1.0 / s)).collect();
    let fit = gevrey_fit(eta, &y, false)?;
    Ok(SyntheticCheck { s, c, s_rel: (fit.s_hat - s).abs() / s, c_rel: (fit.c_hat - c).abs() / c, fit })
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceDiagnostics {
    /// range of log|F| + c₀η^{1/s0} − μ log η on the grid
    pub leading_min: f64,
    pub leading_max: f64,
    /// (ε, B, ln C_ε) with |F| ≤ C_ε exp(−B(η/ε)^{1/s0})
    pub envelopes: Vec<(f64, f64, f64)>,
    /// decay slope against η^{1/s0}, to compare with c₀
    pub fixed_slope: f64,
}

pub fn trace_diagnostics(tr: &FourierTrace) -> TraceDiagnostics {
    let lead: Vec<f64> = (0..tr.eta.len())
        .map(|k| tr.log_abs[k] + tr.c0 * tr.eta[k].powf(1.0 / tr.s0) - tr.mu * tr.eta[k].ln())
        .collect();
    let envelopes = [1.0, 2.0]
        .iter()
        .map(|&eps| {
            let z: Vec<f64> = tr.eta.iter().map(|e| (e / eps).powf(1.0 / tr.s0)).collect();
            let b = -lstsq(&[vec![1.0; z.len()], z.clone()], &tr.log_abs)[1];
            let lc = (0..z.len()).map(|k| tr.log_abs[k] + b * z[k]).fold(f64::NEG_INFINITY, f64::max);
            (eps, b, lc)
        })
        .collect();
    TraceDiagnostics {
        leading_min: lead.iter().cloned().fold(f64::INFINITY, f64::min),
        leading_max: lead.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        envelopes,
        fixed_slope: fixed_exponent_slope(&tr.eta, &tr.log_abs, tr.s0),
    }
}

pub const DIRECT_TOL: f64 = 1e-3;

#[derive(Clone, Debug, Serialize)]
pub struct DirectCheck {
    /// (η, relative difference between the trace and the numerical transform)
    pub spots: Vec<(f64, f64)>,
    pub max_rel: f64,
    pub y_max: f64,
    pub dy: f64,
    /// sup over the y-grid of |𝒦(0,y)|⟨y⟩² / |𝒦(0,0)|
    pub decay_sup: f64,
    /// |𝒦(0,±Y)| / |𝒦(0,0)|
    pub edge_ratio: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Trapezoidal transform in y of 𝒦(0, y) on [−Y, Y], compared with the trace at the
/// given ρ = η^{1/s0}. The step resolves every η the profile supports up to the cut.
pub fn direct_fourier_check(asm: &Assembled, spot_rho: &[f64], y_max: f64) -> DirectCheck {
    let p = &asm.sol.params;
    let s0 = p.s0_f();
    let rho_cut = cut_radius(asm);
    let period = 2.0 * rho_cut.powf(s0);
    let dy = 2.0 * std::f64::consts::PI / period;
    let ny = (y_max / dy).ceil() as i64;
    let table = KernelTable::new(asm, subdivisions(asm, ny as f64 * dy, 0.0, rho_cut));
    let prof = table.profile(0.0);
    let ys: Vec<f64> = (-ny..=ny).map(|k| k as f64 * dy).collect();
    let ks: Vec<ComplexHP> = ys.par_iter().map(|&y| table.integrate(&prof, y)).collect();
    let k0 = ks[ny as usize].norm();
    let spots: Vec<(f64, f64)> = spot_rho
        .iter()
        .map(|&rho| {
            let eta = rho.powf(s0);
            let direct: ComplexHP = ys.iter().zip(&ks).map(|(&y, k)| k * ComplexHP::new(0.0, -y * eta).exp() * dy).sum();
            let (la, ph) = trace_point(asm, eta);
            let f = ComplexHP::from_polar(la.exp(), ph);
            (eta, (direct - f).norm() / f.norm())
        })
        .collect();
    let decay_sup = ys.iter().zip(&ks).map(|(y, k)| k.norm() * (1.0 + y * y) / k0).fold(0.0, f64::max);
    let edge_ratio = ks[0].norm().max(ks[ks.len() - 1].norm()) / k0;
    let max_rel = spots.iter().map(|s| s.1).fold(0.0, f64::max);
    DirectCheck { spots, max_rel, y_max, dy, decay_sup, edge_ratio, tol: DIRECT_TOL, pass: max_rel <= DIRECT_TOL }
}

#[derive(Clone, Debug, Serialize)]
pub struct XProbe {
    pub y0: f64,
    pub s_x: f64,
    /// 1 + 1/((2m−1)(2n+2))
    pub target_x: f64,
    pub target_y: f64,
    /// (ξ_lo, ξ_hi) of the fit window
    pub window: (f64, f64),
    /// the fitted x-order lies below the y-order, i.e. 𝒦 is more regular in x
    pub finer_than_y: bool,
}

/// Soft diagnostic: Gevrey order in x from the decay of the x-Fourier transform of 𝒦(·, y₀).
pub fn x_regularity_probe(asm: &Assembled, y0: f64) -> Result<XProbe> {
    let p = &asm.sol.params;
    let (n, m) = (p.n as f64, p.m as f64);
    let xmax = 3.0;
    let nx = 256usize;
    let dx = 2.0 * xmax / nx as f64;
    let table = KernelTable::new(asm, subdivisions(asm, y0, xmax, cut_radius(asm)));
    let xs: Vec<f64> = (0..nx).map(|k| -xmax + k as f64 * dx).collect();
    let kx: Vec<ComplexHP> = xs.iter().map(|&x| table.eval(x, y0)).collect();
    let nxi = nx / 2;
    let dxi = std::f64::consts::PI / xmax;
    let spectrum: Vec<(f64, f64)> = (1..nxi)
        .into_par_iter()
        .map(|k| {
            let xi = k as f64 * dxi;
            let z: ComplexHP = xs.iter().zip(&kx).map(|(&x, v)| v * ComplexHP::new(0.0, -xi * x).exp() * dx).sum();
            (xi, z.norm().ln())
        })
        .collect();
    let top = spectrum.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let floor = spectrum.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let win: Vec<&(f64, f64)> = spectrum.iter().filter(|s| s.1 < top - 2.0 && s.1 > floor + 6.0).collect();
    // low frequencies see the ω₀ ramp; keep the upper part of the decay range
    let start = 2.0 * win.first().map(|s| s.0).unwrap_or(0.0);
    let win: Vec<&(f64, f64)> = win.into_iter().filter(|s| s.0 >= start).take_while(|s| s.1 > floor + 6.0).collect();
    let xi: Vec<f64> = win.iter().map(|s| s.0).collect();
    let la: Vec<f64> = win.iter().map(|s| s.1).collect();
    let fit = gevrey_fit(&xi, &la, false)?;
    let target_y = p.s0_f();
    Ok(XProbe {
        y0,
        s_x: fit.s_hat,
        target_x: 1.0 + 1.0 / ((2.0 * m - 1.0) * (2.0 * n + 2.0)),
        target_y,
        window: (start, xi.last().copied().unwrap_or(start)),
        finer_than_y: fit.s_hat < target_y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{assemble, solve, SolverConfig};

    #[test]
    fn brackets_are_eigen_relations() {
        let p = crate::derive_params(1, 2).unwrap();
        let table = crate::coeffs::OperatorTable::new(&p, 6);
        let br = Brackets::new(&p, &table, 4).unwrap();
        for k in 0..=4usize {
            let v = eigenfunction(Parity::Even, k as u32, 1).rep;
            assert_eq!(br.pot[k], v.scale(&qi(crate::exactnum::even_eigenvalue(1, k as u32) as i64)));
            assert_eq!(br.pi[0][k], v.scale(&kprime_exact(2)));
        }
        assert!(num_traits::Zero::is_zero(&br.pi_proj[1][0]));
    }

    #[test]
    fn synthetic_recovery() {
        let eta: Vec<f64> = (0..120).map(|k| (64f64.ln() + 3.0 * k as f64 / 119.0).exp()).collect();
        for (s, c) in [(2.0, 2.0), (4.0 / 3.0, 0.94)] {
            let chk = synthetic_selftest(s, c, &eta).unwrap();
            assert!(chk.s_rel < 1e-6 && chk.c_rel < 1e-6, "{chk:?}");
        }
        let flat = vec![1.0; eta.len()];
        assert!(gevrey_fit(&eta, &flat, false).is_err());
    }

    #[test]
    fn trace_window_is_checked() {
        let p = crate::derive_params(0, 1).unwrap();
        let cfg = SolverConfig { ell_max: 1, rho_max: 40.0, ..SolverConfig::default() };
        let sol = solve(&p, &cfg).unwrap();
        let asm = assemble(&sol, 1).unwrap();
        assert!(fourier_trace(&asm, 2.0, 30.0, 10).is_err());
        let tr = fourier_trace(&asm, 8.0, 30.0, 10).unwrap();
        assert!(tr.log_abs.iter().all(|v| v.is_finite()));
    }
}
