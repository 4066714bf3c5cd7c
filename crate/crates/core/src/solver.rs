//! Level-by-level solution of the transport system.
//!
//! Every coefficient is stored scaled by the seed phase, ĝ = e^{−iμ₀ρ}g with
//! e^{iμ₀ρ} = e^{−c₁ρ}, as derivative tables ĝ^{(k)}, k ≤ 2m, at the nodes of one panel grid.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::OperatorTable;
use crate::cutoff::{chi, Omega};
use crate::error::{Error, Result};
use crate::exactnum::{to_f64, ComplexHP, Params};
use crate::greens::{adaptive_integral, bump, convolve, GreensFn, OdeOperator};
use crate::quad::PanelGrid;
use crate::spectral::{eigenfunction, lstsq, Parity};

const I: ComplexHP = ComplexHP { re: 0.0, im: 1.0 };

fn czero() -> ComplexHP {
    ComplexHP::new(0.0, 0.0)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolverConfig {
    pub ell_max: u32,
    /// ω_ℓ ramps on [2R(ℓ+1), 4R(ℓ+1)]
    pub r: f64,
    /// χ_ℓ ramps on [2R₁(ℓ+1), 4R₁(ℓ+1)]; R₁ ≤ R
    pub r1: f64,
    pub rho_max: f64,
    pub panel: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { ell_max: 6, r: 2.0, r1: 2.0, rho_max: 160.0, panel: 0.25 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r1 > 0.0 && self.r1 <= self.r) {
            return Err(Error::Config(format!("need 0 < R1 ≤ R, got R1 = {}, R = {}", self.r1, self.r)));
        }
        if self.panel <= 0.0 || self.panel > 1.0 {
            return Err(Error::Config(format!("panel width {} outside (0, 1]", self.panel)));
        }
        let need = 8.0 * self.r * (self.ell_max as f64 + 1.0);
        if self.rho_max < need.max(40.0) {
            return Err(Error::Config(format!("rho_max {} below {need} (top ramp end)", self.rho_max)));
        }
        Ok(())
    }

    pub fn grid(&self) -> PanelGrid {
        PanelGrid::new(2.0 * self.r1.min(self.r), self.rho_max, self.panel)
    }
}

/// g_{ℓ,p} as scaled derivative tables at the grid nodes.
#[derive(Clone, Debug)]
pub struct LevelFn {
    pub ell: u32,
    pub p: u32,
    /// ĝ^{(k)}, k = 0..=2m
    pub derivs: Vec<Vec<ComplexHP>>,
    /// χ_ℓ f̂_{ℓ,p}; empty at level 0
    pub rhs: Vec<ComplexHP>,
    /// homogeneous pieces removed from marginal modes, (root index, a_j K_j)
    pub marginal: Vec<(usize, ComplexHP)>,
    pub tail_residual: f64,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub params: Params,
    pub config: SolverConfig,
    pub grid: PanelGrid,
    pub table: OperatorTable,
    /// e^{iμ₀ρ} = e^{−c₁ρ}
    pub mu0: ComplexHP,
    pub levels: Vec<Vec<LevelFn>>,
    /// W[i][ν][p]: coefficient of v_p in 𝒫_i(t∂_t)v_ν
    weights: Vec<Vec<Vec<f64>>>,
}

fn weight_tensor(table: &OperatorTable, m: u32, ell_max: u32) -> Vec<Vec<Vec<f64>>> {
    let kmax = ell_max as usize + 1;
    (0..=2 * m as usize)
        .map(|i| {
            (0..=kmax)
                .map(|nu| (0..=kmax).map(|p| if p.abs_diff(nu) <= i { to_f64(&table.weight(i, nu, p)) } else { 0.0 }).collect())
                .collect()
        })
        .collect()
}

pub fn seed_phase(params: &Params) -> ComplexHP {
    I * params.c1
}

/// Level 0: g_{0,0} = e^{−c₁ρ}, so ĝ ≡ 1 and ĝ^{(k)} ≡ (iμ₀)^k.
pub fn level0(params: &Params, grid: &PanelGrid) -> LevelFn {
    let w = I * seed_phase(params);
    let derivs = (0..=2 * params.m).map(|k| vec![w.powu(k); grid.len()]).collect();
    LevelFn { ell: 0, p: 0, derivs, rhs: Vec::new(), marginal: Vec::new(), tail_residual: 0.0 }
}

impl Solution {
    pub fn new(params: &Params, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.grid();
        let table = OperatorTable::new(params, config.ell_max as usize + 2);
        let weights = weight_tensor(&table, params.m, config.ell_max);
        let l0 = level0(params, &grid);
        Ok(Solution {
            params: params.clone(),
            config: config.clone(),
            grid,
            table,
            mu0: seed_phase(params),
            levels: vec![vec![l0]],
            weights,
        })
    }

    pub fn m(&self) -> u32 {
        self.params.m
    }

    pub fn solved(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn level(&self, ell: u32, p: u32) -> Option<&LevelFn> {
        self.levels.get(ell as usize).and_then(|l| l.get(p as usize))
    }

    pub fn weight(&self, i: usize, nu: usize, p: usize) -> f64 {
        self.weights[i][nu][p]
    }

    /// f̂_{ℓ,p} before the cutoff χ_ℓ, from the levels already solved.
    ///
    /// p ≥ 1 uses levels ℓ−i, i ≥ 1; p = 0 uses levels ℓ+1−i, including the p ≥ 1 parts of level ℓ.
    pub fn rhs(&self, ell: u32, p: u32, current: &[LevelFn]) -> Result<Vec<ComplexHP>> {
        let m = self.m() as usize;
        let shift = if p == 0 { 1 } else { 0 };
        let imax = (ell as usize + shift).min(2 * m);
        let nodes = self.grid.nodes();
        let mut out = vec![czero(); self.grid.len()];
        for i in 1..=imax {
            let src = ell as usize + shift - i;
            let fns: Vec<&LevelFn> = if src == ell as usize {
                current.iter().collect()
            } else {
                self.levels.get(src).ok_or_else(|| Error::MissingLevel(format!("level {src}")))?.iter().collect()
            };
            for f in fns {
                let w = self.weight(i, f.p as usize, p as usize);
                if w == 0.0 {
                    continue;
                }
                let d = &f.derivs[2 * m - i];
                for (k, x) in nodes.iter().enumerate() {
                    out[k] -= d[k] * (w / x.powi(i as i32));
                }
            }
            if src == ell as usize && self.weight(i, 0, 0) != 0.0 {
                return Err(Error::Mismatch("Π₀𝒫₁Π₀ does not vanish".into()));
            }
        }
        Ok(out)
    }

    fn solve_one(&self, ell: u32, p: u32, current: &[LevelFn]) -> Result<LevelFn> {
        let m = self.m() as usize;
        let f = self.rhs(ell, p, current)?;
        let nodes = self.grid.nodes();
        let rhs: Vec<ComplexHP> = f.iter().zip(&nodes).map(|(v, x)| v * chi(ell, self.config.r1, *x, 0)[0]).collect();
        let g = GreensFn::new(OdeOperator::for_level(&self.params, p));
        let conv = convolve(&g, &self.grid, &rhs, self.mu0, true)?;
        let mut derivs: Vec<Vec<ComplexHP>> = (0..2 * m).map(|k| conv.deriv_nodes(k)).collect();
        // e^{−iμ₀ρ}g^{(2m)} = d/dρ[ĝ^{(2m−1)}] + iμ₀ĝ^{(2m−1)}
        let top = &derivs[2 * m - 1];
        let d = self.grid.differentiate(top);
        derivs.push(d.iter().zip(top).map(|(a, b)| a + I * self.mu0 * b).collect());
        Ok(LevelFn { ell, p, derivs, rhs, marginal: conv.marginal_corrections(), tail_residual: conv.tail_residual })
    }

    pub fn solve_level(&mut self, ell: u32) -> Result<()> {
        if ell != self.solved() + 1 {
            return Err(Error::MissingLevel(format!("level {ell} requested after {}", self.solved())));
        }
        let upper: Vec<LevelFn> = (1..=ell).into_par_iter().map(|p| self.solve_one(ell, p, &[])).collect::<Result<_>>()?;
        let g0 = self.solve_one(ell, 0, &upper)?;
        let mut all = vec![g0];
        all.extend(upper);
        self.levels.push(all);
        Ok(())
    }

    pub fn solve_to(&mut self, ell_max: u32) -> Result<()> {
        while self.solved() < ell_max {
            let next = self.solved() + 1;
            self.solve_level(next)?;
        }
        Ok(())
    }
}

pub fn solve(params: &Params, config: &SolverConfig) -> Result<Solution> {
    let mut sol = Solution::new(params, config)?;
    sol.solve_to(config.ell_max)?;
    Ok(sol)
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakRow {
    pub ell: u32,
    pub p: u32,
    pub max_rel: f64,
}

/// ⟨Θ_p g − χf, φ⟩ relative to ⟨|g|,|Θ_pφ|⟩ + ⟨|χf|,|φ|⟩ on bumps spread over the solved range.
///
/// Coefficients are interpolated from the panel tables and the pairing is integrated
/// adaptively, so the bump flanks are resolved independently of the grid.
pub fn weak_residuals(sol: &Solution) -> Result<Vec<WeakRow>> {
    let m = sol.m() as usize;
    let grid = &sol.grid;
    let jobs: Vec<&LevelFn> = sol.levels.iter().skip(1).flatten().collect();
    jobs.par_iter()
        .map(|f| {
            let op = OdeOperator::for_level(&sol.params, f.p);
            let lo = 2.0 * sol.config.r1 * (f.ell as f64 + 1.0) - 2.0;
            let hi = 0.7 * grid.hi();
            let w = 2.0;
            let mut worst = 0.0f64;
            for c in 0..8 {
                let center = lo + (hi - lo) * c as f64 / 7.0;
                let pair = |x: f64| -> (ComplexHP, ComplexHP) {
                    let ph = (I * sol.mu0 * (x - center)).exp();
                    let b = bump(x, center, w, 2 * m);
                    (ph * grid.interpolate(&f.derivs[0], x) * op.apply(&b), ph * grid.interpolate(&f.rhs, x) * b[0])
                };
                let breaks: Vec<f64> = (0..=grid.npan).map(|k| grid.panel_start(k)).collect();
                let acc = adaptive_integral(center - w, center + w, &breaks, 1e-12, |x| {
                    let (a, b) = pair(x);
                    a - b
                })?;
                let mass = adaptive_integral(center - w, center + w, &breaks, 1e-6, |x| {
                    let (a, b) = pair(x);
                    ComplexHP::new(a.norm() + b.norm(), 0.0)
                })?;
                if mass.re > 0.0 {
                    worst = worst.max(acc.norm() / mass.re);
                }
            }
            Ok(WeakRow { ell: f.ell, p: f.p, max_rel: worst })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthRow {
    pub ell: u32,
    pub p: u32,
    pub k: u32,
    /// sup |g^{(k)}| ρ^ℓ e^{c₀ρ} / (ℓ+1)^{ℓ(1−1/2m)+k/2m}
    pub s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub rows: Vec<GrowthRow>,
    /// least C with S ≤ C^{ℓ+1+(k/2m−1)_+} over all rows
    pub c: f64,
    /// per-level max of ln S, ℓ ≥ 1
    pub envelope: Vec<(u32, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// least C₁ with |g_{1,p}| ≤ C₁² ρ^{−1} e^{−c₀ρ}
    pub c_level1: f64,
}

pub fn growth_certificate(sol: &Solution) -> GrowthReport {
    let m = sol.m() as f64;
    let nodes = sol.grid.nodes();
    let top = 0.8 * sol.grid.hi();
    let mut rows = Vec::new();
    let mut c = 0.0f64;
    let mut c1 = 0.0f64;
    for lv in &sol.levels {
        for f in lv {
            let l = f.ell as f64;
            for k in 0..f.derivs.len() {
                let sup = nodes
                    .iter()
                    .enumerate()
                    .filter(|(_, x)| **x <= top)
                    .map(|(i, x)| f.derivs[k][i].norm() * x.powf(l))
                    .fold(0.0f64, f64::max);
                let s = sup / (l + 1.0).powf(l * (1.0 - 1.0 / (2.0 * m)) + k as f64 / (2.0 * m));
                let e = l + 1.0 + (k as f64 / (2.0 * m) - 1.0).max(0.0);
                c = c.max(s.powf(1.0 / e));
                if f.ell == 1 && k == 0 {
                    c1 = c1.max(sup.sqrt());
                }
                rows.push(GrowthRow { ell: f.ell, p: f.p, k: k as u32, s });
            }
        }
    }
    let mut envelope: Vec<(u32, f64)> = Vec::new();
    for r in rows.iter().filter(|r| r.ell >= 1) {
        let v = r.s.ln();
        match envelope.iter_mut().find(|(l, _)| *l == r.ell) {
            Some(e) => e.1 = e.1.max(v),
            None => envelope.push((r.ell, v)),
        }
    }
    let xs: Vec<f64> = envelope.iter().map(|(l, _)| *l as f64 + 1.0).collect();
    let ys: Vec<f64> = envelope.iter().map(|(_, v)| *v).collect();
    let (slope, intercept, r2) = if xs.len() >= 2 {
        let beta = lstsq(&[xs.clone(), vec![1.0; xs.len()]], &ys);
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
        let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - beta[0] * x - beta[1]).powi(2)).sum();
        (beta[0], beta[1], if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 })
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    GrowthReport { rows, c, envelope, slope, intercept, r2, c_level1: c1 }
}

/// f64 evaluator for a fixed expansion P(t)e^{−t^{2n+2}/(2n+2)}.
#[derive(Clone, Debug)]
pub struct FastExp {
    pub coeffs: Vec<f64>,
    pub d: i32,
}

impl FastExp {
    pub fn new(e: &crate::spectral::ExpPoly) -> Self {
        FastExp { coeffs: e.poly.to_f64_coeffs(), d: 2 * e.n as i32 + 2 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let p = self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c);
        p * (-t.abs().powi(self.d) / self.d as f64).exp()
    }
}

/// ũ = Σ_ℓ ω_ℓ u_ℓ with cutoff derivatives tabulated at the nodes.
#[derive(Clone, Debug)]
pub struct Assembled<'a> {
    pub sol: &'a Solution,
    pub ell_max: u32,
    pub omega: Omega,
    /// ω_ℓ^{(k)} at the nodes, k ≤ 2m
    pub omega_tab: Vec<Vec<Vec<f64>>>,
    pub basis: Vec<FastExp>,
}

pub fn assemble(sol: &Solution, ell_max: u32) -> Result<Assembled<'_>> {
    if ell_max > sol.solved() {
        return Err(Error::MissingLevel(format!("assembly to {ell_max} with {} solved", sol.solved())));
    }
    let m = sol.m() as usize;
    let omega = Omega::new(sol.params.m, sol.config.r);
    let nodes = sol.grid.nodes();
    let omega_tab = (0..=ell_max)
        .map(|ell| {
            let cols: Vec<Vec<f64>> = nodes.par_iter().map(|&x| omega.eval(ell, x, 2 * m)).collect();
            (0..=2 * m).map(|k| cols.iter().map(|c| c[k]).collect()).collect()
        })
        .collect();
    let basis = (0..=ell_max + 1).map(|p| FastExp::new(&eigenfunction(Parity::Even, p, sol.params.n).rep)).collect();
    Ok(Assembled { sol, ell_max, omega, omega_tab, basis })
}

impl Assembled<'_> {
    /// e^{−iμ₀ρ} ∂_ρ^k ũ(t, ρ) at node `idx`.
    pub fn u_node(&self, t: f64, idx: usize, k: usize) -> ComplexHP {
        let mut s = czero();
        for ell in 0..=self.ell_max as usize {
            for f in &self.sol.levels[ell] {
                let v = self.basis[f.p as usize].eval(t);
                if v == 0.0 {
                    continue;
                }
                let mut d = czero();
                let mut binom = 1.0;
                for j in 0..=k {
                    let w = self.omega_tab[ell][j][idx];
                    if w != 0.0 {
                        d += f.derivs[k - j][idx] * (binom * w);
                    }
                    binom = binom * (k - j) as f64 / (j + 1) as f64;
                }
                s += d * v;
            }
        }
        s
    }

    /// Scaled ũ(t, ρ) off the nodes, by interpolation of the coefficient tables.
    pub fn u_scaled(&self, t: f64, rho: f64) -> ComplexHP {
        let grid = &self.sol.grid;
        if rho < grid.lo || rho > grid.hi() {
            return czero();
        }
        let k = grid.panel_of(rho);
        let base = k * crate::quad::NODES_PER_PANEL;
        let vals: Vec<ComplexHP> = (0..crate::quad::NODES_PER_PANEL).map(|q| self.u_node(t, base + q, 0)).collect();
        interpolate_panel(grid, &vals, k, rho)
    }
}

/// Barycentric interpolation inside one panel from its 16 nodal values.
pub fn interpolate_panel(grid: &PanelGrid, vals: &[ComplexHP], panel: usize, rho: f64) -> ComplexHP {
    let a = grid.panel_start(panel);
    let xi = 2.0 * (rho - a) / grid.h - 1.0;
    let mut num = czero();
    let mut den = 0.0;
    for q in 0..vals.len() {
        let d = xi - grid.xi[q];
        if d == 0.0 {
            return vals[q];
        }
        let c = grid.bary[q] / d;
        num += vals[q] * c;
        den += c;
    }
    num / den
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    n: u32,
    m: u32,
    config: SolverConfig,
    nodes: usize,
    /// (ℓ, p, number of derivative tables, has rhs)
    entries: Vec<(u32, u32, usize, bool)>,
}

/// Writes solved levels as a JSON header line followed by little-endian f64 pairs.
pub fn save_checkpoint(sol: &Solution, path: &Path) -> Result<()> {
    let mut entries = Vec::new();
    for lv in &sol.levels {
        for f in lv {
            entries.push((f.ell, f.p, f.derivs.len(), !f.rhs.is_empty()));
        }
    }
    let head = CheckpointHeader { n: sol.params.n, m: sol.params.m, config: sol.config.clone(), nodes: sol.grid.len(), entries };
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut file, &head)?;
    file.write_all(b"\n")?;
    let mut put = |v: &[ComplexHP]| -> Result<()> {
        for z in v {
            file.write_all(&z.re.to_le_bytes())?;
            file.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    };
    for lv in &sol.levels {
        for f in lv {
            for d in &f.derivs {
                put(d)?;
            }
            put(&f.rhs)?;
        }
    }
    Ok(())
}

/// Restores levels written by [`save_checkpoint`] for the same parameters and grid.
pub fn load_checkpoint(params: &Params, path: &Path) -> Result<Solution> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let nl = bytes.iter().position(|b| *b == b'\n').ok_or_else(|| Error::Config("checkpoint header missing".into()))?;
    let head: CheckpointHeader = serde_json::from_slice(&bytes[..nl])?;
    if head.n != params.n || head.m != params.m {
        return Err(Error::Config(format!("checkpoint is for (n, m) = ({}, {})", head.n, head.m)));
    }
    let mut sol = Solution::new(params, &head.config)?;
    if sol.grid.len() != head.nodes {
        return Err(Error::Config("checkpoint grid does not match".into()));
    }
    let mut pos = nl + 1;
    let mut take = |len: usize| -> Result<Vec<ComplexHP>> {
        let need = len * 16;
        if pos + need > bytes.len() {
            return Err(Error::Config("checkpoint truncated".into()));
        }
        let v = bytes[pos..pos + need]
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                ComplexHP::new(re, im)
            })
            .collect();
        pos += need;
        Ok(v)
    };
    sol.levels.clear();
    for (ell, p, nd, has_rhs) in head.entries {
        let derivs = (0..nd).map(|_| take(head.nodes)).collect::<Result<Vec<_>>>()?;
        let rhs = if has_rhs { take(head.nodes)? } else { Vec::new() };
        if sol.levels.len() <= ell as usize {
            sol.levels.push(Vec::new());
        }
        sol.levels[ell as usize].push(LevelFn { ell, p, derivs, rhs, marginal: Vec::new(), tail_residual: 0.0 });
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::derive_params;

    fn small() -> (Params, SolverConfig) {
        let p = derive_params(0, 1).unwrap();
        let c = SolverConfig { ell_max: 2, rho_max: 60.0, ..Default::default() };
        (p, c)
    }

    #[test]
    fn config_validation() {
        let (_, mut c) = small();
        c.r1 = 3.0;
        assert!(c.validate().is_err());
        let (_, mut c) = small();
        c.rho_max = 20.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn seed_is_exact() {
        let (p, c) = small();
        let grid = c.grid();
        let l0 = level0(&p, &grid);
        // g = e^{−2ρ} for (0, 1): ĝ' = −2
        assert!((l0.derivs[1][5] - ComplexHP::new(-2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn level_one_weak_residual_and_support() {
        let (p, c) = small();
        let sol = solve(&p, &c).unwrap();
        for row in weak_residuals(&sol).unwrap() {
            assert!(row.max_rel < 1e-8, "{row:?}");
        }
        // the p ≥ 1 convolutions are exponentially small below the χ support
        let g = sol.level(1, 1).unwrap();
        let nodes = sol.grid.nodes();
        let peak = g.derivs[0].iter().map(|z| z.norm()).fold(0.0, f64::max);
        let below = nodes.iter().zip(&g.derivs[0]).filter(|(x, _)| **x < 5.0).map(|(_, z)| z.norm()).fold(0.0, f64::max);
        assert!(below < 1e-3 * peak);
    }

    #[test]
    fn checkpoint_round_trip() {
        let (p, c) = small();
        let sol = solve(&p, &c).unwrap();
        let dir = std::env::temp_dir().join(format!("gevrey-ckpt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("levels.bin");
        save_checkpoint(&sol, &path).unwrap();
        let back = load_checkpoint(&p, &path).unwrap();
        assert_eq!(back.solved(), sol.solved());
        assert_eq!(back.level(2, 1).unwrap().derivs[1], sol.level(2, 1).unwrap().derivs[1]);
        std::fs::remove_dir_all(&dir).ok();
    }
}
