//! Gauss–Legendre panels on a uniform grid and barycentric interpolation on them.

use crate::exactnum::ComplexHP;

/// Nodes and weights on [−1, 1] by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// ∫_a^b f by n-point Gauss–Legendre.
pub fn integrate<F: FnMut(f64) -> ComplexHP>(a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>), mut f: F) -> ComplexHP {
    let (x, w) = rule;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    x.iter().zip(w).map(|(xi, wi)| f(mid + half * xi) * (wi * half)).sum()
}

pub const NODES_PER_PANEL: usize = 16;

/// Uniform panels on [lo, lo + npan·h] with Gauss–Legendre nodes in each.
#[derive(Clone, Debug)]
pub struct PanelGrid {
    pub lo: f64,
    pub h: f64,
    pub npan: usize,
    /// reference nodes on [−1, 1]
    pub xi: Vec<f64>,
    pub wi: Vec<f64>,
    /// barycentric weights of the reference nodes
    pub bary: Vec<f64>,
    /// Lagrange differentiation matrix on the reference nodes (d/dξ)
    pub dmat: Vec<Vec<f64>>,
}

impl PanelGrid {
    pub fn new(lo: f64, hi: f64, h_target: f64) -> Self {
        let npan = ((hi - lo) / h_target).ceil().max(1.0) as usize;
        let h = (hi - lo) / npan as f64;
        let (xi, wi) = gauss_legendre(NODES_PER_PANEL);
        let bary = barycentric_weights(&xi);
        let dmat = diff_matrix(&xi, &bary);
        PanelGrid { lo, h, npan, xi, wi, bary, dmat }
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.h * self.npan as f64
    }

    pub fn len(&self) -> usize {
        self.npan * NODES_PER_PANEL
    }

    pub fn is_empty(&self) -> bool {
        self.npan == 0
    }

    pub fn panel_start(&self, k: usize) -> f64 {
        self.lo + self.h * k as f64
    }

    pub fn node(&self, idx: usize) -> f64 {
        let k = idx / NODES_PER_PANEL;
        let q = idx % NODES_PER_PANEL;
        self.panel_start(k) + 0.5 * self.h * (self.xi[q] + 1.0)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    pub fn weight(&self, idx: usize) -> f64 {
        0.5 * self.h * self.wi[idx % NODES_PER_PANEL]
    }

    /// Panel containing ρ, clamped to the grid.
    pub fn panel_of(&self, rho: f64) -> usize {
        (((rho - self.lo) / self.h).floor().max(0.0) as usize).min(self.npan - 1)
    }

    /// Barycentric interpolation of nodal values at ρ.
    pub fn interpolate(&self, vals: &[ComplexHP], rho: f64) -> ComplexHP {
        let k = self.panel_of(rho);
        let a = self.panel_start(k);
        let xi = 2.0 * (rho - a) / self.h - 1.0;
        let base = k * NODES_PER_PANEL;
        let mut num = ComplexHP::new(0.0, 0.0);
        let mut den = 0.0;
        for q in 0..NODES_PER_PANEL {
            let d = xi - self.xi[q];
            if d == 0.0 {
                return vals[base + q];
            }
            let c = self.bary[q] / d;
            num += vals[base + q] * c;
            den += c;
        }
        num / den
    }

    /// d/dρ of the panelwise interpolant, at the nodes.
    pub fn differentiate(&self, vals: &[ComplexHP]) -> Vec<ComplexHP> {
        let scale = 2.0 / self.h;
        let mut out = vec![ComplexHP::new(0.0, 0.0); vals.len()];
        for k in 0..self.npan {
            let base = k * NODES_PER_PANEL;
            for q in 0..NODES_PER_PANEL {
                let mut s = ComplexHP::new(0.0, 0.0);
                for r in 0..NODES_PER_PANEL {
                    s += vals[base + r] * self.dmat[q][r];
                }
                out[base + q] = s * scale;
            }
        }
        out
    }
}

pub fn barycentric_weights(x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|j| 1.0 / (0..x.len()).filter(|&k| k != j).map(|k| x[j] - x[k]).product::<f64>())
        .collect()
}

fn diff_matrix(x: &[f64], w: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                d[i][j] = w[j] / w[i] / (x[i] - x[j]);
                diag -= d[i][j];
            }
        }
        d[i][i] = diag;
    }
    d
}

/// Lagrange basis polynomial r of the reference nodes at ξ.
pub fn lagrange(x: &[f64], bary: &[f64], r: usize, xi: f64) -> f64 {
    let mut den = 0.0;
    for q in 0..x.len() {
        let d = xi - x[q];
        if d == 0.0 {
            return if q == r { 1.0 } else { 0.0 };
        }
        den += bary[q] / d;
    }
    bary[r] / (xi - x[r]) / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_exactness() {
        let rule = gauss_legendre(16);
        let v = integrate(0.0, 2.0, &rule, |x| ComplexHP::new(x.powi(31), 0.0));
        assert!((v.re - 2f64.powi(32) / 32.0).abs() < 1e-6);
        let rule = gauss_legendre(5);
        assert!((rule.1.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn interpolation_and_derivative() {
        let g = PanelGrid::new(1.0, 5.0, 0.25);
        let vals: Vec<ComplexHP> = g.nodes().iter().map(|&x| ComplexHP::new(x.sin(), (2.0 * x).cos())).collect();
        let z = g.interpolate(&vals, 2.3456);
        assert!((z - ComplexHP::new(2.3456f64.sin(), (4.6912f64).cos())).norm() < 1e-13);
        let d = g.differentiate(&vals);
        for (i, x) in g.nodes().iter().enumerate() {
            assert!((d[i] - ComplexHP::new(x.cos(), -2.0 * (2.0 * x).sin())).norm() < 1e-10);
        }
    }
}
