//! Exact coefficient tables δ, b, d, 𝓅 and the action of the operators 𝒫_i on eigenfunction
//! expansions. Every table has a brute-force oracle next to it.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exactnum::{binom_q, pochhammer, q, qi, qpow, ser_q, to_f64, ComplexHP, Params, Q};
use crate::poly::QPoly;
use crate::spectral::{eigenfunction, laguerre_parameter, ExpPoly, Parity};

fn ser_rows<S: serde::Serializer>(rows: &[Vec<Q>], s: S) -> std::result::Result<S::Ok, S::Error> {
    let v: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect();
    serde::Serialize::serialize(&v, s)
}

/// δ_j^{k,i}: (t∂_t)^i v_k = Σ_j δ_j^{k,i} v_{k+j}, unnormalized v.
#[derive(Clone, Debug)]
pub struct DeltaTable {
    pub n: u32,
    pub k_max: usize,
    pub i_max: usize,
    // entries[k][i][j + i]
    entries: Vec<Vec<Vec<Q>>>,
}

impl DeltaTable {
    /// δ_j^{k,i}; zero outside |j| ≤ i or for k + j < 0.
    pub fn get(&self, k: usize, i: usize, j: i64) -> Q {
        if k > self.k_max || i > self.i_max || j.unsigned_abs() as usize > i || (k as i64 + j) < 0 {
            return Q::zero();
        }
        self.entries[k][i][(j + i as i64) as usize].clone()
    }

    pub fn row(&self, k: usize, i: usize) -> &[Q] {
        &self.entries[k][i]
    }

    /// Smallest C with max_j |δ_j^{k,i}| k!/(k+i)! ≤ C^i over the table.
    pub fn growth_constant(&self) -> f64 {
        let mut c: f64 = 0.0;
        for k in 0..=self.k_max {
            for i in 1..=self.i_max {
                let mx = self.entries[k][i].iter().map(|x| to_f64(&x.abs())).fold(0.0, f64::max);
                let ratio = (0..i).fold(mx, |acc, s| acc / (k + i - s) as f64);
                c = c.max(ratio.powf(1.0 / i as f64));
            }
        }
        c
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut out = Vec::new();
        for k in 0..=self.k_max {
            for i in 0..=self.i_max {
                for (jj, x) in self.entries[k][i].iter().enumerate() {
                    let j = jj as i64 - i as i64;
                    if k as i64 + j >= 0 {
                        out.push(serde_json::json!({"k": k, "i": i, "j": j, "value": x.to_string()}));
                    }
                }
            }
        }
        serde_json::json!({"n": self.n, "entries": out})
    }
}

/// δ table by the one-step recursion obtained from t∂_t v_k = (n+1)((k+1)v_{k+1} − (1+α)v_k − (k+α)v_{k−1}).
pub fn delta_table(n: u32, k_max: usize, i_max: usize) -> DeltaTable {
    let alpha = laguerre_parameter(Parity::Even, n);
    let one_a = Q::one() + &alpha;
    let np1 = qi(n as i64 + 1);
    let entries = (0..=k_max)
        .map(|k| {
            let mut rows: Vec<Vec<Q>> = vec![vec![Q::one()]];
            for i in 1..=i_max {
                let prev = &rows[i - 1];
                let get = |j: i64| -> Q {
                    if j.unsigned_abs() as usize > i - 1 || (k as i64 + j) < 0 {
                        Q::zero()
                    } else {
                        prev[(j + i as i64 - 1) as usize].clone()
                    }
                };
                let row = (-(i as i64)..=i as i64)
                    .map(|j| {
                        if (k as i64 + j) < 0 {
                            return Q::zero();
                        }
                        let kj = qi(k as i64 + j);
                        let v = &kj * get(j - 1) - &one_a * get(j) - (&kj + Q::one() + &alpha) * get(j + 1);
                        v * &np1
                    })
                    .collect();
                rows.push(row);
            }
            rows
        })
        .collect();
    DeltaTable { n, k_max, i_max, entries }
}

/// Expansion of an ExpPoly in the unnormalized even basis v_0, v_1, …, highest degree first.
pub fn expand_even(f: &ExpPoly) -> Result<Vec<Q>> {
    let n = f.n;
    let d = 2 * n as usize + 2;
    let Some(deg) = f.poly.degree() else {
        return Ok(Vec::new());
    };
    if deg % d != 0 {
        return Err(Error::BasisExpansion(deg));
    }
    let top = deg / d;
    let mut coeffs = vec![Q::zero(); top + 1];
    let mut rest = f.poly.clone();
    for j in (0..=top).rev() {
        let vj = eigenfunction(Parity::Even, j as u32, n).rep.poly;
        let c = rest.coeff(j * d) / vj.coeff(j * d);
        rest = &rest - &vj.scale(&c);
        coeffs[j] = c;
    }
    if let Some(r) = rest.degree() {
        return Err(Error::BasisExpansion(r));
    }
    Ok(coeffs)
}

/// Brute force δ_j^{k,i}, j = −i..i: apply (t∂_t)^i to v_k in the exact ring and re-expand.
pub fn delta_oracle(n: u32, k: usize, i: usize) -> Result<Vec<Q>> {
    let mut f = eigenfunction(Parity::Even, k as u32, n).rep;
    for _ in 0..i {
        f = f.euler();
    }
    let c = expand_even(&f)?;
    Ok((-(i as i64)..=i as i64)
        .map(|j| {
            let idx = k as i64 + j;
            if idx < 0 {
                Q::zero()
            } else {
                c.get(idx as usize).cloned().unwrap_or_else(Q::zero)
            }
        })
        .collect())
}

/// Cells (k, i) where the recursion and the oracle disagree.
pub fn delta_mismatches(n: u32, k_max: usize, i_max: usize) -> Result<Vec<(usize, usize)>> {
    let table = delta_table(n, k_max, i_max);
    let cells: Vec<(usize, usize)> = (0..=k_max).flat_map(|k| (0..=i_max).map(move |i| (k, i))).collect();
    let res: Vec<Result<Option<(usize, usize)>>> = cells
        .par_iter()
        .map(|&(k, i)| {
            let o = delta_oracle(n, k, i)?;
            Ok((o.as_slice() != table.row(k, i)).then_some((k, i)))
        })
        .collect();
    res.into_iter().filter_map(|r| r.transpose()).collect()
}

/// b_{p,ℓ} and d_{ν,i}.
#[derive(Clone, Debug, Serialize)]
pub struct BDTables {
    #[serde(serialize_with = "ser_rows")]
    b: Vec<Vec<Q>>,
    #[serde(serialize_with = "ser_rows")]
    d: Vec<Vec<Q>>,
}

impl BDTables {
    /// b_{p,ℓ}, zero outside 1 ≤ ℓ ≤ p.
    pub fn b(&self, p: usize, l: usize) -> Q {
        if l < 1 || l > p || p >= self.b.len() {
            return Q::zero();
        }
        self.b[p][l].clone()
    }

    /// d_{ν,i}, zero outside 1 ≤ i ≤ max(ν, 1); d_{0,1} = 1.
    pub fn d(&self, nu: usize, i: usize) -> Q {
        if nu >= self.d.len() || i >= self.d[nu].len() {
            return Q::zero();
        }
        self.d[nu][i].clone()
    }
}

pub fn bd_tables(p_max: usize, nu_max: usize) -> BDTables {
    let mut b = vec![vec![Q::zero(); p_max + 2]; p_max + 1];
    if p_max >= 1 {
        b[1][1] = Q::one();
    }
    for p in 2..=p_max {
        for l in 1..=p {
            let mut v = b[p - 1][l].clone();
            if l >= 2 {
                v += qi(p as i64 - 1) * &b[p - 1][l - 1];
            }
            b[p][l] = v;
        }
    }
    let mut d = vec![vec![Q::zero(); nu_max + 2]; nu_max + 1];
    d[0][1] = Q::one();
    if nu_max >= 1 {
        d[1][1] = Q::one();
    }
    for nu in 2..=nu_max {
        for i in 1..=nu {
            d[nu][i] = &d[nu - 1][i] + qi(nu as i64 + 1 - i as i64) * &d[nu - 1][i - 1];
        }
    }
    BDTables { b, d }
}

/// 𝓅_{i,j}, 0 ≤ j ≤ i ≤ p, for the expansion of [ρ^{−θ}(1−θ+ρ∂_ρ)]^p ρ^q t^f u.
#[derive(Clone, Debug, Serialize)]
pub struct PTable {
    pub p: usize,
    #[serde(serialize_with = "ser_rows")]
    pub rows: Vec<Vec<Q>>,
}

impl PTable {
    pub fn get(&self, i: usize, j: usize) -> Q {
        self.rows.get(i).and_then(|r| r.get(j)).cloned().unwrap_or_else(Q::zero)
    }

    /// 𝒫_i(a) = Σ_j 𝓅_{i,j} a^j.
    pub fn eval_row(&self, i: usize, a: &Q) -> Q {
        self.rows[i].iter().rev().fold(Q::zero(), |acc, c| acc * a + c)
    }
}

fn coef1(p: usize, i: usize, j: usize, theta: &Q, gamma: &Q, a: &Q, bd: &BDTables) -> Q {
    let mut s = Q::zero();
    for nu in j..=i {
        for mu in nu..=i {
            let num = crate::exactnum::factorial_q((p + nu - mu) as u32);
            let den = crate::exactnum::factorial_q(j as u32)
                * crate::exactnum::factorial_q((nu - j) as u32)
                * crate::exactnum::factorial_q((p - mu) as u32);
            s += num / den
                * qpow(&-theta.clone(), (mu - nu) as u32)
                * qpow(a, (nu - j) as u32)
                * bd.b(p, mu - nu + 1)
                * bd.d(p - mu, i - mu + 1);
        }
    }
    s * qpow(gamma, j as u32)
}

/// Last row: 𝓅_{p,j} = Σ_ν C(ν,j) γ^j (−θ)^{p−ν} A^{ν−j} b_{p,p−ν+1}.
fn coef2(p: usize, j: usize, theta: &Q, gamma: &Q, a: &Q, bd: &BDTables) -> Q {
    (j..=p)
        .map(|nu| {
            binom_q(&qi(nu as i64), j as u32)
                * qpow(gamma, j as u32)
                * qpow(&-theta.clone(), (p - nu) as u32)
                * qpow(a, (nu - j) as u32)
                * bd.b(p, p - nu + 1)
        })
        .sum()
}

/// Alternate last row: C(ν,j)(−θ)^{ν−j}A^{ν−j}b_{p,p−ν+1}, without γ^j.
pub fn coef2_alt(p: usize, j: usize, theta: &Q, a: &Q, bd: &BDTables) -> Q {
    (j..=p)
        .map(|nu| {
            binom_q(&qi(nu as i64), j as u32)
                * qpow(&-theta.clone(), (nu - j) as u32)
                * qpow(a, (nu - j) as u32)
                * bd.b(p, p - nu + 1)
        })
        .sum()
}

pub fn p_coeffs(p: usize, theta: &Q, gamma: &Q, q_: &Q, f: &Q) -> PTable {
    let bd = bd_tables(p.max(1), p.max(1));
    let a = Q::one() - theta + q_ + gamma * f;
    let pq = qi(p as i64);
    let mut rows = vec![vec![Q::one()]];
    if p >= 1 {
        let half = q(p as i64 + 1, 2) * (Q::one() - theta);
        rows.push(vec![&pq * (half + q_ + gamma * f), &pq * gamma]);
    }
    for i in 2..=p {
        let row = (0..=i)
            .map(|j| if i < p { coef1(p, i, j, theta, gamma, &a, &bd) } else { coef2(p, j, theta, gamma, &a, &bd) })
            .collect();
        rows.push(row);
    }
    PTable { p, rows }
}

/// Independent generator: Π_{k<p}(A − kθ + γD + E) expanded in E = ρ∂_ρ, then
/// E^e = Σ_s S(e,s) ρ^s∂^s with Stirling numbers of the second kind.
pub fn p_generator(p: usize, theta: &Q, gamma: &Q, q_: &Q, f: &Q) -> PTable {
    let a = Q::one() - theta + q_ + gamma * f;
    // prod[e] is a polynomial in D
    let mut prod: Vec<QPoly> = vec![QPoly::one()];
    for k in 0..p {
        let lin = QPoly::from_coeffs(vec![&a - qi(k as i64) * theta, gamma.clone()]);
        let mut next = vec![QPoly::zero(); prod.len() + 1];
        for (e, c) in prod.iter().enumerate() {
            next[e] = &next[e] + &(c * &lin);
            next[e + 1] = &next[e + 1] + c;
        }
        prod = next;
    }
    let mut st = vec![vec![Q::zero(); p + 1]; p + 1];
    st[0][0] = Q::one();
    for e in 1..=p {
        for s in 1..=e {
            st[e][s] = qi(s as i64) * &st[e - 1][s] + &st[e - 1][s - 1];
        }
    }
    let rows = (0..=p)
        .map(|i| {
            let s = p - i;
            let poly = (0..=p).fold(QPoly::zero(), |acc, e| &acc + &prod[e].scale(&st[e][s]));
            (0..=i).map(|j| poly.coeff(j)).collect()
        })
        .collect();
    PTable { p, rows }
}

/// Monomial check of the expansion on u = t^a ρ^b:
/// Π_{k<p}(1−θ+e_0−kθ) = Σ_i 𝒫_i(a)(b)_{p−i}, e_0 = q + γ(f+a) + b.
pub fn p_oracle(table: &PTable, theta: &Q, gamma: &Q, q_: &Q, f: &Q, monomials: &[(Q, Q)]) -> Vec<(Q, Q, Q)> {
    let p = table.p;
    monomials
        .iter()
        .filter_map(|(a, b)| {
            let e0 = q_ + gamma * (f + a) + b;
            let lhs = (0..p).fold(Q::one(), |acc, k| acc * (Q::one() - theta + &e0 - qi(k as i64) * theta));
            let rhs: Q = (0..=p).map(|i| table.eval_row(i, a) * pochhammer(b, (p - i) as u32)).sum();
            (lhs != rhs).then(|| (a.clone(), b.clone(), lhs - rhs))
        })
        .collect()
}

/// The reduced operator Σ_i ρ^{−i}𝒫_i(t∂_t)∂_ρ^{2m−i} (times K' t^{2n}) for the parameter set,
/// with the δ table needed to act on v_0..v_{k_max}.
#[derive(Clone, Debug)]
pub struct OperatorTable {
    pub n: u32,
    pub m: u32,
    pub rows: PTable,
    pub delta: DeltaTable,
}

/// 𝓅_{i,j} of the reduced operator: 𝓅¹ (p = 2m, q = r+2θ−2nγ) minus mθ·𝓅² (p = 2m−1,
/// q = r+θ−2nγ) shifted by one ρ-power.
pub fn section_table(params: &Params) -> PTable {
    let m = params.m as usize;
    let (th, ga, r) = (&params.theta, &params.gamma, &params.r);
    let f = qi(2 * params.n as i64);
    let q1 = r + th * qi(2) - &f * ga;
    let q2 = r + th - &f * ga;
    let t1 = p_coeffs(2 * m, th, ga, &q1, &f);
    let t2 = p_coeffs(2 * m - 1, th, ga, &q2, &f);
    let mth = qi(m as i64) * th;
    let rows = (0..=2 * m)
        .map(|i| {
            (0..=i)
                .map(|j| {
                    let mut v = t1.get(i, j);
                    if i >= 1 {
                        v -= &mth * t2.get(i - 1, j);
                    }
                    v
                })
                .collect()
        })
        .collect();
    PTable { p: 2 * m, rows }
}

impl OperatorTable {
    pub fn new(params: &Params, k_max: usize) -> Self {
        OperatorTable {
            n: params.n,
            m: params.m,
            rows: section_table(params),
            delta: delta_table(params.n, k_max, 2 * params.m as usize),
        }
    }

    /// W_i(p → ν) = Σ_{j ≥ |ν−p|} 𝓅_{i,j} δ_{ν−p}^{p,j}: coefficient of v_ν in 𝒫_i(t∂_t)v_p.
    pub fn weight(&self, i: usize, p: usize, nu: usize) -> Q {
        let off = nu as i64 - p as i64;
        (off.unsigned_abs() as usize..=i)
            .map(|j| self.rows.get(i, j) * self.delta.get(p, j, off))
            .sum()
    }

    /// Nonzero weights of 𝒫_i v_p, ordered by ν.
    pub fn band(&self, i: usize, p: usize) -> Vec<(usize, Q)> {
        (p.saturating_sub(i)..=p + i)
            .map(|nu| (nu, self.weight(i, p, nu)))
            .filter(|(_, w)| !w.is_zero())
            .collect()
    }
}

/// Derivative access for an expansion coefficient g_p(ρ).
pub trait DerivHandle: Sync {
    fn max_order(&self) -> usize;
    fn deriv(&self, k: usize, rho: f64) -> ComplexHP;
}

/// Coefficients of v_ν in Σ_p 𝒫_i(t∂_t)[g_p^{(2m−i)} v_p] at ρ.
pub fn apply_pi(
    table: &OperatorTable,
    i: usize,
    inputs: &[(usize, &dyn DerivHandle)],
    rho: f64,
) -> Result<BTreeMap<usize, ComplexHP>> {
    let order = 2 * table.m as usize - i;
    let mut out: BTreeMap<usize, ComplexHP> = BTreeMap::new();
    for (p, h) in inputs {
        if h.max_order() < order {
            return Err(Error::DerivativeOrder { order, max: h.max_order() });
        }
        let g = h.deriv(order, rho);
        for (nu, w) in table.band(i, *p) {
            *out.entry(nu).or_insert(ComplexHP::new(0.0, 0.0)) += g * to_f64(&w);
        }
    }
    Ok(out)
}

/// Spot checks of the identities behind b and d: returns the number of mismatches.
pub fn bd_identity_mismatches(p_max: usize, probes: &[(Q, Q)]) -> usize {
    let bd = bd_tables(p_max, p_max.max(10));
    let mut bad = 0;
    for p in 1..=p_max {
        for (a, th) in probes {
            let lhs = (1..=p).fold(Q::one(), |acc, qq| acc * (Q::one() + a - qi(qq as i64) * th));
            let base = Q::one() - th + a;
            let rhs: Q = (1..=p)
                .map(|l| qpow(&-th.clone(), (l - 1) as u32) * bd.b(p, l) * qpow(&base, (p + 1 - l) as u32))
                .sum();
            if lhs != rhs {
                bad += 1;
            }
        }
    }
    for nu in 1..=p_max.max(10) {
        for a in 0..=20i64 {
            let aq = qi(a);
            let rhs: Q = (1..=nu).map(|i| bd.d(nu, i) * pochhammer(&aq, (nu + 1 - i) as u32)).sum();
            if qpow(&aq, nu as u32) != rhs {
                bad += 1;
            }
        }
    }
    bad
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamSetCheck {
    pub n: u32,
    pub m: u32,
    pub generator_mismatches: usize,
    pub monomial_mismatches: usize,
    #[serde(serialize_with = "ser_q")]
    pub pi0_weight: Q,
}

/// Both families of the reduced operator against the generator and the monomial oracle,
/// plus the Π₀ weight 𝓅_{1,0} + 𝓅_{1,1}δ_0^{0,1}, which must vanish.
pub fn check_param_set(params: &Params, monomials: &[(Q, Q)]) -> ParamSetCheck {
    let (th, ga, r) = (&params.theta, &params.gamma, &params.r);
    let f = qi(2 * params.n as i64);
    let m = params.m as usize;
    let mut gen_bad = 0;
    let mut mono_bad = 0;
    for (p, qq) in [(2 * m, r + th * qi(2) - &f * ga), (2 * m - 1, r + th - &f * ga)] {
        let t = p_coeffs(p, th, ga, &qq, &f);
        let g = p_generator(p, th, ga, &qq, &f);
        gen_bad += t.rows.iter().zip(&g.rows).filter(|(x, y)| x != y).count();
        mono_bad += p_oracle(&t, th, ga, &qq, &f, monomials).len();
    }
    let table = OperatorTable::new(params, 2);
    ParamSetCheck {
        n: params.n,
        m: params.m,
        generator_mismatches: gen_bad,
        monomial_mismatches: mono_bad,
        pi0_weight: table.weight(1, 0, 0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::derive_params;

    #[test]
    fn delta_examples() {
        for n in 0..3u32 {
            let t = delta_table(n, 8, 6);
            assert_eq!(t.get(0, 1, 1), qi(n as i64 + 1));
            assert_eq!(t.get(0, 1, 0), q(-(2 * n as i64 + 1), 2));
            let alpha = laguerre_parameter(Parity::Even, n);
            for k in 1..5usize {
                assert_eq!(t.get(k, 1, -1), -(qi(n as i64 + 1)) * (qi(k as i64) + &alpha));
                assert_eq!(t.get(k, 1, 1), qi((n as i64 + 1) * (k as i64 + 1)));
            }
            for k in 0..=8usize {
                for i in 0..=6usize {
                    let expect = qpow(&qi(n as i64 + 1), i as u32)
                        * crate::exactnum::factorial_q((k + i) as u32)
                        / crate::exactnum::factorial_q(k as u32);
                    assert_eq!(t.get(k, i, i as i64), expect);
                }
            }
        }
    }

    #[test]
    fn delta_oracle_examples() {
        assert_eq!(delta_oracle(0, 0, 1).unwrap(), vec![qi(0), q(-1, 2), qi(1)]);
        assert_eq!(delta_oracle(2, 3, 0).unwrap(), vec![qi(1)]);
        assert_eq!(delta_oracle(1, 2, 3).unwrap().as_slice(), delta_table(1, 2, 3).row(2, 3));
    }

    #[test]
    fn lower_edge_sign() {
        // δ_{-i}^{k,i} = (−(n+1))^i Π_{l<i}(k+α−l)
        let n = 1;
        let t = delta_table(n, 6, 4);
        let alpha = laguerre_parameter(Parity::Even, n);
        for k in 4..7usize {
            for i in 1..=4usize {
                let expect = (0..i).fold(Q::one(), |acc, l| acc * -(qi(2)) * (qi(k as i64 - l as i64) + &alpha));
                assert_eq!(t.get(k, i, -(i as i64)), expect);
            }
        }
    }

    #[test]
    fn bd_examples() {
        let bd = bd_tables(8, 8);
        assert_eq!(bd.d(2, 1), qi(1));
        assert_eq!(bd.d(2, 2), qi(1));
        assert_eq!(bd.b(3, 3), qi(2));
        for p in 1..=8usize {
            assert_eq!(bd.b(p, 1), qi(1));
            assert_eq!(bd.b(p, p), crate::exactnum::factorial_q(p as u32 - 1));
            if p >= 2 {
                assert_eq!(bd.b(p, 2), qi((p * (p - 1) / 2) as i64));
            }
            assert_eq!(bd.d(p, 1), qi(1));
            assert_eq!(bd.d(p, p), qi(1));
            if p >= 2 {
                assert_eq!(bd.d(p, 2), qi((p * (p - 1) / 2) as i64));
            }
        }
        let rhs = bd.d(2, 1) * qi(6) + bd.d(2, 2) * qi(3);
        assert_eq!(rhs, qi(9));
    }

    #[test]
    fn p_rows() {
        let t = p_coeffs(1, &qi(2), &qi(1), &q(-5, 2), &qi(0));
        assert_eq!(t.get(0, 0), qi(1));
        // ρ^{-θ}(1−θ+ρ∂)ρ^q t^f = (1−θ+q+γf) on u ≡ 1
        assert_eq!(t.get(1, 0), qi(1) - qi(2) + q(-5, 2));
        let mono = [(qi(3), qi(4)), (qi(0), qi(0))];
        let t2 = p_coeffs(2, &qi(2), &qi(1), &q(-5, 2), &qi(0));
        assert!(p_oracle(&t2, &qi(2), &qi(1), &q(-5, 2), &qi(0), &mono).is_empty());
    }

    #[test]
    fn alternate_last_row_differs() {
        let (th, ga, qq, f) = (q(4, 3), q(1, 3), q(-7, 5), qi(2));
        let bd = bd_tables(4, 4);
        let a = Q::one() - &th + &qq + &ga * &f;
        let g = p_generator(4, &th, &ga, &qq, &f);
        let alt: Vec<Q> = (0..=4).map(|j| coef2_alt(4, j, &th, &a, &bd)).collect();
        assert_ne!(alt, g.rows[4]);
        assert_eq!(p_coeffs(4, &th, &ga, &qq, &f).rows, g.rows);
    }

    #[test]
    fn metivier_first_row() {
        let p = derive_params(0, 1).unwrap();
        let t = section_table(&p);
        // 𝓅_{1,0} = m(4m−1)/(2m−1) + 2mr = 3 − 2 and 𝓅_{1,1} = 2
        assert_eq!(t.get(1, 0), qi(1));
        assert_eq!(t.get(1, 1), qi(2));
        let op = OperatorTable::new(&p, 4);
        assert!(op.weight(1, 0, 0).is_zero());
        assert_eq!(op.weight(1, 0, 1), qi(2));
    }

    #[test]
    fn section_rows_match_closed_forms() {
        for n in 0..3u32 {
            for m in 1..4u32 {
                let p = derive_params(n, m).unwrap();
                let t = section_table(&p);
                assert_eq!(t.get(1, 0), crate::exactnum::p10(m, &p.r));
                assert_eq!(t.get(1, 1), crate::exactnum::p11(n, m));
                assert_eq!(t.get(0, 0), qi(1));
            }
        }
    }

    struct Const(ComplexHP);
    impl DerivHandle for Const {
        fn max_order(&self) -> usize {
            1
        }
        fn deriv(&self, _k: usize, _rho: f64) -> ComplexHP {
            self.0
        }
    }

    #[test]
    fn apply_pi_band() {
        let p = derive_params(0, 1).unwrap();
        let op = OperatorTable::new(&p, 6);
        let g = Const(ComplexHP::new(1.5, 0.0));
        let out = apply_pi(&op, 1, &[(0, &g)], 3.0).unwrap();
        assert!(out.get(&0).map_or(true, |z| z.norm() == 0.0));
        assert!((out[&1] - ComplexHP::new(3.0, 0.0)).norm() < 1e-15);
        let out = apply_pi(&op, 0, &[(3, &g)], 1.0);
        assert!(matches!(out, Err(Error::DerivativeOrder { .. })));
        for i in 0..=2usize {
            for (nu, _) in op.band(i, 3) {
                assert!((1..=5).contains(&nu));
            }
        }
    }
}
