//! The fractional matching LP on a weighted k-complex, solved by simplex
//! with Bland's rule, plus its dual certificate and the cluster weights.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::comb::{self, sorted};
use crate::error::{invalid, Result, TrlError};
use crate::hypercore::Vertex;

pub const EXACT_EDGE_LIMIT: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedComplex {
    pub m: usize,
    /// `layers[i]` holds the (i+1)-edges.
    pub layers: Vec<Vec<Vec<Vertex>>>,
    pub w: Vec<f64>,
}

impl WeightedComplex {
    pub fn k(&self) -> usize {
        self.layers.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < self.k() {
            return invalid(format!("m = {} < k = {}: no k-edge can exist", self.m, self.k()));
        }
        if self.w.len() != self.m || self.w.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return invalid("weights must be m values in [0,1]");
        }
        let sets: Vec<BTreeSet<Vec<Vertex>>> = self.layers.iter().map(|l| l.iter().map(|e| sorted(e)).collect()).collect();
        for (i, layer) in sets.iter().enumerate() {
            for e in layer {
                if e.len() != i + 1 || !comb::all_distinct(e) || e.iter().any(|&v| v as usize >= self.m) {
                    return invalid(format!("bad {}-edge {e:?}", i + 1));
                }
                if i > 0 {
                    for f in comb::subsets_of(e, i) {
                        if !sets[i - 1].contains(&f) {
                            return invalid(format!("not down-closed: {f:?} under {e:?}"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Top layer in lexicographic order, deduplicated.
    pub fn top_edges(&self) -> Vec<Vec<Vertex>> {
        let s: BTreeSet<Vec<Vertex>> = self.layers.last().map(|l| l.iter().map(|e| sorted(e)).collect()).unwrap_or_default();
        s.into_iter().collect()
    }

    pub fn complete(m: usize, k: usize, w: Vec<f64>) -> Self {
        let verts: Vec<Vertex> = (0..m as Vertex).collect();
        WeightedComplex { m, layers: (1..=k).map(|i| comb::subsets_of(&verts, i)).collect(), w }
    }

    pub fn weights_exact(&self) -> Vec<BigRational> {
        self.w.iter().map(|&x| BigRational::from_float(x).expect("finite weight")).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FractionalMatching {
    pub edges: Vec<Vec<Vertex>>,
    pub weights: Vec<BigRational>,
    pub objective: BigRational,
    /// Optimal dual read off the final tableau, clamped to [0,1].
    pub dual: Vec<BigRational>,
    pub exact: bool,
}

#[derive(Serialize, Deserialize)]
pub struct MatchingEdgeJson {
    pub vertices: Vec<Vertex>,
    pub weight: f64,
}

#[derive(Serialize, Deserialize)]
pub struct MatchingJson {
    pub edges: Vec<MatchingEdgeJson>,
    pub objective: f64,
}

impl FractionalMatching {
    pub fn objective_f64(&self) -> f64 {
        self.objective.to_f64().unwrap_or(f64::NAN)
    }

    pub fn to_json(&self) -> MatchingJson {
        MatchingJson {
            edges: self
                .edges
                .iter()
                .zip(&self.weights)
                .map(|(e, w)| MatchingEdgeJson { vertices: e.clone(), weight: w.to_f64().unwrap_or(f64::NAN) })
                .collect(),
            objective: self.objective_f64(),
        }
    }

    /// Σ_{e∋v} w*(e) ≤ w(v) and w* ≥ 0, exactly.
    pub fn is_feasible(&self, h: &WeightedComplex) -> bool {
        let w = h.weights_exact();
        let mut load = vec![BigRational::zero(); h.m];
        for (e, x) in self.edges.iter().zip(&self.weights) {
            if x.is_negative() {
                return false;
            }
            for &v in e {
                load[v as usize] += x;
            }
        }
        load.iter().zip(&w).all(|(l, w)| l <= w)
    }
}

trait Scalar: Clone + PartialOrd {
    fn s_zero() -> Self;
    fn s_one() -> Self;
    fn s_sub(&self, o: &Self) -> Self;
    fn s_mul(&self, o: &Self) -> Self;
    fn s_div(&self, o: &Self) -> Self;
    fn s_pos(&self) -> bool;
    fn s_neg(&self) -> bool;
}

impl Scalar for BigRational {
    fn s_zero() -> Self {
        Zero::zero()
    }
    fn s_one() -> Self {
        One::one()
    }
    fn s_sub(&self, o: &Self) -> Self {
        self - o
    }
    fn s_mul(&self, o: &Self) -> Self {
        self * o
    }
    fn s_div(&self, o: &Self) -> Self {
        self / o
    }
    fn s_pos(&self) -> bool {
        self.is_positive()
    }
    fn s_neg(&self) -> bool {
        self.is_negative()
    }
}

const FTOL: f64 = 1e-12;

impl Scalar for f64 {
    fn s_zero() -> Self {
        0.0
    }
    fn s_one() -> Self {
        1.0
    }
    fn s_sub(&self, o: &Self) -> Self {
        self - o
    }
    fn s_mul(&self, o: &Self) -> Self {
        self * o
    }
    fn s_div(&self, o: &Self) -> Self {
        self / o
    }
    fn s_pos(&self) -> bool {
        *self > FTOL
    }
    fn s_neg(&self) -> bool {
        *self < -FTOL
    }
}

/// max Σx s.t. A x ≤ b, x ≥ 0 with b ≥ 0; `cols[j]` lists the rows of column j (0/1 matrix).
/// Returns primal values and the row duals.
fn simplex<T: Scalar>(rows: usize, cols: &[Vec<usize>], b: &[T]) -> (Vec<T>, Vec<T>, T) {
    let n = cols.len();
    let width = n + rows + 1;
    let mut tab: Vec<Vec<T>> = vec![vec![T::s_zero(); width]; rows + 1];
    for (j, c) in cols.iter().enumerate() {
        for &r in c {
            tab[r][j] = T::s_one();
        }
    }
    for r in 0..rows {
        tab[r][n + r] = T::s_one();
        tab[r][width - 1] = b[r].clone();
    }
    for j in 0..n {
        tab[rows][j] = T::s_zero().s_sub(&T::s_one());
    }
    let mut basis: Vec<usize> = (n..n + rows).collect();
    loop {
        // Bland: lowest index with negative reduced cost enters
        let Some(enter) = (0..n + rows).find(|&j| tab[rows][j].s_neg()) else { break };
        let mut leave: Option<usize> = None;
        for r in 0..rows {
            if tab[r][enter].s_pos() {
                let ratio = tab[r][width - 1].s_div(&tab[r][enter]);
                match leave {
                    None => leave = Some(r),
                    Some(l) => {
                        let best = tab[l][width - 1].s_div(&tab[l][enter]);
                        if ratio < best || (!(best < ratio) && basis[r] < basis[l]) {
                            leave = Some(r);
                        }
                    }
                }
            }
        }
        let l = leave.expect("objective is bounded by the vertex constraints");
        let piv = tab[l][enter].clone();
        for x in tab[l].iter_mut() {
            *x = x.s_div(&piv);
        }
        let prow = tab[l].clone();
        for (r, row) in tab.iter_mut().enumerate() {
            if r == l {
                continue;
            }
            let f = row[enter].clone();
            if f.s_pos() || f.s_neg() {
                for (x, p) in row.iter_mut().zip(&prow) {
                    *x = x.s_sub(&f.s_mul(p));
                }
            }
        }
        basis[l] = enter;
    }
    let mut x = vec![T::s_zero(); n];
    for (r, &bv) in basis.iter().enumerate() {
        if bv < n {
            x[bv] = tab[r][width - 1].clone();
        }
    }
    let y: Vec<T> = (0..rows).map(|r| tab[rows][n + r].clone()).collect();
    (x, y, tab[rows][width - 1].clone())
}

pub fn fractional_matching(h: &WeightedComplex) -> Result<FractionalMatching> {
    h.validate()?;
    let edges = h.top_edges();
    let cols: Vec<Vec<usize>> = edges.iter().map(|e| e.iter().map(|&v| v as usize).collect()).collect();
    let clamp = |y: BigRational| if y > BigRational::one() { BigRational::one() } else { y };
    if edges.is_empty() {
        return Ok(FractionalMatching { edges, weights: vec![], objective: BigRational::zero(), dual: vec![BigRational::zero(); h.m], exact: true });
    }
    if edges.len() <= EXACT_EDGE_LIMIT {
        let b = h.weights_exact();
        let (x, y, obj) = simplex::<BigRational>(h.m, &cols, &b);
        Ok(FractionalMatching { edges, weights: x, objective: obj, dual: y.into_iter().map(clamp).collect(), exact: true })
    } else {
        let (x, y, obj) = simplex::<f64>(h.m, &cols, &h.w);
        let conv = |v: f64| BigRational::from_float(v.max(0.0)).unwrap_or_else(BigRational::zero);
        // rescale loads that float error pushed over capacity
        let mut weights: Vec<BigRational> = x.into_iter().map(conv).collect();
        let w = h.weights_exact();
        let mut load = vec![BigRational::zero(); h.m];
        for (e, xv) in edges.iter().zip(&weights) {
            for &v in e {
                load[v as usize] += xv;
            }
        }
        let mut scale = BigRational::one();
        for (l, wv) in load.iter().zip(&w) {
            if l > wv && l.is_positive() {
                let s = wv / l;
                if s < scale {
                    scale = s;
                }
            }
        }
        for xv in weights.iter_mut() {
            *xv = &*xv * &scale;
        }
        let objective = weights.iter().fold(BigRational::zero(), |a, b| a + b);
        let _ = obj;
        Ok(FractionalMatching { edges, weights, objective, dual: y.into_iter().map(conv).map(clamp).collect(), exact: false })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GuaranteeReport {
    pub hypotheses: Vec<(String, bool)>,
    pub hypotheses_hold: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn hypotheses(h: &WeightedComplex, eps: f64, gamma: f64) -> Vec<(String, bool)> {
    let m = h.m as f64;
    let k = h.k();
    let mut out = Vec::new();
    let n1 = h.layers.first().map(|l| l.len()).unwrap_or(0);
    out.push((format!("{n1} 1-edges >= (1-eps)m"), n1 as f64 >= (1.0 - eps) * m - 1e-9));
    let sets: Vec<BTreeSet<Vec<Vertex>>> = h.layers.iter().map(|l| l.iter().map(|e| sorted(e)).collect()).collect();
    let up_degree = |e: &Vec<Vertex>, i: usize| -> usize {
        (0..h.m as Vertex)
            .filter(|v| !e.contains(v))
            .filter(|&v| {
                let mut f = e.clone();
                f.push(v);
                f.sort_unstable();
                sets[i].contains(&f)
            })
            .count()
    };
    for i in 1..k.saturating_sub(1) {
        let worst = sets[i - 1].iter().map(|e| up_degree(e, i)).min().unwrap_or(usize::MAX);
        out.push((format!("every {i}-edge in >= (1-eps)m {}-edges (min {worst})", i + 1), worst as f64 >= (1.0 - eps) * m - 1e-9));
    }
    if k >= 2 {
        let worst = sets[k - 2].iter().map(|e| up_degree(e, k - 1)).min().unwrap_or(usize::MAX);
        out.push((format!("every {}-edge in >= (1/2+gamma)m k-edges (min {worst})", k - 1), worst as f64 >= (0.5 + gamma) * m - 1e-9));
    }
    let total: f64 = h.w.iter().sum();
    out.push((format!("sum w = {total} >= (1-gamma)m"), total >= (1.0 - gamma) * m - 1e-9));
    out
}

pub fn guarantee_check(h: &WeightedComplex, result: &FractionalMatching, eps: f64, gamma: f64) -> GuaranteeReport {
    let hyp = hypotheses(h, eps, gamma);
    let total: f64 = h.w.iter().sum();
    let rhs = (total - eps * h.m as f64) / h.k() as f64;
    let lhs = result.objective_f64();
    // exact comparison when the inputs are exact
    let holds = if result.exact {
        let w_sum = h.weights_exact().into_iter().fold(BigRational::zero(), |a, b| a + b);
        let eps_m = BigRational::from_float(eps).unwrap() * BigRational::from_integer(BigInt::from(h.m));
        result.objective.clone() * BigRational::from_integer(BigInt::from(h.k())) >= w_sum - eps_m
    } else {
        lhs >= rhs - 1e-9
    };
    GuaranteeReport { hypotheses_hold: hyp.iter().all(|h| h.1), hypotheses: hyp, lhs, rhs, holds }
}

/// Σ y(v) w(v) for a dual-feasible y; infeasibility names the violated edge.
pub fn dual_certificate_bound(h: &WeightedComplex, y: &[BigRational]) -> Result<BigRational> {
    if y.len() != h.m {
        return invalid("dual needs one value per vertex");
    }
    for e in h.top_edges() {
        let load = e.iter().fold(BigRational::zero(), |a, &v| a + &y[v as usize]);
        if load < BigRational::one() {
            return Err(TrlError::Infeasible { edge: e, load: load.to_string() });
        }
    }
    if y.iter().any(|v| v.is_negative()) {
        return invalid("dual values must be non-negative");
    }
    Ok(y.iter().zip(h.weights_exact()).fold(BigRational::zero(), |a, (y, w)| a + y * w))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OmegaWeights {
    pub omega: Vec<f64>,
    pub clamped: Vec<bool>,
}

/// ω(V_i) = max(0, |V_i ∖ covered| - 2ηn/t) / ((1-ν_res)n/t), clamped to [0,1].
pub fn omega_weights(sizes: &[usize], covered: &[usize], eta: f64, nu_res: f64, n: usize, t: usize) -> Result<OmegaWeights> {
    if t == 0 {
        return invalid("t must be positive");
    }
    if sizes.len() != covered.len() || sizes.iter().zip(covered).any(|(s, c)| c > s) {
        return invalid("covered counts must match cluster sizes");
    }
    let unit = n as f64 / t as f64;
    let floor = 2.0 * eta * unit;
    let mut omega = Vec::new();
    let mut clamped = Vec::new();
    for (s, c) in sizes.iter().zip(covered) {
        let rest = (s - c) as f64;
        let raw = if rest < floor { 0.0 } else { (rest - floor) / ((1.0 - nu_res) * unit) };
        clamped.push(!(0.0..=1.0).contains(&raw));
        omega.push(raw.clamp(0.0, 1.0));
    }
    Ok(OmegaWeights { omega, clamped })
}

/// ⌈k(1-ν_res)(n/t) w*(g) / ℓ⌉ for every edge of positive weight, in edge order.
pub fn edge_quotas(mt: &FractionalMatching, k: usize, ell_conn: usize, nu_res: f64, n: usize, t: usize) -> Vec<(Vec<Vertex>, u64)> {
    mt.edges
        .iter()
        .zip(&mt.weights)
        .filter(|(_, w)| w.is_positive())
        .map(|(e, w)| {
            let x = k as f64 * (1.0 - nu_res) * (n as f64 / t as f64) * w.to_f64().unwrap() / ell_conn as f64;
            (e.clone(), (x - 1e-9).ceil().max(0.0) as u64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn single_edge_and_zero_weights() {
        let h = WeightedComplex::complete(3, 3, vec![1.0; 3]);
        let mt = fractional_matching(&h).unwrap();
        assert_eq!(mt.objective, r(1, 1));
        assert_eq!(mt.weights, vec![r(1, 1)]);
        let z = WeightedComplex::complete(5, 3, vec![0.0; 5]);
        let mt = fractional_matching(&z).unwrap();
        assert!(mt.objective.is_zero() && mt.weights.iter().all(|w| w.is_zero()));
    }

    #[test]
    fn complete_complex_strong_duality() {
        let h = WeightedComplex::complete(7, 3, vec![1.0; 7]);
        let mt = fractional_matching(&h).unwrap();
        assert_eq!(mt.objective, r(7, 3));
        assert!(mt.is_feasible(&h));
        assert_eq!(dual_certificate_bound(&h, &mt.dual).unwrap(), mt.objective);
        assert_eq!(dual_certificate_bound(&h, &vec![r(1, 3); 7]).unwrap(), r(7, 3));
        assert_eq!(dual_certificate_bound(&h, &vec![r(1, 1); 7]).unwrap(), r(7, 1));
        assert!(matches!(dual_certificate_bound(&h, &vec![r(1, 4); 7]), Err(TrlError::Infeasible { .. })));
        let g = guarantee_check(&h, &mt, 0.1, 0.1);
        // (1-eps)m = 6.3 exceeds the 6 possible neighbours at m = 7
        assert!(g.holds && !g.hypotheses_hold);
        let h = WeightedComplex::complete(10, 3, vec![1.0; 10]);
        let g = guarantee_check(&h, &fractional_matching(&h).unwrap(), 0.1, 0.1);
        assert!(g.holds && g.hypotheses_hold);
    }

    #[test]
    fn small_m_rejected_and_low_degree_reported() {
        let h = WeightedComplex { m: 2, layers: vec![vec![vec![0], vec![1]], vec![vec![0, 1]], vec![]], w: vec![1.0, 1.0] };
        assert!(fractional_matching(&h).is_err());
        let mut h = WeightedComplex::complete(10, 3, vec![1.0; 10]);
        h.layers[2].retain(|e| !(e[0] == 0 && e[1] == 1));
        let mt = fractional_matching(&h).unwrap();
        let g = guarantee_check(&h, &mt, 0.1, 0.1);
        assert!(!g.hypotheses_hold);
        assert!(g.holds);
    }

    #[test]
    fn omega_and_quotas() {
        let o = omega_weights(&[10, 10], &[10, 0], 0.0, 0.0, 20, 2).unwrap();
        assert_eq!(o.omega, vec![0.0, 1.0]);
        assert!(omega_weights(&[1], &[0], 0.1, 0.1, 10, 0).is_err());
        let h = WeightedComplex::complete(3, 3, vec![1.0; 3]);
        let mt = fractional_matching(&h).unwrap();
        assert_eq!(edge_quotas(&mt, 3, 3, 0.2, 60, 6), vec![(vec![0, 1, 2], 8)]);
    }
}
