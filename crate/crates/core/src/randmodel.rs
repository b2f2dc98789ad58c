//! Binomial sampling, adversaries, the goodness recursion and upper-regularity witnesses.

use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::{FxHashMap, FxHashSet, FxHasher};
use serde::{Deserialize, Serialize};

use crate::comb::{self, binom, sorted};
use crate::error::{invalid, Result, TrlError};
use crate::hypercore::{Hypergraph, Vertex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnpParams {
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub seed: u64,
}

/// One uniform draw per k-set, k-sets in colex order.
pub fn sample_gnp(par: &GnpParams) -> Hypergraph {
    let mut rng = ChaCha8Rng::seed_from_u64(par.seed);
    let mut edges = Vec::new();
    comb::for_each_colex(par.n, par.k, |s| {
        if rng.gen::<f64>() < par.p {
            edges.push(s.to_vec());
        }
    });
    Hypergraph::new(par.k, par.n, edges).expect("colex sets are valid edges")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Odd,
    Even,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum AdversarySpec {
    RandomThinning { q: f64 },
    Parity { a: Vec<Vertex>, keep: Parity },
    /// Thin with probability `q`, then re-add deleted edges until every
    /// (k-1)-set reaches `target`. With `host_capped` the floor at x is
    /// min(target, codegree of x in the input).
    CodegreeFloorRepair {
        q: f64,
        target: usize,
        #[serde(default)]
        host_capped: bool,
    },
}

impl AdversarySpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            AdversarySpec::RandomThinning { q } | AdversarySpec::CodegreeFloorRepair { q, .. } if !(0.0..=1.0).contains(q) => {
                invalid(format!("thinning probability {q} outside [0,1]"))
            }
            AdversarySpec::Parity { a, .. } if a.iter().any(|&v| v as usize >= n) => invalid("parity set is not inside V"),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            AdversarySpec::RandomThinning { q } => format!("thin({q})"),
            AdversarySpec::Parity { a, keep } => format!("parity({},{})", a.len(), if *keep == Parity::Odd { "odd" } else { "even" }),
            AdversarySpec::CodegreeFloorRepair { q, target, host_capped } => {
                format!("repair({q},{target}{})", if *host_capped { ",capped" } else { "" })
            }
        }
    }
}

fn thin(g: &Hypergraph, q: f64, rng: &mut ChaCha8Rng) -> (Vec<Vec<Vertex>>, Vec<Vec<Vertex>>) {
    let mut kept = Vec::new();
    let mut gone = Vec::new();
    for e in g.edges() {
        if rng.gen::<f64>() < q {
            gone.push(e.clone());
        } else {
            kept.push(e.clone());
        }
    }
    (kept, gone)
}

pub fn apply_adversary(g: &Hypergraph, spec: &AdversarySpec, seed: u64) -> Result<Hypergraph> {
    spec.validate(g.n())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match spec {
        AdversarySpec::RandomThinning { q } => {
            let (kept, _) = thin(g, *q, &mut rng);
            Hypergraph::new(g.k(), g.n(), kept)
        }
        AdversarySpec::Parity { a, keep } => {
            let inside: FxHashSet<Vertex> = a.iter().copied().collect();
            let want = if *keep == Parity::Odd { 1 } else { 0 };
            Ok(g.filter(|e| e.iter().filter(|v| inside.contains(v)).count() % 2 == want))
        }
        AdversarySpec::CodegreeFloorRepair { q, target, host_capped } => {
            let (kept, _) = thin(g, *q, &mut rng);
            let cur = Hypergraph::new(g.k(), g.n(), kept)?;
            let mut added: Vec<Vec<Vertex>> = Vec::new();
            let mut added_set: FxHashSet<Vec<Vertex>> = FxHashSet::default();
            let mut failure = None;
            comb::for_each_colex(g.n(), g.k() - 1, |x| {
                if failure.is_some() {
                    return;
                }
                let floor = if *host_capped { (*target).min(g.codegree(x)) } else { *target };
                let have = cur.codegree(x) + added_set_count(&added_set, x, g);
                if have >= floor {
                    return;
                }
                let mut need = floor - have;
                for &v in g.completions(x) {
                    if need == 0 {
                        break;
                    }
                    let mut e = x.to_vec();
                    e.push(v);
                    e.sort_unstable();
                    if !cur.has_edge(&e) && added_set.insert(e.clone()) {
                        added.push(e);
                        need -= 1;
                    }
                }
                if need > 0 {
                    failure = Some((x.to_vec(), floor));
                }
            });
            if let Some((x, floor)) = failure {
                return Err(TrlError::Degenerate(format!("codegree floor {floor} unreachable at {x:?} (host codegree {})", g.codegree(&x))));
            }
            let mut edges = cur.edges().to_vec();
            edges.extend(added);
            Hypergraph::new(g.k(), g.n(), edges)
        }
    }
}

fn added_set_count(added: &FxHashSet<Vec<Vertex>>, x: &[Vertex], g: &Hypergraph) -> usize {
    if added.is_empty() {
        return 0;
    }
    g.completions(x)
        .iter()
        .filter(|&&v| {
            let mut e = x.to_vec();
            e.push(v);
            e.sort_unstable();
            added.contains(&e)
        })
        .count()
}

// ---------------------------------------------------------------- goodness

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodnessParams {
    pub eps: f64,
    pub p: f64,
    pub ell: usize,
}

pub fn set_digest(s: &BTreeSet<Vertex>) -> u64 {
    let mut h = FxHasher::default();
    s.len().hash(&mut h);
    for v in s {
        v.hash(&mut h);
    }
    h.finish()
}

/// Goodness queries against one host graph, memoized per (S digest, ℓ, x).
pub struct Goodness<'g> {
    g: &'g Hypergraph,
    memo: FxHashMap<(u64, usize, Vec<Vertex>), bool>,
    pub memoize: bool,
}

impl<'g> Goodness<'g> {
    pub fn new(g: &'g Hypergraph) -> Self {
        Goodness { g, memo: FxHashMap::default(), memoize: true }
    }

    pub fn without_memo(g: &'g Hypergraph) -> Self {
        Goodness { g, memo: FxHashMap::default(), memoize: false }
    }

    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    pub fn is_good(&mut self, x: &[Vertex], s: &BTreeSet<Vertex>, gp: GoodnessParams) -> bool {
        let mut h = FxHasher::default();
        (set_digest(s), gp.eps.to_bits(), gp.p.to_bits()).hash(&mut h);
        let d = h.finish();
        let x = sorted(x);
        self.rec(&x, s, d, gp.eps, gp.p, gp.ell.max(1))
    }

    fn rec(&mut self, x: &[Vertex], s: &BTreeSet<Vertex>, d: u64, eps: f64, p: f64, ell: usize) -> bool {
        let key = (d, ell, x.to_vec());
        if self.memoize {
            if let Some(&b) = self.memo.get(&key) {
                return b;
            }
        }
        let slack = eps * p * self.g.n() as f64;
        let into_s = self.g.completions(x).iter().filter(|v| s.contains(v)).count() as f64;
        let mut good = (into_s - p * s.len() as f64).abs() <= slack + 1e-9;
        if good && ell >= 2 {
            good = self.rec(x, s, d, eps, p, ell - 1);
            if good {
                let mut bad_edges = 0usize;
                let comps: Vec<Vertex> = self.g.completions(x).to_vec();
                for v in comps {
                    let mut e = x.to_vec();
                    e.push(v);
                    e.sort_unstable();
                    let any_bad = (0..e.len()).any(|i| {
                        if e[i] == v {
                            return false;
                        }
                        let y: Vec<Vertex> = e.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &w)| w).collect();
                        !self.rec(&y, s, d, eps, p, ell - 1)
                    });
                    bad_edges += any_bad as usize;
                }
                good = bad_edges as f64 <= slack + 1e-9;
            }
        }
        if self.memoize {
            if good && ell >= 2 {
                if let Some(&lower) = self.memo.get(&(d, ell - 1, x.to_vec())) {
                    assert!(lower, "goodness must be monotone in depth");
                }
            }
            self.memo.insert(key, good);
        }
        good
    }
}

pub fn is_good(g: &Hypergraph, x: &[Vertex], s: &BTreeSet<Vertex>, gp: GoodnessParams) -> bool {
    Goodness::new(g).is_good(x, s, gp)
}

/// (k-1)-sets disjoint from S that fail to be good.
pub fn count_nongood(g: &Hypergraph, s: &BTreeSet<Vertex>, gp: GoodnessParams, memoize: bool) -> usize {
    let mut oracle = if memoize { Goodness::new(g) } else { Goodness::without_memo(g) };
    let mut bad = 0;
    comb::for_each_colex(g.n(), g.k() - 1, |x| {
        if x.iter().any(|v| s.contains(v)) {
            return;
        }
        if !oracle.is_good(x, s, gp) {
            bad += 1;
        }
    });
    bad
}

// ---------------------------------------------------------------- rainbow / upper regularity

fn kuhn(adj: &[Vec<usize>], n_right: usize) -> usize {
    fn try_aug(u: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [usize]) -> bool {
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                if owner[w] == usize::MAX || try_aug(owner[w], adj, seen, owner) {
                    owner[w] = u;
                    return true;
                }
            }
        }
        false
    }
    let mut owner = vec![usize::MAX; n_right];
    let mut size = 0;
    for u in 0..adj.len() {
        let mut seen = vec![false; n_right];
        size += try_aug(u, adj, &mut seen, &mut owner) as usize;
    }
    size
}

/// k-sets whose (k-1)-subsets admit a bijection to labels 1..k with the i-th subset in E_i.
pub fn rainbow_ksets(es: &[Vec<Vec<Vertex>>], n: usize) -> BTreeSet<Vec<Vertex>> {
    let k = es.len();
    let mut out = BTreeSet::new();
    if k == 0 || es.iter().any(|e| e.is_empty()) {
        return out;
    }
    let sets: Vec<FxHashSet<Vec<Vertex>>> = es.iter().map(|e| e.iter().map(|x| sorted(x)).collect()).collect();
    let mut cands = BTreeSet::new();
    for x in &sets[0] {
        for v in 0..n as Vertex {
            if !x.contains(&v) {
                let mut q = x.clone();
                q.push(v);
                q.sort_unstable();
                cands.insert(q);
            }
        }
    }
    for q in cands {
        let faces: Vec<Vec<Vertex>> = (0..k).map(|i| q.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect()).collect();
        let adj: Vec<Vec<usize>> = sets.iter().map(|s| (0..k).filter(|&f| s.contains(&faces[f])).collect()).collect();
        if kuhn(&adj, k) == k {
            out.insert(q);
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UpperRegReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn upper_reg_check(g: &Hypergraph, p: f64, eta: f64, es: &[Vec<Vec<Vertex>>]) -> UpperRegReport {
    let ks = rainbow_ksets(es, g.n());
    let lhs = ks.iter().filter(|q| g.has_edge(q)).count() as f64;
    let rhs = p * ks.len() as f64 + p * eta * (g.n() as f64).powi(g.k() as i32);
    UpperRegReport { lhs, rhs, holds: lhs <= rhs + 1e-9 }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UpperRegSample {
    pub witnesses: usize,
    pub seed: u64,
    pub worst_margin: f64,
    pub violated: bool,
}

/// Random witness families: each E_i is all (k-1)-sets inside a random vertex subset, thinned.
pub fn upper_reg_sample(g: &Hypergraph, p: f64, eta: f64, witnesses: usize, seed: u64) -> UpperRegSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, k) = (g.n(), g.k());
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..witnesses {
        let es: Vec<Vec<Vec<Vertex>>> = (0..k)
            .map(|_| {
                let keep: Vec<Vertex> = (0..n as Vertex).filter(|_| rng.gen::<f64>() < 0.5).collect();
                let q: f64 = rng.gen_range(0.3..=1.0);
                let mut e = Vec::new();
                comb::for_each_subset_of(&keep, k - 1, |s| {
                    if rng.gen::<f64>() < q {
                        e.push(s.to_vec());
                    }
                });
                e
            })
            .collect();
        let r = upper_reg_check(g, p, eta, &es);
        worst = worst.max(r.lhs - r.rhs);
    }
    UpperRegSample { witnesses, seed, worst_margin: worst, violated: worst > 1e-9 }
}

/// Expected edge count and standard deviation for G(n,k,p).
pub fn gnp_edge_moments(n: usize, k: usize, p: f64) -> (f64, f64) {
    let m = binom(n as u64, k as u64) as f64;
    (m * p, (m * p * (1.0 - p)).sqrt())
}
