//! Rooted path enumeration, end-tuple censuses and greedy good extension.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::comb::{all_distinct, sorted};
use crate::error::{invalid, Result};
use crate::hypercore::{spike_join, windows_ok, Hypergraph, TightPath, Vertex};
use crate::randmodel::{Goodness, GoodnessParams};

pub const DEFAULT_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootedCensus {
    pub root: Vec<Vertex>,
    pub ell: usize,
    pub path_count: u64,
    pub end_tuples: BTreeSet<Vec<Vertex>>,
    /// Paths per end tuple.
    pub multiplicity: BTreeMap<Vec<Vertex>, u64>,
    /// One retained path per end tuple.
    pub witnesses: BTreeMap<Vec<Vertex>, Vec<Vertex>>,
    pub truncated: bool,
}

#[derive(Serialize)]
pub struct CensusSummary<'a> {
    pub root: &'a [Vertex],
    pub ell: usize,
    pub path_count: u64,
    pub end_tuple_count: usize,
    pub truncated: bool,
}

impl RootedCensus {
    fn new(root: &[Vertex], ell: usize) -> Self {
        RootedCensus {
            root: root.to_vec(),
            ell,
            path_count: 0,
            end_tuples: BTreeSet::new(),
            multiplicity: BTreeMap::new(),
            witnesses: BTreeMap::new(),
            truncated: false,
        }
    }

    fn record(&mut self, path: &[Vertex], k: usize) {
        let end = path[path.len() - (k - 1)..].to_vec();
        self.path_count += 1;
        *self.multiplicity.entry(end.clone()).or_default() += 1;
        self.witnesses.entry(end.clone()).or_insert_with(|| path.to_vec());
        self.end_tuples.insert(end);
    }

    pub fn summary(&self) -> CensusSummary<'_> {
        CensusSummary { root: &self.root, ell: self.ell, path_count: self.path_count, end_tuple_count: self.end_tuples.len(), truncated: self.truncated }
    }

    /// |Q| Σ m_q² ≥ P², the integer form of the averaging bound.
    pub fn jensen_holds(&self) -> bool {
        let q = self.multiplicity.len() as u128;
        let sq: u128 = self.multiplicity.values().map(|&m| (m as u128) * (m as u128)).sum();
        let p = self.path_count as u128;
        q * sq >= p * p
    }
}

fn check_root(g: &Hypergraph, x: &[Vertex]) -> Result<()> {
    if x.len() != g.k() - 1 || !all_distinct(x) || x.iter().any(|&v| v as usize >= g.n()) {
        return invalid(format!("root {x:?} is not a (k-1)-tuple of distinct vertices"));
    }
    Ok(())
}

fn rooted_paths(g: &Hypergraph, x: &[Vertex], ell: usize, forbidden: &BTreeSet<Vertex>, cap: u64, mut visit: impl FnMut(&[Vertex]) -> bool) -> bool {
    let k = g.k();
    let mut path = x.to_vec();
    let mut used = vec![false; g.n()];
    for &v in x {
        used[v as usize] = true;
    }
    let mut count = 0u64;
    fn rec(
        g: &Hypergraph,
        k: usize,
        target: usize,
        forbidden: &BTreeSet<Vertex>,
        path: &mut Vec<Vertex>,
        used: &mut [bool],
        count: &mut u64,
        cap: u64,
        visit: &mut dyn FnMut(&[Vertex]) -> bool,
    ) -> bool {
        if path.len() == target {
            *count += 1;
            visit(path);
            return *count >= cap;
        }
        let tail = path[path.len() - (k - 1)..].to_vec();
        for &v in g.completions(&tail) {
            if used[v as usize] || forbidden.contains(&v) {
                continue;
            }
            used[v as usize] = true;
            path.push(v);
            let stop = rec(g, k, target, forbidden, path, used, count, cap, visit);
            path.pop();
            used[v as usize] = false;
            if stop {
                return true;
            }
        }
        false
    }
    rec(g, k, x.len() + ell, forbidden, &mut path, &mut used, &mut count, cap, &mut visit)
}

/// All tight paths extending `x` by `ell` vertices outside `forbidden`.
pub fn rooted_census(g: &Hypergraph, x: &[Vertex], ell: usize, forbidden: &BTreeSet<Vertex>, cap: Option<u64>) -> Result<RootedCensus> {
    check_root(g, x)?;
    if ell == 0 {
        return invalid("ell must be at least 1");
    }
    let mut c = RootedCensus::new(x, ell);
    let k = g.k();
    let truncated = rooted_paths(g, x, ell, forbidden, cap.unwrap_or(u64::MAX), |p| {
        c.record(p, k);
        true
    });
    c.truncated = truncated;
    Ok(c)
}

/// Spike paths whose first spike is `x`, followed by `t` further spikes.
pub fn rooted_spike_census(g: &Hypergraph, x: &[Vertex], t: usize, forbidden: &BTreeSet<Vertex>, cap: Option<u64>) -> Result<RootedCensus> {
    check_root(g, x)?;
    let k = g.k();
    let cap = cap.unwrap_or(u64::MAX);
    let mut c = RootedCensus::new(x, t * (k - 1));
    let mut used = vec![false; g.n()];
    for &v in x {
        used[v as usize] = true;
    }
    let mut spikes: Vec<Vec<Vertex>> = vec![x.to_vec()];
    fn rec(g: &Hypergraph, k: usize, t: usize, forbidden: &BTreeSet<Vertex>, spikes: &mut Vec<Vec<Vertex>>, cur: &mut Vec<Vertex>, used: &mut [bool], c: &mut RootedCensus, cap: u64) -> bool {
        if cur.len() == k - 1 {
            spikes.push(std::mem::take(cur));
            let stop = if spikes.len() == t + 1 {
                let flat: Vec<Vertex> = spikes.concat();
                c.path_count += 1;
                let end = spikes.last().unwrap().clone();
                *c.multiplicity.entry(end.clone()).or_default() += 1;
                c.witnesses.entry(end.clone()).or_insert(flat);
                c.end_tuples.insert(end);
                c.path_count >= cap
            } else {
                rec(g, k, t, forbidden, spikes, &mut Vec::new(), used, c, cap)
            };
            *cur = spikes.pop().unwrap();
            return stop;
        }
        let prev = spikes.last().unwrap();
        // window j of rev(prev) ++ next: the last k - 1 - j entries of rev(prev), then next[..=j]
        let j = cur.len();
        let mut base: Vec<Vertex> = prev[..k - 1 - j].iter().rev().copied().collect();
        base.extend_from_slice(cur);
        for &v in g.completions(&base) {
            if used[v as usize] || forbidden.contains(&v) {
                continue;
            }
            used[v as usize] = true;
            cur.push(v);
            let stop = rec(g, k, t, forbidden, spikes, cur, used, c, cap);
            cur.pop();
            used[v as usize] = false;
            if stop {
                return true;
            }
        }
        false
    }
    if t == 0 {
        c.record(x, k);
        return Ok(c);
    }
    c.truncated = rec(g, k, t, forbidden, &mut spikes, &mut Vec::new(), &mut used, &mut c, cap);
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DlCensus {
    pub ell: usize,
    /// counts[j]: unordered pairs of distinct paths with a common end tuple sharing j internal vertices.
    pub counts: Vec<u64>,
    pub path_count: u64,
    pub end_tuple_count: usize,
    pub jensen_holds: bool,
    pub truncated: bool,
}

pub fn dl_census(g: &Hypergraph, x: &[Vertex], ell: usize, cap: Option<u64>) -> Result<DlCensus> {
    let k = g.k();
    if ell < k {
        return invalid(format!("ell = {ell} must exceed k-1 = {}", k - 1));
    }
    check_root(g, x)?;
    let mut by_end: BTreeMap<Vec<Vertex>, Vec<Vec<Vertex>>> = BTreeMap::new();
    let root_len = x.len();
    let truncated = rooted_paths(g, x, ell, &BTreeSet::new(), cap.unwrap_or(DEFAULT_CAP), |p| {
        let end = p[p.len() - (k - 1)..].to_vec();
        let internal = sorted(&p[root_len..p.len() - (k - 1)]);
        by_end.entry(end).or_default().push(internal);
        true
    });
    let inner = ell - (k - 1);
    let mut counts = vec![0u64; inner + 1];
    let mut census = RootedCensus::new(x, ell);
    for (end, paths) in &by_end {
        census.multiplicity.insert(end.clone(), paths.len() as u64);
        census.path_count += paths.len() as u64;
        for i in 0..paths.len() {
            for j in i + 1..paths.len() {
                let shared = paths[i].iter().filter(|v| paths[j].binary_search(v).is_ok()).count();
                counts[shared] += 1;
            }
        }
    }
    Ok(DlCensus {
        ell,
        counts,
        path_count: census.path_count,
        end_tuple_count: by_end.len(),
        jensen_holds: census.jensen_holds(),
        truncated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BranchPolicy {
    Exhaustive { cap: u64 },
    /// Keep at most `width` random admissible choices per step.
    Sample { width: usize, seed: u64, cap: u64 },
}

/// Chooses x_k, ..., x_{ℓ+k-1} one by one; every intermediate window must stay good for S at the remaining depth.
pub fn greedy_good_extension(
    g: &Hypergraph,
    x: &[Vertex],
    ell: usize,
    s: &BTreeSet<Vertex>,
    s_prime: &BTreeSet<Vertex>,
    gp: GoodnessParams,
    policy: BranchPolicy,
) -> Result<Vec<TightPath>> {
    check_root(g, x)?;
    let k = g.k();
    let mut good = Goodness::new(g);
    let mut out = Vec::new();
    let (cap, mut rng, width) = match policy {
        BranchPolicy::Exhaustive { cap } => (cap, None, usize::MAX),
        BranchPolicy::Sample { width, seed, cap } => (cap, Some(ChaCha8Rng::seed_from_u64(seed)), width),
    };
    let mut path = x.to_vec();
    fn rec(
        g: &Hypergraph,
        k: usize,
        ell: usize,
        s: &BTreeSet<Vertex>,
        s_prime: &BTreeSet<Vertex>,
        gp: GoodnessParams,
        good: &mut Goodness<'_>,
        path: &mut Vec<Vertex>,
        out: &mut Vec<TightPath>,
        cap: u64,
        rng: &mut Option<ChaCha8Rng>,
        width: usize,
    ) {
        let step = path.len() - (k - 1) + 1; // 1-based index of the vertex being chosen
        if step > ell {
            out.push(TightPath::new(path.clone()));
            return;
        }
        let tail = path[path.len() - (k - 1)..].to_vec();
        let mut cands: Vec<Vertex> = g
            .completions(&tail)
            .iter()
            .copied()
            .filter(|v| !s.contains(v) && !s_prime.contains(v) && !path.contains(v))
            .filter(|&v| {
                if step == ell {
                    return true;
                }
                let mut w = tail[1..].to_vec();
                w.push(v);
                good.is_good(&w, s, GoodnessParams { ell: ell - step, ..gp })
            })
            .collect();
        if let Some(r) = rng.as_mut() {
            cands.shuffle(r);
            cands.truncate(width);
        }
        for v in cands {
            if out.len() as u64 >= cap {
                return;
            }
            path.push(v);
            rec(g, k, ell, s, s_prime, gp, good, path, out, cap, rng, width);
            path.pop();
        }
    }
    rec(g, k, ell, s, s_prime, gp, &mut good, &mut path, &mut out, cap, &mut rng, width);
    debug_assert!(out.iter().all(|p| windows_ok(g, &p.seq)));
    Ok(out)
}

/// Brute-force check that a flattened spike sequence satisfies every pair condition.
pub fn spikes_ok(g: &Hypergraph, spikes: &[Vec<Vertex>]) -> bool {
    spikes.windows(2).all(|w| windows_ok(g, &spike_join(&w[0], &w[1])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k5_single_step() {
        let g = Hypergraph::complete(3, 5);
        let c = rooted_census(&g, &[1, 2], 1, &BTreeSet::new(), None).unwrap();
        assert_eq!(c.path_count, 3);
        assert_eq!(c.end_tuples.len(), 3);
        assert!(c.end_tuples.contains(&vec![2, 0]));
        assert!(c.jensen_holds());
    }

    #[test]
    fn spike_census_k5() {
        let g = Hypergraph::complete(3, 5);
        let c = rooted_spike_census(&g, &[0, 1], 1, &BTreeSet::new(), None).unwrap();
        // ordered disjoint pairs from the other three vertices
        assert_eq!(c.path_count, 6);
        for w in c.witnesses.values() {
            assert!(spikes_ok(&g, &[w[..2].to_vec(), w[2..].to_vec()]));
        }
        let e = Hypergraph::empty(3, 5);
        assert_eq!(rooted_spike_census(&e, &[0, 1], 2, &BTreeSet::new(), None).unwrap().path_count, 0);
    }

    #[test]
    fn dl_single_path_and_planted_pair() {
        let path = Hypergraph::new(3, 6, vec![vec![0, 1, 2], vec![1, 2, 3], vec![2, 3, 4], vec![3, 4, 5]]).unwrap();
        let d = dl_census(&path, &[0, 1], 4, None).unwrap();
        assert!(d.counts.iter().all(|&c| c == 0));
        let planted = Hypergraph::new(3, 7, vec![vec![0, 1, 2], vec![1, 2, 5], vec![2, 5, 6], vec![0, 1, 3], vec![1, 3, 5], vec![3, 5, 6]]).unwrap();
        let d = dl_census(&planted, &[0, 1], 3, None).unwrap();
        assert_eq!(d.counts, vec![1, 0]);
        assert!(dl_census(&planted, &[0, 1], 2, None).is_err());
    }

    #[test]
    fn greedy_complete_falling_factorial() {
        let g = Hypergraph::complete(3, 7);
        let gp = GoodnessParams { eps: 0.5, p: 1.0, ell: 3 };
        let paths = greedy_good_extension(&g, &[0, 1], 3, &BTreeSet::new(), &BTreeSet::new(), gp, BranchPolicy::Exhaustive { cap: u64::MAX }).unwrap();
        assert_eq!(paths.len(), 5 * 4 * 3);
        let s: BTreeSet<u32> = (2..7).collect();
        let none = greedy_good_extension(&g, &[0, 1], 3, &s, &BTreeSet::new(), gp, BranchPolicy::Exhaustive { cap: u64::MAX }).unwrap();
        assert!(none.is_empty());
    }
}
