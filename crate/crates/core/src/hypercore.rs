//! k-uniform hypergraphs with a codegree index, plus validators for the
//! ordered structures built on top of them.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::comb::{self, binom, sorted};
use crate::error::{invalid, Result, TrlError};
use crate::regcomplex::Multicomplex;

pub type Vertex = u32;

/// Largest uniformity supported by the stack buffers used in edge tests.
pub const MAX_K: usize = 16;

#[derive(Debug, Clone)]
struct Slot {
    completions: Vec<Vertex>,
    bits: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct Hypergraph {
    k: usize,
    n: usize,
    edges: Vec<Vec<Vertex>>,
    index: FxHashMap<Vec<Vertex>, usize>,
    slots: Vec<Slot>,
}

impl PartialEq for Hypergraph {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k && self.n == other.n && self.edges == other.edges
    }
}
impl Eq for Hypergraph {}

impl Hypergraph {
    /// Builds from arbitrary-order edges; duplicates collapse, bad edges are rejected.
    pub fn new(k: usize, n: usize, edges: impl IntoIterator<Item = Vec<Vertex>>) -> Result<Self> {
        if !(2..=MAX_K).contains(&k) {
            return invalid(format!("uniformity {k} outside 2..={MAX_K}"));
        }
        let mut list = Vec::new();
        for e in edges {
            let s = sorted(&e);
            if s.len() != k {
                return invalid(format!("edge {e:?} has {} vertices, expected {k}", s.len()));
            }
            if s.windows(2).any(|w| w[0] == w[1]) {
                return invalid(format!("edge {e:?} repeats a vertex"));
            }
            if s[k - 1] as usize >= n {
                return invalid(format!("edge {e:?} out of range for n={n}"));
            }
            list.push(s);
        }
        list.sort_unstable();
        list.dedup();
        Ok(Self::from_sorted_unchecked(k, n, list))
    }

    fn from_sorted_unchecked(k: usize, n: usize, edges: Vec<Vec<Vertex>>) -> Self {
        let words = n.div_ceil(64).max(1);
        let mut index: FxHashMap<Vec<Vertex>, usize> = FxHashMap::default();
        let mut slots: Vec<Slot> = Vec::new();
        let mut key = Vec::with_capacity(k - 1);
        for e in &edges {
            for skip in 0..k {
                key.clear();
                key.extend(e.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v));
                let id = match index.get(key.as_slice()) {
                    Some(&id) => id,
                    None => {
                        slots.push(Slot { completions: Vec::new(), bits: vec![0; words] });
                        index.insert(key.clone(), slots.len() - 1);
                        slots.len() - 1
                    }
                };
                let v = e[skip];
                slots[id].completions.push(v);
                slots[id].bits[v as usize / 64] |= 1 << (v % 64);
            }
        }
        for s in &mut slots {
            s.completions.sort_unstable();
        }
        Hypergraph { k, n, edges, index, slots }
    }

    pub fn empty(k: usize, n: usize) -> Self {
        Self::new(k, n, Vec::new()).expect("valid uniformity")
    }

    pub fn complete(k: usize, n: usize) -> Self {
        let mut edges = Vec::new();
        comb::for_each_subset_of(&(0..n as u32).collect::<Vec<_>>(), k, |s| edges.push(s.to_vec()));
        Self::from_sorted_unchecked(k, n, edges)
    }

    pub fn k(&self) -> usize {
        self.k
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn edges(&self) -> &[Vec<Vertex>] {
        &self.edges
    }
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    fn slot(&self, set: &[Vertex]) -> Option<&Slot> {
        if set.len() + 1 != self.k {
            return None;
        }
        let mut buf = [0u32; MAX_K];
        let b = &mut buf[..set.len()];
        b.copy_from_slice(set);
        b.sort_unstable();
        self.index.get(&b[..]).map(|&i| &self.slots[i])
    }

    /// Vertices completing the (k-1)-set `x` (any order) to an edge, ascending.
    pub fn completions(&self, x: &[Vertex]) -> &[Vertex] {
        self.slot(x).map(|s| s.completions.as_slice()).unwrap_or(&[])
    }

    pub fn codegree(&self, x: &[Vertex]) -> usize {
        self.completions(x).len()
    }

    /// Edge test for a k-set given in any order.
    pub fn has_edge(&self, e: &[Vertex]) -> bool {
        if e.len() != self.k {
            return false;
        }
        let mut buf = [0u32; MAX_K];
        let b = &mut buf[..self.k];
        b.copy_from_slice(e);
        b.sort_unstable();
        let last = b[self.k - 1];
        if last as usize >= self.n {
            return false;
        }
        match self.index.get(&b[..self.k - 1]) {
            Some(&i) => self.slots[i].bits[last as usize / 64] >> (last % 64) & 1 == 1,
            None => false,
        }
    }

    /// Edge test for `x ∪ {v}` where `x` is a (k-1)-window in any order.
    pub fn extends(&self, x: &[Vertex], v: Vertex) -> bool {
        match self.slot(x) {
            Some(s) => (v as usize) < self.n && s.bits[v as usize / 64] >> (v % 64) & 1 == 1,
            None => false,
        }
    }

    pub fn min_codegree(&self) -> usize {
        let total = binom(self.n as u64, self.k as u64 - 1);
        if (self.index.len() as u128) < total {
            return 0;
        }
        self.slots.iter().map(|s| s.completions.len()).min().unwrap_or(0)
    }

    /// Subgraph keeping the edges accepted by `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&[Vertex]) -> bool) -> Hypergraph {
        let edges = self.edges.iter().filter(|e| keep(e)).cloned().collect();
        Self::from_sorted_unchecked(self.k, self.n, edges)
    }

    pub fn with_edges_removed(&self, drop: &FxHashSet<Vec<Vertex>>) -> Hypergraph {
        self.filter(|e| !drop.contains(e))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {}", self.k, self.n, self.edges.len());
        for e in &self.edges {
            let parts: Vec<String> = e.iter().map(|v| v.to_string()).collect();
            s.push_str(&parts.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or(TrlError::Parse { line: 1, msg: "missing header".into() })?;
        let head: Vec<usize> = parse_ints(header, hl + 1)?;
        if head.len() != 3 {
            return Err(TrlError::Parse { line: hl + 1, msg: "header must be \"k n m\"".into() });
        }
        let (k, n, m) = (head[0], head[1], head[2]);
        if !(2..=MAX_K).contains(&k) {
            return Err(TrlError::Parse { line: hl + 1, msg: format!("unsupported k={k}") });
        }
        let mut edges: Vec<Vec<Vertex>> = Vec::with_capacity(m);
        let mut seen: FxHashSet<Vec<Vertex>> = FxHashSet::default();
        for (i, line) in lines {
            let ln = i + 1;
            let e: Vec<usize> = parse_ints(line, ln)?;
            if e.len() != k {
                return Err(TrlError::Parse { line: ln, msg: format!("expected {k} vertices, got {}", e.len()) });
            }
            if e.windows(2).any(|w| w[0] >= w[1]) {
                return Err(TrlError::Parse { line: ln, msg: "vertices must be strictly ascending".into() });
            }
            if e[k - 1] >= n {
                return Err(TrlError::Parse { line: ln, msg: format!("vertex {} out of range (n={n})", e[k - 1]) });
            }
            let e: Vec<Vertex> = e.into_iter().map(|v| v as Vertex).collect();
            if !seen.insert(e.clone()) {
                return Err(TrlError::Parse { line: ln, msg: format!("duplicate edge {e:?}") });
            }
            edges.push(e);
        }
        if edges.len() != m {
            return Err(TrlError::Parse { line: hl + 1, msg: format!("header promises {m} edges, found {}", edges.len()) });
        }
        edges.sort_unstable();
        Ok(Self::from_sorted_unchecked(k, n, edges))
    }
}

fn parse_ints(line: &str, ln: usize) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| TrlError::Parse { line: ln, msg: format!("bad integer {t:?}") }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TightPath {
    pub seq: Vec<Vertex>,
}

impl TightPath {
    pub fn new(seq: Vec<Vertex>) -> Self {
        TightPath { seq }
    }
    pub fn start(&self, k: usize) -> &[Vertex] {
        &self.seq[..k - 1]
    }
    pub fn end(&self, k: usize) -> &[Vertex] {
        &self.seq[self.seq.len() + 1 - k..]
    }
    pub fn reversed(&self) -> TightPath {
        let mut s = self.seq.clone();
        s.reverse();
        TightPath { seq: s }
    }
    pub fn len(&self) -> usize {
        self.seq.len()
    }
    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TightCycle {
    pub cyc: Vec<Vertex>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpikePath {
    pub spikes: Vec<Vec<Vertex>>,
}

impl SpikePath {
    /// The k-sets the definition requires, in order.
    pub fn required_edges(&self) -> Vec<Vec<Vertex>> {
        let mut out = Vec::new();
        for pair in self.spikes.windows(2) {
            let seq = spike_join(&pair[0], &pair[1]);
            let k = pair[0].len() + 1;
            for w in seq.windows(k) {
                out.push(w.to_vec());
            }
        }
        out
    }
}

/// `rev(a) ++ b`: the tight sequence between two consecutive spikes.
pub fn spike_join(a: &[Vertex], b: &[Vertex]) -> Vec<Vertex> {
    a.iter().rev().chain(b.iter()).copied().collect()
}

fn check_range(g: &Hypergraph, seq: &[Vertex]) -> Result<()> {
    if let Some(v) = seq.iter().find(|&&v| v as usize >= g.n) {
        return invalid(format!("vertex {v} out of range"));
    }
    Ok(())
}

/// Window check without the distinctness/length preconditions.
pub fn windows_ok(g: &Hypergraph, seq: &[Vertex]) -> bool {
    seq.len() < g.k || seq.windows(g.k).all(|w| g.has_edge(w))
}

pub fn is_tight_path(g: &Hypergraph, seq: &[Vertex]) -> Result<bool> {
    if seq.len() + 1 < g.k {
        return invalid(format!("sequence of length {} shorter than k-1", seq.len()));
    }
    check_range(g, seq)?;
    if !comb::all_distinct(seq) {
        return invalid("tight path repeats a vertex");
    }
    Ok(windows_ok(g, seq))
}

pub fn is_tight_cycle(g: &Hypergraph, cyc: &[Vertex]) -> Result<bool> {
    if g.n <= g.k {
        return Err(TrlError::Degenerate(format!("n={} <= k={}", g.n, g.k)));
    }
    check_range(g, cyc)?;
    if cyc.len() != g.n || !comb::all_distinct(cyc) {
        return invalid("cycle is not a permutation of the vertex set");
    }
    Ok(cyclic_windows_ok(g, cyc))
}

pub(crate) fn cyclic_windows_ok(g: &Hypergraph, cyc: &[Vertex]) -> bool {
    let n = cyc.len();
    let mut w = vec![0; g.k];
    (0..n).all(|i| {
        for (j, slot) in w.iter_mut().enumerate() {
            *slot = cyc[(i + j) % n];
        }
        g.has_edge(&w)
    })
}

pub fn is_spike_path(g: &Hypergraph, spikes: &[Vec<Vertex>]) -> Result<bool> {
    let mut all = Vec::new();
    for s in spikes {
        if s.len() + 1 != g.k {
            return invalid(format!("spike {s:?} is not a (k-1)-tuple"));
        }
        all.extend_from_slice(s);
    }
    check_range(g, &all)?;
    if !comb::all_distinct(&all) {
        return invalid("spikes overlap");
    }
    let sp = SpikePath { spikes: spikes.to_vec() };
    Ok(sp.required_edges().iter().all(|e| g.has_edge(e)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbsorberGadget {
    pub u: Vertex,
    pub path_with: TightPath,
    pub path_without: TightPath,
}

impl AbsorberGadget {
    pub fn ends(&self, k: usize) -> (Vec<Vertex>, Vec<Vertex>) {
        (self.path_with.start(k).to_vec(), self.path_with.end(k).to_vec())
    }

    pub fn validate(&self, g: &Hypergraph) -> bool {
        let k = g.k;
        let (a, b) = (&self.path_with, &self.path_without);
        if a.len() < 2 * (k - 1) || b.len() + 1 != a.len() {
            return false;
        }
        let ok = |s: &[Vertex]| is_tight_path(g, s).unwrap_or(false);
        if !ok(&a.seq) || !ok(&b.seq) {
            return false;
        }
        let mut va = a.seq.clone();
        va.retain(|&x| x != self.u);
        let mut vb = b.seq.clone();
        va.sort_unstable();
        vb.sort_unstable();
        va == vb && a.seq.contains(&self.u) && a.start(k) == b.start(k) && a.end(k) == b.end(k)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReservoirPath {
    pub base: TightPath,
    pub reservoir: Vec<Vertex>,
    pub ends: (Vec<Vertex>, Vec<Vertex>),
    #[serde(default)]
    pub skip_witnesses: BTreeMap<Vec<Vertex>, Vec<Vertex>>,
}

impl ReservoirPath {
    pub fn new(k: usize, base: TightPath, mut reservoir: Vec<Vertex>) -> Result<Self> {
        if base.len() + 1 < k {
            return invalid("reservoir base shorter than k-1");
        }
        reservoir.sort_unstable();
        reservoir.dedup();
        let start = base.start(k).to_vec();
        let end = base.end(k).to_vec();
        for r in &reservoir {
            if !base.seq.contains(r) {
                return invalid(format!("reservoir vertex {r} not on the base path"));
            }
            if start.contains(r) || end.contains(r) {
                return invalid(format!("reservoir vertex {r} lies in an end tuple"));
            }
        }
        Ok(ReservoirPath { base, reservoir, ends: (start, end), skip_witnesses: BTreeMap::new() })
    }

    /// A tight path on `V(base) \ skip` with the base's end tuples, if one is found.
    pub fn skip_path(&self, g: &Hypergraph, skip: &[Vertex], budget: u64) -> SkipSearch {
        skip_search(g, &self.base.seq, skip, budget)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkipSearch {
    Found(Vec<Vertex>),
    Absent,
    Inconclusive,
}

fn skip_search(g: &Hypergraph, base: &[Vertex], skip: &[Vertex], budget: u64) -> SkipSearch {
    let k = g.k;
    let kept: Vec<Vertex> = base.iter().copied().filter(|v| !skip.contains(v)).collect();
    if windows_ok(g, &kept) {
        return SkipSearch::Found(kept);
    }
    let start = &base[..k - 1];
    let end = &base[base.len() + 1 - k..];
    if base.len() < 2 * (k - 1) {
        return SkipSearch::Absent;
    }
    // DFS over the kept vertex set; candidates tried in base order so the
    // natural skip witness is the first branch explored.
    let pos: FxHashMap<Vertex, usize> = kept.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut used = vec![false; kept.len()];
    let mut seq: Vec<Vertex> = start.to_vec();
    for v in start {
        used[pos[v]] = true;
    }
    let interior: Vec<Vertex> = kept.iter().copied().filter(|v| !start.contains(v) && !end.contains(v)).collect();
    let mut nodes = 0u64;
    fn rec(
        g: &Hypergraph,
        seq: &mut Vec<Vertex>,
        used: &mut [bool],
        pos: &FxHashMap<Vertex, usize>,
        interior: &[Vertex],
        placed: usize,
        end: &[Vertex],
        nodes: &mut u64,
        budget: u64,
    ) -> Option<bool> {
        *nodes += 1;
        if *nodes > budget {
            return None;
        }
        let k = g.k;
        if placed == interior.len() {
            let l = seq.len();
            seq.extend_from_slice(end);
            let ok = seq[l + 1 - k..].windows(k).all(|w| g.has_edge(w));
            if !ok {
                seq.truncate(l);
            }
            return Some(ok);
        }
        for &v in interior {
            let i = pos[&v];
            if used[i] || !g.extends(&seq[seq.len() + 1 - k..], v) {
                continue;
            }
            used[i] = true;
            seq.push(v);
            match rec(g, seq, used, pos, interior, placed + 1, end, nodes, budget) {
                Some(true) => return Some(true),
                None => return None,
                Some(false) => {}
            }
            seq.pop();
            used[i] = false;
        }
        Some(false)
    }
    match rec(g, &mut seq, &mut used, &pos, &interior, 0, end, &mut nodes, budget) {
        Some(true) => SkipSearch::Found(seq),
        Some(false) => SkipSearch::Absent,
        None => SkipSearch::Inconclusive,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReservoirMode {
    Exhaustive,
    Sampled { n: usize, seed: u64 },
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ReservoirReport {
    pub ok: bool,
    pub subsets_checked: usize,
    pub witnesses: Vec<(Vec<Vertex>, Vec<Vertex>)>,
    pub failures: Vec<Vec<Vertex>>,
    pub inconclusive: Vec<Vec<Vertex>>,
}

pub const DEFAULT_EXHAUSTIVE_CAP: usize = 16;
pub const DEFAULT_SKIP_BUDGET: u64 = 2_000_000;

pub fn verify_reservoir(g: &Hypergraph, p: &ReservoirPath, mode: ReservoirMode, cap: usize) -> Result<ReservoirReport> {
    if !is_tight_path(g, &p.base.seq)? {
        return Ok(ReservoirReport { ok: false, ..Default::default() });
    }
    let r = &p.reservoir;
    let subsets: Vec<Vec<Vertex>> = match mode {
        ReservoirMode::Exhaustive => {
            if r.len() > cap {
                return Err(TrlError::Cap(format!("|R|={} exceeds exhaustive cap {cap}", r.len())));
            }
            (0u64..1 << r.len())
                .map(|mask| r.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &v)| v).collect())
                .collect()
        }
        ReservoirMode::Sampled { n, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| r.iter().copied().filter(|_| rng.gen::<bool>()).collect()).collect()
        }
    };
    let mut rep = ReservoirReport { ok: true, ..Default::default() };
    for sub in subsets {
        rep.subsets_checked += 1;
        let hit = p.skip_witnesses.get(&sub).filter(|w| witness_ok(g, p, &sub, w)).cloned();
        let res = match hit {
            Some(w) => SkipSearch::Found(w),
            None => p.skip_path(g, &sub, DEFAULT_SKIP_BUDGET),
        };
        match res {
            SkipSearch::Found(w) => rep.witnesses.push((sub, w)),
            SkipSearch::Absent => {
                rep.ok = false;
                rep.failures.push(sub);
            }
            SkipSearch::Inconclusive => {
                rep.ok = false;
                rep.inconclusive.push(sub);
            }
        }
    }
    Ok(rep)
}

fn witness_ok(g: &Hypergraph, p: &ReservoirPath, sub: &[Vertex], w: &[Vertex]) -> bool {
    let k = g.k;
    let mut want: Vec<Vertex> = p.base.seq.iter().copied().filter(|v| !sub.contains(v)).collect();
    want.sort_unstable();
    is_tight_path(g, w).unwrap_or(false)
        && sorted(w) == want
        && w[..k - 1] == p.ends.0[..]
        && w[w.len() + 1 - k..] == p.ends.1[..]
}

/// An ordered (k-1)-edge of a multicomplex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderedEdge {
    pub id: usize,
    pub order: Vec<Vertex>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TightLink {
    pub u: OrderedEdge,
    pub v: OrderedEdge,
    pub w: Vec<Vertex>,
    pub e_u: Vec<usize>,
    pub e_v: Vec<usize>,
}

fn side_set(t: &[Vertex], w: &[Vertex], j: usize) -> Vec<Vertex> {
    // vertices of e_{j,·}: t_j..t_{k-1} together with w_1..w_j (1-based j)
    sorted(&t[j - 1..].iter().chain(&w[..j]).copied().collect::<Vec<_>>())
}

fn boundaries_meet(m: &Multicomplex, a: usize, b: usize) -> bool {
    let (ba, bb) = (&m.edge(a).boundary, &m.edge(b).boundary);
    ba.iter().any(|x| bb.contains(x))
}

pub fn validate_link(m: &Multicomplex, l: &TightLink) -> bool {
    let k = m.k();
    if k < 2 || l.w.len() != k - 1 || l.e_u.len() != k - 1 || l.e_v.len() != k - 1 {
        return false;
    }
    let ordered_ok = |o: &OrderedEdge| {
        m.get(o.id).is_some_and(|e| e.vertices.len() == k - 1 && sorted(&o.order) == e.vertices)
    };
    if !ordered_ok(&l.u) || !ordered_ok(&l.v) {
        return false;
    }
    for (t, es, root) in [(&l.u.order, &l.e_u, l.u.id), (&l.v.order, &l.e_v, l.v.id)] {
        for j in 1..k {
            let Some(e) = m.get(es[j - 1]) else { return false };
            if e.vertices.len() != k || e.vertices != side_set(t, &l.w, j) {
                return false;
            }
            if j == 1 && !e.boundary.contains(&root) {
                return false;
            }
            if j > 1 && !boundaries_meet(m, es[j - 2], es[j - 1]) {
                return false;
            }
        }
    }
    boundaries_meet(m, l.e_u[k - 2], l.e_v[k - 2])
}

/// Exhaustive lexicographic backtracking over w_1..w_{k-1} and the supporting edges.
pub fn find_tight_link(m: &Multicomplex, u: &OrderedEdge, v: &OrderedEdge) -> Option<TightLink> {
    let k = m.k();
    if k < 2 {
        return None;
    }
    let verts = m.vertex_list();
    let mut link = TightLink { u: u.clone(), v: v.clone(), w: Vec::new(), e_u: Vec::new(), e_v: Vec::new() };
    fn rec(m: &Multicomplex, verts: &[Vertex], l: &mut TightLink, k: usize) -> bool {
        let j = l.w.len() + 1;
        if j == k {
            return boundaries_meet(m, l.e_u[k - 2], l.e_v[k - 2]);
        }
        for &wj in verts {
            l.w.push(wj);
            let su = side_set(&l.u.order, &l.w, j);
            let sv = side_set(&l.v.order, &l.w, j);
            let distinct = su.windows(2).all(|p| p[0] != p[1]) && sv.windows(2).all(|p| p[0] != p[1]);
            if distinct {
                for &a in m.ids_on(&su) {
                    let ok_a = if j == 1 { m.edge(a).boundary.contains(&l.u.id) } else { boundaries_meet(m, l.e_u[j - 2], a) };
                    if !ok_a {
                        continue;
                    }
                    for &b in m.ids_on(&sv) {
                        let ok_b = if j == 1 { m.edge(b).boundary.contains(&l.v.id) } else { boundaries_meet(m, l.e_v[j - 2], b) };
                        if !ok_b {
                            continue;
                        }
                        l.e_u.push(a);
                        l.e_v.push(b);
                        if rec(m, verts, l, k) {
                            return true;
                        }
                        l.e_u.pop();
                        l.e_v.pop();
                    }
                }
            }
            l.w.pop();
        }
        false
    }
    let ok_end = |o: &OrderedEdge| m.get(o.id).is_some_and(|e| e.vertices.len() == k - 1 && sorted(&o.order) == e.vertices);
    if !ok_end(u) || !ok_end(v) {
        return None;
    }
    if rec(m, &verts, &mut link, k) {
        Some(link)
    } else {
        None
    }
}

pub fn is_tightly_linked(m: &Multicomplex) -> bool {
    let k = m.k();
    if k < 2 {
        return false;
    }
    let tops: Vec<OrderedEdge> = m
        .ids_of_size(k - 1)
        .into_iter()
        .flat_map(|id| comb::permutations(&m.edge(id).vertices).into_iter().map(move |order| OrderedEdge { id, order }))
        .collect();
    if tops.is_empty() {
        return false;
    }
    tops.iter().all(|a| tops.iter().all(|b| find_tight_link(m, a, b).is_some()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comb::for_each_subset_of;

    fn g_from(k: usize, n: usize, edges: &[&[u32]]) -> Hypergraph {
        Hypergraph::new(k, n, edges.iter().map(|e| e.to_vec())).unwrap()
    }

    #[test]
    fn complete_codegree() {
        assert_eq!(Hypergraph::complete(3, 4).min_codegree(), 2);
        assert_eq!(Hypergraph::complete(3, 5).min_codegree(), 3);
        assert_eq!(Hypergraph::empty(3, 5).min_codegree(), 0);
    }

    #[test]
    fn index_agrees_with_edges() {
        let g = g_from(3, 6, &[&[0, 1, 2], &[2, 1, 5], &[3, 4, 5], &[0, 1, 2]]);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.completions(&[1, 2]), &[0, 5]);
        assert_eq!(g.completions(&[2, 1]), &[0, 5]);
        assert!(g.has_edge(&[5, 2, 1]));
        assert!(!g.has_edge(&[0, 1, 3]));
        assert!(g.extends(&[4, 3], 5));
        assert_eq!(g.min_codegree(), 0);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Hypergraph::new(3, 4, vec![vec![0, 1, 4]]).is_err());
        assert!(Hypergraph::new(3, 4, vec![vec![0, 1, 1]]).is_err());
        assert!(Hypergraph::new(3, 4, vec![vec![0, 1]]).is_err());
    }

    #[test]
    fn text_round_trip_and_diagnostics() {
        let g = g_from(3, 5, &[&[0, 1, 2], &[1, 3, 4]]);
        let t = g.to_text();
        assert_eq!(Hypergraph::from_text(&t).unwrap(), g);
        let bad = "3 5 2\n0 1 2\n0 1 2\n";
        assert!(matches!(Hypergraph::from_text(bad), Err(TrlError::Parse { line: 3, .. })));
        let bad = "3 5 1\n0 2 1\n";
        assert!(matches!(Hypergraph::from_text(bad), Err(TrlError::Parse { line: 2, .. })));
        let bad = "3 5 1\n0 2 5\n";
        assert!(matches!(Hypergraph::from_text(bad), Err(TrlError::Parse { line: 2, .. })));
    }

    #[test]
    fn tight_path_examples() {
        let k5 = Hypergraph::complete(3, 6);
        assert!(is_tight_path(&k5, &[1, 2, 3, 4, 5]).unwrap());
        let g = k5.filter(|e| e != [2, 3, 4]);
        assert!(!is_tight_path(&g, &[1, 2, 3, 4, 5]).unwrap());
        assert!(is_tight_path(&g, &[0, 1, 2]).unwrap());
        assert!(is_tight_path(&g, &[4, 0]).unwrap());
        assert!(is_tight_path(&g, &[1, 2, 1]).is_err());
    }

    #[test]
    fn cycle_examples() {
        let k6 = Hypergraph::complete(3, 6);
        assert!(is_tight_cycle(&k6, &[0, 1, 2, 3, 4, 5]).unwrap());
        assert!(!is_tight_cycle(&Hypergraph::empty(3, 6), &[0, 1, 2, 3, 4, 5]).unwrap());
        assert!(matches!(is_tight_cycle(&Hypergraph::complete(3, 3), &[0, 1, 2]), Err(TrlError::Degenerate(_))));
        assert!(is_tight_cycle(&k6, &[0, 1, 2, 3, 4]).is_err());
    }

    #[test]
    fn spike_examples() {
        // a = (0,1), b = (2,3): needs {1,0,2} and {0,2,3}
        let g = g_from(3, 4, &[&[0, 1, 2], &[0, 2, 3]]);
        assert!(is_spike_path(&g, &[vec![0, 1], vec![2, 3]]).unwrap());
        assert!(is_spike_path(&g, &[vec![3, 1]]).unwrap());
        let h = g.filter(|e| e != [0, 2, 3]);
        assert!(!is_spike_path(&h, &[vec![0, 1], vec![2, 3]]).unwrap());
        assert!(is_spike_path(&g, &[vec![0, 1], vec![1, 3]]).is_err());
    }

    fn direct_absorber_graph() -> (Hypergraph, Vec<u32>) {
        // a b u c d with u central; skip windows a b c, b c d
        let seq = vec![0, 1, 2, 3, 4];
        let mut edges: Vec<Vec<u32>> = seq.windows(3).map(|w| w.to_vec()).collect();
        edges.push(vec![0, 1, 3]);
        edges.push(vec![1, 3, 4]);
        (Hypergraph::new(3, 5, edges).unwrap(), seq)
    }

    #[test]
    fn reservoir_single_absorber() {
        let (g, seq) = direct_absorber_graph();
        let p = ReservoirPath::new(3, TightPath::new(seq.clone()), vec![2]).unwrap();
        let rep = verify_reservoir(&g, &p, ReservoirMode::Exhaustive, 16).unwrap();
        assert!(rep.ok);
        assert_eq!(rep.witnesses.len(), 2);
        let empty = ReservoirPath::new(3, TightPath::new(seq), vec![]).unwrap();
        assert!(verify_reservoir(&g, &empty, ReservoirMode::Exhaustive, 16).unwrap().ok);
        // dropping a skip window breaks it
        let h = g.filter(|e| e != [1, 3, 4]);
        let rep = verify_reservoir(&h, &p, ReservoirMode::Exhaustive, 16).unwrap();
        assert!(!rep.ok);
        assert_eq!(rep.failures, vec![vec![2]]);
    }

    #[test]
    fn reservoir_cap_refuses() {
        let g = Hypergraph::complete(3, 24);
        let seq: Vec<u32> = (0..24).collect();
        let p = ReservoirPath::new(3, TightPath::new(seq), (2..20).collect()).unwrap();
        assert!(matches!(verify_reservoir(&g, &p, ReservoirMode::Exhaustive, 16), Err(TrlError::Cap(_))));
        let rep = verify_reservoir(&g, &p, ReservoirMode::Sampled { n: 5, seed: 3 }, 16).unwrap();
        assert!(rep.ok);
        assert_eq!(rep.subsets_checked, 5);
    }

    #[test]
    fn search_finds_non_deletion_witness() {
        // skipping 2 in 0 1 2 3 4 5 6 forces the reordering 0 1 4 3 5 6
        let base = vec![0, 1, 2, 3, 4, 5, 6];
        let mut edges: Vec<Vec<u32>> = base.windows(3).map(|w| w.to_vec()).collect();
        edges.extend([vec![0, 1, 4], vec![1, 3, 4], vec![3, 5, 6]]);
        let g = Hypergraph::new(3, 7, edges).unwrap();
        let p = ReservoirPath::new(3, TightPath::new(base), vec![2]).unwrap();
        let rep = verify_reservoir(&g, &p, ReservoirMode::Exhaustive, 16).unwrap();
        assert!(rep.ok);
        assert_eq!(rep.witnesses[1].1, vec![0, 1, 4, 3, 5, 6]);
        let h = g.filter(|e| e != [3, 5, 6]);
        let rep = verify_reservoir(&h, &p, ReservoirMode::Exhaustive, 16).unwrap();
        assert_eq!(rep.failures, vec![vec![2]]);
    }

    #[test]
    fn link_in_complete_multicomplex() {
        let k = 3;
        let verts: Vec<u32> = (0..3 * (k as u32 - 1) + 1).collect();
        let m = Multicomplex::complete(k, &verts);
        let ids = m.ids_of_size(k - 1);
        let u = OrderedEdge { id: ids[0], order: m.edge(ids[0]).vertices.clone() };
        let v = OrderedEdge { id: ids[ids.len() - 1], order: m.edge(ids[ids.len() - 1]).vertices.clone() };
        let l = find_tight_link(&m, &u, &v).unwrap();
        assert!(validate_link(&m, &l));
        let same = find_tight_link(&m, &u, &u).unwrap();
        assert!(validate_link(&m, &same));
    }

    #[test]
    fn link_absent_for_isolated_and_components() {
        let mut m = Multicomplex::complete(3, &[0, 1, 2, 3]);
        let lone = m.add_simplex(&[7, 8]).unwrap();
        let u = OrderedEdge { id: lone, order: vec![7, 8] };
        let other = m.ids_of_size(2)[0];
        let v = OrderedEdge { id: other, order: m.edge(other).vertices.clone() };
        assert!(find_tight_link(&m, &u, &v).is_none());
        assert!(!is_tightly_linked(&m));

        let mut two = Multicomplex::complete(3, &[0, 1, 2, 3]);
        two.absorb_complete(3, &[4, 5, 6, 7]).unwrap();
        assert!(!is_tightly_linked(&two));
        assert!(is_tightly_linked(&Multicomplex::complete(3, &[0, 1, 2, 3, 4])));
    }

    #[test]
    fn min_codegree_brute_force() {
        let g = crate::randmodel::sample_gnp(&crate::randmodel::GnpParams { n: 10, k: 3, p: 0.5, seed: 1 });
        let mut best = usize::MAX;
        for_each_subset_of(&(0..10).collect::<Vec<_>>(), 2, |x| {
            let c = (0..10u32).filter(|v| !x.contains(v) && g.edges().contains(&sorted(&[x[0], x[1], *v]))).count();
            best = best.min(c);
        });
        assert_eq!(g.min_codegree(), best);
    }
}
