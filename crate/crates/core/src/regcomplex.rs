//! Regularity bookkeeping: multicomplexes, families of partitions, polyads,
//! relative densities, probes, the reduced multicomplex, energy and the
//! counting verifiers.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::comb::{self, binom, sorted};
use crate::error::{invalid, Result, TrlError};
use crate::hypercore::{Hypergraph, Vertex};

pub type EdgeSet = FxHashSet<Vec<Vertex>>;

pub const TOL: f64 = 1e-9;

// ---------------------------------------------------------------- multicomplex

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McEdge {
    pub id: usize,
    pub vertices: Vec<Vertex>,
    /// `boundary[i]` is the face omitting `vertices[i]`; 1-edges point at the empty edge 0.
    pub boundary: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multicomplex {
    edges: BTreeMap<usize, McEdge>,
    by_set: BTreeMap<Vec<Vertex>, Vec<usize>>,
    next_id: usize,
}

impl Default for Multicomplex {
    fn default() -> Self {
        Self::new()
    }
}

impl Multicomplex {
    pub fn new() -> Self {
        let mut edges = BTreeMap::new();
        edges.insert(0, McEdge { id: 0, vertices: vec![], boundary: vec![] });
        let mut by_set = BTreeMap::new();
        by_set.insert(vec![], vec![0]);
        Multicomplex { edges, by_set, next_id: 1 }
    }

    pub fn k(&self) -> usize {
        self.edges.values().map(|e| e.vertices.len()).max().unwrap_or(0)
    }

    pub fn edge(&self, id: usize) -> &McEdge {
        &self.edges[&id]
    }

    pub fn get(&self, id: usize) -> Option<&McEdge> {
        self.edges.get(&id)
    }

    pub fn edges(&self) -> impl Iterator<Item = &McEdge> {
        self.edges.values()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.len() <= 1
    }

    pub fn ids(&self) -> BTreeSet<usize> {
        self.edges.keys().copied().collect()
    }

    pub fn vertex_list(&self) -> Vec<Vertex> {
        let mut v: Vec<Vertex> = self.edges.values().filter(|e| e.vertices.len() == 1).map(|e| e.vertices[0]).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn ids_on(&self, set: &[Vertex]) -> &[usize] {
        self.by_set.get(set).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn ids_of_size(&self, i: usize) -> Vec<usize> {
        self.edges.values().filter(|e| e.vertices.len() == i).map(|e| e.id).collect()
    }

    /// Adds an edge on `vertices` with the given boundary ids (any order).
    pub fn add_edge(&mut self, vertices: &[Vertex], boundary: &[usize]) -> Result<usize> {
        let vs = sorted(vertices);
        if vs.is_empty() || !comb::all_distinct(&vs) {
            return invalid("multicomplex edge needs distinct vertices");
        }
        let bd = if vs.len() == 1 {
            vec![0]
        } else {
            if boundary.len() != vs.len() {
                return invalid(format!("edge {vs:?} needs {} boundary edges", vs.len()));
            }
            let mut bd = vec![usize::MAX; vs.len()];
            for &b in boundary {
                let Some(f) = self.edges.get(&b) else { return invalid(format!("unknown boundary id {b}")) };
                if f.vertices.len() + 1 != vs.len() || !f.vertices.iter().all(|v| vs.contains(v)) {
                    return invalid(format!("edge {b} is not a facet of {vs:?}"));
                }
                let miss = vs.iter().position(|v| !f.vertices.contains(v)).unwrap();
                if bd[miss] != usize::MAX {
                    return invalid(format!("two boundary edges omit vertex {}", vs[miss]));
                }
                bd[miss] = b;
            }
            bd
        };
        let id = self.next_id;
        self.next_id += 1;
        self.by_set.entry(vs.clone()).or_default().push(id);
        self.edges.insert(id, McEdge { id, vertices: vs, boundary: bd });
        Ok(id)
    }

    /// Adds a simplex and any missing faces, reusing the first existing edge per face.
    pub fn add_simplex(&mut self, vertices: &[Vertex]) -> Result<usize> {
        let vs = sorted(vertices);
        if vs.len() > 1 {
            let mut bd = Vec::new();
            for i in 0..vs.len() {
                let face: Vec<Vertex> = vs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect();
                let id = match self.ids_on(&face).first() {
                    Some(&id) => id,
                    None => self.add_simplex(&face)?,
                };
                bd.push(id);
            }
            self.add_edge(&vs, &bd)
        } else {
            self.add_edge(&vs, &[])
        }
    }

    fn ensure_simplex(&mut self, vs: &[Vertex]) -> Result<()> {
        if self.ids_on(vs).is_empty() {
            self.add_simplex(vs)?;
        }
        Ok(())
    }

    /// Adds the complete k-complex on `verts` (one edge per set).
    pub fn absorb_complete(&mut self, k: usize, verts: &[Vertex]) -> Result<()> {
        let vs = sorted(verts);
        for i in 1..=k {
            for s in comb::subsets_of(&vs, i) {
                self.ensure_simplex(&s)?;
            }
        }
        Ok(())
    }

    pub fn complete(k: usize, verts: &[Vertex]) -> Self {
        let mut m = Self::new();
        m.absorb_complete(k, verts).expect("distinct vertices");
        m
    }

    /// A k-complex given by its layers (sets of size 1..=k), as a multicomplex.
    pub fn from_complex(layers: &[Vec<Vec<Vertex>>]) -> Result<Self> {
        let mut m = Self::new();
        for layer in layers {
            let mut layer: Vec<Vec<Vertex>> = layer.iter().map(|e| sorted(e)).collect();
            layer.sort();
            layer.dedup();
            for e in layer {
                let mut bd = Vec::new();
                if e.len() > 1 {
                    for i in 0..e.len() {
                        let face: Vec<Vertex> = e.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect();
                        match m.ids_on(&face).first() {
                            Some(&id) => bd.push(id),
                            None => return invalid(format!("complex not down-closed: {face:?} missing under {e:?}")),
                        }
                    }
                }
                m.add_edge(&e, &bd)?;
            }
        }
        Ok(m)
    }

    /// Keeps the listed ids (plus the empty edge); ids are preserved.
    pub fn restrict(&self, keep: &BTreeSet<usize>) -> Multicomplex {
        let mut out = Multicomplex::new();
        out.next_id = self.next_id;
        out.by_set.clear();
        out.by_set.insert(vec![], vec![0]);
        for e in self.edges.values() {
            if e.id != 0 && keep.contains(&e.id) {
                out.by_set.entry(e.vertices.clone()).or_default().push(e.id);
                out.edges.insert(e.id, e.clone());
            }
        }
        out
    }

    /// Boundary structure and the consistency condition `e_xy = e_yx`.
    pub fn validate(&self) -> std::result::Result<(), String> {
        for e in self.edges.values() {
            let i = e.vertices.len();
            if i == 0 {
                continue;
            }
            if i == 1 {
                if e.boundary != [0] {
                    return Err(format!("1-edge {} must have the empty edge as boundary", e.id));
                }
                continue;
            }
            if e.boundary.len() != i {
                return Err(format!("edge {} has {} boundary edges", e.id, e.boundary.len()));
            }
            for (pos, &b) in e.boundary.iter().enumerate() {
                let Some(f) = self.edges.get(&b) else { return Err(format!("edge {} has dangling boundary {b}", e.id)) };
                let mut want = e.vertices.clone();
                want.remove(pos);
                if f.vertices != want {
                    return Err(format!("edge {} boundary {b} is on the wrong vertices", e.id));
                }
            }
            if i >= 2 {
                for x in 0..i {
                    for y in 0..i {
                        if x == y {
                            continue;
                        }
                        let (vx, vy) = (e.vertices[x], e.vertices[y]);
                        if self.face_omitting(self.face_omitting(e.id, vx), vy) != self.face_omitting(self.face_omitting(e.id, vy), vx) {
                            return Err(format!("edge {} violates e_xy = e_yx at ({vx},{vy})", e.id));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn face_omitting(&self, id: usize, v: Vertex) -> usize {
        let e = &self.edges[&id];
        if e.vertices.len() == 1 {
            return 0;
        }
        let pos = e.vertices.iter().position(|&x| x == v).expect("vertex of edge");
        e.boundary[pos]
    }

    /// Number of live (i+1)-edges having `id` in their boundary.
    pub fn up_degree(&self, id: usize) -> usize {
        self.edges.values().filter(|e| e.boundary.contains(&id) && e.vertices.len() > 1).count()
    }
}

// ------------------------------------------------------- families of partitions

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub id: usize,
    pub index_set: Vec<usize>,
    pub members: Vec<Vec<Vertex>>,
    pub support: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyOfPartitions {
    pub k: usize,
    pub n: usize,
    pub clusters: Vec<Vec<Vertex>>,
    pub cluster_of: Vec<usize>,
    pub cells: Vec<Cell>,
    cell_of: FxHashMap<Vec<Vertex>, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSpec {
    pub index_set: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub member_list: Option<Vec<Vec<Vertex>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub k: usize,
    pub n: usize,
    pub clusters: Vec<Vec<Vertex>>,
    pub cells: Vec<CellSpec>,
}

impl FamilyOfPartitions {
    /// Cells of each level group crossing sets by (clusters, face cells, label).
    pub fn from_assignment(
        k: usize,
        n: usize,
        clusters: Vec<Vec<Vertex>>,
        mut label: impl FnMut(&[Vertex]) -> u64,
    ) -> Result<Self> {
        let mut f = Self::ground(k, n, clusters)?;
        for j in 2..k {
            let mut groups: BTreeMap<(Vec<usize>, Vec<usize>, u64), Vec<Vec<Vertex>>> = BTreeMap::new();
            for s in f.cross_sets(j) {
                let support = f.faces_of(&s);
                let idx = f.index_set(&s);
                groups.entry((idx, support, label(&s))).or_default().push(s);
            }
            for ((idx, support, _), members) in groups {
                f.push_cell(idx, members, support);
            }
        }
        Ok(f)
    }

    fn ground(k: usize, n: usize, clusters: Vec<Vec<Vertex>>) -> Result<Self> {
        if k < 2 {
            return invalid("family needs k >= 2");
        }
        let mut cluster_of = vec![usize::MAX; n];
        for (i, c) in clusters.iter().enumerate() {
            for &v in c {
                if v as usize >= n || cluster_of[v as usize] != usize::MAX {
                    return invalid(format!("vertex {v} duplicated or out of range in clusters"));
                }
                cluster_of[v as usize] = i;
            }
        }
        if cluster_of.contains(&usize::MAX) {
            return invalid("clusters do not cover the vertex set");
        }
        let clusters: Vec<Vec<Vertex>> = clusters.into_iter().map(|c| sorted(&c)).collect();
        let mut f = FamilyOfPartitions { k, n, clusters: clusters.clone(), cluster_of, cells: vec![], cell_of: FxHashMap::default() };
        for (i, c) in clusters.iter().enumerate() {
            f.push_cell(vec![i], c.iter().map(|&v| vec![v]).collect(), vec![]);
        }
        Ok(f)
    }

    fn push_cell(&mut self, index_set: Vec<usize>, members: Vec<Vec<Vertex>>, support: Vec<usize>) {
        let id = self.cells.len();
        for m in &members {
            self.cell_of.insert(m.clone(), id);
        }
        self.cells.push(Cell { id, index_set, members, support });
    }

    pub fn t(&self) -> usize {
        self.clusters.len()
    }

    pub fn index_set(&self, s: &[Vertex]) -> Vec<usize> {
        sorted(&s.iter().map(|&v| self.cluster_of[v as usize] as u32).collect::<Vec<_>>())
            .into_iter()
            .map(|x| x as usize)
            .collect()
    }

    pub fn is_crossing(&self, s: &[Vertex]) -> bool {
        let idx = self.index_set(s);
        idx.windows(2).all(|w| w[0] != w[1])
    }

    pub fn cell_of(&self, s: &[Vertex]) -> Option<usize> {
        self.cell_of.get(&sorted(s)).copied()
    }

    /// Cell ids of the facets of a crossing set (sorted input), one per omitted vertex.
    pub fn faces_of(&self, s: &[Vertex]) -> Vec<usize> {
        (0..s.len())
            .map(|i| {
                let face: Vec<Vertex> = s.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect();
                self.cell_of[&face]
            })
            .collect()
    }

    /// All crossing j-sets, sorted, in lexicographic order.
    pub fn cross_sets(&self, j: usize) -> Vec<Vec<Vertex>> {
        let all: Vec<Vertex> = (0..self.n as Vertex).collect();
        let mut out = Vec::new();
        comb::for_each_subset_of(&all, j, |s| {
            if self.is_crossing(s) {
                out.push(s.to_vec());
            }
        });
        out
    }

    /// Sorted ids of the k cells under a crossing k-set: its polyad.
    pub fn polyad_key(&self, q: &[Vertex]) -> Vec<usize> {
        let mut key = self.faces_of(&sorted(q));
        key.sort_unstable();
        key
    }

    pub fn cells_at_level(&self, j: usize) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(move |c| c.index_set.len() == j)
    }

    /// Members of every cell must share their facet cells.
    pub fn check_compatible(&self) -> std::result::Result<(), String> {
        for c in self.cells.iter().filter(|c| c.index_set.len() >= 2) {
            for m in &c.members {
                if self.faces_of(m) != c.support {
                    return Err(format!("cell {} member {m:?} is not supported by {:?}", c.id, c.support));
                }
            }
        }
        for j in 2..self.k {
            let total = self.cross_sets(j).len();
            let covered: usize = self.cells_at_level(j).map(|c| c.members.len()).sum();
            if total != covered {
                return Err(format!("level {j}: {covered} of {total} crossing sets covered"));
            }
        }
        Ok(())
    }

    pub fn to_spec(&self) -> FamilySpec {
        FamilySpec {
            k: self.k,
            n: self.n,
            clusters: self.clusters.clone(),
            cells: self
                .cells
                .iter()
                .filter(|c| c.index_set.len() >= 2)
                .map(|c| CellSpec { index_set: c.index_set.clone(), member_list: Some(c.members.clone()), rule: None })
                .collect(),
        }
    }

    /// Explicit member lists, or rule "induced" for the partition induced by the facets.
    pub fn from_spec(spec: &FamilySpec) -> Result<Self> {
        let mut explicit: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
        let mut induced: BTreeSet<Vec<usize>> = BTreeSet::new();
        for (label, c) in spec.cells.iter().enumerate() {
            match (&c.member_list, c.rule.as_deref()) {
                (Some(ms), _) => {
                    for m in ms {
                        if explicit.insert(sorted(m), label as u64).is_some() {
                            return invalid(format!("set {m:?} listed in two cells"));
                        }
                    }
                }
                (None, Some("induced")) => {
                    induced.insert(sorted(&c.index_set.iter().map(|&x| x as u32).collect::<Vec<_>>()).iter().map(|&x| x as usize).collect());
                }
                (None, other) => return invalid(format!("cell needs member_list or rule, got {other:?}")),
            }
        }
        let mut missing = Vec::new();
        let f = Self::from_assignment(spec.k, spec.n, spec.clusters.clone(), |s| match explicit.get(s) {
            Some(&l) => l,
            None => {
                missing.push(s.to_vec());
                u64::MAX
            }
        })?;
        for s in missing {
            if !induced.contains(&f.index_set(&s)) {
                return invalid(format!("crossing set {s:?} not covered by any cell"));
            }
        }
        f.check_compatible().map_err(TrlError::InvalidInput)?;
        Ok(f)
    }
}

/// Fine refines coarse: clusters nest and every coarse-crossing fine cell sits in one coarse cell.
pub fn refines(fine: &FamilyOfPartitions, coarse: &FamilyOfPartitions) -> std::result::Result<(), usize> {
    for (i, c) in fine.clusters.iter().enumerate() {
        let owner = coarse.cluster_of[c[0] as usize];
        if c.iter().any(|&v| coarse.cluster_of[v as usize] != owner) {
            return Err(i);
        }
    }
    for cell in fine.cells.iter().filter(|c| c.index_set.len() >= 2) {
        let mut target = None;
        for m in &cell.members {
            if !coarse.is_crossing(m) {
                continue;
            }
            let t = coarse.cell_of(m);
            match target {
                None => target = Some(t),
                Some(x) if x != t => return Err(cell.id),
                _ => {}
            }
        }
    }
    Ok(())
}

/// Multicomplex view: clusters, cells and the occurring k-polyads. Returns
/// the complex and the map polyad key -> k-edge id.
pub fn multicomplex_of(f: &FamilyOfPartitions) -> (Multicomplex, BTreeMap<Vec<usize>, usize>) {
    let mut m = Multicomplex::new();
    let mut id_of_cell = vec![0usize; f.cells.len()];
    let mut cells: Vec<&Cell> = f.cells.iter().collect();
    cells.sort_by_key(|c| (c.index_set.len(), c.id));
    for c in cells {
        let verts: Vec<Vertex> = c.index_set.iter().map(|&i| i as Vertex).collect();
        let bd: Vec<usize> = c.support.iter().map(|&s| id_of_cell[s]).collect();
        id_of_cell[c.id] = m.add_edge(&verts, &bd).expect("family cells form a multicomplex");
    }
    let mut polyads = BTreeMap::new();
    for q in f.cross_sets(f.k) {
        let key = f.polyad_key(&q);
        if polyads.contains_key(&key) {
            continue;
        }
        let verts: Vec<Vertex> = f.index_set(&q).iter().map(|&i| i as Vertex).collect();
        let bd: Vec<usize> = key.iter().map(|&c| id_of_cell[c]).collect();
        let id = m.add_edge(&verts, &bd).expect("polyad boundary");
        polyads.insert(key, id);
    }
    (m, polyads)
}

// ------------------------------------------------------- densities and probes

/// Counts partite cliques over `parts` whose facets lie in `lower`, and how many of them lie in `upper`.
pub fn clique_counts(parts: &[Vec<Vertex>], lower: &EdgeSet, upper: Option<&EdgeSet>) -> (u64, u64) {
    fn all_facets(cur: &[Vertex], lower: &EdgeSet) -> bool {
        let mut face = Vec::with_capacity(cur.len());
        (0..cur.len()).all(|skip| {
            face.clear();
            face.extend(cur.iter().enumerate().filter(|&(j, _)| j != skip).map(|(_, &v)| v));
            face.sort_unstable();
            face.is_empty() || lower.contains(&face)
        })
    }
    fn rec(parts: &[Vec<Vertex>], lower: &EdgeSet, upper: Option<&EdgeSet>, cur: &mut Vec<Vertex>, acc: &mut (u64, u64)) {
        let i = parts.len();
        if cur.len() == i {
            if all_facets(cur, lower) {
                acc.0 += 1;
                if upper.is_some_and(|u| u.contains(&sorted(cur))) {
                    acc.1 += 1;
                }
            }
            return;
        }
        for &v in &parts[cur.len()] {
            cur.push(v);
            // the facet missing the last part is complete one level early
            if cur.len() != i - 1 || i < 2 || lower.contains(&sorted(cur)) {
                rec(parts, lower, upper, cur, acc);
            }
            cur.pop();
        }
    }
    let mut acc = (0, 0);
    if !parts.is_empty() {
        rec(parts, lower, upper, &mut Vec::with_capacity(parts.len()), &mut acc);
    }
    acc
}

/// The layer of singletons over the given parts.
pub fn vertex_layer(parts: &[Vec<Vertex>]) -> EdgeSet {
    parts.iter().flatten().map(|&v| vec![v]).collect()
}

pub fn relative_density(upper: &EdgeSet, lower: &EdgeSet, parts: &[Vec<Vertex>], p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return invalid(format!("p must be positive, got {p}"));
    }
    let (total, hits) = clique_counts(parts, lower, Some(upper));
    Ok(if total == 0 { 0.0 } else { hits as f64 / (p * total as f64) })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum WitnessSource {
    Explicit(Vec<Vec<Vec<Vertex>>>),
    Sampled { n: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProbeVerdict {
    Violated { witness: usize, density: f64 },
    NoViolationFound { witnesses: usize, seed: Option<u64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeReport {
    pub verdict: ProbeVerdict,
    pub global_density: f64,
    pub tested: usize,
    pub too_small: usize,
    pub worst_deviation: f64,
    pub worst_witness: Option<Vec<Vec<Vertex>>>,
}

impl ProbeReport {
    pub fn violated(&self) -> bool {
        matches!(self.verdict, ProbeVerdict::Violated { .. })
    }
}

fn sample_subgraph(parts: &[Vec<Vertex>], lower: &EdgeSet, rng: &mut ChaCha8Rng) -> EdgeSet {
    let mut keep: FxHashSet<Vertex> = FxHashSet::default();
    for part in parts {
        let m = part.len();
        if m == 0 {
            continue;
        }
        let size = rng.gen_range(m.div_ceil(2)..=m);
        let mut p = part.clone();
        p.shuffle(rng);
        keep.extend(p.into_iter().take(size));
    }
    let q: f64 = rng.gen_range(0.5..=1.0);
    let mut edges: Vec<&Vec<Vertex>> = lower.iter().filter(|e| e.iter().all(|v| keep.contains(v))).collect();
    edges.sort();
    edges.into_iter().filter(|e| e.len() == 1 || rng.gen::<f64>() < q).cloned().collect()
}

/// Tests d_p(upper | H') = d ± ε on witnesses H' ⊆ lower with enough cliques.
pub fn regularity_probe(
    upper: &EdgeSet,
    lower: &EdgeSet,
    parts: &[Vec<Vertex>],
    d: f64,
    eps: f64,
    p: f64,
    source: &WitnessSource,
) -> Result<ProbeReport> {
    if !(p > 0.0) {
        return invalid("p must be positive");
    }
    let (base_total, base_hits) = clique_counts(parts, lower, Some(upper));
    let global = if base_total == 0 { 0.0 } else { base_hits as f64 / (p * base_total as f64) };
    let mut rep = ProbeReport {
        verdict: ProbeVerdict::NoViolationFound { witnesses: 0, seed: None },
        global_density: global,
        tested: 0,
        too_small: 0,
        worst_deviation: 0.0,
        worst_witness: None,
    };
    let run = |idx: usize, h: &EdgeSet, rep: &mut ProbeReport| -> bool {
        let (tot, hit) = clique_counts(parts, h, Some(upper));
        if (tot as f64) <= eps * base_total as f64 || tot == 0 {
            rep.too_small += 1;
            return false;
        }
        rep.tested += 1;
        let dens = hit as f64 / (p * tot as f64);
        let dev = (dens - d).abs();
        if dev > rep.worst_deviation {
            rep.worst_deviation = dev;
            let mut w: Vec<Vec<Vertex>> = h.iter().cloned().collect();
            w.sort();
            rep.worst_witness = Some(w);
        }
        if dev > eps + TOL {
            rep.verdict = ProbeVerdict::Violated { witness: idx, density: dens };
            return true;
        }
        false
    };
    match source {
        WitnessSource::Explicit(list) => {
            for (i, w) in list.iter().enumerate() {
                let h: EdgeSet = w.iter().map(|e| sorted(e)).filter(|e| lower.contains(e)).collect();
                if run(i, &h, &mut rep) {
                    return Ok(rep);
                }
            }
            rep.verdict = ProbeVerdict::NoViolationFound { witnesses: rep.tested, seed: None };
        }
        WitnessSource::Sampled { n, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for i in 0..*n {
                let h = sample_subgraph(parts, lower, &mut rng);
                if run(i, &h, &mut rep) {
                    return Ok(rep);
                }
            }
            rep.verdict = ProbeVerdict::NoViolationFound { witnesses: rep.tested, seed: Some(*seed) };
        }
    }
    Ok(rep)
}

// ------------------------------------------------------- equitability

#[derive(Debug, Clone, Serialize)]
pub struct EquitableReport {
    pub a_sizes: bool,
    pub b_cell_counts: bool,
    pub c_regular: bool,
    pub densities: Vec<f64>,
    pub per_polyad_exact: Option<bool>,
    pub sampled_q: usize,
    pub violations: Vec<String>,
}

impl EquitableReport {
    pub fn pass(&self) -> bool {
        self.a_sizes && self.b_cell_counts && self.c_regular && self.per_polyad_exact != Some(false)
    }
}

struct CellStats {
    lower: EdgeSet,
    upper: EdgeSet,
    parts: Vec<Vec<Vertex>>,
    density: f64,
}

fn cell_stats(f: &FamilyOfPartitions, cell: &Cell) -> CellStats {
    let parts: Vec<Vec<Vertex>> = cell.index_set.iter().map(|&i| f.clusters[i].clone()).collect();
    let lower: EdgeSet = if cell.index_set.len() == 2 {
        vertex_layer(&parts)
    } else {
        cell.support.iter().flat_map(|&s| f.cells[s].members.iter().cloned()).collect()
    };
    let upper: EdgeSet = cell.members.iter().cloned().collect();
    let (tot, hit) = clique_counts(&parts, &lower, Some(&upper));
    CellStats { lower, upper, parts, density: if tot == 0 { 0.0 } else { hit as f64 / tot as f64 } }
}

/// Density vector d_2..d_{k-1}, each rounded so that 1/d_j is an integer.
pub fn density_vector(f: &FamilyOfPartitions) -> Vec<f64> {
    (2..f.k)
        .map(|j| {
            let ds: Vec<f64> = f.cells_at_level(j).map(|c| cell_stats(f, c).density).collect();
            let mean = ds.iter().sum::<f64>() / ds.len().max(1) as f64;
            if mean <= 0.0 {
                0.0
            } else {
                1.0 / (1.0 / mean).round().max(1.0)
            }
        })
        .collect()
}

pub fn is_equitable_family(
    f: &FamilyOfPartitions,
    t0: usize,
    t1: usize,
    eps: f64,
    q_samples: usize,
    witnesses: usize,
    seed: u64,
) -> EquitableReport {
    let mut rep = EquitableReport {
        a_sizes: true,
        b_cell_counts: true,
        c_regular: true,
        densities: vec![],
        per_polyad_exact: None,
        sampled_q: 0,
        violations: vec![],
    };
    let size = f.clusters[0].len();
    if f.clusters.iter().any(|c| c.len() != size) || f.t() < t0 || f.t() > t1 {
        rep.a_sizes = false;
        rep.violations.push(format!("(a) t={} sizes {:?}", f.t(), f.clusters.iter().map(|c| c.len()).collect::<Vec<_>>()));
    }
    let mut per_a: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for c in f.cells.iter().filter(|c| c.index_set.len() >= 2) {
        *per_a.entry(c.index_set.clone()).or_default() += 1;
    }
    if let Some((a, &cnt)) = per_a.iter().find(|(_, &c)| c > t1) {
        rep.b_cell_counts = false;
        rep.violations.push(format!("(b) Cross_{a:?} has {cnt} cells > {t1}"));
    }
    if f.k <= 2 {
        return rep;
    }
    rep.densities = density_vector(f);
    // exact per-polyad cell counts
    if rep.densities.iter().all(|&d| d > 0.0 && eps < d * d) {
        let mut ok = true;
        for j in 2..f.k {
            let want = (1.0 / rep.densities[j - 2]).round() as usize;
            let mut per_polyad: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
            for c in f.cells_at_level(j) {
                let mut key = c.support.clone();
                key.sort_unstable();
                *per_polyad.entry(key).or_default() += 1;
            }
            if let Some((key, &cnt)) = per_polyad.iter().find(|(_, &c)| c != want) {
                ok = false;
                rep.violations.push(format!("polyad {key:?} supports {cnt} cells, expected {want}"));
            }
        }
        rep.per_polyad_exact = Some(ok);
    }
    let cross = f.cross_sets(f.k);
    if cross.is_empty() {
        return rep;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probed: BTreeMap<usize, bool> = BTreeMap::new();
    for _ in 0..q_samples {
        let q = &cross[rng.gen_range(0..cross.len())];
        rep.sampled_q += 1;
        for j in 2..f.k {
            for s in comb::subsets_of(q, j) {
                let cid = f.cell_of(&s).expect("crossing set has a cell");
                if probed.contains_key(&cid) {
                    continue;
                }
                let st = cell_stats(f, &f.cells[cid]);
                let dj = rep.densities[j - 2];
                let pr = regularity_probe(&st.upper, &st.lower, &st.parts, dj, eps, 1.0, &WitnessSource::Sampled { n: witnesses, seed: seed ^ cid as u64 })
                    .expect("p = 1");
                let ok = (st.density - dj).abs() <= eps + TOL && !pr.violated();
                if !ok {
                    rep.violations.push(format!("(c) cell {cid} density {:.4} vs d_{j}={dj:.4}", st.density));
                }
                probed.insert(cid, ok);
            }
        }
    }
    rep.c_regular = probed.values().all(|&b| b);
    rep
}

// ------------------------------------------------------- reduced multicomplex

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RemovalCause {
    Irregular,
    LowDensity,
    LowDegree,
    LostSupport,
}

#[derive(Debug, Clone)]
pub enum DensityCut<'a> {
    None,
    /// Folded into the regular set before the cascade.
    Before(&'a BTreeMap<usize, f64>, f64),
    /// Applied once after the cascade reaches its fixed point.
    After(&'a BTreeMap<usize, f64>, f64),
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ReductionReport {
    pub removed: BTreeMap<usize, RemovalCause>,
    pub thresholds: Vec<f64>,
    pub rounds: usize,
}

/// Minimum number of (i+1)-edges over an i-edge, for i = 1..k-1 (index i-1).
pub fn rg2_thresholds(k: usize, eps_k: f64, densities: &[f64], t: usize) -> Vec<f64> {
    let root = eps_k.powf(1.0 / k as f64);
    let d = |j: usize| densities.get(j - 2).copied().unwrap_or(1.0);
    (1..k)
        .map(|i| {
            let (factor, top, choose) = if i < k - 1 { (1.0 - 2f64.powi(i as i32 + 2) * root, i + 1, i) } else { (1.0 - 2f64.powi(k as i32 + 1) * root, k - 1, k - 1) };
            let mut prod = 1.0;
            for j in 2..=top {
                prod *= d(j).powf(-(binom(choose as u64, j as u64 - 1) as f64));
            }
            factor * t as f64 * prod
        })
        .collect()
}

pub fn reduced_multicomplex(
    m: &Multicomplex,
    regular_kedges: &BTreeSet<usize>,
    densities: &[f64],
    eps_k: f64,
    t: usize,
    cut: DensityCut<'_>,
) -> (Multicomplex, ReductionReport) {
    // densities list d_2..d_{k-1}; this pins k after the top layer has emptied
    let k = m.k().max(densities.len() + 2);
    let mut rep = ReductionReport { thresholds: rg2_thresholds(k, eps_k, densities, t), ..Default::default() };
    let mut alive: BTreeSet<usize> = m.ids();
    for id in m.ids_of_size(k) {
        if !regular_kedges.contains(&id) {
            alive.remove(&id);
            rep.removed.insert(id, RemovalCause::Irregular);
        }
    }
    if let DensityCut::Before(dens, d) = cut {
        for id in m.ids_of_size(k) {
            if alive.contains(&id) && dens.get(&id).copied().unwrap_or(0.0) < d {
                alive.remove(&id);
                rep.removed.insert(id, RemovalCause::LowDensity);
            }
        }
    }
    loop {
        rep.rounds += 1;
        let mut up: BTreeMap<usize, usize> = BTreeMap::new();
        for &id in &alive {
            let e = m.edge(id);
            if e.vertices.len() >= 2 {
                for b in &e.boundary {
                    *up.entry(*b).or_default() += 1;
                }
            }
        }
        let mut kill: Vec<(usize, RemovalCause)> = Vec::new();
        for &id in &alive {
            let e = m.edge(id);
            let i = e.vertices.len();
            if i == 0 {
                continue;
            }
            if e.boundary.iter().any(|b| !alive.contains(b)) {
                kill.push((id, RemovalCause::LostSupport));
            } else if i < k && (up.get(&id).copied().unwrap_or(0) as f64) < rep.thresholds[i - 1] - TOL {
                kill.push((id, RemovalCause::LowDegree));
            }
        }
        if kill.is_empty() {
            break;
        }
        for (id, cause) in kill {
            alive.remove(&id);
            rep.removed.insert(id, cause);
        }
    }
    if let DensityCut::After(dens, d) = cut {
        for id in m.ids_of_size(k) {
            if alive.contains(&id) && dens.get(&id).copied().unwrap_or(0.0) < d {
                alive.remove(&id);
                rep.removed.insert(id, RemovalCause::LowDensity);
            }
        }
    }
    (m.restrict(&alive), rep)
}

// ------------------------------------------------------- irregular polyads

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IrregularCause {
    NotRegular,
    FineIrregular,
    FineDensityDrift,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolyadStats {
    pub key: Vec<usize>,
    pub regular: bool,
    pub supported: usize,
    pub fine_irregular: usize,
    pub fine_deviating: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct IrregularReport {
    pub causes: BTreeMap<Vec<usize>, Option<IrregularCause>>,
    pub irregular: usize,
    pub bound: f64,
    pub within_bound: bool,
}

pub fn irregular_bound(eps_k: f64, t: usize, k: usize, densities: &[f64]) -> f64 {
    let mut b = 4.0 * eps_k * binom(t as u64, k as u64) as f64;
    for i in 2..k {
        b *= densities[i - 2].powf(-(binom(k as u64, i as u64) as f64));
    }
    b
}

pub fn classify_irregular_polyads(stats: &[PolyadStats], eps_k: f64, t: usize, k: usize, densities: &[f64]) -> IrregularReport {
    let mut causes = BTreeMap::new();
    let mut irregular = 0;
    for s in stats {
        let frac = |x: usize| if s.supported == 0 { 0.0 } else { x as f64 / s.supported as f64 };
        let cause = if !s.regular {
            Some(IrregularCause::NotRegular)
        } else if frac(s.fine_irregular) > eps_k {
            Some(IrregularCause::FineIrregular)
        } else if frac(s.fine_deviating) > eps_k {
            Some(IrregularCause::FineDensityDrift)
        } else {
            None
        };
        irregular += cause.is_some() as usize;
        causes.insert(s.key.clone(), cause);
    }
    let bound = irregular_bound(eps_k, t, k, densities);
    IrregularReport { causes, irregular, bound, within_bound: irregular as f64 <= bound + TOL }
}

/// Polyad support of a family: polyad key -> (parts, lower (k-1)-sets, supported k-sets).
pub struct PolyadIndex {
    pub groups: BTreeMap<Vec<usize>, Vec<Vec<Vertex>>>,
}

impl PolyadIndex {
    pub fn new(f: &FamilyOfPartitions) -> Self {
        let mut groups: BTreeMap<Vec<usize>, Vec<Vec<Vertex>>> = BTreeMap::new();
        for q in f.cross_sets(f.k) {
            groups.entry(f.polyad_key(&q)).or_default().push(q);
        }
        PolyadIndex { groups }
    }

    pub fn density(&self, key: &[usize], g: &Hypergraph, p: f64) -> f64 {
        let qs = &self.groups[key];
        qs.iter().filter(|q| g.has_edge(q)).count() as f64 / (p * qs.len() as f64)
    }
}

fn polyad_parts_lower(f: &FamilyOfPartitions, key: &[usize]) -> (Vec<Vec<Vertex>>, EdgeSet) {
    let mut idx: Vec<usize> = key.iter().flat_map(|&c| f.cells[c].index_set.iter().copied()).collect();
    idx.sort_unstable();
    idx.dedup();
    let parts = idx.iter().map(|&i| f.clusters[i].clone()).collect();
    let lower = if f.k == 2 {
        key.iter().flat_map(|&c| f.cells[c].members.iter().cloned()).collect()
    } else {
        key.iter().flat_map(|&c| f.cells[c].members.iter().cloned()).collect()
    };
    (parts, lower)
}

fn graph_edges(g: &Hypergraph) -> EdgeSet {
    g.edges().iter().cloned().collect()
}

/// Probe of G against one polyad; cached by the caller.
pub fn polyad_regular(f: &FamilyOfPartitions, key: &[usize], g: &Hypergraph, p: f64, eps: f64, witnesses: usize, seed: u64) -> bool {
    let (parts, lower) = polyad_parts_lower(f, key);
    let upper = graph_edges(g);
    let (tot, hit) = clique_counts(&parts, &lower, Some(&upper));
    let d = if tot == 0 { 0.0 } else { hit as f64 / (p * tot as f64) };
    !regularity_probe(&upper, &lower, &parts, d, eps, p, &WitnessSource::Sampled { n: witnesses, seed }).unwrap().violated()
}

pub fn polyad_stats(
    coarse: &FamilyOfPartitions,
    fine: &FamilyOfPartitions,
    g: &Hypergraph,
    p: f64,
    eps_k: f64,
    f_k: f64,
    witnesses: usize,
    seed: u64,
) -> Vec<PolyadStats> {
    let ci = PolyadIndex::new(coarse);
    let fi = PolyadIndex::new(fine);
    let mut fine_reg: BTreeMap<Vec<usize>, bool> = BTreeMap::new();
    let mut out = Vec::new();
    for (n_key, (key, qs)) in ci.groups.iter().enumerate() {
        let regular = polyad_regular(coarse, key, g, p, eps_k, witnesses, seed ^ n_key as u64);
        let dc = ci.density(key, g, p);
        let mut fi_irr = 0;
        let mut dev = 0;
        for q in qs {
            let fk = fine.polyad_key(q);
            let r = *fine_reg.entry(fk.clone()).or_insert_with(|| polyad_regular(fine, &fk, g, p, f_k, witnesses, seed));
            fi_irr += !r as usize;
            if (fi.density(&fk, g, p) - dc).abs() > eps_k + TOL {
                dev += 1;
            }
        }
        out.push(PolyadStats { key: key.clone(), regular, supported: qs.len(), fine_irregular: fi_irr, fine_deviating: dev });
    }
    out
}

// ------------------------------------------------------- strengthened pairs

#[derive(Debug, Clone, Serialize)]
pub struct ClauseReport {
    pub clause: String,
    pub pass: bool,
    pub samples: usize,
    pub failures: usize,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PairParams {
    pub t0: usize,
    pub t1: usize,
    pub t2: usize,
    pub eps_k: f64,
    pub eps: f64,
    pub f_k: f64,
    pub f: f64,
}

pub fn strengthened_pair_check(
    coarse: &FamilyOfPartitions,
    fine: &FamilyOfPartitions,
    g: &Hypergraph,
    p: f64,
    par: PairParams,
    q_samples: usize,
    witnesses: usize,
    seed: u64,
) -> Vec<ClauseReport> {
    let mut out = Vec::new();
    let clause = |name: &str, pass: bool, samples: usize, failures: usize, detail: String| ClauseReport {
        clause: name.into(),
        pass,
        samples,
        failures,
        detail,
    };
    match refines(fine, coarse) {
        Ok(()) => out.push(clause("S1", true, 0, 0, "fine refines coarse".into())),
        Err(c) => out.push(clause("S1", false, 0, 1, format!("fine cell or cluster {c} straddles coarse cells"))),
    }
    let eq_c = is_equitable_family(coarse, par.t0, par.t1, par.eps, q_samples, witnesses, seed);
    out.push(clause("S2", eq_c.pass(), eq_c.sampled_q, eq_c.violations.len(), eq_c.violations.join("; ")));
    let n = g.n() as u64;
    let total = binom(n, g.k() as u64) as f64;
    let reg_clause = |f: &FamilyOfPartitions, eps: f64, name: &str, s: u64| {
        let cross = f.cross_sets(f.k);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let mut cache: BTreeMap<Vec<usize>, bool> = BTreeMap::new();
        let mut fails = 0;
        for _ in 0..q_samples {
            let q = &cross[rng.gen_range(0..cross.len())];
            let key = f.polyad_key(q);
            let ok = *cache.entry(key.clone()).or_insert_with(|| polyad_regular(f, &key, g, p, eps, witnesses, s));
            fails += !ok as usize;
        }
        let est = fails as f64 / q_samples.max(1) as f64 * cross.len() as f64;
        clause(name, est <= eps * total + TOL, q_samples, fails, format!("estimated {est:.1} irregular of {} crossing sets", cross.len()))
    };
    out.push(reg_clause(coarse, par.eps_k, "S3", seed ^ 3));
    let eq_f = is_equitable_family(fine, par.t0, par.t2, par.f, q_samples, witnesses, seed ^ 4);
    out.push(clause("S4", eq_f.pass(), eq_f.sampled_q, eq_f.violations.len(), eq_f.violations.join("; ")));
    out.push(reg_clause(fine, par.f_k, "S5", seed ^ 5));
    let ci = PolyadIndex::new(coarse);
    let fi = PolyadIndex::new(fine);
    let cross = coarse.cross_sets(coarse.k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 6);
    let mut bad = 0;
    for _ in 0..q_samples {
        let q = &cross[rng.gen_range(0..cross.len())];
        let dc = ci.density(&coarse.polyad_key(q), g, p);
        let df = fi.density(&fine.polyad_key(q), g, p);
        bad += ((dc - df).abs() > par.eps_k + TOL) as usize;
    }
    let est = bad as f64 / q_samples.max(1) as f64 * cross.len() as f64;
    out.push(clause("S6", est <= par.eps_k * par.eps_k * total + TOL, q_samples, bad, format!("estimated {est:.1} drifting sets")));
    out
}

// ------------------------------------------------------- energy

/// Exact energy with p = 1: C(n,k)^{-1} Σ_i Σ_polyads e_i² / N.
pub fn energy_exact(f: &FamilyOfPartitions, graphs: &[Hypergraph]) -> BigRational {
    let idx = PolyadIndex::new(f);
    let mut acc = BigRational::zero();
    for g in graphs {
        for qs in idx.groups.values() {
            let e = qs.iter().filter(|q| g.has_edge(q)).count() as i64;
            acc += BigRational::new(BigInt::from(e * e), BigInt::from(qs.len() as i64));
        }
    }
    acc / BigRational::from_integer(BigInt::from(binom(f.n as u64, f.k as u64)))
}

pub fn energy(f: &FamilyOfPartitions, graphs: &[Hypergraph]) -> f64 {
    energy_exact(f, graphs).to_f64().unwrap_or(f64::NAN)
}

// ------------------------------------------------------- counting lemmas

#[derive(Debug, Clone)]
pub struct PartiteComplex {
    pub parts: Vec<Vec<Vertex>>,
    /// `layers[j]` holds the (j+2)-sets; vertices are implied by the parts.
    pub layers: Vec<EdgeSet>,
}

impl PartiteComplex {
    pub fn part_of(&self) -> FxHashMap<Vertex, usize> {
        self.parts.iter().enumerate().flat_map(|(i, p)| p.iter().map(move |&v| (v, i))).collect()
    }

    fn has(&self, set: &[Vertex]) -> bool {
        match set.len() {
            0 | 1 => true,
            s => self.layers.get(s - 2).is_some_and(|l| l.contains(&sorted(set))),
        }
    }

    /// All faces of size 2..=min(|set|, top) present.
    pub fn is_clique(&self, set: &[Vertex]) -> bool {
        let top = (self.layers.len() + 1).min(set.len());
        (2..=top).all(|s| comb::subsets_of(&sorted(set), s).iter().all(|f| self.has(f)))
    }

    /// Random partite complex with independent layers of the given densities.
    pub fn binomial(parts: usize, m: usize, densities: &[f64], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ps: Vec<Vec<Vertex>> = (0..parts).map(|i| ((i * m) as Vertex..((i + 1) * m) as Vertex).collect()).collect();
        let mut layers = Vec::new();
        let idx: Vec<u32> = (0..parts as u32).collect();
        for (j, &d) in densities.iter().enumerate() {
            let size = j + 2;
            let mut layer = EdgeSet::default();
            for ps_idx in comb::subsets_of(&idx, size) {
                let chosen: Vec<&Vec<Vertex>> = ps_idx.iter().map(|&i| &ps[i as usize]).collect();
                let mut cur = Vec::new();
                product(&chosen, &mut cur, &mut |s| {
                    let below_ok = size == 2 || {
                        let lower = &layers[size - 3];
                        comb::subsets_of(s, size - 1).iter().all(|f: &Vec<Vertex>| EdgeSet::contains(lower, f))
                    };
                    if below_ok && rng.gen::<f64>() < d {
                        layer.insert(s.to_vec());
                    }
                });
            }
            layers.push(layer);
        }
        PartiteComplex { parts: ps, layers }
    }
}

fn product(parts: &[&Vec<Vertex>], cur: &mut Vec<Vertex>, f: &mut dyn FnMut(&[Vertex])) {
    if cur.len() == parts.len() {
        let s = sorted(cur);
        f(&s);
        return;
    }
    for &v in parts[cur.len()].iter() {
        cur.push(v);
        product(parts, cur, f);
        cur.pop();
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Pattern {
    /// Host part index for each pattern vertex.
    pub class: Vec<usize>,
    /// Pattern edges (sets of pattern vertex indices) of size >= 2.
    pub edges: Vec<Vec<usize>>,
}

pub fn count_complex_copies(host: &PartiteComplex, pat: &Pattern, restrict: &[Vec<Vertex>], k: usize) -> Result<u64> {
    let s = pat.class.len();
    if s > 2 * k {
        return Err(TrlError::Cap(format!("pattern on {s} vertices exceeds 2k={}", 2 * k)));
    }
    if pat.class.iter().any(|&c| c >= restrict.len()) {
        return invalid("pattern class without a host part");
    }
    // edges checked when their last vertex is placed
    let mut due: Vec<Vec<&Vec<usize>>> = vec![vec![]; s];
    for e in &pat.edges {
        if let Some(&mx) = e.iter().max() {
            if mx >= s {
                return invalid("pattern edge uses an unknown vertex");
            }
            due[mx].push(e);
        }
    }
    let mut phi = vec![0 as Vertex; s];
    fn rec(
        i: usize,
        host: &PartiteComplex,
        pat: &Pattern,
        restrict: &[Vec<Vertex>],
        due: &[Vec<&Vec<usize>>],
        phi: &mut [Vertex],
    ) -> u64 {
        if i == pat.class.len() {
            return 1;
        }
        let mut total = 0;
        for &v in &restrict[pat.class[i]] {
            if phi[..i].contains(&v) {
                continue;
            }
            phi[i] = v;
            let ok = due[i].iter().all(|e| {
                let img: Vec<Vertex> = e.iter().map(|&x| phi[x]).collect();
                host.has(&img)
            });
            if ok {
                total += rec(i + 1, host, pat, restrict, due, phi);
            }
        }
        total
    }
    Ok(rec(0, host, pat, restrict, &due, &mut phi))
}

#[derive(Debug, Clone, Serialize)]
pub struct DegreeCensus {
    pub target: f64,
    pub gamma: f64,
    pub histogram: BTreeMap<u64, u64>,
    pub tuples: u64,
    pub within: u64,
    pub fraction_within: f64,
    pub worst_mass: u64,
}

/// Completion counts of every (k-1)-clique on the first k-1 parts into part k.
pub fn degree_census(host: &PartiteComplex, restrict: &[Vec<Vertex>], densities: &[f64], gamma: f64) -> DegreeCensus {
    let k = restrict.len();
    let mut target = restrict[k - 1].len() as f64;
    for i in 2..k {
        target *= densities[i - 2].powf(binom(k as u64 - 1, i as u64 - 1) as f64);
    }
    let mut counts: Vec<u64> = Vec::new();
    let mut cur = Vec::new();
    let firsts: Vec<&Vec<Vertex>> = restrict[..k - 1].iter().collect();
    product(&firsts, &mut cur, &mut |t| {
        if host.is_clique(t) {
            let mut s = t.to_vec();
            let c = restrict[k - 1]
                .iter()
                .filter(|&&v| {
                    s.push(v);
                    let ok = host.is_clique(&s);
                    s.pop();
                    ok
                })
                .count();
            counts.push(c as u64);
        }
    });
    let mut histogram = BTreeMap::new();
    for &c in &counts {
        *histogram.entry(c).or_insert(0) += 1;
    }
    let within = counts.iter().filter(|&&c| (c as f64 - target).abs() <= gamma * target + TOL).count() as u64;
    let mut by_dev = counts.clone();
    by_dev.sort_by(|a, b| (*b as f64 - target).abs().partial_cmp(&(*a as f64 - target).abs()).unwrap().then(a.cmp(b)));
    let worst = ((gamma * counts.len() as f64).ceil() as usize).min(counts.len());
    let tuples = counts.len() as u64;
    DegreeCensus {
        target,
        gamma,
        histogram,
        tuples,
        within,
        fraction_within: if tuples == 0 { 0.0 } else { within as f64 / tuples as f64 },
        worst_mass: by_dev[..worst].iter().sum(),
    }
}

pub struct Face<'a> {
    pub parts: &'a [usize],
    pub sets: &'a EdgeSet,
}

/// Copies of the complete (k-1)-complex on k vertices (one per part) whose
/// a-face lies in A, b-face in B and c-face in C, with a + b - c = k.
pub fn mdl_count(host: &PartiteComplex, a: Face<'_>, b: Face<'_>, c: Face<'_>) -> Result<u64> {
    let k = host.parts.len();
    let (na, nb, nc) = (a.parts.len(), b.parts.len(), c.parts.len());
    if na + nb != k + nc {
        return invalid(format!("a+b-c = {} but k = {k}", na as i64 + nb as i64 - nc as i64));
    }
    let inter: Vec<usize> = a.parts.iter().copied().filter(|x| b.parts.contains(x)).collect();
    if sorted(&inter.iter().map(|&x| x as u32).collect::<Vec<_>>()) != sorted(&c.parts.iter().map(|&x| x as u32).collect::<Vec<_>>()) {
        return invalid("C must sit on the parts shared by A and B");
    }
    let part_of = host.part_of();
    let rest: Vec<usize> = (0..k).filter(|x| !b.parts.contains(x)).collect();
    let face = |set: &[Vertex], parts: &[usize]| -> Vec<Vertex> {
        sorted(&set.iter().copied().filter(|v| parts.contains(&part_of[v])).collect::<Vec<_>>())
    };
    let mut bs: Vec<&Vec<Vertex>> = b.sets.iter().collect();
    bs.sort();
    let mut total = 0u64;
    for be in bs {
        if !c.sets.contains(&face(be, c.parts)) {
            continue;
        }
        let choices: Vec<&Vec<Vertex>> = rest.iter().map(|&i| &host.parts[i]).collect();
        let mut cur = Vec::new();
        product(&choices, &mut cur, &mut |ext| {
            let mut all = be.clone();
            all.extend_from_slice(ext);
            if host.is_clique(&all) && a.sets.contains(&face(&all, a.parts)) {
                total += 1;
            }
        });
    }
    Ok(total)
}

/// Layer-by-layer join: R_j = tails of G_k edges on X_{j-1}..X_{j+k-2} whose head lies in R_{j-1}.
pub fn fine_reach(
    parts: &[Vec<Vertex>],
    top: &Hypergraph,
    support: Option<&EdgeSet>,
    r0: &BTreeSet<Vec<Vertex>>,
) -> Result<BTreeSet<Vec<Vertex>>> {
    let k = top.k();
    if parts.len() != 2 * k - 2 {
        return invalid(format!("expected {} parts, got {}", 2 * k - 2, parts.len()));
    }
    let mut part_of: FxHashMap<Vertex, usize> = FxHashMap::default();
    for (i, p) in parts.iter().enumerate() {
        for &v in p {
            if part_of.insert(v, i).is_some() {
                return invalid(format!("vertex {v} in two parts"));
            }
        }
    }
    for t in r0 {
        if t.len() != k - 1 || t.iter().enumerate().any(|(i, v)| part_of.get(v) != Some(&i)) {
            return invalid(format!("start tuple {t:?} is not on X_0..X_{}", k - 2));
        }
    }
    // ordered (by part) k-edges keyed by their first part
    let mut by_start: BTreeMap<usize, Vec<Vec<Vertex>>> = BTreeMap::new();
    for e in top.edges() {
        let mut ps: Vec<(usize, Vertex)> = match e.iter().map(|v| part_of.get(v).map(|&p| (p, *v))).collect::<Option<Vec<_>>>() {
            Some(x) => x,
            None => continue,
        };
        ps.sort_unstable();
        if ps.windows(2).all(|w| w[1].0 == w[0].0 + 1) {
            if let Some(sup) = support {
                let tail = sorted(&e[..].iter().copied().filter(|&v| part_of[&v] != ps[0].0).collect::<Vec<_>>());
                let head = sorted(&e[..].iter().copied().filter(|&v| part_of[&v] != ps[k - 1].0).collect::<Vec<_>>());
                if !sup.contains(&tail) || !sup.contains(&head) {
                    return invalid(format!("edge {e:?} not supported by the (k-1)-layer"));
                }
            }
            by_start.entry(ps[0].0).or_default().push(ps.into_iter().map(|(_, v)| v).collect());
        }
    }
    let mut r = r0.clone();
    for j in 1..k {
        let mut next = BTreeSet::new();
        for e in by_start.get(&(j - 1)).into_iter().flatten() {
            if r.contains(&e[..k - 1]) {
                next.insert(e[1..].to_vec());
            }
        }
        r = next;
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cluster_k2(sizes: &[usize]) -> FamilyOfPartitions {
        let mut v = 0u32;
        let clusters: Vec<Vec<u32>> = sizes
            .iter()
            .map(|&s| {
                let c: Vec<u32> = (v..v + s as u32).collect();
                v += s as u32;
                c
            })
            .collect();
        FamilyOfPartitions::from_assignment(2, v as usize, clusters, |_| 0).unwrap()
    }

    #[test]
    fn complex_is_multicomplex() {
        let layers = vec![vec![vec![0], vec![1], vec![2]], vec![vec![0, 1], vec![1, 2], vec![0, 2]], vec![vec![0, 1, 2]]];
        let m = Multicomplex::from_complex(&layers).unwrap();
        assert!(m.validate().is_ok());
        assert_eq!(m.k(), 3);
        assert!(Multicomplex::from_complex(&[vec![vec![0]], vec![vec![0, 1]]]).is_err());
    }

    #[test]
    fn consistency_violation_detected() {
        // two parallel 2-edges on {0,1} sharing vertices but triangle mixes faces inconsistently
        let mut m = Multicomplex::new();
        let a = m.add_edge(&[0], &[]).unwrap();
        let b = m.add_edge(&[1], &[]).unwrap();
        let c = m.add_edge(&[2], &[]).unwrap();
        let ab = m.add_edge(&[0, 1], &[a, b]).unwrap();
        let bc = m.add_edge(&[1, 2], &[b, c]).unwrap();
        let ac = m.add_edge(&[0, 2], &[a, c]).unwrap();
        m.add_edge(&[0, 1, 2], &[ab, bc, ac]).unwrap();
        assert!(m.validate().is_ok());
        // a second copy of vertex 1 used by one face only
        let b2 = m.add_edge(&[1], &[]).unwrap();
        let bc2 = m.add_edge(&[1, 2], &[b2, c]).unwrap();
        m.add_edge(&[0, 1, 2], &[ab, bc2, ac]).unwrap();
        assert!(m.validate().is_err());
    }

    #[test]
    fn relative_density_conventions() {
        let parts = vec![vec![0, 1], vec![2, 3]];
        let lower = vertex_layer(&parts);
        let all: EdgeSet = [vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3]].into_iter().collect();
        assert_eq!(relative_density(&all, &lower, &parts, 1.0).unwrap(), 1.0);
        assert_eq!(relative_density(&EdgeSet::default(), &lower, &parts, 1.0).unwrap(), 0.0);
        assert_eq!(relative_density(&all, &EdgeSet::default(), &parts, 0.5).unwrap(), 0.0);
        assert!(relative_density(&all, &lower, &parts, 0.0).is_err());
    }

    #[test]
    fn planted_half_density_is_caught() {
        let a: Vec<u32> = (0..20).collect();
        let b: Vec<u32> = (20..40).collect();
        let parts = vec![a.clone(), b.clone()];
        let mut upper = EdgeSet::default();
        for &x in &a {
            for &y in &b {
                let planted = x < 10 && y < 30;
                if !planted || (x + y) % 2 == 0 {
                    upper.insert(vec![x, y]);
                }
            }
        }
        let lower = vertex_layer(&parts);
        let d = relative_density(&upper, &lower, &parts, 1.0).unwrap();
        let w: Vec<Vec<u32>> = (0..10).chain(20..30).map(|v| vec![v]).collect();
        let rep = regularity_probe(&upper, &lower, &parts, d, 0.1, 1.0, &WitnessSource::Explicit(vec![w])).unwrap();
        assert!(rep.violated());
        let whole: Vec<Vec<u32>> = (0..40).map(|v| vec![v]).collect();
        let rep = regularity_probe(&upper, &lower, &parts, d, 0.1, 1.0, &WitnessSource::Explicit(vec![whole])).unwrap();
        assert!(!rep.violated());
    }

    #[test]
    fn equitable_trivial_and_unequal() {
        let f = two_cluster_k2(&[5, 5]);
        let r = is_equitable_family(&f, 1, 4, 0.1, 5, 5, 1);
        assert!(r.a_sizes && r.b_cell_counts && r.pass());
        let g = two_cluster_k2(&[5, 4]);
        assert!(!is_equitable_family(&g, 1, 4, 0.1, 5, 5, 1).a_sizes);
    }

    #[test]
    fn equitable_two_halves() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let clusters = vec![(0..30).collect::<Vec<u32>>(), (30..60).collect(), (60..90).collect()];
        let labels: FxHashMap<Vec<u32>, u64> = {
            let mut m = FxHashMap::default();
            for x in 0..90u32 {
                for y in x + 1..90 {
                    if x / 30 != y / 30 {
                        m.insert(vec![x, y], rng.gen_range(0..2));
                    }
                }
            }
            m
        };
        let f = FamilyOfPartitions::from_assignment(3, 90, clusters, |s| labels[s]).unwrap();
        assert!(f.check_compatible().is_ok());
        let r = is_equitable_family(&f, 1, 8, 0.2, 5, 10, 2);
        assert_eq!(r.densities, vec![0.5]);
        assert!(r.pass(), "{:?}", r.violations);
    }

    fn fano_instance() -> (Multicomplex, BTreeSet<usize>, BTreeMap<Vec<u32>, usize>) {
        let verts: Vec<u32> = (0..7).collect();
        let m = Multicomplex::complete(3, &verts);
        let fano: Vec<Vec<u32>> = vec![vec![0, 1, 2], vec![0, 3, 4], vec![0, 5, 6], vec![1, 3, 5], vec![1, 4, 6], vec![2, 3, 6], vec![2, 4, 5]];
        let mut ids = BTreeMap::new();
        for e in m.edges() {
            ids.insert(e.vertices.clone(), e.id);
        }
        let regular: BTreeSet<usize> = fano.iter().filter(|t| **t != [0, 1, 2]).map(|t| ids[t]).collect();
        (m, regular, ids)
    }

    #[test]
    fn planted_threshold_cascade() {
        let (m, regular, ids) = fano_instance();
        let eps = 27.0 / 175616.0;
        let th = rg2_thresholds(3, eps, &[1.0], 7);
        assert!((th[0] - 4.0).abs() < 1e-9 && (th[1] - 1.0).abs() < 1e-9);
        let (r, rep) = reduced_multicomplex(&m, &regular, &[1.0], eps, 7, DensityCut::None);
        let pairs: BTreeSet<usize> = [[0, 1], [0, 2], [1, 2]].iter().map(|p| ids[&p.to_vec()]).collect();
        for (id, cause) in &rep.removed {
            let e = m.edge(*id);
            match e.vertices.len() {
                3 => assert_eq!(*cause, RemovalCause::Irregular),
                2 => assert!(pairs.contains(id) && *cause == RemovalCause::LowDegree),
                _ => panic!("vertex {:?} removed", e.vertices),
            }
        }
        assert_eq!(rep.removed.len(), 28 + 1 + 3);
        let (again, rep2) = reduced_multicomplex(&r, &regular, &[1.0], eps, 7, DensityCut::None);
        assert_eq!(again, r);
        assert!(rep2.removed.is_empty());
        assert!(r.validate().is_ok());
    }

    #[test]
    fn collapse_to_nothing_is_stable() {
        let m = Multicomplex::complete(3, &[0, 1, 2, 3]);
        let (r, rep) = reduced_multicomplex(&m, &BTreeSet::new(), &[1.0], 1e-6, 4, DensityCut::None);
        assert_eq!(r.len(), 1);
        assert_eq!(rep.removed.len(), m.len() - 1);
        let (again, rep2) = reduced_multicomplex(&r, &BTreeSet::new(), &[1.0], 1e-6, 4, DensityCut::None);
        assert_eq!(again, r);
        assert!(rep2.removed.is_empty());
    }

    #[test]
    fn energy_complete_and_empty() {
        let clusters = vec![vec![0, 1], vec![2, 3], vec![4, 5]];
        let f = FamilyOfPartitions::from_assignment(3, 6, clusters, |_| 0).unwrap();
        let full = Hypergraph::complete(3, 6);
        let cross = f.cross_sets(3).len() as f64;
        assert!((energy(&f, &[full]) - cross / 20.0).abs() < 1e-12);
        assert_eq!(energy(&f, &[Hypergraph::empty(3, 6)]), 0.0);
    }

    #[test]
    fn copies_simple_patterns() {
        let host = PartiteComplex::binomial(3, 4, &[1.0], 1);
        let single = Pattern { class: vec![0], edges: vec![] };
        assert_eq!(count_complex_copies(&host, &single, &host.parts, 3).unwrap(), 4);
        let tri = Pattern { class: vec![0, 1, 2], edges: vec![vec![0, 1], vec![0, 2], vec![1, 2]] };
        assert_eq!(count_complex_copies(&host, &tri, &host.parts, 3).unwrap(), 64);
        let big = Pattern { class: vec![0; 7], edges: vec![] };
        assert!(matches!(count_complex_copies(&host, &big, &host.parts, 3), Err(TrlError::Cap(_))));
    }

    #[test]
    fn degree_census_complete_and_empty() {
        let host = PartiteComplex::binomial(3, 5, &[1.0], 2);
        let c = degree_census(&host, &host.parts, &[1.0], 0.15);
        assert_eq!(c.histogram, BTreeMap::from([(5, 25)]));
        let mut empty = host.clone();
        empty.layers[0].retain(|e| e.iter().all(|&v| v >= 5));
        let c = degree_census(&empty, &empty.parts, &[1.0], 0.15);
        assert_eq!(c.tuples, 0);
    }

    #[test]
    fn mdl_rejects_bad_arity() {
        let host = PartiteComplex::binomial(3, 3, &[1.0], 3);
        let e = EdgeSet::default();
        let r = mdl_count(&host, Face { parts: &[0, 1], sets: &e }, Face { parts: &[1, 2], sets: &e }, Face { parts: &[], sets: &e });
        assert!(r.is_err());
        let r = mdl_count(&host, Face { parts: &[0, 1], sets: &e }, Face { parts: &[1, 2], sets: &e }, Face { parts: &[1], sets: &e });
        assert_eq!(r.unwrap(), 0);
    }

    #[test]
    fn fine_reach_empty_start() {
        let parts: Vec<Vec<u32>> = (0..4).map(|i| vec![2 * i, 2 * i + 1]).collect();
        let top = Hypergraph::complete(3, 8);
        assert!(fine_reach(&parts, &top, None, &BTreeSet::new()).unwrap().is_empty());
        assert!(fine_reach(&parts[..3], &top, None, &BTreeSet::new()).is_err());
        let r0: BTreeSet<Vec<u32>> = [vec![0, 2]].into_iter().collect();
        let r = fine_reach(&parts, &top, None, &r0).unwrap();
        assert_eq!(r.len(), 4);
    }
}
