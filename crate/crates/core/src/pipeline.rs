//! Reservoir-method search for tight Hamilton cycles, its building blocks,
//! and an exact subset DP used as an oracle on small instances.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::comb::{all_distinct, sorted};
use crate::error::{invalid, Result, TrlError};
use crate::hypercore::{
    is_tight_cycle, windows_ok, AbsorberGadget, Hypergraph, ReservoirPath, SkipSearch, TightCycle, TightLink, TightPath, Vertex,
    DEFAULT_SKIP_BUDGET,
};
use crate::regcomplex::Multicomplex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsorberTemplate {
    Direct,
    Spiked { t: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub gamma: f64,
    pub eps: f64,
    pub ell: usize,
    /// Maximum number of internal vertices of a connecting path.
    pub conn_max_len: usize,
    pub template: AbsorberTemplate,
    /// Node cap for each search stage of one attempt.
    pub node_budget: u64,
    pub attempts: usize,
    pub nu_res: f64,
    /// Cover precondition: |L| <= |R| / (l_ratio * conn_max_len).
    pub l_ratio: f64,
    pub max_close_tries: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            gamma: 0.1,
            eps: 0.1,
            ell: 2,
            conn_max_len: 4,
            template: AbsorberTemplate::Direct,
            node_budget: 200_000,
            attempts: 12,
            nu_res: 0.15,
            l_ratio: 4.0,
            max_close_tries: 4_000,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 0.5) {
            return invalid("gamma must lie in (0, 1/2)");
        }
        if self.node_budget == 0 || self.attempts == 0 || self.max_close_tries == 0 {
            return invalid("budgets must be positive");
        }
        if !(0.0..1.0).contains(&self.nu_res) {
            return invalid("nu_res must lie in [0,1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Reservoir,
    AlmostSpanning,
    Cover,
    Absorption,
    Assembly,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Reservoir => "reservoir",
            Stage::AlmostSpanning => "almost_spanning",
            Stage::Cover => "cover",
            Stage::Absorption => "absorption",
            Stage::Assembly => "assembly",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineFailure {
    pub stage: Stage,
    pub cause: String,
    pub nodes: u64,
    pub vertex: Option<Vertex>,
}

impl PipelineFailure {
    fn new(stage: Stage, cause: impl Into<String>, nodes: u64) -> Self {
        PipelineFailure { stage, cause: cause.into(), nodes, vertex: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub attempt: usize,
    pub stage: Stage,
    pub ok: bool,
    pub vertices: usize,
    pub nodes: u64,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub stages: Vec<StageRecord>,
    /// Side extended first while covering leftovers.
    pub first_side: String,
    pub attempts: usize,
}

impl PipelineTrace {
    fn log(&mut self, attempt: usize, stage: Stage, ok: bool, vertices: usize, nodes: u64, detail: impl Into<String>) {
        self.stages.push(StageRecord { attempt, stage, ok, vertices, nodes, detail: detail.into() });
    }

    /// Stages of every attempt appear in pipeline order.
    pub fn ordered(&self) -> bool {
        self.stages.windows(2).all(|w| w[0].attempt < w[1].attempt || (w[0].attempt == w[1].attempt && w[0].stage <= w[1].stage))
    }
}

// ---------------------------------------------------------------- search helpers

struct Ctx<'a> {
    g: &'a Hypergraph,
    k: usize,
    rank: Vec<u32>,
    nodes: u64,
    budget: u64,
}

impl<'a> Ctx<'a> {
    fn new(g: &'a Hypergraph, rank: Option<Vec<u32>>, budget: u64) -> Self {
        let rank = rank.unwrap_or_else(|| (0..g.n() as u32).collect());
        Ctx { g, k: g.k(), rank, nodes: 0, budget }
    }

    fn tick(&mut self) -> bool {
        self.nodes += 1;
        self.nodes <= self.budget
    }

    fn order(&self, mut v: Vec<Vertex>) -> Vec<Vertex> {
        v.sort_by_key(|&x| self.rank[x as usize]);
        v
    }

    fn extends(&self, tail: &[Vertex], v: Vertex) -> bool {
        self.g.extends(tail, v)
    }
}

fn seeded_rank(n: usize, seed: u64) -> Vec<u32> {
    let mut perm: Vec<u32> = (0..n as u32).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut rank = vec![0u32; n];
    for (i, &v) in perm.iter().enumerate() {
        rank[v as usize] = i as u32;
    }
    rank
}

/// Slot pattern: some positions fixed, k-sets of positions that must be edges, fill order.
struct Pattern {
    fixed: Vec<Option<Vertex>>,
    cons: Vec<Vec<usize>>,
    order: Vec<usize>,
}

impl Pattern {
    /// All k-windows of the listed position sequences.
    fn tight(len: usize, fixed: Vec<Option<Vertex>>, seqs: &[Vec<usize>], k: usize, order: Vec<usize>) -> Self {
        let mut cons = Vec::new();
        for s in seqs {
            for w in s.windows(k) {
                let c = w.to_vec();
                if !cons.contains(&c) {
                    cons.push(c);
                }
            }
        }
        debug_assert_eq!(fixed.len(), len);
        Pattern { fixed, cons, order }
    }
}

fn solve_pattern(ctx: &mut Ctx<'_>, pat: &Pattern, blocked: &[bool]) -> Option<Vec<Vertex>> {
    let len = pat.fixed.len();
    let mut val: Vec<Option<Vertex>> = pat.fixed.clone();
    let mut used = blocked.to_vec();
    for v in pat.fixed.iter().flatten() {
        used[*v as usize] = true;
    }
    // constraints completed when each order step is filled
    let mut done_at: Vec<Vec<usize>> = vec![vec![]; pat.order.len()];
    let mut filled = vec![false; len];
    for (i, f) in pat.fixed.iter().enumerate() {
        filled[i] = f.is_some();
    }
    let mut pre_check = Vec::new();
    for (ci, c) in pat.cons.iter().enumerate() {
        if c.iter().all(|&p| filled[p]) {
            pre_check.push(ci);
        }
    }
    for (step, &p) in pat.order.iter().enumerate() {
        filled[p] = true;
        for (ci, c) in pat.cons.iter().enumerate() {
            if c.contains(&p) && c.iter().all(|&q| filled[q]) && !done_at[..step].iter().any(|d| d.contains(&ci)) && !pre_check.contains(&ci) {
                done_at[step].push(ci);
            }
        }
    }
    let check = |val: &[Option<Vertex>], c: &[usize], g: &Hypergraph| -> bool {
        let e: Vec<Vertex> = c.iter().map(|&p| val[p].unwrap()).collect();
        g.has_edge(&e)
    };
    if !pre_check.iter().all(|&ci| check(&val, &pat.cons[ci], ctx.g)) {
        return None;
    }
    fn rec(ctx: &mut Ctx<'_>, pat: &Pattern, done_at: &[Vec<usize>], step: usize, val: &mut Vec<Option<Vertex>>, used: &mut [bool]) -> Option<bool> {
        if step == pat.order.len() {
            return Some(true);
        }
        if !ctx.tick() {
            return None;
        }
        let p = pat.order[step];
        let cands: Vec<Vertex> = match done_at[step].first() {
            Some(&ci) => {
                let others: Vec<Vertex> = pat.cons[ci].iter().filter(|&&q| q != p).map(|&q| val[q].unwrap()).collect();
                if !all_distinct(&others) {
                    return Some(false);
                }
                ctx.g.completions(&others).to_vec()
            }
            None => (0..ctx.g.n() as Vertex).collect(),
        };
        let cands = ctx.order(cands.into_iter().filter(|&v| !used[v as usize]).collect());
        for v in cands {
            val[p] = Some(v);
            let ok = done_at[step].iter().all(|&ci| {
                let e: Vec<Vertex> = pat.cons[ci].iter().map(|&q| val[q].unwrap()).collect();
                all_distinct(&e) && ctx.g.has_edge(&e)
            });
            if ok {
                used[v as usize] = true;
                let r = rec(ctx, pat, done_at, step + 1, val, used);
                used[v as usize] = false;
                match r {
                    Some(true) => return Some(true),
                    None => return None,
                    Some(false) => {}
                }
            }
            val[p] = None;
        }
        Some(false)
    }
    match rec(ctx, pat, &done_at, 0, &mut val, &mut used) {
        Some(true) => Some(val.into_iter().map(|v| v.unwrap()).collect()),
        _ => None,
    }
}

// ---------------------------------------------------------------- connect

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConnectOutcome {
    Found(TightPath),
    Absent,
    Budget,
}

/// Lower bounds on the number of appended vertices needed to reach a state
/// from which `rev(y)` closes the path; relaxed (ignores distinctness).
fn distance_to_target(ctx: &Ctx<'_>, ry: &[Vertex], free: &[bool], max_len: usize) -> FxHashMap<Vec<Vertex>, usize> {
    let k = ctx.k;
    let mut dist: FxHashMap<Vec<Vertex>, usize> = FxHashMap::default();
    let mut queue = VecDeque::new();
    // states s with s ++ ry tight, s over free vertices, filled right to left
    let mut s = vec![0 as Vertex; k - 1];
    fn fill(ctx: &Ctx<'_>, ry: &[Vertex], free: &[bool], s: &mut Vec<Vertex>, pos: usize, out: &mut Vec<Vec<Vertex>>) {
        let k = ctx.k;
        // window starting at s[pos]: s[pos..] ++ ry[..pos+1]
        let mut rest: Vec<Vertex> = s[pos + 1..].to_vec();
        rest.extend_from_slice(&ry[..pos + 1]);
        debug_assert_eq!(rest.len(), k - 1);
        if !all_distinct(&rest) {
            return;
        }
        for &v in ctx.g.completions(&rest) {
            if !free[v as usize] || s[pos + 1..].contains(&v) {
                continue;
            }
            s[pos] = v;
            if pos == 0 {
                out.push(s.clone());
            } else {
                fill(ctx, ry, free, s, pos - 1, out);
            }
        }
    }
    let mut level0 = Vec::new();
    fill(ctx, ry, free, &mut s, k - 2, &mut level0);
    for st in level0 {
        if dist.insert(st.clone(), 0).is_none() {
            queue.push_back(st);
        }
    }
    while let Some(st) = queue.pop_front() {
        let d = dist[&st];
        if d >= max_len {
            continue;
        }
        for &u in ctx.g.completions(&st) {
            if !free[u as usize] || st.contains(&u) {
                continue;
            }
            let mut pred = vec![u];
            pred.extend_from_slice(&st[..k - 2]);
            if !dist.contains_key(&pred) {
                dist.insert(pred.clone(), d + 1);
                queue.push_back(pred);
            }
        }
    }
    dist
}

fn connect_inner(ctx: &mut Ctx<'_>, x: &[Vertex], y: &[Vertex], free: &[bool], max_len: usize) -> ConnectOutcome {
    let k = ctx.k;
    let ry: Vec<Vertex> = y.iter().rev().copied().collect();
    let dist = distance_to_target(ctx, &ry, free, max_len);
    let mut used = vec![false; ctx.g.n()];
    for &v in x.iter().chain(y) {
        used[v as usize] = true;
    }
    let closes = |g: &Hypergraph, seq: &[Vertex]| -> bool {
        let mut t = seq[seq.len() - (k - 1)..].to_vec();
        t.extend_from_slice(&ry);
        windows_ok(g, &t)
    };
    fn rec(
        ctx: &mut Ctx<'_>,
        seq: &mut Vec<Vertex>,
        used: &mut [bool],
        free: &[bool],
        dist: &FxHashMap<Vec<Vertex>, usize>,
        depth: usize,
        target: usize,
        closes: &dyn Fn(&Hypergraph, &[Vertex]) -> bool,
    ) -> Option<bool> {
        let k = ctx.k;
        if depth == target {
            return Some(closes(ctx.g, seq));
        }
        if !ctx.tick() {
            return None;
        }
        let tail = seq[seq.len() - (k - 1)..].to_vec();
        let cands: Vec<Vertex> = ctx.g.completions(&tail).iter().copied().filter(|&v| free[v as usize] && !used[v as usize]).collect();
        for v in ctx.order(cands) {
            let mut st = tail[1..].to_vec();
            st.push(v);
            if depth + 1 >= k - 1 {
                match dist.get(&st) {
                    Some(&d) if d < target - depth => {}
                    _ => continue,
                }
            }
            used[v as usize] = true;
            seq.push(v);
            let r = rec(ctx, seq, used, free, dist, depth + 1, target, closes);
            if r != Some(false) {
                return r;
            }
            seq.pop();
            used[v as usize] = false;
        }
        Some(false)
    }
    let mut seq = x.to_vec();
    for target in 0..=max_len {
        match rec(ctx, &mut seq, &mut used, free, &dist, 0, target, &closes) {
            Some(true) => {
                seq.extend_from_slice(&ry);
                debug_assert!(windows_ok(ctx.g, &seq));
                return ConnectOutcome::Found(TightPath::new(seq));
            }
            None => return ConnectOutcome::Budget,
            Some(false) => seq.truncate(x.len()),
        }
    }
    ConnectOutcome::Absent
}

/// Tight path `x ++ internal ++ rev(y)` with at most `max_len` internal vertices, all outside `avoid`.
pub fn connect(g: &Hypergraph, x: &[Vertex], y: &[Vertex], avoid: &BTreeSet<Vertex>, max_len: usize, budget: u64) -> Result<ConnectOutcome> {
    let k = g.k();
    if x.len() != k - 1 || y.len() != k - 1 {
        return invalid("connect needs two (k-1)-tuples");
    }
    let mut both = x.to_vec();
    both.extend_from_slice(y);
    if !all_distinct(&both) || both.iter().any(|&v| v as usize >= g.n()) {
        return invalid("connect needs disjoint tuples of distinct vertices");
    }
    let mut free = vec![true; g.n()];
    for &v in avoid.iter().chain(&both) {
        if (v as usize) < g.n() {
            free[v as usize] = false;
        }
    }
    let mut ctx = Ctx::new(g, None, budget);
    Ok(connect_inner(&mut ctx, x, y, &free, max_len))
}

// ---------------------------------------------------------------- absorbers

fn direct_pattern(k: usize, a: Option<&[Vertex]>, u: Vertex) -> Pattern {
    let len = 2 * k - 1;
    let mut fixed = vec![None; len];
    fixed[k - 1] = Some(u);
    if let Some(a) = a {
        for (i, &v) in a.iter().enumerate() {
            fixed[i] = Some(v);
        }
    }
    let with: Vec<usize> = (0..len).collect();
    let without: Vec<usize> = (0..len).filter(|&i| i != k - 1).collect();
    let mut order: Vec<usize> = if a.is_some() { vec![] } else { (0..k - 1).rev().collect() };
    order.extend(k..len);
    Pattern::tight(len, fixed, &[with, without], k, order)
}

fn gadget_from_seq(k: usize, seq: Vec<Vertex>) -> AbsorberGadget {
    let u = seq[k - 1];
    let without: Vec<Vertex> = seq.iter().copied().filter(|&v| v != u).collect();
    AbsorberGadget { u, path_with: TightPath::new(seq), path_without: TightPath::new(without) }
}

fn spiked_gadget(ctx: &mut Ctx<'_>, u: Vertex, blocked: &[bool], t: usize, conn_len: usize) -> Option<AbsorberGadget> {
    let k = ctx.k;
    let m = k - 1;
    // slots: ubar, u, x_1..x_t, y_1..y_t, vbar
    let ubar = |i: usize| i;
    let upos = m;
    let xs = |j: usize, i: usize| m + 1 + j * m + i;
    let ys = |j: usize, i: usize| m + 1 + t * m + j * m + i;
    let vbar = |i: usize| m + 1 + 2 * t * m + i;
    let len = m + 1 + 2 * t * m + m;
    let mut fixed = vec![None; len];
    fixed[upos] = Some(u);
    let rev_tuple = |f: &dyn Fn(usize) -> usize| -> Vec<usize> { (0..m).rev().map(f).collect() };
    let tuple = |f: &dyn Fn(usize) -> usize| -> Vec<usize> { (0..m).map(f).collect() };
    let mut seqs = Vec::new();
    let mut s1 = rev_tuple(&ubar);
    s1.push(upos);
    s1.extend(tuple(&|i| xs(0, i)));
    seqs.push(s1);
    let mut s2 = rev_tuple(&ubar);
    s2.extend(tuple(&|i| ys(0, i)));
    seqs.push(s2);
    for j in 0..t {
        let (nx, ny): (Vec<usize>, Vec<usize>) = if j + 1 < t { (tuple(&|i| xs(j + 1, i)), tuple(&|i| ys(j + 1, i))) } else { (tuple(&vbar), tuple(&vbar)) };
        let mut a = rev_tuple(&|i| xs(j, i));
        a.extend(nx);
        let mut b = rev_tuple(&|i| ys(j, i));
        b.extend(ny);
        seqs.push(a);
        seqs.push(b);
    }
    let mut order: Vec<usize> = (0..m).map(ubar).collect();
    for j in 0..t {
        order.extend((0..m).map(|i| xs(j, i)));
        order.extend((0..m).map(|i| ys(j, i)));
    }
    order.extend((0..m).map(vbar));
    let pat = Pattern::tight(len, fixed, &seqs, k, order);
    let val = solve_pattern(ctx, &pat, blocked)?;
    let get = |f: &dyn Fn(usize) -> usize| -> Vec<Vertex> { (0..m).map(|i| val[f(i)]).collect() };
    let mut block2 = blocked.to_vec();
    for &v in &val {
        block2[v as usize] = true;
    }
    let mut inner = Vec::new();
    for j in 0..t {
        let x = get(&|i| xs(j, i));
        let y = get(&|i| ys(j, i));
        let free: Vec<bool> = block2.iter().map(|b| !b).collect();
        match connect_inner(ctx, &x, &y, &free, conn_len) {
            ConnectOutcome::Found(p) => {
                let int = p.seq[m..p.seq.len() - m].to_vec();
                for &v in &int {
                    block2[v as usize] = true;
                }
                inner.push((x, int, y));
            }
            _ => return None,
        }
    }
    let ub = get(&ubar);
    let rub: Vec<Vertex> = ub.iter().rev().copied().collect();
    let mut with = rub.clone();
    with.push(u);
    let mut without = rub;
    let fwd = |(x, int, y): &(Vec<Vertex>, Vec<Vertex>, Vec<Vertex>)| -> Vec<Vertex> {
        let mut s = x.clone();
        s.extend(int);
        s.extend(y.iter().rev());
        s
    };
    for (j, seg) in inner.iter().enumerate() {
        let f = fwd(seg);
        let r: Vec<Vertex> = f.iter().rev().copied().collect();
        if j % 2 == 0 {
            with.extend(&f);
            without.extend(&r);
        } else {
            with.extend(&r);
            without.extend(&f);
        }
    }
    let vb = get(&vbar);
    with.extend(&vb);
    without.extend(&vb);
    Some(AbsorberGadget { u, path_with: TightPath::new(with), path_without: TightPath::new(without) })
}

pub fn build_absorber(g: &Hypergraph, u: Vertex, forbidden: &BTreeSet<Vertex>, template: AbsorberTemplate, budget: u64) -> Option<AbsorberGadget> {
    if forbidden.contains(&u) || u as usize >= g.n() {
        return None;
    }
    let mut blocked = vec![false; g.n()];
    for &v in forbidden {
        if (v as usize) < g.n() {
            blocked[v as usize] = true;
        }
    }
    let mut ctx = Ctx::new(g, None, budget);
    build_absorber_ctx(&mut ctx, u, &blocked, template, 4)
}

fn build_absorber_ctx(ctx: &mut Ctx<'_>, u: Vertex, blocked: &[bool], template: AbsorberTemplate, conn_len: usize) -> Option<AbsorberGadget> {
    let k = ctx.k;
    let gad = match template {
        AbsorberTemplate::Direct => {
            let pat = direct_pattern(k, None, u);
            solve_pattern(ctx, &pat, blocked).map(|seq| gadget_from_seq(k, seq))
        }
        AbsorberTemplate::Spiked { t } => spiked_gadget(ctx, u, blocked, t.max(1), conn_len),
    }?;
    debug_assert!(gad.validate(ctx.g));
    Some(gad)
}

// ---------------------------------------------------------------- reservoir path

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirStats {
    pub vertices: usize,
    pub gadgets: usize,
    /// |V(P_res)| / |R|.
    pub c: f64,
    pub nodes: u64,
}

pub fn build_reservoir_path(
    g: &Hypergraph,
    r: &[Vertex],
    forbidden: &BTreeSet<Vertex>,
    cfg: &PipelineConfig,
) -> std::result::Result<(ReservoirPath, ReservoirStats), PipelineFailure> {
    let mut ctx = Ctx::new(g, Some(seeded_rank(g.n(), cfg.seed)), cfg.node_budget);
    reservoir_ctx(&mut ctx, r, forbidden, cfg)
}

fn reservoir_ctx(
    ctx: &mut Ctx<'_>,
    r: &[Vertex],
    forbidden: &BTreeSet<Vertex>,
    cfg: &PipelineConfig,
) -> std::result::Result<(ReservoirPath, ReservoirStats), PipelineFailure> {
    let g = ctx.g;
    let k = ctx.k;
    let n = g.n();
    if let Some(&v) = r.iter().find(|v| forbidden.contains(v)) {
        return Err(PipelineFailure { vertex: Some(v), ..PipelineFailure::new(Stage::Reservoir, "reservoir vertex is forbidden", 0) });
    }
    let mut blocked = vec![false; n];
    for &v in forbidden.iter().chain(r) {
        blocked[v as usize] = true;
    }
    let mut remaining: Vec<Vertex> = ctx.order(sorted(r));
    remaining.dedup();
    let fail = |ctx: &Ctx<'_>, v: Option<Vertex>, cause: &str| PipelineFailure { vertex: v, ..PipelineFailure::new(Stage::Reservoir, cause, ctx.nodes) };
    if remaining.is_empty() {
        let tuple: Vec<Vertex> = ctx.order((0..n as Vertex).filter(|&v| !blocked[v as usize]).collect()).into_iter().take(k - 1).collect();
        if tuple.len() < k - 1 {
            return Err(fail(ctx, None, "not enough free vertices for a bare tuple"));
        }
        let rp = ReservoirPath::new(k, TightPath::new(tuple), vec![]).unwrap();
        return Ok((rp, ReservoirStats { vertices: k - 1, gadgets: 0, c: 0.0, nodes: ctx.nodes }));
    }
    let mut gadgets: Vec<AbsorberGadget> = Vec::new();
    let mut path: Vec<Vertex>;
    match cfg.template {
        AbsorberTemplate::Direct => {
            let mut first = None;
            for (i, &u) in remaining.iter().enumerate() {
                let pat = direct_pattern(k, None, u);
                if let Some(seq) = solve_pattern(ctx, &pat, &blocked) {
                    first = Some((i, seq));
                    break;
                }
            }
            let Some((i, seq)) = first else { return Err(fail(ctx, Some(remaining[0]), "no direct absorber for any reservoir vertex")) };
            remaining.remove(i);
            for &v in &seq {
                blocked[v as usize] = true;
            }
            gadgets.push(gadget_from_seq(k, seq.clone()));
            path = seq;
            while !remaining.is_empty() {
                path.reverse();
                let (ext, i, tail) = match anchored_step(ctx, &path, &remaining, &mut blocked, cfg.conn_max_len) {
                    Some(x) => x,
                    None => return Err(fail(ctx, Some(remaining[0]), "no anchored gadget within the connector budget")),
                };
                let u = remaining.remove(i);
                path.extend(&ext);
                let mut gseq = path[path.len() - (k - 1)..].to_vec();
                gseq.push(u);
                gseq.extend(&tail);
                gadgets.push(gadget_from_seq(k, gseq));
                path.push(u);
                path.extend(&tail);
            }
        }
        AbsorberTemplate::Spiked { t } => {
            path = Vec::new();
            for &u in &remaining.clone() {
                let mut b = blocked.clone();
                b[u as usize] = false;
                let Some(gad) = spiked_gadget(ctx, u, &b, t.max(1), cfg.conn_max_len) else {
                    return Err(fail(ctx, Some(u), "no spiked absorber"));
                };
                for &v in &gad.path_with.seq {
                    blocked[v as usize] = true;
                }
                if path.is_empty() {
                    path = gad.path_with.seq.clone();
                } else {
                    let x = path[path.len() - (k - 1)..].to_vec();
                    let y: Vec<Vertex> = gad.path_with.start(k).iter().rev().copied().collect();
                    let free: Vec<bool> = blocked.iter().map(|b| !b).collect();
                    match connect_inner(ctx, &x, &y, &free, cfg.conn_max_len) {
                        ConnectOutcome::Found(p) => {
                            let int = &p.seq[k - 1..p.seq.len() - (k - 1)];
                            for &v in int {
                                blocked[v as usize] = true;
                            }
                            path.extend_from_slice(int);
                            path.extend(&gad.path_with.seq);
                        }
                        _ => return Err(fail(ctx, Some(u), "could not connect spiked gadgets")),
                    }
                }
                gadgets.push(gad);
            }
        }
    }
    let rp = ReservoirPath::new(k, TightPath::new(path.clone()), r.to_vec()).map_err(|e| fail(ctx, None, &e.to_string()))?;
    let mut rp = rp;
    if cfg.template != AbsorberTemplate::Direct && gadgets.len() <= 12 {
        rp.skip_witnesses = gadget_witnesses(&path, &gadgets);
    }
    if !windows_ok(g, &rp.base.seq) {
        return Err(fail(ctx, None, "assembled reservoir path is not tight"));
    }
    let vertices = rp.base.len();
    Ok((rp, ReservoirStats { vertices, gadgets: gadgets.len(), c: vertices as f64 / r.len() as f64, nodes: ctx.nodes }))
}

/// Witnesses for every skip set by swapping in each gadget's second path.
fn gadget_witnesses(path: &[Vertex], gadgets: &[AbsorberGadget]) -> BTreeMap<Vec<Vertex>, Vec<Vertex>> {
    let mut out = BTreeMap::new();
    let spans: Vec<(usize, usize)> = gadgets
        .iter()
        .map(|gd| {
            let w = &gd.path_with.seq;
            let start = path.windows(w.len()).position(|s| s == &w[..]).expect("gadget inside path");
            (start, start + w.len())
        })
        .collect();
    for mask in 0u32..1 << gadgets.len() {
        let mut seq = Vec::new();
        let mut at = 0;
        let mut skip = Vec::new();
        for (i, (s, e)) in spans.iter().enumerate() {
            seq.extend_from_slice(&path[at..*s]);
            if mask >> i & 1 == 1 {
                seq.extend(&gadgets[i].path_without.seq);
                skip.push(gadgets[i].u);
            } else {
                seq.extend(&gadgets[i].path_with.seq);
            }
            at = *e;
        }
        seq.extend_from_slice(&path[at..]);
        out.insert(sorted(&skip), seq);
    }
    out
}

/// Extends the end of `path` by up to `max_ext` free vertices (iterative deepening) until a direct
/// gadget for some remaining u anchors on the end tuple. Returns (extension, index of u, c-tuple).
fn anchored_step(ctx: &mut Ctx<'_>, path: &[Vertex], remaining: &[Vertex], blocked: &mut [bool], max_ext: usize) -> Option<(Vec<Vertex>, usize, Vec<Vertex>)> {
    let k = ctx.k;
    fn rec(
        ctx: &mut Ctx<'_>,
        seq: &mut Vec<Vertex>,
        ext: &mut Vec<Vertex>,
        depth: usize,
        target: usize,
        remaining: &[Vertex],
        blocked: &mut [bool],
    ) -> Option<Option<(usize, Vec<Vertex>)>> {
        let k = ctx.k;
        if !ctx.tick() {
            return None;
        }
        let tail = seq[seq.len() - (k - 1)..].to_vec();
        if depth == target {
            for (i, &u) in remaining.iter().enumerate() {
                if !ctx.extends(&tail, u) {
                    continue;
                }
                let pat = direct_pattern(k, Some(&tail), u);
                blocked[u as usize] = false;
                let mut b = blocked.to_vec();
                for &v in &tail {
                    b[v as usize] = false;
                }
                let res = solve_pattern(ctx, &pat, &b);
                blocked[u as usize] = true;
                if let Some(val) = res {
                    return Some(Some((i, val[k..].to_vec())));
                }
                if ctx.nodes > ctx.budget {
                    return None;
                }
            }
            return Some(None);
        }
        let cands: Vec<Vertex> = ctx.g.completions(&tail).iter().copied().filter(|&v| !blocked[v as usize]).collect();
        for v in ctx.order(cands) {
            blocked[v as usize] = true;
            seq.push(v);
            ext.push(v);
            let r = rec(ctx, seq, ext, depth + 1, target, remaining, blocked);
            match r {
                Some(Some(x)) => return Some(Some(x)),
                None => return None,
                Some(None) => {}
            }
            ext.pop();
            seq.pop();
            blocked[v as usize] = false;
        }
        Some(None)
    }
    for target in 0..=max_ext {
        let mut seq = path.to_vec();
        let mut ext = Vec::new();
        match rec(ctx, &mut seq, &mut ext, 0, target, remaining, blocked) {
            Some(Some((i, tail))) => {
                for &v in &tail {
                    blocked[v as usize] = true;
                }
                return Some((ext, i, tail));
            }
            None => return None,
            Some(None) => {}
        }
    }
    let _ = k;
    None
}

// ---------------------------------------------------------------- almost spanning

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quotas {
    pub cluster_of: Vec<usize>,
    pub quota: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extension {
    pub path: TightPath,
    pub leftover: Vec<Vertex>,
    pub consumption: Vec<usize>,
    pub nodes: u64,
    pub stalled: bool,
}

/// Depth-first extension from the end of `start`, fewest onward options first,
/// calling `leaf` at every dead end; stops when `leaf` returns true.
fn extend_search(
    ctx: &mut Ctx<'_>,
    start: &[Vertex],
    blocked: &[bool],
    quotas: Option<&Quotas>,
    leaf: &mut dyn FnMut(&[Vertex], &[usize]) -> bool,
) -> bool {
    let n = ctx.g.n();
    let mut used = blocked.to_vec();
    for &v in start {
        used[v as usize] = true;
    }
    let clusters = quotas.map(|q| q.quota.len()).unwrap_or(0);
    let mut cons = vec![0usize; clusters];
    let mut seq = start.to_vec();
    fn rec(
        ctx: &mut Ctx<'_>,
        seq: &mut Vec<Vertex>,
        used: &mut [bool],
        cons: &mut [usize],
        quotas: Option<&Quotas>,
        free_left: usize,
        leaf: &mut dyn FnMut(&[Vertex], &[usize]) -> bool,
    ) -> Option<bool> {
        let k = ctx.k;
        if !ctx.tick() {
            return None;
        }
        let tail = seq[seq.len() - (k - 1)..].to_vec();
        let ok = |v: Vertex, used: &[bool], cons: &[usize]| !used[v as usize] && quotas.is_none_or(|q| cons[q.cluster_of[v as usize]] < q.quota[q.cluster_of[v as usize]]);
        let mut cands: Vec<(usize, u32, Vertex)> = Vec::new();
        for &v in ctx.g.completions(&tail) {
            if !ok(v, used, cons) {
                continue;
            }
            let mut nt = tail[1..].to_vec();
            nt.push(v);
            let onward = ctx.g.completions(&nt).iter().filter(|&&w| w != v && ok(w, used, cons)).count();
            // dead ends last unless they finish the cover
            let key = if onward == 0 && free_left > 1 { usize::MAX } else { onward };
            cands.push((key, ctx.rank[v as usize], v));
        }
        if cands.is_empty() {
            return Some(leaf(seq, cons));
        }
        cands.sort_unstable();
        for (_, _, v) in cands {
            used[v as usize] = true;
            if let Some(q) = quotas {
                cons[q.cluster_of[v as usize]] += 1;
            }
            seq.push(v);
            let r = rec(ctx, seq, used, cons, quotas, free_left - 1, leaf);
            seq.pop();
            if let Some(q) = quotas {
                cons[q.cluster_of[v as usize]] -= 1;
            }
            used[v as usize] = false;
            if r != Some(false) {
                return r;
            }
        }
        Some(false)
    }
    let free_left = (0..n).filter(|&v| !used[v]).count();
    rec(ctx, &mut seq, &mut used, &mut cons, quotas, free_left, leaf).unwrap_or(false)
}

/// Greedy extension with backtracking, keeping the longest path seen.
pub fn extend_almost_spanning(
    g: &Hypergraph,
    start: &TightPath,
    avoid: &BTreeSet<Vertex>,
    quotas: Option<&Quotas>,
    cfg: &PipelineConfig,
) -> Extension {
    let mut ctx = Ctx::new(g, Some(seeded_rank(g.n(), cfg.seed)), cfg.node_budget);
    let mut blocked = vec![false; g.n()];
    for &v in avoid {
        blocked[v as usize] = true;
    }
    let coverable = (0..g.n()).filter(|&v| !blocked[v] && !start.seq.contains(&(v as Vertex))).count();
    let base = start.len();
    let mut best: (Vec<Vertex>, Vec<usize>) = (start.seq.clone(), vec![0; quotas.map(|q| q.quota.len()).unwrap_or(0)]);
    let full = extend_search(&mut ctx, &start.seq, &blocked, quotas, &mut |seq, cons| {
        if seq.len() > best.0.len() {
            best = (seq.to_vec(), cons.to_vec());
        }
        seq.len() - base == coverable
    });
    let on: BTreeSet<Vertex> = best.0.iter().copied().collect();
    let leftover: Vec<Vertex> = (0..g.n() as Vertex).filter(|v| !blocked[*v as usize] && !on.contains(v)).collect();
    debug_assert!(windows_ok(g, &best.0));
    Extension { path: TightPath::new(best.0), leftover, consumption: best.1, nodes: ctx.nodes, stalled: !full }
}

// ---------------------------------------------------------------- cover and close

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloseReport {
    pub absorbed: Vec<Vertex>,
    /// Reservoir vertices reused by the cover and closing paths.
    pub reused: Vec<Vertex>,
    pub sides: Vec<String>,
    pub nodes: u64,
}

fn absorb_one(ctx: &mut Ctx<'_>, seq: &[Vertex], target: Vertex, free: &[bool], max_len: usize) -> Option<Vec<Vertex>> {
    let k = ctx.k;
    fn rec(ctx: &mut Ctx<'_>, seq: &mut Vec<Vertex>, used: &mut Vec<Vertex>, target: Vertex, free: &[bool], left: usize) -> Option<bool> {
        let k = ctx.k;
        if !ctx.tick() {
            return None;
        }
        let tail = seq[seq.len() - (k - 1)..].to_vec();
        if ctx.extends(&tail, target) {
            seq.push(target);
            return Some(true);
        }
        if left == 0 {
            return Some(false);
        }
        let cands: Vec<Vertex> = ctx.g.completions(&tail).iter().copied().filter(|&v| free[v as usize] && !used.contains(&v)).collect();
        for v in ctx.order(cands) {
            used.push(v);
            seq.push(v);
            match rec(ctx, seq, used, target, free, left - 1) {
                Some(false) => {}
                r => return r,
            }
            seq.pop();
            used.pop();
        }
        Some(false)
    }
    let mut s = seq[seq.len() - (k - 1)..].to_vec();
    let l0 = s.len();
    let mut used = Vec::new();
    match rec(ctx, &mut s, &mut used, target, free, max_len) {
        Some(true) => Some(s[l0..].to_vec()),
        _ => None,
    }
}

/// Absorbs the leftover vertices through the reservoir, closes the cycle, and
/// re-routes the reservoir path off the reused vertices. `p_almost` must start with `pres.base`.
pub fn cover_and_close(
    g: &Hypergraph,
    p_almost: &TightPath,
    pres: &ReservoirPath,
    leftover: &[Vertex],
    cfg: &PipelineConfig,
) -> std::result::Result<(TightCycle, CloseReport), PipelineFailure> {
    let mut ctx = Ctx::new(g, Some(seeded_rank(g.n(), cfg.seed)), cfg.node_budget);
    cover_ctx(&mut ctx, p_almost, pres, leftover, cfg)
}

fn cover_ctx(
    ctx: &mut Ctx<'_>,
    p_almost: &TightPath,
    pres: &ReservoirPath,
    leftover: &[Vertex],
    cfg: &PipelineConfig,
) -> std::result::Result<(TightCycle, CloseReport), PipelineFailure> {
    let g = ctx.g;
    let k = ctx.k;
    let n = g.n();
    let fail = |ctx: &Ctx<'_>, stage: Stage, cause: &str| PipelineFailure::new(stage, cause, ctx.nodes);
    if !p_almost.seq.starts_with(&pres.base.seq) {
        return Err(fail(ctx, Stage::Cover, "almost-spanning path does not start with the reservoir path"));
    }
    let r = &pres.reservoir;
    if !leftover.is_empty() && leftover.len() as f64 > r.len() as f64 / (cfg.l_ratio * cfg.conn_max_len.max(1) as f64) {
        return Err(fail(ctx, Stage::Cover, "leftover too large for the reservoir"));
    }
    let mut free = vec![false; n];
    for &v in r {
        free[v as usize] = true;
    }
    let mut front: Vec<Vertex> = Vec::new(); // v-side additions, outward order
    let mut back: Vec<Vertex> = Vec::new();
    let mut sides = Vec::new();
    let mut reused = Vec::new();
    let mut absorbed = Vec::new();
    for (i, &l) in leftover.iter().enumerate() {
        let w_side = i % 2 == 0;
        sides.push(if w_side { "w".to_string() } else { "v".to_string() });
        let end_seq: Vec<Vertex> = if w_side {
            p_almost.seq.iter().chain(&back).copied().collect()
        } else {
            let mut s: Vec<Vertex> = front.iter().rev().copied().chain(p_almost.seq.iter().copied()).collect();
            s.reverse();
            s
        };
        let Some(added) = absorb_one(ctx, &end_seq, l, &free, cfg.conn_max_len) else {
            return Err(PipelineFailure { vertex: Some(l), ..fail(ctx, Stage::Cover, "could not absorb leftover vertex") });
        };
        for &v in &added {
            if v != l {
                free[v as usize] = false;
                reused.push(v);
            }
        }
        absorbed.push(l);
        if w_side {
            back.extend(&added);
        } else {
            front.extend(&added);
        }
    }
    let whole: Vec<Vertex> = front.iter().rev().copied().chain(p_almost.seq.iter().copied()).chain(back.iter().copied()).collect();
    let x = whole[whole.len() - (k - 1)..].to_vec();
    let y: Vec<Vertex> = whole[..k - 1].iter().rev().copied().collect();
    let close_len = cfg.conn_max_len.max(k - 1).min(free.iter().filter(|&&f| f).count());
    let int = match connect_inner(ctx, &x, &y, &free, close_len) {
        ConnectOutcome::Found(p) => p.seq[k - 1..p.seq.len() - (k - 1)].to_vec(),
        ConnectOutcome::Absent => return Err(fail(ctx, Stage::Cover, "no closing connection through the reservoir")),
        ConnectOutcome::Budget => return Err(fail(ctx, Stage::Cover, "closing connection ran out of budget")),
    };
    reused.extend(&int);
    let skip = sorted(&reused);
    let rerouted = match pres.skip_witnesses.get(&skip) {
        Some(w) => w.clone(),
        None => match pres.skip_path(g, &skip, DEFAULT_SKIP_BUDGET) {
            SkipSearch::Found(w) => w,
            _ => return Err(fail(ctx, Stage::Absorption, "reservoir path cannot skip the reused vertices")),
        },
    };
    let mut cyc: Vec<Vertex> = front.iter().rev().copied().collect();
    cyc.extend(&rerouted);
    cyc.extend_from_slice(&p_almost.seq[pres.base.len()..]);
    cyc.extend(&back);
    cyc.extend(&int);
    if cyc.len() != n || !is_tight_cycle(g, &cyc).unwrap_or(false) {
        return Err(fail(ctx, Stage::Assembly, "assembled sequence is not a tight Hamilton cycle"));
    }
    Ok((TightCycle { cyc }, CloseReport { absorbed, reused: skip, sides, nodes: ctx.nodes }))
}

// ---------------------------------------------------------------- orchestration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonResult {
    pub cycle: Option<TightCycle>,
    pub failure: Option<PipelineFailure>,
    pub trace: PipelineTrace,
}

pub fn attempt_seed(base: u64, attempt: usize) -> u64 {
    base ^ (attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn find_tight_hamilton(g: &Hypergraph, cfg: &PipelineConfig) -> HamiltonResult {
    let mut trace = PipelineTrace { first_side: "w".into(), ..Default::default() };
    let n = g.n();
    let k = g.k();
    if let Err(e) = cfg.validate() {
        return HamiltonResult { cycle: None, failure: Some(PipelineFailure::new(Stage::Reservoir, e.to_string(), 0)), trace };
    }
    if n <= k {
        return HamiltonResult { cycle: None, failure: Some(PipelineFailure::new(Stage::Reservoir, "n <= k: no tight cycle is defined", 0)), trace };
    }
    let mut last = None;
    for attempt in 0..cfg.attempts {
        trace.attempts = attempt + 1;
        let seed = attempt_seed(cfg.seed, attempt);
        let mut acfg = *cfg;
        acfg.seed = seed;
        let rank = seeded_rank(n, seed);
        let mut order: Vec<Vertex> = (0..n as Vertex).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.rotate_left(17)));
        let size = ((cfg.nu_res * n as f64).ceil() as usize).min(n.saturating_sub(2 * k));
        let r: Vec<Vertex> = sorted(&order[..size]);
        let mut ctx = Ctx::new(g, Some(rank.clone()), cfg.node_budget);
        let (pres, stats) = match reservoir_ctx(&mut ctx, &r, &BTreeSet::new(), &acfg) {
            Ok(x) => x,
            Err(f) => {
                trace.log(attempt, Stage::Reservoir, false, 0, f.nodes, f.cause.clone());
                last = Some(f);
                continue;
            }
        };
        trace.log(attempt, Stage::Reservoir, true, stats.vertices, stats.nodes, format!("|R|={} c={:.2}", r.len(), stats.c));
        let blocked = vec![false; n];
        let max_l = (r.len() as f64 / (cfg.l_ratio * cfg.conn_max_len.max(1) as f64)).floor() as usize;
        let mut ext_ctx = Ctx::new(g, Some(rank.clone()), cfg.node_budget);
        let mut close_ctx = Ctx::new(g, Some(rank), cfg.node_budget);
        let mut tries = 0usize;
        let mut best_left = usize::MAX;
        let mut found: Option<(TightCycle, CloseReport, usize)> = None;
        let mut last_close: Option<PipelineFailure> = None;
        extend_search(&mut ext_ctx, &pres.base.seq, &blocked, None, &mut |seq, _| {
            let left = n - seq.len();
            best_left = best_left.min(left);
            if left > max_l || tries >= cfg.max_close_tries {
                return tries >= cfg.max_close_tries;
            }
            tries += 1;
            let on: BTreeSet<Vertex> = seq.iter().copied().collect();
            let leftover: Vec<Vertex> = (0..n as Vertex).filter(|v| !on.contains(v)).collect();
            close_ctx.nodes = 0;
            match cover_ctx(&mut close_ctx, &TightPath::new(seq.to_vec()), &pres, &leftover, &acfg) {
                Ok((c, rep)) => {
                    found = Some((c, rep, seq.len()));
                    true
                }
                Err(f) => {
                    last_close = Some(f);
                    false
                }
            }
        });
        match found {
            Some((cycle, rep, covered)) => {
                trace.log(attempt, Stage::AlmostSpanning, true, covered - pres.base.len(), ext_ctx.nodes, format!("leftover {}", rep.absorbed.len()));
                trace.log(attempt, Stage::Cover, true, rep.absorbed.len() + rep.reused.len(), rep.nodes, format!("sides {:?}", rep.sides));
                trace.log(attempt, Stage::Absorption, true, rep.reused.len(), 0, "reservoir re-routed");
                trace.log(attempt, Stage::Assembly, true, n, 0, "verified");
                return HamiltonResult { cycle: Some(cycle), failure: None, trace };
            }
            None => {
                let f = if tries == 0 {
                    PipelineFailure::new(Stage::AlmostSpanning, format!("no extension left at most {max_l} vertices (best leftover {best_left})"), ext_ctx.nodes)
                } else {
                    let mut f = last_close.unwrap_or_else(|| PipelineFailure::new(Stage::Cover, "no close attempt succeeded", 0));
                    f.cause = format!("{} after {tries} close attempts", f.cause);
                    f
                };
                trace.log(attempt, Stage::AlmostSpanning, tries > 0, n.saturating_sub(best_left), ext_ctx.nodes, format!("best leftover {best_left}"));
                if tries > 0 {
                    trace.log(attempt, f.stage.max(Stage::Cover), false, 0, f.nodes, f.cause.clone());
                }
                last = Some(f);
            }
        }
    }
    HamiltonResult { cycle: None, failure: last, trace }
}

// ---------------------------------------------------------------- exact oracle

/// Largest n for which the exact DP is attempted at uniformity k.
pub fn exact_cap(k: usize) -> usize {
    let budget: f64 = (1u64 << 14) as f64 * 196.0;
    (k + 1..=40).take_while(|&n| 2f64.powi(n as i32) * (n as f64).powi(k as i32 - 1) <= budget).last().unwrap_or(k + 1)
}

/// Exact tight Hamiltonicity by DP over (visited set, last k-1 window), vertex 0 first.
pub fn exact_tight_ham(g: &Hypergraph, cap: Option<usize>) -> Result<Option<TightCycle>> {
    let (n, k) = (g.n(), g.k());
    if n <= k {
        return Err(TrlError::Degenerate(format!("n = {n} <= k = {k}")));
    }
    let cap = cap.unwrap_or_else(|| exact_cap(k));
    if n > cap {
        return Err(TrlError::Cap(format!("n = {n} exceeds the exact cap {cap}")));
    }
    let m = k - 1;
    let tuples = n.pow(m as u32);
    let words = tuples.div_ceil(64);
    let enc = |t: &[Vertex]| t.iter().fold(0usize, |a, &v| a * n + v as usize);
    let dec = |mut x: usize| {
        let mut t = vec![0 as Vertex; m];
        for i in (0..m).rev() {
            t[i] = (x % n) as Vertex;
            x /= n;
        }
        t
    };
    let full = (1usize << n) - 1;
    // start tuples (0, a_2, ..., a_{k-1})
    let mut starts: Vec<Vec<Vertex>> = Vec::new();
    fn gen(n: usize, m: usize, cur: &mut Vec<Vertex>, out: &mut Vec<Vec<Vertex>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for v in 1..n as Vertex {
            if !cur.contains(&v) {
                cur.push(v);
                gen(n, m, cur, out);
                cur.pop();
            }
        }
    }
    gen(n, m, &mut vec![0], &mut starts);
    for st in starts {
        let mut dp = vec![0u64; (full + 1) * words];
        let smask = st.iter().fold(0usize, |a, &v| a | 1 << v);
        let si = enc(&st);
        dp[smask * words + si / 64] |= 1 << (si % 64);
        for mask in 0..=full {
            if mask & smask != smask || mask == full {
                continue;
            }
            for wi in 0..words {
                let mut bits = dp[mask * words + wi];
                while bits != 0 {
                    let b = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    let t = dec(wi * 64 + b);
                    for &c in g.completions(&t) {
                        if mask >> c & 1 == 1 {
                            continue;
                        }
                        let mut nt = t[1..].to_vec();
                        nt.push(c);
                        let ni = enc(&nt);
                        dp[(mask | 1 << c) * words + ni / 64] |= 1 << (ni % 64);
                    }
                }
            }
        }
        // close: last window ++ start window must be tight
        for wi in 0..words {
            let mut bits = dp[full * words + wi];
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let t = dec(wi * 64 + b);
                if m >= 2 && t[m - 1] < st[1] {
                    continue; // the reflection starts with a smaller second vertex
                }
                let mut wrap = t.clone();
                wrap.extend_from_slice(&st);
                if !windows_ok(g, &wrap) {
                    continue;
                }
                // walk back through the table
                let mut seq_rev: Vec<Vertex> = Vec::new();
                let mut cur_t = t.clone();
                let mut cur_mask = full;
                while cur_mask != smask {
                    let c = cur_t[m - 1];
                    seq_rev.push(c);
                    let pmask = cur_mask & !(1 << c);
                    let mut next = None;
                    for x in 0..n as Vertex {
                        if pmask >> x & 1 == 0 {
                            continue;
                        }
                        let mut pt = vec![x];
                        pt.extend_from_slice(&cur_t[..m - 1]);
                        if !all_distinct(&pt) {
                            continue;
                        }
                        let pi = enc(&pt);
                        if dp[pmask * words + pi / 64] >> (pi % 64) & 1 == 1 && g.extends(&pt, c) {
                            next = Some(pt);
                            break;
                        }
                    }
                    cur_t = next.expect("dp predecessor exists");
                    cur_mask = pmask;
                }
                let mut cyc = st.clone();
                cyc.extend(seq_rev.into_iter().rev());
                debug_assert!(is_tight_cycle(g, &cyc).unwrap_or(false));
                return Ok(Some(TightCycle { cyc }));
            }
        }
    }
    let _ = tuples;
    Ok(None)
}

// ---------------------------------------------------------------- links

/// A walk whose k-windows follow e_{1,u}, …, e_{k-1,u}, e_{k-1,v}, …, e_{1,v}
/// (each used one or more times), from the order of u to the order of v.
pub fn link_walk(m: &Multicomplex, l: &TightLink) -> Option<Vec<Vertex>> {
    let k = m.k();
    let mut seqe: Vec<Vec<Vertex>> = l.e_u.iter().map(|&id| m.get(id).map(|e| e.vertices.clone())).collect::<Option<_>>()?;
    seqe.extend(l.e_v.iter().rev().map(|&id| m.get(id).map(|e| e.vertices.clone())).collect::<Option<Vec<_>>>()?);
    let verts: Vec<Vertex> = {
        let mut v: Vec<Vertex> = seqe.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let start = l.u.order.clone();
    let goal = l.v.order.clone();
    let last = seqe.len() - 1;
    let mut prev: FxHashMap<(Vec<Vertex>, usize), (Vec<Vertex>, usize)> = FxHashMap::default();
    let mut queue = VecDeque::new();
    // the first window must be e_{1,u}
    for &x in &verts {
        let mut w = start.clone();
        w.push(x);
        if sorted(&w) == seqe[0] {
            let st = (w[1..].to_vec(), 0usize);
            if !prev.contains_key(&st) {
                prev.insert(st.clone(), (start.clone(), usize::MAX));
                queue.push_back(st);
            }
        }
    }
    while let Some((t, j)) = queue.pop_front() {
        if j == last && t == goal {
            let mut walk = vec![t.clone()];
            let mut cur = (t, j);
            while let Some(p) = prev.get(&cur) {
                if p.1 == usize::MAX {
                    break;
                }
                walk.push(p.0.clone());
                cur = p.clone();
            }
            walk.reverse();
            let mut out = start.clone();
            for w in &walk {
                out.push(w[k - 2]);
            }
            return Some(out);
        }
        for &x in &verts {
            let mut w = t.clone();
            w.push(x);
            let s = sorted(&w);
            for nj in [j, j + 1] {
                if nj <= last && s == seqe[nj] {
                    let st = (w[1..].to_vec(), nj);
                    if !prev.contains_key(&st) {
                        prev.insert(st.clone(), (t.clone(), j));
                        queue.push_back(st);
                    }
                }
            }
        }
    }
    None
}
