//! Slow, independent reference implementations shared by integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use trl_core::{Hypergraph, Vertex};

fn is_edge(g: &Hypergraph, w: &[Vertex]) -> bool {
    let mut s = w.to_vec();
    s.sort_unstable();
    s.dedup();
    s.len() == g.k() && g.edges().binary_search(&s).is_ok()
}

/// Hamiltonicity by trying every vertex order that starts at 0.
pub fn brute_force_ham(g: &Hypergraph) -> bool {
    let n = g.n();
    let k = g.k();
    let mut seq = vec![0 as Vertex];
    let mut used = vec![false; n];
    used[0] = true;
    fn rec(g: &Hypergraph, k: usize, seq: &mut Vec<Vertex>, used: &mut [bool]) -> bool {
        let n = g.n();
        if seq.len() == n {
            return (0..n).all(|i| {
                let w: Vec<Vertex> = (0..k).map(|j| seq[(i + j) % n]).collect();
                is_edge(g, &w)
            });
        }
        for v in 0..n as Vertex {
            if used[v as usize] {
                continue;
            }
            seq.push(v);
            let ok = seq.len() < k || is_edge(g, &seq[seq.len() - k..]);
            if ok {
                used[v as usize] = true;
                if rec(g, k, seq, used) {
                    return true;
                }
                used[v as usize] = false;
            }
            seq.pop();
        }
        false
    }
    rec(g, k, &mut seq, &mut used)
}

/// Number of tight paths extending `root` by `ell` vertices outside `forbidden`, and their end tuples.
pub fn census(g: &Hypergraph, root: &[Vertex], ell: usize, forbidden: &BTreeSet<Vertex>) -> (u64, BTreeMap<Vec<Vertex>, u64>) {
    let k = g.k();
    let mut ends = BTreeMap::new();
    let mut count = 0u64;
    fn rec(g: &Hypergraph, k: usize, seq: &mut Vec<Vertex>, left: usize, forbidden: &BTreeSet<Vertex>, count: &mut u64, ends: &mut BTreeMap<Vec<Vertex>, u64>) {
        if left == 0 {
            *count += 1;
            *ends.entry(seq[seq.len() - (k - 1)..].to_vec()).or_insert(0) += 1;
            return;
        }
        for v in 0..g.n() as Vertex {
            if seq.contains(&v) || forbidden.contains(&v) {
                continue;
            }
            seq.push(v);
            if is_edge(g, &seq[seq.len() - k..]) {
                rec(g, k, seq, left - 1, forbidden, count, ends);
            }
            seq.pop();
        }
    }
    let mut seq = root.to_vec();
    rec(g, k, &mut seq, ell, forbidden, &mut count, &mut ends);
    (count, ends)
}

/// End tuples of tight paths v_0..v_{2k-3}, v_i in parts[i], whose start tuple lies in `r0`.
pub fn chain_ends(parts: &[Vec<Vertex>], top: &Hypergraph, r0: &BTreeSet<Vec<Vertex>>) -> BTreeSet<Vec<Vertex>> {
    let k = top.k();
    let mut out = BTreeSet::new();
    fn rec(parts: &[Vec<Vertex>], top: &Hypergraph, k: usize, seq: &mut Vec<Vertex>, r0: &BTreeSet<Vec<Vertex>>, out: &mut BTreeSet<Vec<Vertex>>) {
        let i = seq.len();
        if i == parts.len() {
            out.insert(seq[seq.len() - (k - 1)..].to_vec());
            return;
        }
        for &v in &parts[i] {
            seq.push(v);
            let ok = if i + 1 == k - 1 {
                r0.contains(&seq[..])
            } else {
                i + 1 < k || is_edge(top, &seq[seq.len() - k..])
            };
            if ok {
                rec(parts, top, k, seq, r0, out);
            }
            seq.pop();
        }
    }
    rec(parts, top, k, &mut Vec::new(), r0, &mut out);
    out
}

type Q = Ratio<i128>;

fn solve(a: &[Vec<Q>], b: &[Q]) -> Option<Vec<Q>> {
    let n = b.len();
    let mut m: Vec<Vec<Q>> = a.iter().zip(b).map(|(row, &bi)| {
        let mut r = row.clone();
        r.push(bi);
        r
    }).collect();
    for c in 0..n {
        let p = (c..n).find(|&r| m[r][c] != Q::from_integer(0))?;
        m.swap(c, p);
        let piv = m[c][c];
        for j in c..=n {
            m[c][j] /= piv;
        }
        for r in 0..n {
            if r != c && m[r][c] != Q::from_integer(0) {
                let f = m[r][c];
                for j in c..=n {
                    let d = f * m[c][j];
                    m[r][j] -= d;
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n]).collect())
}

/// Fractional matching optimum by enumerating every basis of the slack form
/// (edge columns plus one slack per vertex). `w` holds the weights as numerators over `den`.
pub fn lp_optimum_by_bases(m: usize, edges: &[Vec<Vertex>], w: &[i64], den: i64) -> (i128, i128) {
    let cols: Vec<Vec<Q>> = edges
        .iter()
        .map(|e| (0..m).map(|v| Q::from_integer(e.contains(&(v as Vertex)) as i128)).collect())
        .chain((0..m).map(|s| (0..m).map(|v| Q::from_integer((v == s) as i128)).collect()))
        .collect();
    let b: Vec<Q> = w.iter().map(|&x| Q::new(x as i128, den as i128)).collect();
    let total = cols.len();
    let mut best = Q::from_integer(0);
    let mut pick: Vec<usize> = (0..m).collect();
    loop {
        let a: Vec<Vec<Q>> = (0..m).map(|r| pick.iter().map(|&c| cols[c][r]).collect()).collect();
        if let Some(x) = solve(&a, &b) {
            if x.iter().all(|v| *v >= Q::from_integer(0)) {
                let obj: Q = pick.iter().zip(&x).filter(|(&c, _)| c < edges.len()).map(|(_, v)| *v).sum();
                if obj > best {
                    best = obj;
                }
            }
        }
        // next m-combination of 0..total
        let mut i = m;
        loop {
            if i == 0 {
                return (*best.numer(), *best.denom());
            }
            i -= 1;
            if pick[i] < total - m + i {
                pick[i] += 1;
                for j in i + 1..m {
                    pick[j] = pick[j - 1] + 1;
                }
                break;
            }
        }
    }
}
