//! Small combinatorics helpers shared by the enumerators.

pub fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Calls `f` on every k-subset of `0..n` in colexicographic order.
pub fn for_each_colex(n: usize, k: usize, mut f: impl FnMut(&[u32])) {
    if k > n {
        return;
    }
    if k == 0 {
        f(&[]);
        return;
    }
    let mut c: Vec<u32> = (0..k as u32).collect();
    loop {
        f(&c);
        let mut i = 0;
        while i < k {
            let cap = if i + 1 < k { c[i + 1] } else { n as u32 };
            if c[i] + 1 < cap {
                break;
            }
            i += 1;
        }
        if i == k {
            return;
        }
        c[i] += 1;
        for (j, slot) in c.iter_mut().enumerate().take(i) {
            *slot = j as u32;
        }
    }
}

/// Lexicographic k-subsets of an arbitrary sorted ground list.
pub fn for_each_subset_of(ground: &[u32], k: usize, mut f: impl FnMut(&[u32])) {
    let m = ground.len();
    if k > m {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut buf = vec![0u32; k];
    loop {
        for (b, &i) in buf.iter_mut().zip(&idx) {
            *b = ground[i];
        }
        f(&buf);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < m - k + i {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub fn subsets_of(ground: &[u32], k: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for_each_subset_of(ground, k, |s| out.push(s.to_vec()));
    out
}

/// All orderings of `items` in lexicographic order of positions.
pub fn permutations(items: &[u32]) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(items.len());
    let mut used = vec![false; items.len()];
    fn rec(items: &[u32], used: &mut [bool], cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == items.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..items.len() {
            if !used[i] {
                used[i] = true;
                cur.push(items[i]);
                rec(items, used, cur, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    rec(items, &mut used, &mut cur, &mut out);
    out
}

pub fn sorted(v: &[u32]) -> Vec<u32> {
    let mut s = v.to_vec();
    s.sort_unstable();
    s
}

pub fn all_distinct(v: &[u32]) -> bool {
    let s = sorted(v);
    s.windows(2).all(|w| w[0] != w[1])
}
