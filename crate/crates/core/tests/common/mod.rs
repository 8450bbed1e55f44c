//! Brute-force reference procedures shared by the integration tests. None of
//! these call into the library beyond `Graph` accessors.
#![allow(dead_code)]

use std::collections::HashSet;

use clique_factor::{Graph, Tiling};
use rand::Rng;

pub fn adj_masks(g: &Graph) -> Vec<u64> {
    assert!(g.n() <= 64);
    (0..g.n())
        .map(|u| (0..g.n()).filter(|&v| g.has_edge(u, v)).fold(0u64, |m, v| m | 1 << v))
        .collect()
}

struct Cover<'a> {
    adj: &'a [u64],
    r: usize,
    failed: HashSet<u64>,
}

impl Cover<'_> {
    /// Cover `free`, branching on the free vertex with the fewest free neighbours.
    fn cover(&mut self, free: u64) -> bool {
        if free == 0 {
            return true;
        }
        if self.failed.contains(&free) {
            return false;
        }
        let mut best = (u32::MAX, 0usize);
        let mut f = free;
        while f != 0 {
            let v = f.trailing_zeros() as usize;
            f &= f - 1;
            best = best.min(((self.adj[v] & free).count_ones(), v));
        }
        let v = best.1;
        let ok = self.extend(free & !(1 << v), self.adj[v] & free, self.r - 1);
        if !ok {
            self.failed.insert(free);
        }
        ok
    }

    fn extend(&mut self, free: u64, cand: u64, need: usize) -> bool {
        if need == 0 {
            return self.cover(free);
        }
        if (cand.count_ones() as usize) < need {
            return false;
        }
        let mut c = cand;
        while c != 0 {
            let w = c.trailing_zeros() as usize;
            c &= c - 1;
            // only larger labels from here on, so each clique is tried once
            if self.extend(free & !(1 << w), c & self.adj[w], need - 1) {
                return true;
            }
        }
        false
    }
}

/// Does `g` have a K_r-factor? Backtracking with memoised dead ends.
pub fn has_factor(g: &Graph, r: usize) -> bool {
    let n = g.n();
    if r == 0 || !n.is_multiple_of(r) {
        return false;
    }
    let adj = adj_masks(g);
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    Cover {
        adj: &adj,
        r,
        failed: HashSet::new(),
    }
    .cover(all)
}

/// Every member is an r-clique of `g`, members are disjoint, and together they cover V.
pub fn is_factor_of(g: &Graph, t: &Tiling, r: usize) -> bool {
    let mut seen = vec![false; g.n()];
    for c in t.cliques() {
        if c.len() != r {
            return false;
        }
        for (i, &u) in c.iter().enumerate() {
            if u >= g.n() || seen[u] {
                return false;
            }
            seen[u] = true;
            for &v in &c[i + 1..] {
                if !g.has_edge(u, v) {
                    return false;
                }
            }
        }
    }
    seen.iter().all(|&b| b)
}

/// Maximum matching size by memoised recursion over vertex subsets.
pub fn brute_matching(g: &Graph) -> usize {
    let n = g.n();
    assert!(n <= 20);
    let adj = adj_masks(g);
    let mut memo = vec![u8::MAX; 1 << n];
    fn go(mask: u32, adj: &[u64], memo: &mut [u8]) -> u8 {
        if mask == 0 {
            return 0;
        }
        if memo[mask as usize] != u8::MAX {
            return memo[mask as usize];
        }
        let v = mask.trailing_zeros();
        let rest = mask & !(1 << v);
        let mut best = go(rest, adj, memo);
        let mut nb = rest & adj[v as usize] as u32;
        while nb != 0 {
            let w = nb.trailing_zeros();
            nb &= nb - 1;
            best = best.max(1 + go(rest & !(1 << w), adj, memo));
        }
        memo[mask as usize] = best;
        best
    }
    go(((1u64 << n) - 1) as u32, &adj, &mut memo) as usize
}

/// Components of `g - removed`, each sorted.
pub fn components(g: &Graph, removed: &[usize]) -> Vec<Vec<usize>> {
    let n = g.n();
    let mut seen = vec![false; n];
    for &v in removed {
        seen[v] = true;
    }
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut i = 0;
        while i < comp.len() {
            let u = comp[i];
            i += 1;
            for w in 0..n {
                if !seen[w] && g.has_edge(u, w) {
                    seen[w] = true;
                    comp.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// `g - s` has more odd components than `|s|`.
pub fn tutte_violated(g: &Graph, s: &[usize]) -> bool {
    let mut t = s.to_vec();
    t.sort_unstable();
    t.dedup();
    if t.len() != s.len() || t.iter().any(|&v| v >= g.n()) {
        return false;
    }
    components(g, s).iter().filter(|c| c.len() % 2 == 1).count() > s.len()
}

pub fn is_independent(g: &Graph, set: &[usize]) -> bool {
    set.iter()
        .enumerate()
        .all(|(i, &u)| set[i + 1..].iter().all(|&v| u != v && !g.has_edge(u, v)))
}

/// `G(n, p)` resampled until the minimum degree reaches `min_deg`.
pub fn random_graph_min_degree<R: Rng>(n: usize, p: f64, min_deg: usize, rng: &mut R) -> Graph {
    loop {
        let mut g = Graph::empty(n);
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(p) {
                    g.add_edge(u, v);
                }
            }
        }
        if (0..n).all(|v| g.degree(v) >= min_deg) {
            return g;
        }
    }
}

/// Smallest integer at least `(1 - 1/r) n`.
pub fn hs_threshold(n: usize, r: usize) -> usize {
    ((r - 1) * n).div_ceil(r)
}

/// Per-part counts of `clique` under the part labelling `part_of`.
pub fn type_of(part_of: &[usize], parts: usize, clique: &[usize]) -> Vec<usize> {
    let mut t = vec![0; parts];
    for &v in clique {
        t[part_of[v]] += 1;
    }
    t
}

/// Exhaustive search for vertex-disjoint cliques whose i-th member has type `pattern[i]`.
pub fn brute_pattern(g: &Graph, part_of: &[usize], pattern: &[Vec<usize>]) -> bool {
    fn go(g: &Graph, part_of: &[usize], pattern: &[Vec<usize>], used: &mut Vec<bool>, cur: &mut Vec<usize>) -> bool {
        let Some(ty) = pattern.first() else { return true };
        let r: usize = ty.iter().sum();
        if cur.len() == r {
            if type_of(part_of, ty.len(), cur) != *ty {
                return false;
            }
            let saved = std::mem::take(cur);
            let ok = go(g, part_of, &pattern[1..], used, cur);
            *cur = saved;
            return ok;
        }
        let start = cur.last().map_or(0, |&v| v + 1);
        for v in start..g.n() {
            if used[v] || !cur.iter().all(|&u| g.has_edge(u, v)) {
                continue;
            }
            if cur.iter().filter(|&&u| part_of[u] == part_of[v]).count() >= ty[part_of[v]] {
                continue;
            }
            used[v] = true;
            cur.push(v);
            let ok = go(g, part_of, pattern, used, cur);
            cur.pop();
            used[v] = false;
            if ok {
                return true;
            }
        }
        false
    }
    go(g, part_of, pattern, &mut vec![false; g.n()], &mut Vec::new())
}
