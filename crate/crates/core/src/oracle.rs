//! Exhaustive ground-truth procedures. Everything here is exponential and
//! guarded by an explicit node budget; running out of budget is reported as an
//! error, never as a negative answer.

use std::collections::HashSet;

use thiserror::Error;

use crate::bitset::BitSet;
use crate::graph::{below_density, Clique, Graph, Partition, Rational, Tiling};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("search budget of {0} nodes exhausted")]
    BudgetExceeded(u64),
}

pub const DEFAULT_BUDGET: u64 = 20_000_000;

// bound on memoised failure states, to keep memory flat on long searches
const MEMO_CAP: usize = 1 << 21;

struct Budget {
    left: u64,
    total: u64,
}

impl Budget {
    fn new(total: u64) -> Self {
        Budget { left: total, total }
    }

    fn tick(&mut self) -> Result<(), OracleError> {
        if self.left == 0 {
            return Err(OracleError::BudgetExceeded(self.total));
        }
        self.left -= 1;
        Ok(())
    }
}

/// All `r`-cliques of `g`, lexicographic.
pub fn enumerate_kr(g: &Graph, r: usize) -> Vec<Clique> {
    enumerate_kr_within(g, r, &BitSet::full(g.n()))
}

/// All `r`-cliques of `g[within]`, lexicographic.
pub fn enumerate_kr_within(g: &Graph, r: usize, within: &BitSet) -> Vec<Clique> {
    let mut out = Vec::new();
    if r == 0 {
        return out;
    }
    let mut cur = Vec::with_capacity(r);
    extend_cliques(g, r, within, &mut cur, &mut out);
    out
}

fn extend_cliques(g: &Graph, r: usize, cand: &BitSet, cur: &mut Vec<usize>, out: &mut Vec<Clique>) {
    if cur.len() == r {
        out.push(cur.clone());
        return;
    }
    let need = r - cur.len();
    if cand.count() < need {
        return;
    }
    for v in cand.iter() {
        let mut next = cand.intersection(g.neighbors(v));
        next.clear_through(v);
        cur.push(v);
        extend_cliques(g, r, &next, cur, out);
        cur.pop();
    }
}

/// Some `r`-clique of `g` containing all of `base` and otherwise drawn from `pool`.
pub fn find_clique_extending(g: &Graph, base: &[usize], pool: &BitSet, r: usize) -> Option<Clique> {
    if base.len() > r || !g.is_clique(base) {
        return None;
    }
    let cand = g.common_neighbors(base, pool);
    let rest = enumerate_kr_within(g, r - base.len(), &cand);
    if base.len() == r {
        return Some(sorted(base.to_vec()));
    }
    rest.into_iter().next().map(|mut c| {
        c.extend_from_slice(base);
        sorted(c)
    })
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

pub fn oracle_kr_factor(g: &Graph, r: usize) -> Result<Option<Tiling>, OracleError> {
    oracle_kr_factor_with_budget(g, r, DEFAULT_BUDGET)
}

/// Backtracking search for a `K_r`-factor, branching on the uncovered vertex
/// lying in the fewest surviving cliques. Failed covered-sets are memoised.
pub fn oracle_kr_factor_with_budget(g: &Graph, r: usize, budget: u64) -> Result<Option<Tiling>, OracleError> {
    let n = g.n();
    if r == 0 || !n.is_multiple_of(r) {
        return Ok(None);
    }
    if n == 0 {
        return Ok(Some(Tiling::default()));
    }
    if r == 1 {
        return Ok(Some(Tiling::new((0..n).map(|v| vec![v]).collect())));
    }
    let cliques = enumerate_kr(g, r);
    let mut by_vertex: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, c) in cliques.iter().enumerate() {
        for &v in c {
            by_vertex[v].push(i);
        }
    }
    let mut search = FactorSearch {
        cliques: &cliques,
        by_vertex: &by_vertex,
        covered: BitSet::new(n),
        chosen: Vec::new(),
        failed: HashSet::new(),
        budget: Budget::new(budget),
    };
    if search.go()? {
        Ok(Some(Tiling::new(search.chosen.iter().map(|&i| cliques[i].clone()).collect())))
    } else {
        Ok(None)
    }
}

struct FactorSearch<'a> {
    cliques: &'a [Clique],
    by_vertex: &'a [Vec<usize>],
    covered: BitSet,
    chosen: Vec<usize>,
    failed: HashSet<BitSet>,
    budget: Budget,
}

impl FactorSearch<'_> {
    fn alive(&self, c: usize) -> bool {
        self.cliques[c].iter().all(|&v| !self.covered.contains(v))
    }

    fn go(&mut self) -> Result<bool, OracleError> {
        self.budget.tick()?;
        let n = self.covered.capacity();
        if self.covered.count() == n {
            return Ok(true);
        }
        if self.failed.contains(&self.covered) {
            return Ok(false);
        }
        let mut best: Option<(usize, usize)> = None;
        for v in 0..n {
            if self.covered.contains(v) {
                continue;
            }
            let k = self.by_vertex[v].iter().filter(|&&c| self.alive(c)).count();
            if best.is_none_or(|(_, bk)| k < bk) {
                best = Some((v, k));
                if k == 0 {
                    break;
                }
            }
        }
        let (v, k) = best.expect("some vertex is uncovered");
        if k > 0 {
            let options: Vec<usize> = self.by_vertex[v].iter().copied().filter(|&c| self.alive(c)).collect();
            for c in options {
                for &w in &self.cliques[c] {
                    self.covered.insert(w);
                }
                self.chosen.push(c);
                if self.go()? {
                    return Ok(true);
                }
                self.chosen.pop();
                for &w in &self.cliques[c] {
                    self.covered.remove(w);
                }
            }
        }
        if self.failed.len() < MEMO_CAP {
            self.failed.insert(self.covered.clone());
        }
        Ok(false)
    }
}

/// A maximum `K_r`-tiling by branch and bound.
pub fn oracle_max_tiling(g: &Graph, r: usize) -> Result<Tiling, OracleError> {
    oracle_max_tiling_with_budget(g, r, DEFAULT_BUDGET)
}

pub fn oracle_max_tiling_with_budget(g: &Graph, r: usize, budget: u64) -> Result<Tiling, OracleError> {
    let n = g.n();
    if r == 0 {
        return Ok(Tiling::default());
    }
    let cliques = enumerate_kr(g, r);
    let mut by_vertex: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, c) in cliques.iter().enumerate() {
        for &v in c {
            by_vertex[v].push(i);
        }
    }
    let mut st = MaxSearch {
        r,
        cliques: &cliques,
        by_vertex: &by_vertex,
        dead: BitSet::new(n),
        chosen: Vec::new(),
        best: Vec::new(),
        budget: Budget::new(budget),
    };
    st.go()?;
    Ok(Tiling::new(st.best.iter().map(|&i| cliques[i].clone()).collect()))
}

struct MaxSearch<'a> {
    r: usize,
    cliques: &'a [Clique],
    by_vertex: &'a [Vec<usize>],
    // covered or discarded
    dead: BitSet,
    chosen: Vec<usize>,
    best: Vec<usize>,
    budget: Budget,
}

impl MaxSearch<'_> {
    fn alive(&self, c: usize) -> bool {
        self.cliques[c].iter().all(|&v| !self.dead.contains(v))
    }

    fn go(&mut self) -> Result<(), OracleError> {
        self.budget.tick()?;
        if self.chosen.len() > self.best.len() {
            self.best = self.chosen.clone();
        }
        let n = self.dead.capacity();
        let live: Vec<usize> = (0..n)
            .filter(|&v| !self.dead.contains(v) && self.by_vertex[v].iter().any(|&c| self.alive(c)))
            .collect();
        if self.chosen.len() + live.len() / self.r <= self.best.len() {
            return Ok(());
        }
        let v = live[0];
        let options: Vec<usize> = self.by_vertex[v].iter().copied().filter(|&c| self.alive(c)).collect();
        for c in options {
            for &w in &self.cliques[c] {
                self.dead.insert(w);
            }
            self.chosen.push(c);
            self.go()?;
            self.chosen.pop();
            for &w in &self.cliques[c] {
                self.dead.remove(w);
            }
        }
        // v stays uncovered
        self.dead.insert(v);
        self.go()?;
        self.dead.remove(v);
        Ok(())
    }
}

/// Some `k`-set `U` with `e(G[U]) < gamma * n^2`, by exhaustive search with
/// edge-count pruning.
pub fn find_sparse_set_exact(
    g: &Graph,
    k: usize,
    gamma: Rational,
    budget: u64,
) -> Result<Option<Vec<usize>>, OracleError> {
    let n = g.n();
    if k > n {
        return Ok(None);
    }
    // largest admissible edge count
    let mut limit = 0usize;
    if !below_density(0, n, gamma) {
        return Ok(None);
    }
    while below_density(limit + 1, n, gamma) {
        limit += 1;
    }
    // low-degree vertices first: sparse sets are found early when they exist
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| (g.degree(v), v));
    let mut st = SparseSearch {
        g,
        k,
        limit,
        order: &order,
        cur: Vec::new(),
        budget: Budget::new(budget),
    };
    if st.go(0, 0)? {
        let mut out = st.cur.clone();
        out.sort_unstable();
        Ok(Some(out))
    } else {
        Ok(None)
    }
}

struct SparseSearch<'a> {
    g: &'a Graph,
    k: usize,
    limit: usize,
    order: &'a [usize],
    cur: Vec<usize>,
    budget: Budget,
}

impl SparseSearch<'_> {
    fn go(&mut self, from: usize, edges: usize) -> Result<bool, OracleError> {
        self.budget.tick()?;
        if self.cur.len() == self.k {
            return Ok(true);
        }
        let need = self.k - self.cur.len();
        for idx in from..self.order.len() {
            if self.order.len() - idx < need {
                break;
            }
            let v = self.order[idx];
            let add = self.cur.iter().filter(|&&u| self.g.has_edge(u, v)).count();
            if edges + add > self.limit {
                continue;
            }
            self.cur.push(v);
            if self.go(idx + 1, edges + add)? {
                return Ok(true);
            }
            self.cur.pop();
        }
        Ok(false)
    }
}

/// A maximum independent set, by branch and bound on the vertex of least
/// remaining degree. Cheap on dense graphs, where independent sets are small.
pub fn max_independent_set(g: &Graph) -> Vec<usize> {
    max_independent_set_with_budget(g, u64::MAX).expect("unbounded budget")
}

pub fn max_independent_set_with_budget(g: &Graph, budget: u64) -> Result<Vec<usize>, OracleError> {
    let mut best = Vec::new();
    let mut cur = Vec::new();
    let mut b = Budget::new(budget);
    mis(g, BitSet::full(g.n()), &mut cur, &mut best, &mut b)?;
    best.sort_unstable();
    Ok(best)
}

fn mis(
    g: &Graph,
    cand: BitSet,
    cur: &mut Vec<usize>,
    best: &mut Vec<usize>,
    budget: &mut Budget,
) -> Result<(), OracleError> {
    budget.tick()?;
    let size = cand.count();
    if size == 0 {
        if cur.len() > best.len() {
            *best = cur.clone();
        }
        return Ok(());
    }
    if cur.len() + size <= best.len() {
        return Ok(());
    }
    let v = cand
        .iter()
        .min_by_key(|&v| g.neighbors(v).intersection_count(&cand))
        .expect("nonempty");
    // take v
    let mut with = cand.clone();
    with.difference_with(g.neighbors(v));
    with.remove(v);
    cur.push(v);
    mis(g, with, cur, best, budget)?;
    cur.pop();
    // a vertex with no candidate neighbours is always taken
    if g.neighbors(v).intersection_count(&cand) == 0 {
        return Ok(());
    }
    let mut without = cand;
    without.remove(v);
    mis(g, without, cur, best, budget)
}

/// Vertex-disjoint cliques, one per entry of `types`, the `i`-th having per-part
/// counts `types[i]` with respect to `partition`, avoiding `avoid`. Exhaustive.
pub fn find_typed_tiling_exact(
    g: &Graph,
    partition: &Partition,
    types: &[Vec<usize>],
    avoid: &BitSet,
    budget: u64,
) -> Result<Option<Tiling>, OracleError> {
    if types.is_empty() {
        return Ok(Some(Tiling::default()));
    }
    let r: usize = types[0].iter().sum();
    if types.iter().any(|t| t.iter().sum::<usize>() != r || t.len() != partition.num_parts()) {
        return Ok(None);
    }
    let mut within = BitSet::new(g.n());
    for p in partition.parts() {
        for &v in p {
            if !avoid.contains(v) {
                within.insert(v);
            }
        }
    }
    let all = enumerate_kr_within(g, r, &within);
    let mut order: Vec<usize> = (0..types.len()).collect();
    order.sort_by(|&a, &b| types[a].cmp(&types[b]));
    let mut distinct: Vec<&Vec<usize>> = order.iter().map(|&i| &types[i]).collect();
    distinct.dedup();
    let groups: Vec<Vec<Clique>> = distinct
        .iter()
        .map(|t| {
            all.iter()
                .filter(|c| partition.type_of(c).as_ref() == Some(*t))
                .cloned()
                .collect()
        })
        .collect();
    // slot j uses group slot_group[j]
    let slot_group: Vec<usize> = order
        .iter()
        .map(|&i| distinct.iter().position(|t| **t == types[i]).expect("listed"))
        .collect();
    let mut st = TypedSearch {
        groups: &groups,
        slot_group: &slot_group,
        used: BitSet::new(g.n()),
        chosen: Vec::new(),
        budget: Budget::new(budget),
    };
    if !st.go(0, 0)? {
        return Ok(None);
    }
    // restore the caller's member order
    let mut members = vec![Vec::new(); types.len()];
    for (slot, &(gi, ci)) in st.chosen.iter().enumerate() {
        members[order[slot]] = groups[gi][ci].clone();
    }
    Ok(Some(Tiling::new(members)))
}

struct TypedSearch<'a> {
    groups: &'a [Vec<Clique>],
    slot_group: &'a [usize],
    used: BitSet,
    chosen: Vec<(usize, usize)>,
    budget: Budget,
}

impl TypedSearch<'_> {
    fn go(&mut self, slot: usize, start: usize) -> Result<bool, OracleError> {
        self.budget.tick()?;
        if slot == self.slot_group.len() {
            return Ok(true);
        }
        let gi = self.slot_group[slot];
        for ci in start..self.groups[gi].len() {
            let c = &self.groups[gi][ci];
            if c.iter().any(|&v| self.used.contains(v)) {
                continue;
            }
            for &v in c {
                self.used.insert(v);
            }
            self.chosen.push((gi, ci));
            // identical consecutive types: keep clique indices increasing
            let next_start = match self.slot_group.get(slot + 1) {
                Some(&ng) if ng == gi => ci + 1,
                _ => 0,
            };
            if self.go(slot + 1, next_start)? {
                return Ok(true);
            }
            self.chosen.pop();
            for &v in c {
                self.used.remove(v);
            }
        }
        Ok(false)
    }
}
