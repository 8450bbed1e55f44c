//! The extremal pipeline: peel sparse parts, move vertices to the parts they
//! behave like, balance the part sizes by removing a few cliques, clean the
//! remaining bad vertices, and assemble a factor by contraction and bipartite
//! matching.

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitset::BitSet;
use crate::certificate::{Certificate, Evidence, Trace};
use crate::colorcode::{enumerate_types, hash_family, pattern_from_counts, search_pattern, Verification};
use crate::graph::{below_density, Clique, Graph, Partition, Rational, Tiling};
use crate::matching::{bipartite_max_matching, max_matching, perfect_matching_or_certificate, PerfectOutcome, TutteSet};
use crate::oracle::{enumerate_kr, enumerate_kr_within, find_sparse_set_exact, find_typed_tiling_exact, OracleError};
use crate::slackalg::{assign_transfers, base_vector, partition_slack, slack_bound, split_small_large};
use crate::solver::{self, settle, Mode, PipelineOutcome, SolverConfig};
use crate::certificate::Verdict;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Sparseness expected of peeled parts; only used for sanity warnings.
    pub mu: Rational,
    /// `v` is `A_i`-good when `d_{A_i}(v) < good_frac * n`.
    pub good_frac: Rational,
    pub supergood_frac: Rational,
    /// `v` in `B` is bad when `d_{A_i}(v) < |A_i| - bad_frac * n` for some `i`.
    pub bad_frac: Rational,
    pub c_band: Rational,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            mu: Rational::new(1, 1000),
            good_frac: Rational::new(1, 5),
            supergood_frac: Rational::new(1, 10),
            bad_frac: Rational::new(1, 10),
            c_band: Rational::new(99, 100),
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), ExtremalError> {
        let zero = Rational::from_integer(0);
        let one = Rational::from_integer(1);
        if self.good_frac <= zero || self.good_frac >= one {
            return Err(ExtremalError::Thresholds("good_frac must lie in (0, 1)".into()));
        }
        if self.supergood_frac > self.good_frac {
            return Err(ExtremalError::Thresholds("supergood_frac exceeds good_frac".into()));
        }
        if self.c_band <= zero {
            return Err(ExtremalError::Thresholds("c_band must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// A `k`-set of an `m`-vertex remainder is sparse when it spans fewer than `gamma * m^2` edges.
    pub gamma: Rational,
    /// Remainders up to this size are searched exhaustively.
    pub exact_limit: usize,
    pub budget: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            gamma: Rational::new(1, 50),
            exact_limit: 24,
            budget: 5_000_000,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtremalError {
    #[error("r = {r} does not divide n = {n}")]
    Indivisible { n: usize, r: usize },
    #[error("sparse-set detector: {0}")]
    Detector(OracleError),
    #[error("vertex {vertex} is good for both part {first} and part {second}")]
    Structural { vertex: usize, first: usize, second: usize },
    #[error("bad thresholds: {0}")]
    Thresholds(String),
}

/// Stage-by-stage record of one extremal run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub s: usize,
    pub exact_detection: bool,
    pub peeled: Vec<Vec<usize>>,
    pub peeled_edges: Vec<usize>,
    pub case_two: bool,
    pub moved: Vec<Vec<usize>>,
    pub slack: Vec<i64>,
    pub bad: Vec<usize>,
    pub index_set: Vec<usize>,
    pub t_i: i64,
    pub bound: String,
    pub candidates_tried: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admissible: Option<Tiling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfers: Option<Tiling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cleaned: Option<Tiling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repairs: Option<Tiling>,
    pub balanced_sizes: Vec<usize>,
    /// Sizes of the contraction matchings, last part first.
    pub matchings: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Peeled {
    pub s: usize,
    pub parts: Vec<Vec<usize>>,
    pub rest: Vec<usize>,
    pub edges: Vec<usize>,
    /// Every level was decided by exhaustive search.
    pub exact: bool,
}

fn internal_edges(g: &Graph, set: &BitSet) -> usize {
    set.iter().map(|v| g.neighbors(v).intersection_count(set)).sum::<usize>() / 2
}

/// Pairwise swaps that lower `e(G[U])`, until none does.
fn improve_by_swaps(g: &Graph, set: &mut BitSet) {
    let n = g.n();
    loop {
        let mut best: Option<(i64, usize, usize)> = None;
        for u in set.iter() {
            let du = g.neighbors(u).intersection_count(set) as i64;
            for w in 0..n {
                if set.contains(w) {
                    continue;
                }
                let dw = g.neighbors(w).intersection_count(set) as i64 - g.has_edge(u, w) as i64;
                let delta = dw - du;
                if delta < 0 && best.is_none_or(|(d, _, _)| delta < d) {
                    best = Some((delta, u, w));
                }
            }
        }
        match best {
            Some((_, u, w)) => {
                set.remove(u);
                set.insert(w);
            }
            None => return,
        }
    }
}

/// Low-density `k`-set by greedy shrinking and greedy growing from the
/// lowest-degree vertices, each refined by swaps.
fn sparse_set_heuristic(g: &Graph, k: usize) -> BitSet {
    let n = g.n();
    let mut candidates = Vec::new();
    let mut set = BitSet::full(n);
    while set.count() > k {
        let v = set
            .iter()
            .max_by_key(|&v| (g.neighbors(v).intersection_count(&set), std::cmp::Reverse(v)))
            .expect("nonempty");
        set.remove(v);
    }
    candidates.push(set);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| (g.degree(v), v));
    for &seed in order.iter().take(3) {
        let mut set = BitSet::new(n);
        set.insert(seed);
        while set.count() < k {
            let v = (0..n)
                .filter(|&v| !set.contains(v))
                .min_by_key(|&v| (g.neighbors(v).intersection_count(&set), g.degree(v), v))
                .expect("k <= n");
            set.insert(v);
        }
        candidates.push(set);
    }
    let mut best: Option<(usize, BitSet)> = None;
    for mut c in candidates {
        improve_by_swaps(g, &mut c);
        let e = internal_edges(g, &c);
        if best.as_ref().is_none_or(|(be, _)| e < *be) {
            best = Some((e, c));
        }
    }
    best.expect("at least one candidate").1
}

/// Repeatedly take a sparse `n/r`-set out of the remainder; stop at the first
/// level where none is found. `s = r` means every level peeled.
pub fn peel_sparse_sets(g: &Graph, r: usize, det: &DetectorConfig) -> Result<Peeled, ExtremalError> {
    let n = g.n();
    if r == 0 || !n.is_multiple_of(r) {
        return Err(ExtremalError::Indivisible { n, r });
    }
    let k = n / r;
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut parts = Vec::new();
    let mut edges = Vec::new();
    let mut exact = true;
    for _ in 0..r {
        let ni = remaining.len();
        let h = g.induced(&remaining);
        let local: Option<BitSet> = if ni <= det.exact_limit {
            find_sparse_set_exact(&h, k, det.gamma, det.budget)
                .map_err(ExtremalError::Detector)?
                .map(|u| {
                    let mut set = BitSet::from_iter(ni, u);
                    improve_by_swaps(&h, &mut set);
                    set
                })
        } else {
            exact = false;
            Some(sparse_set_heuristic(&h, k))
        };
        let Some(set) = local else { break };
        let e = internal_edges(&h, &set);
        if !below_density(e, ni, det.gamma) {
            break;
        }
        let part: Vec<usize> = set.iter().map(|i| remaining[i]).collect();
        remaining.retain(|v| !part.contains(v));
        parts.push(part);
        edges.push(e);
    }
    Ok(Peeled {
        s: parts.len(),
        parts,
        rest: remaining,
        edges,
        exact,
    })
}

/// `x < frac * n`.
fn below_frac(x: usize, frac: Rational, n: usize) -> bool {
    (x as i128) * (*frac.denom() as i128) < (*frac.numer() as i128) * (n as i128)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classified {
    /// `(A_1^1, ..., A_s^1, B^1)`, or `r` parts after the Case II assignment.
    pub partition: Partition,
    pub slack: Vec<i64>,
    pub supergood: Vec<usize>,
    /// Vertices to be covered first by balanced copies.
    pub bad: Vec<usize>,
    pub case_two: bool,
    pub warnings: Vec<String>,
}

/// Move every vertex to the sparse part it is good for, label bad and
/// super-good vertices, and compute the slack.
pub fn classify_and_move(g: &Graph, r: usize, peeled: &Peeled, thr: &Thresholds) -> Result<Classified, ExtremalError> {
    thr.validate()?;
    let n = g.n();
    let s = peeled.s;
    let k = n / r;
    let masks: Vec<BitSet> = peeled.parts.iter().map(|p| BitSet::from_iter(n, p.iter().copied())).collect();
    let mut home: Vec<Option<usize>> = vec![None; n];
    let mut supergood = Vec::new();
    for v in 0..n {
        for (i, m) in masks.iter().enumerate() {
            let d = g.neighbors(v).intersection_count(m);
            if below_frac(d, thr.good_frac, n) {
                if let Some(first) = home[v] {
                    return Err(ExtremalError::Structural {
                        vertex: v,
                        first,
                        second: i,
                    });
                }
                home[v] = Some(i);
                if below_frac(d, thr.supergood_frac, n) {
                    supergood.push(v);
                }
            }
        }
    }
    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); s];
    let mut rest = Vec::new();
    for v in 0..n {
        match home[v] {
            Some(i) => parts[i].push(v),
            None => rest.push(v),
        }
    }
    let mut warnings = Vec::new();
    for (i, p) in peeled.parts.iter().enumerate() {
        let not_good = p.iter().filter(|&&v| home[v] != Some(i)).count();
        if !below_frac(not_good, thr.supergood_frac, n) && not_good > 0 {
            warnings.push(format!("part {i}: {not_good} of its vertices are not good for it"));
        }
        let outside_good = parts[i].iter().filter(|v| !p.contains(v)).count();
        if !below_frac(outside_good, thr.supergood_frac, n) && outside_good > 0 {
            warnings.push(format!("part {i}: {outside_good} outside vertices are good for it"));
        }
    }
    // d_{A_i}(v) < |A_i| - bad_frac * n, measured against the peeled parts
    let is_bad = |v: usize| {
        masks.iter().zip(&peeled.parts).any(|(m, p)| {
            let d = g.neighbors(v).intersection_count(m) as i128;
            let lhs = d * (*thr.bad_frac.denom() as i128);
            let rhs = (p.len() as i128) * (*thr.bad_frac.denom() as i128) - (*thr.bad_frac.numer() as i128) * n as i128;
            lhs < rhs
        })
    };
    let mut bad: Vec<usize> = rest.iter().copied().filter(|&v| is_bad(v)).collect();
    let case_two = s == r;
    if case_two {
        // hand each leftover vertex to the deficit part it has fewest neighbours in
        for &v in &rest {
            let j = (0..s)
                .filter(|&j| parts[j].len() < k)
                .min_by_key(|&j| (g.neighbors(v).intersection_count(&masks[j]), j))
                .expect("sizes sum to n");
            parts[j].push(v);
        }
        bad = rest.clone();
        if !rest.is_empty() {
            warnings.push(format!("case-II: {} vertices assigned to deficit parts", rest.len()));
        }
    } else {
        parts.push(rest);
    }
    let partition = Partition::new(n, parts, s).expect("classification is a partition");
    let slack = partition_slack(&partition, r).expect("r divides n");
    bad.sort_unstable();
    supergood.sort_unstable();
    Ok(Classified {
        partition,
        slack,
        supergood,
        bad,
        case_two,
        warnings,
    })
}

// node cap for single-clique searches
const CLIQUE_BUDGET: usize = 200_000;

/// A clique containing `base` with per-part counts `ty`, avoiding `avoid`.
pub fn find_typed_clique(g: &Graph, p: &Partition, ty: &[usize], base: &[usize], avoid: &BitSet) -> Option<Clique> {
    let n = g.n();
    if !g.is_clique(base) || ty.len() != p.num_parts() {
        return None;
    }
    let mut need: Vec<i64> = ty.iter().map(|&x| x as i64).collect();
    for &v in base {
        if avoid.contains(v) {
            return None;
        }
        need[p.part_of(v)?] -= 1;
    }
    if need.iter().any(|&x| x < 0) {
        return None;
    }
    let mut within = BitSet::new(n);
    for (i, part) in p.parts().iter().enumerate() {
        if need[i] > 0 {
            for &v in part {
                if !avoid.contains(v) {
                    within.insert(v);
                }
            }
        }
    }
    for &v in base {
        within.remove(v);
    }
    let cand = g.common_neighbors(base, &within);
    let masks: Vec<BitSet> = (0..p.num_parts()).map(|i| p.part_mask(i)).collect();
    let mut cur = base.to_vec();
    let mut nodes = 0usize;
    if typed_dfs(g, &masks, &mut need, cand, &mut cur, &mut nodes) {
        cur.sort_unstable();
        Some(cur)
    } else {
        None
    }
}

fn typed_dfs(g: &Graph, masks: &[BitSet], need: &mut [i64], cand: BitSet, cur: &mut Vec<usize>, nodes: &mut usize) -> bool {
    *nodes += 1;
    if *nodes > CLIQUE_BUDGET {
        return false;
    }
    let open: Vec<usize> = (0..need.len()).filter(|&i| need[i] > 0).collect();
    if open.is_empty() {
        return true;
    }
    let mut pools: Vec<(usize, BitSet)> = open.iter().map(|&i| (i, cand.intersection(&masks[i]))).collect();
    if pools.iter().any(|(i, pool)| (pool.count() as i64) < need[*i]) {
        return false;
    }
    pools.sort_by_key(|(_, pool)| pool.count());
    let (j, pool) = pools.swap_remove(0);
    for v in pool.iter() {
        let mut next = cand.clone();
        next.intersect_with(g.neighbors(v));
        // later picks from the same part come after v
        let mut drop = masks[j].clone();
        drop.clear_through(v);
        let mut keep = masks[j].clone();
        keep.difference_with(&drop);
        next.difference_with(&keep);
        need[j] -= 1;
        cur.push(v);
        if typed_dfs(g, masks, need, next, cur, nodes) {
            return true;
        }
        cur.pop();
        need[j] += 1;
    }
    false
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Balanced {
    pub partition: Partition,
    pub admissible: Tiling,
    pub transfers: Tiling,
    pub index_set: Vec<usize>,
    pub t_i: i64,
    pub bound: BigInt,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BalanceError {
    /// No admissible tiling exists: no factor.
    Infeasible(Evidence),
    Failed(String),
}

/// Everything about the small-slack step that does not depend on the chosen tiling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmallSlack {
    pub index_set: Vec<usize>,
    pub target: Vec<i64>,
    pub t_i: i64,
    pub bound: BigInt,
    pub pattern_space: BigInt,
    /// Admissible tilings found, smallest first.
    pub admissible: Vec<Tiling>,
}

fn big_binomial(n: &BigInt, k: usize) -> BigInt {
    let mut acc = BigInt::from(1);
    for i in 0..k {
        acc = acc * (n - BigInt::from(i)) / BigInt::from(i + 1);
    }
    acc
}

/// Sort the slacks, split off the small ones, and search admissible tilings
/// of at most the slack bound. `Ok` with no tilings means none exists.
pub fn admissible_tilings(
    g: &Graph,
    r: usize,
    c: i64,
    p: &Partition,
    thr: &Thresholds,
    cfg: &SolverConfig,
    limit: usize,
) -> Result<SmallSlack, String> {
    let n = g.n();
    let t = partition_slack(p, r).map_err(|e| e.to_string())?;
    let rp = t.len();
    let mut tau: Vec<usize> = (0..rp).collect();
    tau.sort_by(|&a, &b| t[b].cmp(&t[a]));
    let sorted: Vec<i64> = tau.iter().map(|&i| t[i]).collect();
    let range = split_small_large(&sorted, c, thr.c_band, r);
    let mut index_set: Vec<usize> = tau[range].to_vec();
    index_set.sort_unstable();
    let target: Vec<i64> = index_set.iter().map(|&i| t[i]).collect();
    let t_i: i64 = target.iter().map(|x| x.abs()).sum();
    let bound = slack_bound(t_i, r, index_set.len());
    let all_types = enumerate_types(r, rp);
    let pattern_space = big_binomial(&(bound.clone() + BigInt::from(all_types.len())), all_types.len());
    let mut out = SmallSlack {
        index_set,
        target,
        t_i,
        bound,
        pattern_space,
        admissible: Vec::new(),
    };
    if out.target.iter().all(|&x| x == 0) {
        out.admissible.push(Tiling::default());
        return Ok(out);
    }
    let max_size = out.bound.to_usize().map_or(n / r, |b| b.min(n / r));
    let b = base_vector(r, rp);
    let present: Vec<Vec<usize>> = {
        let mut ts: Vec<Vec<usize>> = enumerate_kr(g, r).iter().filter_map(|c| p.type_of(c)).collect();
        ts.sort();
        ts.dedup();
        ts
    };
    let types: Vec<Vec<usize>> = all_types
        .into_iter()
        .filter(|ty| present.contains(ty))
        .filter(|ty| out.index_set.iter().any(|&i| ty[i] as i64 != b[i]))
        .collect();
    let deltas: Vec<Vec<i64>> = types
        .iter()
        .map(|ty| out.index_set.iter().map(|&i| ty[i] as i64 - b[i]).collect())
        .collect();
    let step = deltas.iter().map(|d| d.iter().map(|x| x.abs()).sum::<i64>()).max().unwrap_or(0);
    let mut search = CountSearch {
        g,
        p,
        r,
        types: &types,
        deltas: &deltas,
        target: &out.target,
        step,
        sizes: p.sizes(),
        nodes: 0,
        budget: cfg.oracle_budget,
        cc_max_k: cfg.cc_max_k,
        limit,
        found: Vec::new(),
    };
    for total in 1..=max_size {
        let mut counts = vec![0usize; types.len()];
        let mut partial = vec![0i64; out.target.len()];
        search.run(0, total, &mut counts, &mut partial)?;
        if search.found.len() >= limit {
            break;
        }
    }
    out.admissible = search.found;
    Ok(out)
}

struct CountSearch<'a> {
    g: &'a Graph,
    p: &'a Partition,
    r: usize,
    types: &'a [Vec<usize>],
    deltas: &'a [Vec<i64>],
    target: &'a [i64],
    step: i64,
    sizes: Vec<usize>,
    nodes: u64,
    budget: u64,
    cc_max_k: usize,
    limit: usize,
    found: Vec<Tiling>,
}

impl CountSearch<'_> {
    /// Count vectors summing to exactly `left` more members.
    fn run(&mut self, j: usize, left: usize, counts: &mut Vec<usize>, partial: &mut Vec<i64>) -> Result<(), String> {
        if self.found.len() >= self.limit {
            return Ok(());
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(format!("admissible-tiling search exceeded {} nodes", self.budget));
        }
        let dist: i64 = partial.iter().zip(self.target).map(|(a, t)| (t - a).abs()).sum();
        if dist > self.step * left as i64 {
            return Ok(());
        }
        if j == self.types.len() {
            if left == 0 && dist == 0 {
                self.realize(counts)?;
            }
            return Ok(());
        }
        // the last type takes whatever is left
        let lo = if j + 1 == self.types.len() { left } else { 0 };
        for x in lo..=left {
            counts[j] = x;
            for (a, d) in partial.iter_mut().zip(&self.deltas[j]) {
                *a += d * x as i64;
            }
            let fits = self
                .sizes
                .iter()
                .enumerate()
                .all(|(q, &cap)| (0..=j).map(|jj| counts[jj] * self.types[jj][q]).sum::<usize>() <= cap);
            if fits {
                self.run(j + 1, left - x, counts, partial)?;
            }
            for (a, d) in partial.iter_mut().zip(&self.deltas[j]) {
                *a -= d * x as i64;
            }
            counts[j] = 0;
            if !fits {
                break;
            }
        }
        Ok(())
    }

    fn realize(&mut self, counts: &[usize]) -> Result<(), String> {
        let pattern = pattern_from_counts(self.types, counts);
        let m = pattern.len();
        let k = self.r * m;
        let none = BitSet::new(self.g.n());
        let use_cc = k <= self.cc_max_k
            && hash_family(self.g.n(), k).is_ok_and(|f| f.verification() != Verification::Sampled);
        let hit = if use_cc {
            search_pattern(self.g, self.p, &pattern, &none)
                .map_err(|e| e.to_string())?
                .tiling
        } else {
            let left = self.budget.saturating_sub(self.nodes).max(1);
            find_typed_tiling_exact(self.g, self.p, &pattern, &none, left).map_err(|e| e.to_string())?
        };
        if let Some(t) = hit {
            self.found.push(t);
        }
        Ok(())
    }
}

/// Remove `k`, then realise the transfer copies that even out the large
/// slacks, starting from matchings (surplus in a sparse part) or small
/// cliques (surplus in the remainder).
pub fn transfer_copies(
    g: &Graph,
    r: usize,
    p: &Partition,
    k: &Tiling,
    index_set: &[usize],
    bad: &[usize],
    case_two: bool,
) -> Result<(Partition, Tiling), String> {
    let n = g.n();
    let kv = k.vertices();
    let p1 = p.without(&kv);
    let t1 = partition_slack(&p1, r).map_err(|e| e.to_string())?;
    if index_set.iter().any(|&i| t1[i] != 0) {
        return Err("admissible tiling left nonzero slack on the small coordinates".into());
    }
    let rp = p.num_parts();
    let b = base_vector(r, rp);
    let tm = assign_transfers(&t1).map_err(|e| e.to_string())?;
    let mut used = BitSet::from_iter(n, kv.iter().copied());
    let bad_mask = BitSet::from_iter(n, bad.iter().copied());
    let mut copies: Vec<Clique> = Vec::new();
    for &row in &tm.rows {
        let want = tm.row_sum(row) as usize;
        if want == 0 {
            continue;
        }
        let is_remainder = !case_two && row == rp - 1;
        let bases: Vec<Vec<usize>> = if is_remainder {
            // vertex-disjoint K_{b+1} in the non-bad remainder
            let size = b[row] as usize + 1;
            let mut pool = BitSet::from_iter(n, p1.part(row).iter().copied());
            pool.difference_with(&bad_mask);
            pool.difference_with(&used);
            let mut out = Vec::new();
            for c in enumerate_kr_within(g, size, &pool) {
                if c.iter().all(|&v| pool.contains(v)) {
                    for &v in &c {
                        pool.remove(v);
                    }
                    out.push(c);
                }
            }
            out
        } else {
            let avail: Vec<usize> = p1.part(row).iter().copied().filter(|&v| !used.contains(v)).collect();
            let m = max_matching(&g.induced(&avail));
            m.edges.iter().map(|&(a, c)| vec![avail[a], avail[c]]).collect()
        };
        if bases.len() < want {
            return Err(format!(
                "part {row} needs {want} transfer bases but only {} were found",
                bases.len()
            ));
        }
        let mut next = 0usize;
        for (col_idx, &col) in tm.cols.iter().enumerate() {
            let row_idx = tm.rows.iter().position(|&x| x == row).expect("listed row");
            let cnt = tm.entries[row_idx][col_idx] as usize;
            let mut ty: Vec<usize> = b.iter().map(|&x| x as usize).collect();
            ty[row] += 1;
            ty[col] -= 1;
            for _ in 0..cnt {
                let mut done = false;
                while next < bases.len() {
                    let base = &bases[next];
                    next += 1;
                    if base.iter().any(|&v| used.contains(v)) {
                        continue;
                    }
                    if let Some(c) = find_typed_clique(g, &p1, &ty, base, &used) {
                        for &v in &c {
                            used.insert(v);
                        }
                        copies.push(c);
                        done = true;
                        break;
                    }
                }
                if !done {
                    return Err(format!("could not extend a base from part {row} into a ({row},{col})-copy"));
                }
            }
        }
    }
    let removed: Vec<usize> = copies.iter().flatten().copied().collect();
    let p2 = p1.without(&removed);
    let t2 = partition_slack(&p2, r).map_err(|e| e.to_string())?;
    if t2.iter().any(|&x| x != 0) {
        return Err(format!("partition still unbalanced after transfers: {t2:?}"));
    }
    Ok((p2, Tiling::new(copies)))
}

/// Cover each bad vertex by a balanced copy, preferring copies free of other
/// bad vertices.
pub fn clean_bad_vertices(
    g: &Graph,
    r: usize,
    p: &Partition,
    bad: &[usize],
) -> Result<(Partition, Tiling), String> {
    let n = g.n();
    let b: Vec<usize> = base_vector(r, p.num_parts()).iter().map(|&x| x as usize).collect();
    let mut used = BitSet::new(n);
    let pending: Vec<usize> = bad.iter().copied().filter(|&v| p.part_of(v).is_some()).collect();
    let mut copies = Vec::new();
    for (idx, &v) in pending.iter().enumerate() {
        if used.contains(v) {
            continue;
        }
        let mut strict = used.clone();
        for &w in &pending[idx + 1..] {
            strict.insert(w);
        }
        let c = find_typed_clique(g, p, &b, &[v], &strict)
            .or_else(|| find_typed_clique(g, p, &b, &[v], &used))
            .ok_or_else(|| format!("no balanced copy covers bad vertex {v}"))?;
        for &w in &c {
            used.insert(w);
        }
        copies.push(c);
    }
    let removed: Vec<usize> = copies.iter().flatten().copied().collect();
    Ok((p.without(&removed), Tiling::new(copies)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AssembleError {
    /// `G[vertices]` has no perfect matching and no repair was found.
    Parity { vertices: Vec<usize>, tutte: TutteSet },
    Failed(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assembled {
    pub factor: Tiling,
    pub repairs: Tiling,
    pub matchings: Vec<usize>,
}

/// Factor of the remainder part, then one contraction round per sparse part.
pub fn assemble(
    g: &Graph,
    r: usize,
    s: usize,
    p: &Partition,
    case_two: bool,
    cfg: &SolverConfig,
) -> Result<Assembled, AssembleError> {
    let mut p = p.clone();
    let mut repairs: Vec<Clique> = Vec::new();
    let (mut groups, rounds): (Vec<Vec<usize>>, Vec<usize>) = if case_two {
        let last = p.num_parts() - 1;
        (p.part(last).iter().map(|&v| vec![v]).collect(), (0..last).rev().collect())
    } else {
        let rest = s;
        let rs = r - s;
        let bv = p.part(rest).to_vec();
        let groups = match rs {
            1 => bv.iter().map(|&v| vec![v]).collect(),
            2 => match perfect_matching_or_certificate(&g.induced(&bv)) {
                PerfectOutcome::Perfect(m) => m.edges.iter().map(|&(a, c)| vec![bv[a], bv[c]]).collect(),
                PerfectOutcome::Tutte(tutte) => match repair_parity(g, r, s, &p, &bv, &tutte) {
                    Some((pairs, fixed, edges)) => {
                        repairs = pairs;
                        p = fixed;
                        edges
                    }
                    None => {
                        let map = |xs: &[usize]| xs.iter().map(|&i| bv[i]).collect::<Vec<_>>();
                        return Err(AssembleError::Parity {
                            vertices: bv.clone(),
                            tutte: TutteSet {
                                s: map(&tutte.s),
                                odd_components: tutte.odd_components.iter().map(|c| map(c)).collect(),
                            },
                        });
                    }
                },
            },
            _ => {
                let sub = g.induced(&bv);
                let sub_cfg = SolverConfig {
                    mode: Mode::Auto,
                    c_override: None,
                    ..cfg.clone()
                };
                let cert = solver::solve(&sub, rs, &sub_cfg).map_err(|e| AssembleError::Failed(e.to_string()))?;
                match (cert.verdict, cert.factor) {
                    (Verdict::FactorFound, Some(t)) => {
                        t.cliques().iter().map(|c| c.iter().map(|&i| bv[i]).collect()).collect()
                    }
                    _ => {
                        return Err(AssembleError::Failed(format!(
                            "remainder has no K_{rs}-factor of its own"
                        )))
                    }
                }
            }
        };
        (groups, (0..s).rev().collect())
    };
    let mut matchings = Vec::new();
    for j in rounds {
        let right = p.part(j).to_vec();
        if right.len() != groups.len() {
            return Err(AssembleError::Failed(format!(
                "part {j} has {} vertices for {} groups",
                right.len(),
                groups.len()
            )));
        }
        let left: Vec<usize> = (0..groups.len()).collect();
        let m = bipartite_max_matching(&left, &right, |gi, v| groups[gi].iter().all(|&u| g.has_edge(u, v)));
        matchings.push(m.len());
        if m.len() != groups.len() {
            return Err(AssembleError::Failed(format!(
                "contraction into part {j}: matching of size {} < {}",
                m.len(),
                groups.len()
            )));
        }
        for (gi, v) in m {
            groups[gi].push(v);
        }
    }
    Ok(Assembled {
        factor: Tiling::new(groups),
        repairs: Tiling::new(repairs),
        matchings,
    })
}

/// Make two odd components of the remainder even with a pair of copies that
/// together keep the partition balanced: one with two vertices in a sparse
/// part and one remainder vertex in the first component, one missing that
/// sparse part with three remainder vertices in the second.
#[allow(clippy::type_complexity)]
fn repair_parity(
    g: &Graph,
    r: usize,
    s: usize,
    p: &Partition,
    bv: &[usize],
    tutte: &TutteSet,
) -> Option<(Vec<Clique>, Partition, Vec<Vec<usize>>)> {
    let n = g.n();
    let rest = s;
    let b: Vec<usize> = base_vector(r, p.num_parts()).iter().map(|&x| x as usize).collect();
    let comps: Vec<Vec<usize>> = tutte
        .odd_components
        .iter()
        .map(|c| c.iter().map(|&i| bv[i]).collect())
        .collect();
    let with_rest = |part: &[usize]| {
        let mut parts = p.parts().to_vec();
        parts[rest] = part.to_vec();
        Partition::new(n, parts, s).expect("subset of a partition")
    };
    for a in 0..comps.len() {
        for z in 0..comps.len() {
            if a == z {
                continue;
            }
            let pa = with_rest(&comps[a]);
            let pz = with_rest(&comps[z]);
            for i in 0..s {
                let mut ty1 = b.clone();
                ty1[i] += 1;
                ty1[rest] -= 1;
                let mut ty2 = b.clone();
                ty2[i] -= 1;
                ty2[rest] += 1;
                let none = BitSet::new(n);
                let Some(c1) = find_typed_clique(g, &pa, &ty1, &[], &none) else { continue };
                let used = BitSet::from_iter(n, c1.iter().copied());
                let Some(c2) = find_typed_clique(g, &pz, &ty2, &[], &used) else { continue };
                let removed: Vec<usize> = c1.iter().chain(&c2).copied().collect();
                let fixed = p.without(&removed);
                let nb = fixed.part(rest).to_vec();
                if let PerfectOutcome::Perfect(m) = perfect_matching_or_certificate(&g.induced(&nb)) {
                    let edges = m.edges.iter().map(|&(x, y)| vec![nb[x], nb[y]]).collect();
                    return Some((vec![c1, c2], fixed, edges));
                }
            }
        }
    }
    None
}

/// Balance, clean and assemble for one admissible tiling.
fn finish_with(
    g: &Graph,
    r: usize,
    s: usize,
    cls: &Classified,
    k: &Tiling,
    index_set: &[usize],
    cfg: &SolverConfig,
    pt: &mut PipelineTrace,
) -> Result<Tiling, AssembleError> {
    let (p2, transfers) = transfer_copies(g, r, &cls.partition, k, index_set, &cls.bad, cls.case_two)
        .map_err(AssembleError::Failed)?;
    pt.transfers = Some(transfers.clone());
    pt.balanced_sizes = p2.sizes();
    let (p3, cleaned) = clean_bad_vertices(g, r, &p2, &cls.bad).map_err(AssembleError::Failed)?;
    pt.cleaned = Some(cleaned.clone());
    let asm = assemble(g, r, s, &p3, cls.case_two, cfg)?;
    pt.matchings = asm.matchings.clone();
    if !asm.repairs.is_empty() {
        pt.repairs = Some(asm.repairs.clone());
    }
    let mut all = k.clone();
    all.extend(transfers);
    all.extend(cleaned);
    all.extend(asm.repairs);
    all.extend(asm.factor);
    Ok(all)
}

// admissible tilings tried before giving up on the later stages
const CANDIDATES: usize = 4;

/// The extremal pipeline on an already peeled graph.
pub fn run_extremal(g: &Graph, r: usize, c: i64, peeled: &Peeled, cfg: &SolverConfig, trace: &mut Trace) -> PipelineOutcome {
    let mut pt = PipelineTrace {
        s: peeled.s,
        exact_detection: peeled.exact,
        peeled: peeled.parts.clone(),
        peeled_edges: peeled.edges.clone(),
        ..PipelineTrace::default()
    };
    let failed = |stage: &str, reason: String| PipelineOutcome::Failed {
        stage: stage.to_string(),
        reason,
    };
    let cls = match classify_and_move(g, r, peeled, &cfg.thresholds) {
        Ok(c) => c,
        Err(e) => {
            trace.extremal = Some(pt);
            return failed("classify", e.to_string());
        }
    };
    pt.case_two = cls.case_two;
    pt.moved = cls.partition.parts().to_vec();
    pt.slack = cls.slack.clone();
    pt.bad = cls.bad.clone();
    for w in &cls.warnings {
        trace.note(w.clone());
    }
    let small = match admissible_tilings(g, r, c, &cls.partition, &cfg.thresholds, cfg, CANDIDATES) {
        Ok(x) => x,
        Err(e) => {
            trace.extremal = Some(pt);
            return failed("balance", e);
        }
    };
    pt.index_set = small.index_set.clone();
    pt.t_i = small.t_i;
    pt.bound = small.bound.to_string();
    trace.pattern_space = Some(small.pattern_space.to_string());
    if small.admissible.is_empty() {
        trace.extremal = Some(pt);
        return PipelineOutcome::NoFactor(Evidence::SlackInfeasible {
            parts: cls.partition.parts().to_vec(),
            index_set: small.index_set,
            target: small.target,
            t_i: small.t_i,
            bound: small.bound.to_string(),
        });
    }
    let mut parity: Option<(Vec<usize>, TutteSet)> = None;
    let mut last = String::new();
    for k in &small.admissible {
        pt.candidates_tried += 1;
        pt.admissible = Some(k.clone());
        match finish_with(g, r, peeled.s, &cls, k, &small.index_set, cfg, &mut pt) {
            Ok(t) => {
                trace.extremal = Some(pt);
                return PipelineOutcome::Factor(t);
            }
            Err(AssembleError::Parity { vertices, tutte }) => {
                last = "odd components in the remainder could not be repaired".into();
                parity.get_or_insert((vertices, tutte));
            }
            Err(AssembleError::Failed(e)) => last = e,
        }
    }
    trace.extremal = Some(pt);
    match parity {
        Some((vertices, tutte)) => PipelineOutcome::Parity { vertices, tutte },
        None => failed("assemble", last),
    }
}

/// Extremal solve with oracle fallback.
pub fn solve_extremal(g: &Graph, r: usize, c: i64, cfg: &SolverConfig) -> Certificate {
    let mut trace = Trace {
        path: "extremal".into(),
        c,
        seed: cfg.seed,
        ..Trace::default()
    };
    let out = match peel_sparse_sets(g, r, &cfg.detector) {
        Ok(p) if p.s >= 1 => run_extremal(g, r, c.max(0), &p, cfg, &mut trace),
        Ok(_) => PipelineOutcome::Failed {
            stage: "peel".into(),
            reason: "no sparse set found".into(),
        },
        Err(e) => PipelineOutcome::Failed {
            stage: "peel".into(),
            reason: e.to_string(),
        },
    };
    settle(g, r, out, trace, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete_multipartite(sizes: &[usize]) -> Graph {
        let n: usize = sizes.iter().sum();
        let mut part = Vec::new();
        for (i, &s) in sizes.iter().enumerate() {
            part.extend(std::iter::repeat_n(i, s));
        }
        let mut g = Graph::empty(n);
        for u in 0..n {
            for v in u + 1..n {
                if part[u] != part[v] {
                    g.add_edge(u, v);
                }
            }
        }
        g
    }

    #[test]
    fn multipartite_peels_every_part() {
        let g = complete_multipartite(&[3, 3, 3]);
        let p = peel_sparse_sets(&g, 3, &DetectorConfig::default()).unwrap();
        assert_eq!(p.s, 3);
        assert!(p.exact);
    }

    #[test]
    fn typed_clique_respects_counts() {
        let g = complete_multipartite(&[3, 3, 3]);
        let p = Partition::new(9, vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8]], 3).unwrap();
        let c = find_typed_clique(&g, &p, &[1, 1, 1], &[4], &BitSet::new(9)).unwrap();
        assert_eq!(p.type_of(&c), Some(vec![1, 1, 1]));
        assert!(c.contains(&4));
        assert!(find_typed_clique(&g, &p, &[2, 1, 0], &[], &BitSet::new(9)).is_none());
    }

    #[test]
    fn case_two_multipartite_is_solved() {
        let g = complete_multipartite(&[6, 6, 6]);
        let cfg = SolverConfig::default();
        let cert = solve_extremal(&g, 3, 0, &cfg);
        assert_eq!(cert.verdict, Verdict::FactorFound);
        assert!(cert.trace.fallbacks.is_empty(), "{:?}", cert.trace.fallbacks);
        assert!(cert.trace.extremal.as_ref().unwrap().case_two);
    }

    #[test]
    fn thresholds_are_checked() {
        let thr = Thresholds {
            supergood_frac: Rational::new(1, 2),
            ..Thresholds::default()
        };
        assert!(thr.validate().is_err());
    }
}
