//! Perfect hash families and colour-coded search for `K_r`-tilings with a
//! prescribed type sequence.
//!
//! A family for `(n, k)` is a list of colourings `[n] -> [2k]` such that every
//! `k`-subset is rainbow under at least one of them. It is built in up to three
//! levels: an optional reduction of `[n]` (prime residues, then a linear map
//! modulo a prime) into a range of size `k(k-1)+1`, followed by a small family
//! on that range whose covering property is checked exhaustively.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex, OnceLock};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitset::BitSet;
use crate::graph::{verify_tiling, Graph, Partition, Tiling};
use crate::oracle::enumerate_kr_within;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HashError {
    #[error("subset size k = {k} must satisfy 1 <= k <= n = {n}")]
    BadSize { n: usize, k: usize },
    #[error("subset size k = {0} exceeds the 32-colour palette limit")]
    TooLarge(usize),
}

/// Largest number of `k`-subsets checked one by one at build time.
pub const EXHAUSTIVE_CAP: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verification {
    /// Every `k`-subset of `[n]` was checked directly.
    Exhaustive,
    /// Reduction levels separate every `k`-set by construction, and the final
    /// level was checked on every `k`-subset of its domain.
    Composed,
    /// Final level checked on random samples only.
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Outer {
    Identity,
    /// `x -> ((a x) mod p) mod q` for `a in 1..p`.
    Linear { p: u64, q: u64 },
    /// `x -> Linear(x mod primes[i])`.
    Residue { primes: Vec<u64>, p: u64, q: u64 },
}

#[derive(Clone, Debug)]
pub struct PerfectHashFamily {
    n: usize,
    k: usize,
    palette: usize,
    outer: Outer,
    inner: Vec<Vec<u8>>,
    verification: Verification,
}

impl PerfectHashFamily {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn palette(&self) -> usize {
        self.palette
    }

    pub fn verification(&self) -> Verification {
        self.verification
    }

    fn outer_count(&self) -> usize {
        match &self.outer {
            Outer::Identity => 1,
            Outer::Linear { p, .. } => (*p - 1) as usize,
            Outer::Residue { primes, p, .. } => primes.len() * (*p - 1) as usize,
        }
    }

    /// Number of colourings in the family.
    pub fn len(&self) -> usize {
        self.outer_count() * self.inner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `idx`-th colouring as a table over `0..n`.
    pub fn coloring(&self, idx: usize) -> Vec<u8> {
        let inner = &self.inner[idx % self.inner.len()];
        let o = idx / self.inner.len();
        (0..self.n as u64)
            .map(|x| {
                let y = match &self.outer {
                    Outer::Identity => x,
                    Outer::Linear { p, q } => ((o as u64 + 1) * x % p) % q,
                    Outer::Residue { primes, p, q } => {
                        let per = (*p - 1) as usize;
                        let prime = primes[o / per];
                        let a = (o % per) as u64 + 1;
                        (a * (x % prime) % p) % q
                    }
                };
                inner[y as usize]
            })
            .collect()
    }

    /// Some colouring injective on `set`, by index.
    pub fn injective_on(&self, set: &[usize]) -> Option<usize> {
        (0..self.len()).find(|&i| {
            let c = self.coloring(i);
            rainbow(set.iter().map(|&v| c[v]), set.len())
        })
    }
}

fn rainbow(colors: impl Iterator<Item = u8>, k: usize) -> bool {
    let mut mask = 0u64;
    for c in colors {
        mask |= 1 << c;
    }
    mask.count_ones() as usize == k
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

fn is_prime(x: u64) -> bool {
    if x < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= x {
        if x.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn next_prime(mut x: u64) -> u64 {
    while !is_prime(x) {
        x += 1;
    }
    x
}

/// Iterate over `k`-subsets of `0..m` in lexicographic order.
fn for_each_subset(m: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > m {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + m - k {
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

/// Maps `[m] -> [palette]` such that every `k`-subset is rainbow under one of
/// them: scan all subsets, adding a fresh random map forced injective on each
/// uncovered one.
fn greedy_cover(m: usize, k: usize, palette: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<u8>> {
    let mut maps: Vec<Vec<u8>> = Vec::new();
    let mut last_hit = 0usize;
    let colors: Vec<u8> = (0..palette as u8).collect();
    for_each_subset(m, k, |set| {
        let hit = |map: &Vec<u8>| rainbow(set.iter().map(|&x| map[x]), k);
        if maps.get(last_hit).is_some_and(hit) {
            return;
        }
        if let Some(i) = maps.iter().position(hit) {
            last_hit = i;
            return;
        }
        let mut map: Vec<u8> = (0..m).map(|_| rng.gen_range(0..palette) as u8).collect();
        let mut perm = colors.clone();
        perm.shuffle(rng);
        for (&x, &c) in set.iter().zip(&perm) {
            map[x] = c;
        }
        last_hit = maps.len();
        maps.push(map);
    });
    if maps.is_empty() {
        maps.push(vec![0; m]);
    }
    maps
}

/// Random maps plus sampled repair, for domains too large to scan.
fn sampled_cover(m: usize, k: usize, palette: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<u8>> {
    let mut p_inj = 1.0f64;
    for i in 0..k {
        p_inj *= (palette - i) as f64 / palette as f64;
    }
    let ln_sets = (1..=k).map(|i| ((m - k + i) as f64 / i as f64).ln()).sum::<f64>();
    let count = ((ln_sets + 20.0) / p_inj).ceil() as usize;
    let mut maps: Vec<Vec<u8>> = (0..count)
        .map(|_| (0..m).map(|_| rng.gen_range(0..palette) as u8).collect())
        .collect();
    let domain: Vec<usize> = (0..m).collect();
    for _ in 0..4000 {
        let set: Vec<usize> = domain.choose_multiple(rng, k).copied().collect();
        if !maps.iter().any(|map| rainbow(set.iter().map(|&x| map[x]), k)) {
            let mut map: Vec<u8> = (0..m).map(|_| rng.gen_range(0..palette) as u8).collect();
            let mut perm: Vec<u8> = (0..palette as u8).collect();
            perm.shuffle(rng);
            for (&x, &c) in set.iter().zip(&perm) {
                map[x] = c;
            }
            maps.push(map);
        }
    }
    maps
}

pub fn build_hash_family(n: usize, k: usize) -> Result<PerfectHashFamily, HashError> {
    if k == 0 || k > n {
        return Err(HashError::BadSize { n, k });
    }
    if k > 32 {
        return Err(HashError::TooLarge(k));
    }
    let palette = 2 * k;
    let mut rng = ChaCha8Rng::seed_from_u64(((n as u64) << 8) ^ k as u64 ^ 0x5eed_c0de);
    if binomial(n as u64, k as u64) <= EXHAUSTIVE_CAP {
        let inner = greedy_cover(n, k, palette, &mut rng);
        return Ok(PerfectHashFamily {
            n,
            k,
            palette,
            outer: Outer::Identity,
            inner,
            verification: Verification::Exhaustive,
        });
    }
    let q = (k * (k - 1) + 1) as u64;
    let p = next_prime((n as u64).max(q + 1));
    let mut outer = Outer::Linear { p, q };
    let mut outer_count = p - 1;
    // prime-residue pre-reduction, when it yields fewer maps
    let pairs = (k * (k - 1) / 2) as u64;
    let mut p0 = next_prime(q + 1);
    while p0 < n as u64 {
        let mut logs = 0u64;
        let mut acc = 1u64;
        while acc.saturating_mul(p0) < n as u64 {
            acc *= p0;
            logs += 1;
        }
        let want = pairs * logs + 1;
        let mut primes = Vec::new();
        let mut x = p0;
        while (primes.len() as u64) < want {
            x = next_prime(x);
            primes.push(x);
            x += 1;
        }
        let p2 = next_prime(*primes.last().expect("nonempty"));
        let count = primes.len() as u64 * (p2 - 1);
        if count < outer_count {
            outer_count = count;
            outer = Outer::Residue { primes, p: p2, q };
        }
        p0 = next_prime(p0 + 1);
    }
    let (inner, verification) = if binomial(q, k as u64) <= EXHAUSTIVE_CAP {
        (greedy_cover(q as usize, k, palette, &mut rng), Verification::Composed)
    } else {
        (sampled_cover(q as usize, k, palette, &mut rng), Verification::Sampled)
    };
    Ok(PerfectHashFamily {
        n,
        k,
        palette,
        outer,
        inner,
        verification,
    })
}

type FamilyCache = Mutex<HashMap<(usize, usize), Arc<PerfectHashFamily>>>;

/// Shared, lazily built family for `(n, k)`.
pub fn hash_family(n: usize, k: usize) -> Result<Arc<PerfectHashFamily>, HashError> {
    static CACHE: OnceLock<FamilyCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(f) = cache.lock().expect("cache lock").get(&(n, k)) {
        return Ok(f.clone());
    }
    let fam = Arc::new(build_hash_family(n, k)?);
    cache.lock().expect("cache lock").insert((n, k), fam.clone());
    Ok(fam)
}

/// All nonnegative `rprime`-vectors summing to `r`, in lexicographic order.
pub fn enumerate_types(r: usize, rprime: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(rprime);
    compositions(r, rprime, &mut cur, &mut out);
    out
}

fn compositions(left: usize, slots: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if slots == 0 {
        return;
    }
    if slots == 1 {
        cur.push(left);
        out.push(cur.clone());
        cur.pop();
        return;
    }
    for x in 0..=left {
        cur.push(x);
        compositions(left - x, slots - 1, cur, out);
        cur.pop();
    }
}

/// Count vectors `(x_1, ..., x_y)` with `sum <= bound`, ordered by total, then
/// lexicographically.
pub fn count_vectors(y: usize, bound: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in 0..=bound {
        if y == 0 {
            if total == 0 {
                out.push(Vec::new());
            }
            continue;
        }
        let mut cur = Vec::with_capacity(y);
        compositions(total, y, &mut cur, &mut out);
    }
    out
}

/// Type multisets of size at most `bound`, as counts over [`enumerate_types`].
pub fn enumerate_pattern_multisets(r: usize, rprime: usize, bound: usize) -> Vec<Vec<usize>> {
    count_vectors(enumerate_types(r, rprime).len(), bound)
}

/// One type vector (per-part counts) per tiling member.
pub type Pattern = Vec<Vec<usize>>;

/// Expand type counts into a pattern, in type order.
pub fn pattern_from_counts(types: &[Vec<usize>], counts: &[usize]) -> Pattern {
    types
        .iter()
        .zip(counts)
        .flat_map(|(t, &c)| std::iter::repeat_n(t.clone(), c))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternSearch {
    pub tiling: Option<Tiling>,
    /// Colourings tried before the answer was settled.
    pub functions_tried: usize,
}

/// A tiling whose `i`-th member has type `pattern[i]`, avoiding `avoid`.
pub fn find_tiling_with_pattern(
    g: &Graph,
    partition: &Partition,
    pattern: &[Vec<usize>],
) -> Result<Option<Tiling>, HashError> {
    Ok(search_pattern(g, partition, pattern, &BitSet::new(g.n()))?.tiling)
}

pub fn search_pattern(
    g: &Graph,
    partition: &Partition,
    pattern: &[Vec<usize>],
    avoid: &BitSet,
) -> Result<PatternSearch, HashError> {
    let m = pattern.len();
    if m == 0 {
        return Ok(PatternSearch {
            tiling: Some(Tiling::default()),
            functions_tried: 0,
        });
    }
    let r: usize = pattern[0].iter().sum();
    let mut within = BitSet::new(g.n());
    for p in partition.parts() {
        for &v in p {
            if !avoid.contains(v) {
                within.insert(v);
            }
        }
    }
    let shape_ok = pattern
        .iter()
        .all(|t| t.len() == partition.num_parts() && t.iter().sum::<usize>() == r);
    if !shape_ok || r * m > within.count() {
        return Ok(PatternSearch {
            tiling: None,
            functions_tried: 0,
        });
    }
    let fam = hash_family(g.n(), r * m)?;
    // cliques grouped by the distinct types used in the pattern
    let mut distinct: Vec<&Vec<usize>> = pattern.iter().collect();
    distinct.sort();
    distinct.dedup();
    let all = enumerate_kr_within(g, r, &within);
    let groups: Vec<Vec<&Vec<usize>>> = distinct
        .iter()
        .map(|t| all.iter().filter(|c| partition.type_of(c).as_ref() == Some(*t)).collect())
        .collect();
    if groups.iter().any(Vec::is_empty) {
        return Ok(PatternSearch {
            tiling: None,
            functions_tried: 0,
        });
    }
    let slot_group: Vec<usize> = pattern
        .iter()
        .map(|t| distinct.iter().position(|d| *d == t).expect("listed"))
        .collect();
    let found = (0..fam.len()).into_par_iter().find_map_first(|fi| {
        let col = fam.coloring(fi);
        color_dp(&col, &groups, &slot_group).map(|seq| (fi, seq))
    });
    match found {
        Some((fi, seq)) => {
            let cliques: Vec<Vec<usize>> = seq
                .iter()
                .enumerate()
                .map(|(slot, &ci)| groups[slot_group[slot]][ci].clone())
                .collect();
            let t = Tiling::new(cliques);
            debug_assert!(verify_tiling(g, &t, r));
            Ok(PatternSearch {
                tiling: Some(t),
                functions_tried: fi + 1,
            })
        }
        None => Ok(PatternSearch {
            tiling: None,
            functions_tried: fam.len(),
        }),
    }
}

/// Level-by-level colour-set dynamic program for one colouring; keeps a single
/// witness sequence per colour union.
fn color_dp(col: &[u8], groups: &[Vec<&Vec<usize>>], slot_group: &[usize]) -> Option<Vec<usize>> {
    // rainbow colour masks per group, first clique as witness
    let masks: Vec<Vec<(u64, usize)>> = groups
        .iter()
        .map(|cl| {
            let mut seen: HashSet<u64> = HashSet::new();
            let mut out = Vec::new();
            for (ci, c) in cl.iter().enumerate() {
                let mut m = 0u64;
                for &v in c.iter() {
                    m |= 1 << col[v];
                }
                if m.count_ones() as usize == c.len() && seen.insert(m) {
                    out.push((m, ci));
                }
            }
            out
        })
        .collect();
    let mut level: Vec<(u64, Vec<usize>)> = masks[slot_group[0]]
        .iter()
        .map(|&(m, ci)| (m, vec![ci]))
        .collect();
    for &gi in &slot_group[1..] {
        let mut next: Vec<(u64, Vec<usize>)> = Vec::new();
        let mut seen: HashSet<u64> = HashSet::new();
        for (union, seq) in &level {
            for &(m, ci) in &masks[gi] {
                if m & union != 0 {
                    continue;
                }
                let u = m | union;
                if seen.insert(u) {
                    let mut s = seq.clone();
                    s.push(ci);
                    next.push((u, s));
                }
            }
        }
        if next.is_empty() {
            return None;
        }
        level = next;
    }
    level.into_iter().next().map(|(_, seq)| seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::is_factor;

    #[test]
    fn family_k1() {
        let f = build_hash_family(5, 1).unwrap();
        for v in 0..5 {
            assert!(f.injective_on(&[v]).is_some());
        }
        assert!(build_hash_family(3, 4).is_err());
        assert!(build_hash_family(3, 0).is_err());
    }

    #[test]
    fn family_20_4_exhaustive() {
        let f = build_hash_family(20, 4).unwrap();
        assert_eq!(f.verification(), Verification::Exhaustive);
        assert_eq!(f.palette(), 8);
        let maps: Vec<Vec<u8>> = (0..f.len()).map(|i| f.coloring(i)).collect();
        let mut checked = 0;
        for_each_subset(20, 4, |s| {
            assert!(maps.iter().any(|m| rainbow(s.iter().map(|&x| m[x]), 4)), "{s:?}");
            checked += 1;
        });
        assert_eq!(checked, 4845);
    }

    #[test]
    fn composed_family_separates_samples() {
        let f = build_hash_family(200, 5).unwrap();
        assert_eq!(f.verification(), Verification::Composed);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let all: Vec<usize> = (0..200).collect();
        for _ in 0..50 {
            let s: Vec<usize> = all.choose_multiple(&mut rng, 5).copied().collect();
            assert!(f.injective_on(&s).is_some());
        }
    }

    #[test]
    fn subset_iteration_counts() {
        let mut c = 0;
        for_each_subset(6, 3, |_| c += 1);
        assert_eq!(c, 20);
        let mut c = 0;
        for_each_subset(4, 4, |_| c += 1);
        assert_eq!(c, 1);
    }

    #[test]
    fn types_in_lex_order() {
        assert_eq!(enumerate_types(2, 2), vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
        assert_eq!(
            enumerate_types(3, 2),
            vec![vec![0, 3], vec![1, 2], vec![2, 1], vec![3, 0]]
        );
        for t in enumerate_types(4, 3) {
            assert_eq!(t.iter().sum::<usize>(), 4);
        }
        assert_eq!(enumerate_types(4, 3).len(), 15);
    }

    #[test]
    fn multiset_counts() {
        assert_eq!(count_vectors(3, 1).len(), 4);
        assert_eq!(count_vectors(4, 2).len(), 15);
        assert_eq!(count_vectors(5, 0), vec![vec![0; 5]]);
        // r = 2, r' = 2: three types
        assert_eq!(enumerate_pattern_multisets(2, 2, 1).len(), 4);
    }

    #[test]
    fn pattern_search_examples() {
        let g = Graph::complete(9);
        let p = Partition::new(9, vec![(0..3).collect(), (3..9).collect()], 1).unwrap();
        let t = find_tiling_with_pattern(&g, &p, &vec![vec![1, 2]; 3]).unwrap().unwrap();
        assert!(is_factor(&g, &t, 3));
        for c in t.cliques() {
            assert_eq!(p.type_of(c), Some(vec![1, 2]));
        }
        assert_eq!(find_tiling_with_pattern(&g, &p, &[]).unwrap(), Some(Tiling::default()));

        let mut h = Graph::complete(9);
        for u in 0..3 {
            for v in u + 1..3 {
                h.remove_edge(u, v);
            }
        }
        assert_eq!(find_tiling_with_pattern(&h, &p, &[vec![2, 1]]).unwrap(), None);
    }

    #[test]
    fn pattern_counts_expand() {
        let types = enumerate_types(3, 2);
        let pat = pattern_from_counts(&types, &[0, 2, 0, 1]);
        assert_eq!(pat, vec![vec![1, 2], vec![1, 2], vec![3, 0]]);
    }
}
