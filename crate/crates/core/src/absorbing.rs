//! Absorbers, randomised absorbing families, and the non-extremal solver:
//! set aside a family of absorbers, tile the rest greedily, then let distinct
//! family members swallow the leftover `r`-sets.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitset::BitSet;
use crate::certificate::{Certificate, Trace};
use crate::graph::{verify_tiling, Graph, Rational, Tiling};
use crate::matching::bipartite_max_matching;
use crate::oracle::{enumerate_kr_within, oracle_kr_factor_with_budget};
use crate::solver::{settle, PipelineOutcome, SolverConfig};

// absorber checks run the oracle on r^2 + r vertices
const CHECK_BUDGET: u64 = 200_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingConfig {
    /// Fraction of the vertices the family may occupy.
    pub family_cap: Rational,
    pub per_set_min: usize,
    /// Random `r`-sets drawn to check the family.
    pub sample: usize,
    /// Sampling trials per absorber search.
    pub find_budget: usize,
    /// Greedy cover restarts.
    pub restarts: usize,
    /// Family rebuilds when a check fails.
    pub family_attempts: usize,
    /// Leftover groupings tried per cover.
    pub groupings: usize,
}

impl Default for AbsorbingConfig {
    fn default() -> Self {
        AbsorbingConfig {
            family_cap: Rational::new(3, 5),
            per_set_min: 1,
            sample: 50,
            find_budget: 2000,
            restarts: 8,
            family_attempts: 3,
            groupings: 20,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AbsorbError {
    #[error("absorbers need r >= 2, got {0}")]
    Order(usize),
    #[error("expected a set of {expected} vertices, got {found}")]
    Size { expected: usize, found: usize },
    #[error("vertex {0} repeated or shared between target and body")]
    Overlap(usize),
    #[error("vertex {0} out of range")]
    OutOfRange(usize),
}

/// Factors of `G[A]` and of `G[A ∪ U]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witnesses {
    pub body: Tiling,
    pub joint: Tiling,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Absorber {
    pub target: Vec<usize>,
    pub body: Vec<usize>,
    pub witnesses: Witnesses,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub body: Vec<usize>,
    pub factor: Tiling,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub set: Vec<usize>,
    /// Indices of the members that absorb `set`.
    pub absorbers: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbsorbingFamily {
    pub members: Vec<Member>,
    pub coverage: Vec<Coverage>,
    pub verified: bool,
}

impl AbsorbingFamily {
    pub fn vertices(&self, n: usize) -> BitSet {
        BitSet::from_iter(n, self.members.iter().flat_map(|m| m.body.iter().copied()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbsorbingTrace {
    pub members: Vec<Vec<usize>>,
    pub verified: bool,
    pub family_builds: usize,
    pub sampled: usize,
    pub min_coverage: usize,
    pub leftover: usize,
    pub restarts: usize,
}

fn check_sets(n: usize, u: &[usize], a: &[usize], r: usize) -> Result<(), AbsorbError> {
    if r < 2 {
        return Err(AbsorbError::Order(r));
    }
    if u.len() != r {
        return Err(AbsorbError::Size {
            expected: r,
            found: u.len(),
        });
    }
    if a.len() != r * r {
        return Err(AbsorbError::Size {
            expected: r * r,
            found: a.len(),
        });
    }
    let mut seen = BitSet::new(n);
    for &v in u.iter().chain(a) {
        if v >= n {
            return Err(AbsorbError::OutOfRange(v));
        }
        if seen.contains(v) {
            return Err(AbsorbError::Overlap(v));
        }
        seen.insert(v);
    }
    Ok(())
}

fn factor_of(g: &Graph, vertices: &[usize], r: usize) -> Option<Tiling> {
    let h = g.induced(vertices);
    let t = oracle_kr_factor_with_budget(&h, r, CHECK_BUDGET).ok()??;
    Some(Tiling::new(
        t.cliques()
            .iter()
            .map(|c| c.iter().map(|&i| vertices[i]).collect())
            .collect(),
    ))
}

/// Is `a` an absorber for `u`? Returns both factors when it is.
pub fn is_absorber(g: &Graph, u: &[usize], a: &[usize], r: usize) -> Result<Option<Witnesses>, AbsorbError> {
    check_sets(g.n(), u, a, r)?;
    let Some(body) = factor_of(g, a, r) else { return Ok(None) };
    let joint_set: Vec<usize> = a.iter().chain(u).copied().collect();
    let Some(joint) = factor_of(g, &joint_set, r) else { return Ok(None) };
    Ok(Some(Witnesses { body, joint }))
}

fn pick<R: Rng>(pool: &BitSet, rng: &mut R) -> Option<usize> {
    pool.to_vec().choose(rng).copied()
}

/// One absorber for `target` inside `free`, built along the constructive
/// recipe: a clique `u_1..u_r`, then for each `i` an `(r-1)`-clique in the
/// common neighbourhood of `v_i` and `u_i` (the `w`'s followed by an edge).
fn sample_absorber<R: Rng>(g: &Graph, target: &[usize], r: usize, free: &BitSet, rng: &mut R) -> Option<Absorber> {
    let mut pool = free.clone();
    let mut us = Vec::with_capacity(r);
    for _ in 0..r {
        let u = pick(&pool, rng)?;
        us.push(u);
        pool.intersect_with(g.neighbors(u));
        pool.remove(u);
    }
    let mut avail = free.clone();
    for &u in &us {
        avail.remove(u);
    }
    let mut groups: Vec<Vec<usize>> = Vec::with_capacity(r);
    for (&v, &u) in target.iter().zip(&us) {
        let mut pool = avail.clone();
        pool.intersect_with(g.neighbors(v));
        pool.intersect_with(g.neighbors(u));
        let mut q = Vec::with_capacity(r - 1);
        for _ in 0..r - 1 {
            let x = pick(&pool, rng)?;
            q.push(x);
            pool.intersect_with(g.neighbors(x));
            pool.remove(x);
        }
        for &x in &q {
            avail.remove(x);
        }
        groups.push(q);
    }
    let body_factor = Tiling::new(
        us.iter()
            .zip(&groups)
            .map(|(&u, q)| std::iter::once(u).chain(q.iter().copied()).collect())
            .collect(),
    );
    let mut joint: Vec<Vec<usize>> = target
        .iter()
        .zip(&groups)
        .map(|(&v, q)| std::iter::once(v).chain(q.iter().copied()).collect())
        .collect();
    joint.push(us.clone());
    let joint_factor = Tiling::new(joint);
    if !verify_tiling(g, &body_factor, r) || !verify_tiling(g, &joint_factor, r) {
        return None;
    }
    let mut body: Vec<usize> = body_factor.vertices();
    body.sort_unstable();
    Some(Absorber {
        target: target.to_vec(),
        body,
        witnesses: Witnesses {
            body: body_factor,
            joint: joint_factor,
        },
    })
}

/// Up to `limit` distinct absorbers for `u`, drawn in at most `budget` trials.
pub fn find_absorbers<R: Rng>(
    g: &Graph,
    u: &[usize],
    r: usize,
    limit: usize,
    budget: usize,
    rng: &mut R,
) -> Result<Vec<Absorber>, AbsorbError> {
    let n = g.n();
    if r < 2 {
        return Err(AbsorbError::Order(r));
    }
    if u.len() != r {
        return Err(AbsorbError::Size {
            expected: r,
            found: u.len(),
        });
    }
    let mut free = BitSet::full(n);
    for &v in u {
        if v >= n {
            return Err(AbsorbError::OutOfRange(v));
        }
        if !free.contains(v) {
            return Err(AbsorbError::Overlap(v));
        }
        free.remove(v);
    }
    let mut out: Vec<Absorber> = Vec::new();
    for _ in 0..budget {
        if out.len() >= limit {
            break;
        }
        if let Some(a) = sample_absorber(g, u, r, &free, rng) {
            if !out.iter().any(|b| b.body == a.body) {
                out.push(a);
            }
        }
    }
    Ok(out)
}

fn random_rset<R: Rng>(pool: &[usize], r: usize, rng: &mut R) -> Vec<usize> {
    let mut s: Vec<usize> = pool.choose_multiple(rng, r).copied().collect();
    s.sort_unstable();
    s
}

/// Number of family members to aim for: `family_cap * n` vertices' worth,
/// but at least two when they fit.
fn target_members(n: usize, r: usize, cap: Rational) -> usize {
    let fit = n / (r * r);
    let by_cap = (cap * Rational::from_integer(n as i64) / Rational::from_integer((r * r) as i64))
        .floor()
        .to_integer()
        .max(0) as usize;
    by_cap.max(2).min(fit)
}

/// Randomised greedy family of disjoint absorbers, checked on `cfg.sample`
/// random `r`-sets outside the family.
pub fn build_absorbing_family<R: Rng>(g: &Graph, r: usize, cfg: &AbsorbingConfig, rng: &mut R) -> AbsorbingFamily {
    let n = g.n();
    let want = if r >= 2 { target_members(n, r, cfg.family_cap) } else { 0 };
    let mut used = BitSet::new(n);
    let mut members: Vec<Member> = Vec::new();
    let mut tries = 0usize;
    while members.len() < want && tries < cfg.find_budget {
        tries += 1;
        let pool: Vec<usize> = (0..n).filter(|&v| !used.contains(v)).collect();
        if pool.len() < r * r + r {
            break;
        }
        let target = random_rset(&pool, r, rng);
        let mut free = BitSet::from_iter(n, pool.iter().copied());
        for &v in &target {
            free.remove(v);
        }
        if let Some(a) = sample_absorber(g, &target, r, &free, rng) {
            for &v in &a.body {
                used.insert(v);
            }
            members.push(Member {
                body: a.body,
                factor: a.witnesses.body,
            });
        }
    }
    let outside: Vec<usize> = (0..n).filter(|&v| !used.contains(v)).collect();
    let mut coverage = Vec::new();
    if r >= 2 && outside.len() >= r {
        for _ in 0..cfg.sample {
            let set = random_rset(&outside, r, rng);
            let absorbers = members
                .iter()
                .enumerate()
                .filter(|(_, m)| matches!(is_absorber(g, &set, &m.body, r), Ok(Some(_))))
                .map(|(i, _)| i)
                .collect();
            coverage.push(Coverage { set, absorbers });
        }
    }
    let verified = coverage.iter().all(|c| c.absorbers.len() >= cfg.per_set_min);
    AbsorbingFamily {
        members,
        coverage,
        verified,
    }
}

/// Greedy `K_r`-tiling of `within`: cover the vertex of least residual degree
/// with the clique whose other members have the least residual degree, so
/// well-connected vertices are kept for later. Returns the tiling and the
/// uncovered vertices.
fn greedy_cover<R: Rng>(g: &Graph, r: usize, within: &BitSet, rng: &mut R) -> (Vec<Vec<usize>>, Vec<usize>) {
    let n = g.n();
    let jitter: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
    let mut left = within.clone();
    let mut stuck = Vec::new();
    let mut cover = Vec::new();
    while !left.is_empty() {
        let deg = |v: usize, left: &BitSet| g.neighbors(v).intersection_count(left);
        let v = left
            .iter()
            .min_by_key(|&v| (deg(v, &left), jitter[v]))
            .expect("nonempty");
        let mut nb = left.clone();
        nb.intersect_with(g.neighbors(v));
        let best = enumerate_kr_within(g, r - 1, &nb)
            .into_iter()
            .min_by_key(|c| (c.iter().map(|&w| deg(w, &left)).sum::<usize>(), c.iter().map(|&w| jitter[w]).min()));
        left.remove(v);
        match best {
            Some(c) => {
                for &w in &c {
                    left.remove(w);
                }
                let mut k = c;
                k.push(v);
                k.sort_unstable();
                cover.push(k);
            }
            None => stuck.push(v),
        }
    }
    stuck.sort_unstable();
    (cover, stuck)
}

/// Split `leftover` into `r`-sets and give each its own absorbing member.
fn absorb<R: Rng>(
    g: &Graph,
    r: usize,
    family: &AbsorbingFamily,
    leftover: &[usize],
    tries: usize,
    memo: &mut HashMap<(Vec<usize>, usize), Option<Witnesses>>,
    rng: &mut R,
) -> Option<Vec<Vec<usize>>> {
    let member_ids: Vec<usize> = (0..family.members.len()).collect();
    let mut order = leftover.to_vec();
    for attempt in 0..tries.max(1) {
        if attempt > 0 {
            order.shuffle(rng);
        }
        let groups: Vec<Vec<usize>> = order
            .chunks(r)
            .map(|c| {
                let mut c = c.to_vec();
                c.sort_unstable();
                c
            })
            .collect();
        let mut wit = |gi: usize, mi: usize| -> bool {
            let key = (groups[gi].clone(), mi);
            memo.entry(key)
                .or_insert_with(|| is_absorber(g, &groups[gi], &family.members[mi].body, r).ok().flatten())
                .is_some()
        };
        // precompute so the matcher can take a plain `Fn`
        let table: Vec<Vec<bool>> = (0..groups.len())
            .map(|gi| member_ids.iter().map(|&mi| wit(gi, mi)).collect())
            .collect();
        let group_ids: Vec<usize> = (0..groups.len()).collect();
        let m = bipartite_max_matching(&group_ids, &member_ids, |gi, mi| table[gi][mi]);
        if m.len() == groups.len() {
            let mut pieces = Vec::new();
            let mut taken = vec![false; family.members.len()];
            for &(gi, mi) in &m {
                taken[mi] = true;
                let w = memo[&(groups[gi].clone(), mi)].as_ref().expect("matched pairs absorb");
                pieces.extend(w.joint.cliques().iter().cloned());
            }
            for (mi, mem) in family.members.iter().enumerate() {
                if !taken[mi] {
                    pieces.extend(mem.factor.cliques().iter().cloned());
                }
            }
            return Some(pieces);
        }
    }
    None
}

/// The non-extremal pipeline. Fails rather than guessing; the dispatcher
/// routes failures to the oracle.
pub fn run_nonextremal(g: &Graph, r: usize, cfg: &SolverConfig, trace: &mut Trace) -> PipelineOutcome {
    let n = g.n();
    let acfg = &cfg.absorbing;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut at = AbsorbingTrace::default();
    if r < 2 || !n.is_multiple_of(r) {
        return PipelineOutcome::Failed {
            stage: "absorb".into(),
            reason: format!("unsupported order r = {r} for n = {n}"),
        };
    }
    let mut family = build_absorbing_family(g, r, acfg, &mut rng);
    at.family_builds = 1;
    while !family.verified && at.family_builds < acfg.family_attempts.max(1) {
        family = build_absorbing_family(g, r, acfg, &mut rng);
        at.family_builds += 1;
    }
    at.members = family.members.iter().map(|m| m.body.clone()).collect();
    at.verified = family.verified;
    at.sampled = family.coverage.len();
    at.min_coverage = family.coverage.iter().map(|c| c.absorbers.len()).min().unwrap_or(0);
    if !family.verified {
        trace.note("absorbing family failed its sampled coverage check");
    }
    let mut rest = BitSet::full(n);
    rest.difference_with(&family.vertices(n));
    let mut memo = HashMap::new();
    let mut best_left = usize::MAX;
    for restart in 0..acfg.restarts.max(1) {
        at.restarts = restart + 1;
        let (cover, leftover) = greedy_cover(g, r, &rest, &mut rng);
        best_left = best_left.min(leftover.len());
        if leftover.len() > r * family.members.len() {
            continue;
        }
        if let Some(pieces) = absorb(g, r, &family, &leftover, acfg.groupings, &mut memo, &mut rng) {
            at.leftover = leftover.len();
            trace.absorbing = Some(at);
            let mut all = cover;
            all.extend(pieces);
            return PipelineOutcome::Factor(Tiling::new(all));
        }
    }
    at.leftover = best_left;
    let reason = format!(
        "no restart left an absorbable remainder (best leftover {best_left}, {} members)",
        family.members.len()
    );
    trace.absorbing = Some(at);
    PipelineOutcome::Failed {
        stage: "absorb".into(),
        reason,
    }
}

/// Non-extremal solve with oracle fallback.
pub fn solve_nonextremal(g: &Graph, r: usize, cfg: &SolverConfig) -> Certificate {
    let mut trace = Trace {
        path: "nonextremal".into(),
        c: crate::solver::degree_deficit(g, r.max(1)),
        seed: cfg.seed,
        ..Trace::default()
    };
    let out = run_nonextremal(g, r, cfg, &mut trace);
    settle(g, r, out, trace, cfg)
}
