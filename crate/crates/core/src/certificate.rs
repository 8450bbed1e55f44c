//! The result document and its independent verifier.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::absorbing::AbsorbingTrace;
use crate::bitset::BitSet;
use crate::colorcode::enumerate_types;
use crate::extremal::PipelineTrace;
use crate::graph::{is_factor, Graph, Partition, Tiling};
use crate::matching::{check_tutte_set, TutteSet};
use crate::oracle::{enumerate_kr, find_typed_tiling_exact, oracle_kr_factor_with_budget, OracleError};
use crate::slackalg::{partition_slack, slack_bound, base_vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    FactorFound,
    NoFactor,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Evidence {
    /// An independent set with more than `n/r` vertices.
    IndependentSetTooLarge { set: Vec<usize> },
    /// A Tutte set of `G[vertices]`. On its own this is a proof only for
    /// `r = 2` with `vertices = V(G)`; otherwise it records the parity
    /// obstruction met during assembly, confirmed by exhaustive search.
    TutteParity { vertices: Vec<usize>, tutte: TutteSet },
    /// No `K_r`-tiling of at most `bound` members has slack `target` on the
    /// coordinates `index_set` of the ordered partition `parts`.
    SlackInfeasible {
        parts: Vec<Vec<usize>>,
        index_set: Vec<usize>,
        target: Vec<i64>,
        t_i: i64,
        bound: String,
    },
    /// Exhaustive search found no factor.
    OracleExhausted,
    Divisibility { n: usize, r: usize },
}

impl Evidence {
    pub fn kind(&self) -> &'static str {
        match self {
            Evidence::IndependentSetTooLarge { .. } => "IndependentSetTooLarge",
            Evidence::TutteParity { .. } => "TutteParity",
            Evidence::SlackInfeasible { .. } => "SlackInfeasible",
            Evidence::OracleExhausted => "OracleExhausted",
            Evidence::Divisibility { .. } => "Divisibility",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fallback {
    pub stage: String,
    pub reason: String,
}

/// Audit trail of how a verdict was reached. Contains no timings, so it is a
/// deterministic function of the input and the seed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub path: String,
    pub c: i64,
    pub seed: u64,
    #[serde(default)]
    pub fallbacks: Vec<Fallback>,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern_space: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipeline_evidence: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extremal: Option<PipelineTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absorbing: Option<AbsorbingTrace>,
}

impl Trace {
    pub fn fallback(&mut self, stage: &str, reason: impl Into<String>) {
        self.fallbacks.push(Fallback {
            stage: stage.to_string(),
            reason: reason.into(),
        });
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        self.notes.push(msg.into());
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub verdict: Verdict,
    pub r: usize,
    pub n: usize,
    #[serde(default)]
    pub factor: Option<Tiling>,
    #[serde(default)]
    pub evidence: Option<Evidence>,
    #[serde(default)]
    pub trace: Trace,
    #[serde(default)]
    pub timing_ms: u64,
}

impl Certificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serialises")
    }

    /// JSON with the wall-clock field zeroed, for byte-level comparisons.
    pub fn to_json_canonical(&self) -> String {
        let mut c = self.clone();
        c.timing_ms = 0;
        c.to_json()
    }

    pub fn from_json(text: &str) -> Result<Self, VerifyError> {
        serde_json::from_str(text).map_err(|e| VerifyError::Schema(e.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("malformed certificate: {0}")]
    Schema(String),
}

/// Node budget for the exhaustive parts of verification.
pub const VERIFY_BUDGET: u64 = 20_000_000;

/// Parse and check a certificate document against `g`.
pub fn verify_document(g: &Graph, text: &str) -> Result<bool, VerifyError> {
    Ok(verify_certificate(g, &Certificate::from_json(text)?))
}

/// Independently re-check the verdict and its evidence.
pub fn verify_certificate(g: &Graph, cert: &Certificate) -> bool {
    let n = g.n();
    if cert.n != n || cert.r == 0 {
        return false;
    }
    let r = cert.r;
    match cert.verdict {
        Verdict::FactorFound => {
            cert.evidence.is_none() && cert.factor.as_ref().is_some_and(|t| is_factor(g, t, r))
        }
        Verdict::NoFactor => {
            if cert.factor.is_some() {
                return false;
            }
            match &cert.evidence {
                None => false,
                Some(ev) => check_evidence(g, r, ev),
            }
        }
        Verdict::Inconclusive => false,
    }
}

fn check_evidence(g: &Graph, r: usize, ev: &Evidence) -> bool {
    let n = g.n();
    match ev {
        Evidence::Divisibility { n: en, r: er } => *en == n && *er == r && !n.is_multiple_of(r),
        Evidence::IndependentSetTooLarge { set } => {
            r >= 2 && distinct_in_range(set, n) && g.is_independent(set) && set.len() * r > n
        }
        Evidence::TutteParity { vertices, tutte } => {
            if !distinct_in_range(vertices, n) {
                return false;
            }
            let mut local = vec![usize::MAX; n];
            for (i, &v) in vertices.iter().enumerate() {
                local[v] = i;
            }
            let map = |xs: &[usize]| -> Option<Vec<usize>> {
                xs.iter()
                    .map(|&v| (v < n && local[v] != usize::MAX).then(|| local[v]))
                    .collect()
            };
            let Some(s) = map(&tutte.s) else { return false };
            let Some(comps) = tutte.odd_components.iter().map(|c| map(c)).collect::<Option<Vec<_>>>() else {
                return false;
            };
            let h = g.induced(vertices);
            if !check_tutte_set(&h, &TutteSet { s, odd_components: comps }) {
                return false;
            }
            if r == 2 && vertices.len() == n {
                return true;
            }
            matches!(oracle_kr_factor_with_budget(g, r, VERIFY_BUDGET), Ok(None))
        }
        Evidence::OracleExhausted => matches!(oracle_kr_factor_with_budget(g, r, VERIFY_BUDGET), Ok(None)),
        Evidence::SlackInfeasible {
            parts,
            index_set,
            target,
            t_i,
            bound,
        } => check_slack_infeasible(g, r, parts, index_set, target, *t_i, bound),
    }
}

fn distinct_in_range(xs: &[usize], n: usize) -> bool {
    let mut seen = BitSet::new(n);
    for &v in xs {
        if v >= n || seen.contains(v) {
            return false;
        }
        seen.insert(v);
    }
    true
}

fn check_slack_infeasible(
    g: &Graph,
    r: usize,
    parts: &[Vec<usize>],
    index_set: &[usize],
    target: &[i64],
    t_i: i64,
    bound: &str,
) -> bool {
    let n = g.n();
    let rp = parts.len();
    if r < 2 || rp < 2 || rp > r || !n.is_multiple_of(r) {
        return false;
    }
    let Ok(p) = Partition::new(n, parts.to_vec(), rp - 1) else { return false };
    if !p.covers_universe() {
        return false;
    }
    let mut sorted_i = index_set.to_vec();
    sorted_i.sort_unstable();
    sorted_i.dedup();
    if sorted_i.len() != index_set.len() || index_set.iter().any(|&i| i >= rp) || index_set.is_empty() {
        return false;
    }
    let Ok(ps) = partition_slack(&p, r) else { return false };
    let restricted: Vec<i64> = index_set.iter().map(|&i| ps[i]).collect();
    if restricted != target || target.iter().map(|x| x.abs()).sum::<i64>() != t_i {
        return false;
    }
    if slack_bound(t_i, r, index_set.len()).to_string() != bound {
        return false;
    }
    let max_size = bound
        .parse::<u64>()
        .map_or(n / r, |b| (b as usize).min(n / r));
    matches!(no_admissible_tiling(g, r, &p, index_set, target, max_size), Ok(true))
}

/// Exhaustive: is there no tiling of at most `max_size` members whose slack
/// restricted to `index_set` equals `target`? Members whose own restricted
/// slack is zero can always be dropped, so only the other types are searched.
fn no_admissible_tiling(
    g: &Graph,
    r: usize,
    p: &Partition,
    index_set: &[usize],
    target: &[i64],
    max_size: usize,
) -> Result<bool, OracleError> {
    if target.iter().all(|&x| x == 0) {
        return Ok(false);
    }
    let b = base_vector(r, p.num_parts());
    let cliques = enumerate_kr(g, r);
    let present: Vec<Vec<usize>> = {
        let mut ts: Vec<Vec<usize>> = cliques.iter().filter_map(|c| p.type_of(c)).collect();
        ts.sort();
        ts.dedup();
        ts
    };
    let types: Vec<Vec<usize>> = enumerate_types(r, p.num_parts())
        .into_iter()
        .filter(|t| present.contains(t))
        .filter(|t| index_set.iter().any(|&i| t[i] as i64 != b[i]))
        .collect();
    let deltas: Vec<Vec<i64>> = types
        .iter()
        .map(|t| index_set.iter().map(|&i| t[i] as i64 - b[i]).collect())
        .collect();
    let step = 2 * (r as i64 - 1);
    let mut counts = vec![0usize; types.len()];
    let mut partial = vec![0i64; target.len()];
    let mut budget = VERIFY_BUDGET;
    let sizes = p.sizes();
    let mut found = false;
    dfs_counts(
        &mut DfsCtx {
            g,
            p,
            types: &types,
            deltas: &deltas,
            target,
            step,
            sizes: &sizes,
            budget: &mut budget,
            found: &mut found,
        },
        0,
        max_size,
        &mut counts,
        &mut partial,
    )?;
    Ok(!found)
}

struct DfsCtx<'a> {
    g: &'a Graph,
    p: &'a Partition,
    types: &'a [Vec<usize>],
    deltas: &'a [Vec<i64>],
    target: &'a [i64],
    step: i64,
    sizes: &'a [usize],
    budget: &'a mut u64,
    found: &'a mut bool,
}

fn dfs_counts(
    ctx: &mut DfsCtx<'_>,
    j: usize,
    left: usize,
    counts: &mut Vec<usize>,
    partial: &mut Vec<i64>,
) -> Result<(), OracleError> {
    if *ctx.found {
        return Ok(());
    }
    if *ctx.budget == 0 {
        return Err(OracleError::BudgetExceeded(VERIFY_BUDGET));
    }
    *ctx.budget -= 1;
    let dist: i64 = partial.iter().zip(ctx.target).map(|(a, t)| (t - a).abs()).sum();
    if dist > ctx.step * left as i64 {
        return Ok(());
    }
    if dist == 0 && counts.iter().any(|&c| c > 0) {
        // capacity check, then realise
        let mut used = vec![0usize; ctx.sizes.len()];
        for (t, &c) in ctx.types.iter().zip(counts.iter()) {
            for (u, &x) in used.iter_mut().zip(t) {
                *u += x * c;
            }
        }
        if used.iter().zip(ctx.sizes).all(|(u, s)| u <= s) {
            let pattern: Vec<Vec<usize>> = ctx
                .types
                .iter()
                .zip(counts.iter())
                .flat_map(|(t, &c)| std::iter::repeat_n(t.clone(), c))
                .collect();
            let hit = find_typed_tiling_exact(ctx.g, ctx.p, &pattern, &BitSet::new(ctx.g.n()), *ctx.budget)?;
            if hit.is_some() {
                *ctx.found = true;
                return Ok(());
            }
        }
    }
    if j == ctx.types.len() || left == 0 {
        return Ok(());
    }
    for extra in 0..=left {
        counts[j] += extra;
        for (a, d) in partial.iter_mut().zip(&ctx.deltas[j]) {
            *a += d * extra as i64;
        }
        // `extra == 0` descends without change; others re-test at the next level
        dfs_counts(ctx, j + 1, left - extra, counts, partial)?;
        for (a, d) in partial.iter_mut().zip(&ctx.deltas[j]) {
            *a -= d * extra as i64;
        }
        counts[j] -= extra;
        if *ctx.found {
            break;
        }
    }
    Ok(())
}
