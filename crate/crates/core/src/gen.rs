//! Seeded instance generators. Each generator records the ground truth it
//! plants (hollow set, sparse parts, a factor) next to the graph, and labels
//! are shuffled so that planted structure is never positional.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{is_factor, Graph, Tiling};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    Extremal,
    PlantedSparse,
    RandomDense,
    PlantedTiling,
    Multipartite,
}

impl std::str::FromStr for GenKind {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, GenError> {
        Ok(match s {
            "extremal" => GenKind::Extremal,
            "planted-sparse" => GenKind::PlantedSparse,
            "random-dense" => GenKind::RandomDense,
            "planted-tiling" => GenKind::PlantedTiling,
            "multipartite" => GenKind::Multipartite,
            other => return Err(GenError::Invalid(format!("unknown generator kind {other:?}"))),
        })
    }
}

/// Generator parameters. `noise` is a probability whose meaning depends on the kind:
/// edge deletion for `planted-sparse`/`planted-tiling`/`random-dense`, and additionally
/// edge insertion inside the planted parts for `planted-sparse`. With zero noise,
/// `random-dense` keeps each edge with probability halfway between the target
/// degree density and 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub kind: GenKind,
    pub n: usize,
    pub r: usize,
    #[serde(default)]
    pub c: i64,
    #[serde(default = "default_s")]
    pub s: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: f64,
    /// Part sizes for `multipartite`; equal parts when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parts: Option<Vec<usize>>,
}

fn default_s() -> usize {
    1
}

impl GenSpec {
    pub fn new(kind: GenKind, n: usize, r: usize) -> Self {
        GenSpec {
            kind,
            n,
            r,
            c: 0,
            s: 1,
            seed: 0,
            noise: 0.0,
            parts: None,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn c(mut self, c: i64) -> Self {
        self.c = c;
        self
    }

    pub fn s(mut self, s: usize) -> Self {
        self.s = s;
        self
    }

    pub fn noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KnownAnswer {
    FactorExists,
    NoFactor,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenMeta {
    pub spec: GenSpec,
    pub answer: KnownAnswer,
    pub min_degree: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hollow: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted_parts: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted_tiling: Option<Tiling>,
}

#[derive(Clone, Debug)]
pub struct Generated {
    pub graph: Graph,
    pub meta: GenMeta,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("invalid generator spec: {0}")]
    Invalid(String),
    #[error("rejection budget of {0} samples exhausted")]
    BudgetExceeded(usize),
}

const REJECTION_BUDGET: usize = 20_000;

pub fn generate(spec: &GenSpec) -> Result<Generated, GenError> {
    if spec.r < 2 {
        return Err(GenError::Invalid("r must be at least 2".into()));
    }
    if !(0.0..=1.0).contains(&spec.noise) {
        return Err(GenError::Invalid("noise must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let raw = match spec.kind {
        GenKind::Extremal => extremal(spec)?,
        GenKind::PlantedSparse => planted_sparse(spec, &mut rng)?,
        GenKind::RandomDense => random_dense(spec, &mut rng)?,
        GenKind::PlantedTiling => planted_tiling(spec, &mut rng)?,
        GenKind::Multipartite => multipartite(spec)?,
    };
    let mut perm: Vec<usize> = (0..spec.n).collect();
    perm.shuffle(&mut rng);
    Ok(raw.relabel(spec, &perm))
}

struct Raw {
    graph: Graph,
    answer: KnownAnswer,
    hollow: Option<Vec<usize>>,
    parts: Option<Vec<Vec<usize>>>,
    tiling: Option<Tiling>,
}

impl Raw {
    fn relabel(self, spec: &GenSpec, perm: &[usize]) -> Generated {
        let map = |v: &Vec<usize>| -> Vec<usize> {
            let mut out: Vec<usize> = v.iter().map(|&x| perm[x]).collect();
            out.sort_unstable();
            out
        };
        let graph = self.graph.relabel(perm);
        let meta = GenMeta {
            spec: spec.clone(),
            answer: self.answer,
            min_degree: graph.min_degree(),
            hollow: self.hollow.as_ref().map(map),
            planted_parts: self.parts.as_ref().map(|ps| ps.iter().map(map).collect()),
            planted_tiling: self
                .tiling
                .as_ref()
                .map(|t| Tiling::new(t.cliques().iter().map(map).collect()).canonical()),
        };
        Generated { graph, meta }
    }
}

fn require_divisible(spec: &GenSpec) -> Result<usize, GenError> {
    if spec.n == 0 || !spec.n.is_multiple_of(spec.r) {
        return Err(GenError::Invalid(format!(
            "n = {} must be a positive multiple of r = {}",
            spec.n, spec.r
        )));
    }
    Ok(spec.n / spec.r)
}

/// `K_n` with every edge inside an `(n/r + 1)`-set removed.
fn extremal(spec: &GenSpec) -> Result<Raw, GenError> {
    let q = require_divisible(spec)?;
    let mut g = Graph::complete(spec.n);
    let hollow: Vec<usize> = (0..=q).collect();
    for &u in &hollow {
        for &v in &hollow {
            if u < v {
                g.remove_edge(u, v);
            }
        }
    }
    Ok(Raw {
        graph: g,
        answer: KnownAnswer::NoFactor,
        hollow: Some(hollow),
        parts: None,
        tiling: None,
    })
}

/// `s` near-independent parts; the first carries `c` extra vertices plus a
/// `c`-edge matching so that a factor still exists. Noise never touches the
/// recorded factor.
fn planted_sparse(spec: &GenSpec, rng: &mut ChaCha8Rng) -> Result<Raw, GenError> {
    let q = require_divisible(spec)?;
    let (r, s) = (spec.r, spec.s);
    if s == 0 || s > r {
        return Err(GenError::Invalid(format!("need 1 <= s <= r, got s = {s}")));
    }
    if spec.c < 0 || spec.c as usize > q {
        return Err(GenError::Invalid(format!("need 0 <= c <= n/r, got c = {}", spec.c)));
    }
    let c = spec.c as usize;
    // sizes of A_1..A_s and (when s < r) B
    let mut sizes = vec![q; s];
    sizes[0] += c;
    if s < r {
        sizes.push((r - s) * q - c);
    } else {
        sizes[s - 1] -= c;
    }
    if s == r && r == 2 && c > 0 {
        return Err(GenError::Invalid("c > 0 needs r >= 3 when s = r".into()));
    }
    let mut parts: Vec<Vec<usize>> = Vec::new();
    let mut next = 0;
    for &sz in &sizes {
        parts.push((next..next + sz).collect());
        next += sz;
    }
    let mut g = Graph::complete(spec.n);
    for part in parts.iter().take(s) {
        for (i, &u) in part.iter().enumerate() {
            for &v in &part[i + 1..] {
                g.remove_edge(u, v);
            }
        }
    }
    let a1 = parts[0].clone();
    for j in 0..c {
        g.add_edge(a1[2 * j], a1[2 * j + 1]);
    }

    // planted factor: surplus copies first, then balanced copies
    let mut cursor = vec![0usize; parts.len()];
    let take = |cursor: &mut Vec<usize>, p: usize, k: usize| -> Vec<usize> {
        let out = parts[p][cursor[p]..cursor[p] + k].to_vec();
        cursor[p] += k;
        out
    };
    let mut cliques = Vec::new();
    for _ in 0..c {
        let mut cl = take(&mut cursor, 0, 2);
        let last_sparse = if s == r { s - 1 } else { s };
        for p in 1..last_sparse {
            cl.extend(take(&mut cursor, p, 1));
        }
        if s < r {
            cl.extend(take(&mut cursor, s, r - s - 1));
        }
        cliques.push(cl);
    }
    while cursor[0] < parts[0].len() {
        let mut cl = Vec::new();
        for p in 0..s {
            cl.extend(take(&mut cursor, p, 1));
        }
        if s < r {
            cl.extend(take(&mut cursor, s, r - s));
        }
        cliques.push(cl);
    }
    let tiling = Tiling::new(cliques);
    debug_assert!(is_factor(&g, &tiling, r));

    if spec.noise > 0.0 {
        let mut protected = Graph::empty(spec.n);
        for cl in tiling.cliques() {
            for (i, &u) in cl.iter().enumerate() {
                for &v in &cl[i + 1..] {
                    protected.add_edge(u, v);
                }
            }
        }
        let mut part_of = vec![usize::MAX; spec.n];
        for (pi, part) in parts.iter().enumerate().take(s) {
            for &v in part {
                part_of[v] = pi;
            }
        }
        for u in 0..spec.n {
            for v in u + 1..spec.n {
                let inside = part_of[u] != usize::MAX && part_of[u] == part_of[v];
                let roll: f64 = rng.gen();
                if inside {
                    if !g.has_edge(u, v) && roll < spec.noise {
                        g.add_edge(u, v);
                    }
                } else if g.has_edge(u, v) && !protected.has_edge(u, v) && roll < spec.noise {
                    g.remove_edge(u, v);
                }
            }
        }
    }
    Ok(Raw {
        graph: g,
        answer: KnownAnswer::FactorExists,
        hollow: None,
        parts: Some(parts.into_iter().take(s).collect()),
        tiling: Some(tiling),
    })
}

/// `G(n, 1 - noise)` conditioned on `delta >= ceil((1 - 1/r) n) - c` by rejection.
fn random_dense(spec: &GenSpec, rng: &mut ChaCha8Rng) -> Result<Raw, GenError> {
    let n = spec.n;
    let target = hs_degree(n, spec.r) as i64 - spec.c;
    if target > n as i64 - 1 {
        return Err(GenError::Invalid(format!(
            "minimum degree {target} impossible on {n} vertices"
        )));
    }
    // halfway between the target density and 1 unless noise sets it
    let keep = if spec.noise > 0.0 {
        1.0 - spec.noise
    } else {
        (1.0 + target.max(0) as f64 / (n.max(2) - 1) as f64) / 2.0
    };
    for _ in 0..REJECTION_BUDGET {
        let mut g = Graph::empty(n);
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen::<f64>() < keep {
                    g.add_edge(u, v);
                }
            }
        }
        if g.min_degree() as i64 >= target {
            let answer = if !n.is_multiple_of(spec.r) {
                KnownAnswer::NoFactor
            } else if g.min_degree() >= hs_degree(n, spec.r) {
                // forced by the Hajnal–Szemerédi degree condition
                KnownAnswer::FactorExists
            } else {
                KnownAnswer::Unknown
            };
            return Ok(Raw {
                graph: g,
                answer,
                hollow: None,
                parts: None,
                tiling: None,
            });
        }
    }
    Err(GenError::BudgetExceeded(REJECTION_BUDGET))
}

/// A random `K_r`-factor overlaid on `G(n, 1 - noise)`.
fn planted_tiling(spec: &GenSpec, rng: &mut ChaCha8Rng) -> Result<Raw, GenError> {
    require_divisible(spec)?;
    let n = spec.n;
    let keep = 1.0 - spec.noise;
    let mut g = Graph::empty(n);
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen::<f64>() < keep {
                g.add_edge(u, v);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let cliques: Vec<Vec<usize>> = order.chunks(spec.r).map(<[usize]>::to_vec).collect();
    for cl in &cliques {
        for (i, &u) in cl.iter().enumerate() {
            for &v in &cl[i + 1..] {
                g.add_edge(u, v);
            }
        }
    }
    Ok(Raw {
        graph: g,
        answer: KnownAnswer::FactorExists,
        hollow: None,
        parts: None,
        tiling: Some(Tiling::new(cliques)),
    })
}

/// Complete `r`-partite graph.
fn multipartite(spec: &GenSpec) -> Result<Raw, GenError> {
    let sizes = match &spec.parts {
        Some(p) => p.clone(),
        None => vec![require_divisible(spec)?; spec.r],
    };
    if sizes.len() != spec.r || sizes.iter().sum::<usize>() != spec.n {
        return Err(GenError::Invalid(format!(
            "multipartite needs exactly r = {} parts summing to n = {}",
            spec.r, spec.n
        )));
    }
    let mut parts = Vec::new();
    let mut next = 0;
    for &sz in &sizes {
        parts.push((next..next + sz).collect::<Vec<usize>>());
        next += sz;
    }
    let mut g = Graph::complete(spec.n);
    for part in &parts {
        for (i, &u) in part.iter().enumerate() {
            for &v in &part[i + 1..] {
                g.remove_edge(u, v);
            }
        }
    }
    let balanced = sizes.iter().all(|&s| s == sizes[0]);
    let tiling = balanced.then(|| {
        Tiling::new(
            (0..sizes[0])
                .map(|i| parts.iter().map(|p| p[i]).collect())
                .collect(),
        )
    });
    Ok(Raw {
        graph: g,
        answer: if balanced {
            KnownAnswer::FactorExists
        } else {
            KnownAnswer::NoFactor
        },
        hollow: None,
        parts: Some(parts),
        tiling,
    })
}

/// `ceil((1 - 1/r) n)`.
pub fn hs_degree(n: usize, r: usize) -> usize {
    ((r - 1) * n).div_ceil(r)
}
