//! Dense undirected simple graphs, vertex partitions and clique tilings.
//!
//! Every pipeline query is some form of neighbourhood intersection, so the
//! adjacency relation is kept as one [`BitSet`] row per vertex.

use std::fmt::Write as _;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitset::BitSet;

/// Exact rational used for density thresholds.
pub type Rational = Ratio<i64>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("vertex {vertex} out of range for graph on {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("vertex {0} listed twice")]
    DuplicateVertex(usize),
    #[error("parts overlap at vertex {0}")]
    OverlappingParts(usize),
}

#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    rows: Vec<BitSet>,
}

impl std::fmt::Debug for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Graph(n={}, m={})", self.n, self.edge_count())
    }
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            rows: vec![BitSet::new(n); n],
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Graph::empty(n);
        for u in 0..n {
            for v in u + 1..n {
                g.add_edge(u, v);
            }
        }
        g
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut g = Graph::empty(n);
        for &(u, v) in edges {
            g.check_vertex(u)?;
            g.check_vertex(v)?;
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            g.add_edge(u, v);
        }
        Ok(g)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn check_vertex(&self, v: usize) -> Result<(), GraphError> {
        if v < self.n {
            Ok(())
        } else {
            Err(GraphError::VertexOutOfRange { vertex: v, n: self.n })
        }
    }

    pub fn add_edge(&mut self, u: usize, v: usize) {
        assert!(u != v, "self-loop at {u}");
        self.rows[u].insert(v);
        self.rows[v].insert(u);
    }

    pub fn remove_edge(&mut self, u: usize, v: usize) {
        self.rows[u].remove(v);
        self.rows[v].remove(u);
    }

    #[inline]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.rows[u].contains(v)
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &BitSet {
        &self.rows[v]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.rows[v].count()
    }

    pub fn min_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).min().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(BitSet::count).sum::<usize>() / 2
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in self.rows[u].iter().filter(|&v| v > u) {
                out.push((u, v));
            }
        }
        out
    }

    /// Number of edges of G[set].
    pub fn induced_edge_count(&self, set: &[usize]) -> usize {
        let mask = BitSet::from_iter(self.n, set.iter().copied());
        set.iter()
            .map(|&v| self.rows[v].intersection_count(&mask))
            .sum::<usize>()
            / 2
    }

    pub fn is_clique(&self, set: &[usize]) -> bool {
        set.iter()
            .enumerate()
            .all(|(i, &u)| set[i + 1..].iter().all(|&v| u != v && self.has_edge(u, v)))
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        set.iter()
            .enumerate()
            .all(|(i, &u)| set[i + 1..].iter().all(|&v| !self.has_edge(u, v)))
    }

    /// Common neighbourhood of `set`, restricted to `within`.
    pub fn common_neighbors(&self, set: &[usize], within: &BitSet) -> BitSet {
        let mut acc = within.clone();
        for &v in set {
            acc.intersect_with(&self.rows[v]);
        }
        acc
    }

    /// Induced subgraph on `vertices`; vertex `i` of the result is `vertices[i]`.
    pub fn induced(&self, vertices: &[usize]) -> Graph {
        let mut g = Graph::empty(vertices.len());
        for (i, &u) in vertices.iter().enumerate() {
            for (j, &v) in vertices.iter().enumerate().skip(i + 1) {
                if self.has_edge(u, v) {
                    g.add_edge(i, j);
                }
            }
        }
        g
    }

    /// `d_A(v)` for every vertex `v`.
    pub fn degree_profile(&self, set: &[usize]) -> Result<Vec<usize>, GraphError> {
        for &v in set {
            self.check_vertex(v)?;
        }
        let mask = BitSet::from_iter(self.n, set.iter().copied());
        Ok(self.rows.iter().map(|row| row.intersection_count(&mask)).collect())
    }

    /// Parse the `n m` header + `u v` edge-list format. Duplicate edges are merged.
    pub fn parse_edge_list(text: &str) -> Result<Graph, GraphError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(GraphError::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let (n, m) = parse_pair(hline, header)?;
        let mut g = Graph::empty(n);
        let mut seen = 0usize;
        for (line, l) in lines {
            let (u, v) = parse_pair(line, l)?;
            for w in [u, v] {
                if w >= n {
                    return Err(GraphError::Parse {
                        line,
                        msg: format!("vertex {w} out of range (n = {n})"),
                    });
                }
            }
            if u == v {
                return Err(GraphError::Parse {
                    line,
                    msg: format!("self-loop at vertex {u}"),
                });
            }
            g.add_edge(u, v);
            seen += 1;
        }
        if seen != m {
            return Err(GraphError::Parse {
                line: hline,
                msg: format!("header announces {m} edges, found {seen}"),
            });
        }
        Ok(g)
    }

    /// Canonical edge-list text: header then edges `u < v` in lexicographic order.
    pub fn to_edge_list(&self) -> String {
        let edges = self.edges();
        let mut s = format!("{} {}\n", self.n, edges.len());
        for (u, v) in edges {
            let _ = writeln!(s, "{u} {v}");
        }
        s
    }

    /// Relabel vertices: vertex `v` becomes `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Graph {
        let mut g = Graph::empty(self.n);
        for (u, v) in self.edges() {
            g.add_edge(perm[u], perm[v]);
        }
        g
    }
}

fn parse_pair(line: usize, text: &str) -> Result<(usize, usize), GraphError> {
    let mut it = text.split_whitespace();
    let mut field = |what: &str| -> Result<usize, GraphError> {
        let tok = it.next().ok_or_else(|| GraphError::Parse {
            line,
            msg: format!("missing {what}"),
        })?;
        tok.parse().map_err(|_| GraphError::Parse {
            line,
            msg: format!("expected a non-negative integer for {what}, got {tok:?}"),
        })
    };
    let a = field("first field")?;
    let b = field("second field")?;
    if let Some(extra) = it.next() {
        return Err(GraphError::Parse {
            line,
            msg: format!("unexpected trailing token {extra:?}"),
        });
    }
    Ok((a, b))
}

/// `e(G[U]) < gamma * n^2`. The size of `U` is not checked.
pub fn is_sparse_set(g: &Graph, set: &[usize], gamma: Rational) -> Result<bool, GraphError> {
    for &v in set {
        g.check_vertex(v)?;
    }
    Ok(below_density(g.induced_edge_count(set), g.n(), gamma))
}

/// `edges < gamma * n^2`, compared exactly.
pub fn below_density(edges: usize, n: usize, gamma: Rational) -> bool {
    let lhs = edges as i128 * *gamma.denom() as i128;
    let rhs = *gamma.numer() as i128 * (n as i128) * (n as i128);
    lhs < rhs
}

/// A set of `r`-cliques, each stored sorted.
pub type Clique = Vec<usize>;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tiling(pub Vec<Clique>);

impl Tiling {
    pub fn new(mut cliques: Vec<Clique>) -> Self {
        for c in cliques.iter_mut() {
            c.sort_unstable();
        }
        Tiling(cliques)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn cliques(&self) -> &[Clique] {
        &self.0
    }

    pub fn vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.0.iter().flatten().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn extend(&mut self, other: Tiling) {
        self.0.extend(other.0);
    }

    /// Members sorted, then the member list sorted, for stable output.
    pub fn canonical(mut self) -> Self {
        for c in self.0.iter_mut() {
            c.sort_unstable();
        }
        self.0.sort();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TilingViolation {
    #[error("member {index} has {size} vertices, expected {r}")]
    WrongSize { index: usize, size: usize, r: usize },
    #[error("member {index} contains invalid vertex {vertex}")]
    InvalidVertex { index: usize, vertex: usize },
    #[error("member {index}: {u} and {v} are not adjacent")]
    NotClique { index: usize, u: usize, v: usize },
    #[error("vertex {vertex} is used by members {first} and {second}")]
    Overlap { vertex: usize, first: usize, second: usize },
}

/// Checks that `t` is a `K_r`-tiling of `g`; reports the first violation found.
pub fn check_tiling(g: &Graph, t: &Tiling, r: usize) -> Result<(), TilingViolation> {
    let mut owner: Vec<Option<usize>> = vec![None; g.n()];
    for (index, c) in t.0.iter().enumerate() {
        if c.len() != r {
            return Err(TilingViolation::WrongSize {
                index,
                size: c.len(),
                r,
            });
        }
        for (i, &u) in c.iter().enumerate() {
            if u >= g.n() {
                return Err(TilingViolation::InvalidVertex { index, vertex: u });
            }
            if let Some(first) = owner[u] {
                return Err(TilingViolation::Overlap {
                    vertex: u,
                    first,
                    second: index,
                });
            }
            owner[u] = Some(index);
            for &v in &c[i + 1..] {
                if v < g.n() && !g.has_edge(u, v) {
                    return Err(TilingViolation::NotClique { index, u, v });
                }
            }
        }
    }
    Ok(())
}

pub fn verify_tiling(g: &Graph, t: &Tiling, r: usize) -> bool {
    check_tiling(g, t, r).is_ok()
}

/// `K_r`-tiling that covers every vertex.
pub fn is_factor(g: &Graph, t: &Tiling, r: usize) -> bool {
    verify_tiling(g, t, r) && t.len() * r == g.n()
}

/// Ordered vertex partition `(A_1, ..., A_s, B)` of a ground set `0..universe`.
///
/// The first `sparse` parts are the peeled sparse sets; a trailing remainder part
/// may be present. Parts may be empty only when explicitly allowed by the caller.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    universe: usize,
    parts: Vec<Vec<usize>>,
    sparse: usize,
    #[serde(skip)]
    part_of: Vec<Option<usize>>,
}

impl Partition {
    pub fn new(universe: usize, parts: Vec<Vec<usize>>, sparse: usize) -> Result<Self, GraphError> {
        let mut part_of = vec![None; universe];
        let mut parts = parts;
        for (pi, part) in parts.iter_mut().enumerate() {
            part.sort_unstable();
            for &v in part.iter() {
                if v >= universe {
                    return Err(GraphError::VertexOutOfRange { vertex: v, n: universe });
                }
                if part_of[v].is_some() {
                    return Err(GraphError::OverlappingParts(v));
                }
                part_of[v] = Some(pi);
            }
        }
        Ok(Partition {
            universe,
            parts,
            sparse,
            part_of,
        })
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn parts(&self) -> &[Vec<usize>] {
        &self.parts
    }

    pub fn part(&self, i: usize) -> &[usize] {
        &self.parts[i]
    }

    pub fn num_parts(&self) -> usize {
        self.parts.len()
    }

    pub fn sparse_count(&self) -> usize {
        self.sparse
    }

    pub fn part_of(&self, v: usize) -> Option<usize> {
        self.part_of.get(v).copied().flatten()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.parts.iter().map(Vec::len).collect()
    }

    pub fn covered(&self) -> usize {
        self.parts.iter().map(Vec::len).sum()
    }

    pub fn covers_universe(&self) -> bool {
        self.covered() == self.universe
    }

    pub fn part_mask(&self, i: usize) -> BitSet {
        BitSet::from_iter(self.universe, self.parts[i].iter().copied())
    }

    /// Per-part vertex counts of `vertices`; `None` if a vertex lies outside every part.
    pub fn type_of(&self, vertices: &[usize]) -> Option<Vec<usize>> {
        let mut counts = vec![0; self.parts.len()];
        for &v in vertices {
            counts[self.part_of(v)?] += 1;
        }
        Some(counts)
    }

    /// Rebuild the lookup table after deserialisation.
    pub fn reindex(self) -> Result<Self, GraphError> {
        Partition::new(self.universe, self.parts, self.sparse)
    }

    /// Remove `vertices` from whichever parts contain them.
    pub fn without(&self, vertices: &[usize]) -> Partition {
        let drop = BitSet::from_iter(self.universe, vertices.iter().copied());
        let parts = self
            .parts
            .iter()
            .map(|p| p.iter().copied().filter(|&v| !drop.contains(v)).collect())
            .collect();
        Partition::new(self.universe, parts, self.sparse).expect("subpartition of a partition")
    }
}
