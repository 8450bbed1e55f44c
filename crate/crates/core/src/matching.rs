//! Maximum matchings: Edmonds' blossom algorithm for general graphs (with a
//! Tutte-set witness when no perfect matching exists) and Kuhn's augmenting
//! path matcher for bipartite graphs.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::bitset::BitSet;
use crate::graph::Graph;

/// Edges stored as `(u, v)` with `u < v`, sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    pub edges: Vec<(usize, usize)>,
}

impl Matching {
    fn from_mates(mate: &[Option<usize>]) -> Self {
        let edges = mate
            .iter()
            .enumerate()
            .filter_map(|(u, m)| m.filter(|&v| u < v).map(|v| (u, v)))
            .collect();
        Matching { edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Edges are present in `g` and pairwise disjoint.
    pub fn is_valid_in(&self, g: &Graph) -> bool {
        let mut seen = vec![false; g.n()];
        for &(u, v) in &self.edges {
            if u >= g.n() || v >= g.n() || u == v || !g.has_edge(u, v) || seen[u] || seen[v] {
                return false;
            }
            seen[u] = true;
            seen[v] = true;
        }
        true
    }
}

/// A set `S` whose removal leaves more odd components than `|S|`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TutteSet {
    pub s: Vec<usize>,
    pub odd_components: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PerfectOutcome {
    Perfect(Matching),
    Tutte(TutteSet),
}

struct Blossom<'g> {
    g: &'g Graph,
    mate: Vec<Option<usize>>,
    parent: Vec<Option<usize>>,
    base: Vec<usize>,
    outer: Vec<bool>,
    in_blossom: Vec<bool>,
    queue: VecDeque<usize>,
}

impl<'g> Blossom<'g> {
    fn new(g: &'g Graph) -> Self {
        let n = g.n();
        Blossom {
            g,
            mate: vec![None; n],
            parent: vec![None; n],
            base: (0..n).collect(),
            outer: vec![false; n],
            in_blossom: vec![false; n],
            queue: VecDeque::new(),
        }
    }

    fn lca(&self, mut a: usize, mut b: usize) -> usize {
        let mut seen = vec![false; self.g.n()];
        loop {
            a = self.base[a];
            seen[a] = true;
            match self.mate[a] {
                None => break,
                Some(m) => a = self.parent[m].expect("matched outer vertex has a parent"),
            }
        }
        loop {
            b = self.base[b];
            if seen[b] {
                return b;
            }
            let m = self.mate[b].expect("path to root passes matched vertices");
            b = self.parent[m].expect("matched outer vertex has a parent");
        }
    }

    fn mark_path(&mut self, mut v: usize, b: usize, mut child: usize) {
        while self.base[v] != b {
            let m = self.mate[v].expect("blossom path vertex is matched");
            self.in_blossom[self.base[v]] = true;
            self.in_blossom[self.base[m]] = true;
            self.parent[v] = Some(child);
            child = m;
            v = self.parent[m].expect("blossom path continues");
        }
    }

    /// Grow an alternating tree from `root`; returns the exposed endpoint of an
    /// augmenting path if one exists. On failure `outer` marks the even vertices.
    fn search(&mut self, root: usize) -> Option<usize> {
        let n = self.g.n();
        self.outer.iter_mut().for_each(|x| *x = false);
        self.parent.iter_mut().for_each(|x| *x = None);
        for (i, b) in self.base.iter_mut().enumerate() {
            *b = i;
        }
        self.outer[root] = true;
        self.queue.clear();
        self.queue.push_back(root);
        while let Some(v) = self.queue.pop_front() {
            let nbrs: Vec<usize> = self.g.neighbors(v).iter().collect();
            for to in nbrs {
                if self.base[v] == self.base[to] || self.mate[v] == Some(to) {
                    continue;
                }
                let to_is_outer =
                    to == root || self.mate[to].is_some_and(|m| self.parent[m].is_some());
                if to_is_outer {
                    let cur = self.lca(v, to);
                    self.in_blossom.iter_mut().for_each(|x| *x = false);
                    self.mark_path(v, cur, to);
                    self.mark_path(to, cur, v);
                    for i in 0..n {
                        if self.in_blossom[self.base[i]] {
                            self.base[i] = cur;
                            if !self.outer[i] {
                                self.outer[i] = true;
                                self.queue.push_back(i);
                            }
                        }
                    }
                } else if self.parent[to].is_none() {
                    self.parent[to] = Some(v);
                    match self.mate[to] {
                        None => return Some(to),
                        Some(m) => {
                            self.outer[m] = true;
                            self.queue.push_back(m);
                        }
                    }
                }
            }
        }
        None
    }

    fn augment(&mut self, mut v: usize) {
        loop {
            let pv = self.parent[v].expect("augmenting path is rooted");
            let next = self.mate[pv];
            self.mate[v] = Some(pv);
            self.mate[pv] = Some(v);
            match next {
                None => break,
                Some(w) => v = w,
            }
        }
    }

    fn run(&mut self) {
        let n = self.g.n();
        // greedy start, ascending order
        for u in 0..n {
            if self.mate[u].is_none() {
                if let Some(v) = self.g.neighbors(u).iter().find(|&v| self.mate[v].is_none()) {
                    self.mate[u] = Some(v);
                    self.mate[v] = Some(u);
                }
            }
        }
        for root in 0..n {
            if self.mate[root].is_none() {
                if let Some(end) = self.search(root) {
                    self.augment(end);
                }
            }
        }
    }
}

pub fn max_matching(g: &Graph) -> Matching {
    let mut b = Blossom::new(g);
    b.run();
    Matching::from_mates(&b.mate)
}

/// Connected components of `g - removed`, each sorted, in order of smallest vertex.
pub fn components_without(g: &Graph, removed: &[usize]) -> Vec<Vec<usize>> {
    let n = g.n();
    let mut alive = BitSet::full(n);
    for &v in removed {
        if v < n {
            alive.remove(v);
        }
    }
    let mut comps = Vec::new();
    while let Some(start) = alive.first() {
        alive.remove(start);
        let mut comp = vec![start];
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            let fresh = g.neighbors(v).intersection(&alive);
            for w in fresh.iter() {
                alive.remove(w);
                comp.push(w);
                stack.push(w);
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

pub fn perfect_matching_or_certificate(g: &Graph) -> PerfectOutcome {
    let n = g.n();
    if n % 2 == 1 {
        let odd = components_without(g, &[])
            .into_iter()
            .filter(|c| c.len() % 2 == 1)
            .collect();
        return PerfectOutcome::Tutte(TutteSet {
            s: Vec::new(),
            odd_components: odd,
        });
    }
    let mut b = Blossom::new(g);
    b.run();
    if b.mate.iter().all(Option::is_some) {
        return PerfectOutcome::Perfect(Matching::from_mates(&b.mate));
    }
    // Gallai–Edmonds: D = vertices reachable by an even alternating path from
    // an exposed vertex; these are exactly the outer vertices of the failed
    // searches. S = N(D) \ D, and the odd components of G - S are those of G[D].
    let mut d = BitSet::new(n);
    let exposed: Vec<usize> = (0..n).filter(|&v| b.mate[v].is_none()).collect();
    for root in exposed {
        let found = b.search(root);
        debug_assert!(found.is_none(), "matching is maximum");
        for v in 0..n {
            if b.outer[v] {
                d.insert(v);
            }
        }
    }
    let mut a = BitSet::new(n);
    for v in d.iter() {
        a.union_with(g.neighbors(v));
    }
    a.difference_with(&d);
    let s = a.to_vec();
    let odd_components = components_without(g, &s)
        .into_iter()
        .filter(|c| c.len() % 2 == 1)
        .collect();
    PerfectOutcome::Tutte(TutteSet { s, odd_components })
}

/// Independent re-check of a Tutte witness: every listed set is a connected
/// component of `g - S` of odd size, and there are more of them than `|S|`.
pub fn check_tutte_set(g: &Graph, t: &TutteSet) -> bool {
    let n = g.n();
    let mut in_s = vec![false; n];
    for &v in &t.s {
        if v >= n || in_s[v] {
            return false;
        }
        in_s[v] = true;
    }
    let comps = components_without(g, &t.s);
    let mut owner = vec![usize::MAX; n];
    for (i, c) in comps.iter().enumerate() {
        for &v in c {
            owner[v] = i;
        }
    }
    let mut used = vec![false; comps.len()];
    for oc in &t.odd_components {
        if oc.is_empty() || oc.len() % 2 == 0 || oc.iter().any(|&v| v >= n) {
            return false;
        }
        let i = owner[oc[0]];
        if i == usize::MAX || used[i] {
            return false;
        }
        let mut sorted = oc.clone();
        sorted.sort_unstable();
        if sorted != comps[i] {
            return false;
        }
        used[i] = true;
    }
    t.odd_components.len() > t.s.len()
}

/// Maximum matching between `left` and `right`; pairs are `(left vertex, right vertex)`.
pub fn bipartite_max_matching<F>(left: &[usize], right: &[usize], adjacent: F) -> Vec<(usize, usize)>
where
    F: Fn(usize, usize) -> bool,
{
    let adj: Vec<Vec<usize>> = left
        .iter()
        .map(|&l| (0..right.len()).filter(|&j| adjacent(l, right[j])).collect())
        .collect();
    let mut match_right: Vec<Option<usize>> = vec![None; right.len()];
    for i in 0..left.len() {
        let mut visited = vec![false; right.len()];
        kuhn(i, &adj, &mut visited, &mut match_right);
    }
    let mut out: Vec<(usize, usize)> = match_right
        .iter()
        .enumerate()
        .filter_map(|(j, m)| m.map(|i| (left[i], right[j])))
        .collect();
    out.sort_unstable();
    out
}

fn kuhn(i: usize, adj: &[Vec<usize>], visited: &mut [bool], match_right: &mut [Option<usize>]) -> bool {
    for &j in &adj[i] {
        if visited[j] {
            continue;
        }
        visited[j] = true;
        if match_right[j].is_none_or(|k| kuhn(k, adj, visited, match_right)) {
            match_right[j] = Some(i);
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    fn petersen() -> Graph {
        let mut e = Vec::new();
        for i in 0..5 {
            e.push((i, (i + 1) % 5));
            e.push((i, i + 5));
            e.push((5 + i, 5 + (i + 2) % 5));
        }
        Graph::from_edges(10, &e).unwrap()
    }

    #[test]
    fn cycles_and_petersen() {
        assert_eq!(max_matching(&cycle(4)).len(), 2);
        assert_eq!(max_matching(&cycle(5)).len(), 2);
        let m = max_matching(&petersen());
        assert_eq!(m.len(), 5);
        assert!(m.is_valid_in(&petersen()));
    }

    #[test]
    fn k4_is_perfect() {
        match perfect_matching_or_certificate(&Graph::complete(4)) {
            PerfectOutcome::Perfect(m) => assert_eq!(m.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_triangles_give_empty_tutte_set() {
        let g = Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        match perfect_matching_or_certificate(&g) {
            PerfectOutcome::Tutte(t) => {
                assert!(t.s.is_empty());
                assert_eq!(t.odd_components.len(), 2);
                assert!(check_tutte_set(&g, &t));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn star_gives_center() {
        let g = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        match perfect_matching_or_certificate(&g) {
            PerfectOutcome::Tutte(t) => {
                assert_eq!(t.s, vec![0]);
                assert_eq!(t.odd_components.len(), 3);
                assert!(check_tutte_set(&g, &t));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn odd_order_has_empty_witness() {
        match perfect_matching_or_certificate(&Graph::complete(5)) {
            PerfectOutcome::Tutte(t) => assert!(check_tutte_set(&Graph::complete(5), &t)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tutte_check_rejects_bad_witnesses() {
        let g = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let fake = TutteSet {
            s: vec![],
            odd_components: vec![vec![1], vec![2]],
        };
        assert!(!check_tutte_set(&g, &fake));
        let dup = TutteSet {
            s: vec![0],
            odd_components: vec![vec![1], vec![1]],
        };
        assert!(!check_tutte_set(&g, &dup));
    }

    #[test]
    fn bipartite_basics() {
        let l = [0, 1, 2];
        let r = [3, 4, 5];
        assert_eq!(bipartite_max_matching(&l, &r, |_, _| true).len(), 3);
        assert!(bipartite_max_matching(&l, &r, |_, _| false).is_empty());
        // 0-3, 1-3, 1-4: augmenting path needed
        let m = bipartite_max_matching(&l, &r, |a, b| matches!((a, b), (0, 3) | (1, 3) | (1, 4)));
        assert_eq!(m, vec![(0, 3), (1, 4)]);
    }
}
