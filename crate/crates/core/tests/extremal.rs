mod common;

use clique_factor::bitset::BitSet;
use clique_factor::certificate::{verify_certificate, Evidence, Verdict};
use clique_factor::extremal::{
    admissible_tilings, assemble, classify_and_move, clean_bad_vertices, peel_sparse_sets, solve_extremal,
    transfer_copies, AssembleError, DetectorConfig, Peeled, Thresholds,
};
use clique_factor::gen::{generate, GenKind, GenSpec};
use clique_factor::slackalg::partition_slack;
use clique_factor::solver::solve;
use clique_factor::{Graph, Mode, Partition, SolverConfig};
use common::{has_factor, is_factor_of};

/// Parts listed in `sparse` are independent; every other pair is adjacent.
fn split_graph(n: usize, sparse: &[Vec<usize>]) -> Graph {
    let mut g = Graph::complete(n);
    for part in sparse {
        for (i, &u) in part.iter().enumerate() {
            for &v in &part[i + 1..] {
                g.remove_edge(u, v);
            }
        }
    }
    g
}

fn range(a: usize, b: usize) -> Vec<usize> {
    (a..b).collect()
}

fn peeled(parts: Vec<Vec<usize>>, n: usize) -> Peeled {
    let rest = (0..n).filter(|v| !parts.iter().any(|p| p.contains(v))).collect();
    Peeled {
        s: parts.len(),
        edges: vec![0; parts.len()],
        parts,
        rest,
        exact: true,
    }
}

fn overlap(a: &[usize], b: &[usize]) -> usize {
    a.iter().filter(|v| b.contains(v)).count()
}

#[test]
fn planted_sparse_parts_are_recovered() {
    for seed in 0..5 {
        let gen = generate(&GenSpec::new(GenKind::PlantedSparse, 30, 3).s(2).seed(seed)).unwrap();
        let planted = gen.meta.planted_parts.clone().unwrap();
        let p = peel_sparse_sets(&gen.graph, 3, &DetectorConfig::default()).unwrap();
        assert_eq!(p.s, 2, "seed {seed}");
        for part in &planted {
            let best = p.parts.iter().map(|q| overlap(q, part)).max().unwrap();
            assert!(10 * best >= 9 * part.len(), "seed {seed}: overlap {best} of {}", part.len());
        }
    }
}

#[test]
fn dense_random_graph_has_no_sparse_set() {
    let gen = generate(&GenSpec::new(GenKind::RandomDense, 18, 3).seed(2)).unwrap();
    let g = &gen.graph;
    let det = DetectorConfig::default();
    // every 6-set spans at least gamma * 18^2 edges
    let limit = det.gamma * clique_factor::Rational::from_integer(18 * 18);
    let mut sparse_found = false;
    for mask in 0u32..(1 << 18) {
        if mask.count_ones() == 6 {
            let set: Vec<usize> = (0..18).filter(|&v| mask >> v & 1 == 1).collect();
            let e = g.induced_edge_count(&set) as i64;
            sparse_found |= clique_factor::Rational::from_integer(e) < limit;
        }
    }
    assert!(!sparse_found);
    assert_eq!(peel_sparse_sets(g, 3, &det).unwrap().s, 0);
}

#[test]
fn balanced_tripartite_peels_all_parts() {
    let g = split_graph(9, &[range(0, 3), range(3, 6), range(6, 9)]);
    assert_eq!(peel_sparse_sets(&g, 3, &DetectorConfig::default()).unwrap().s, 3);
}

#[test]
fn noiseless_planted_parts_are_kept() {
    let gen = generate(&GenSpec::new(GenKind::PlantedSparse, 30, 3).s(2).seed(11)).unwrap();
    let planted = gen.meta.planted_parts.clone().unwrap();
    let p = peeled(planted.clone(), 30);
    let cl = classify_and_move(&gen.graph, 3, &p, &Thresholds::default()).unwrap();
    for (i, part) in planted.iter().enumerate() {
        let mut want = part.clone();
        want.sort_unstable();
        assert_eq!(cl.partition.part(i), want.as_slice());
    }
    assert_eq!(cl.slack, vec![0, 0, 0]);
}

#[test]
fn swapped_vertices_move_back() {
    let a = range(0, 10);
    let g = split_graph(30, std::slice::from_ref(&a));
    // the detector returned A with vertex 9 replaced by 29
    let mut wrong = range(0, 9);
    wrong.push(29);
    let cl = classify_and_move(&g, 3, &peeled(vec![wrong], 30), &Thresholds::default()).unwrap();
    assert_eq!(cl.partition.part(0), a.as_slice());
    assert_eq!(cl.slack, vec![0, 0]);
}

#[test]
fn middling_vertex_lands_in_remainder() {
    let a = range(0, 10);
    let mut g = split_graph(30, std::slice::from_ref(&a));
    for v in 1..8 {
        g.add_edge(0, v);
    }
    let cl = classify_and_move(&g, 3, &peeled(vec![a], 30), &Thresholds::default()).unwrap();
    assert!(!cl.partition.part(0).contains(&0));
    assert!(cl.partition.part(1).contains(&0));
    assert_eq!(cl.slack, vec![-1, 1]);
}

#[test]
fn zero_slack_needs_nothing() {
    let g = split_graph(9, &[range(0, 3)]);
    let p = Partition::new(9, vec![range(0, 3), range(3, 9)], 1).unwrap();
    let ss = admissible_tilings(&g, 3, 0, &p, &Thresholds::default(), &SolverConfig::default(), 1).unwrap();
    assert_eq!(ss.admissible.len(), 1);
    assert!(ss.admissible[0].is_empty());
}

#[test]
fn planted_copy_balances_slack() {
    // A_1 = 0..11 with one edge 0-1, A_2 = 11..20, B = 20..30
    let a1 = range(0, 11);
    let a2 = range(11, 20);
    let mut g = split_graph(30, &[a1.clone(), a2.clone()]);
    g.add_edge(0, 1);
    let p = Partition::new(30, vec![a1, a2, range(20, 30)], 2).unwrap();
    assert_eq!(partition_slack(&p, 3).unwrap(), vec![1, -1, 0]);
    let cfg = SolverConfig::default();
    let ss = admissible_tilings(&g, 3, 1, &p, &Thresholds::default(), &cfg, 1).unwrap();
    assert_eq!(ss.index_set, vec![0, 1, 2]);
    let k = &ss.admissible[0];
    assert_eq!(k.len(), 1);
    let c = &k.cliques()[0];
    assert!(g.is_clique(c) && c.contains(&0) && c.contains(&1));
    assert_eq!(p.type_of(c), Some(vec![2, 0, 1]));
    let (p2, copies) = transfer_copies(&g, 3, &p, k, &ss.index_set, &[], false).unwrap();
    assert!(copies.is_empty());
    assert_eq!(partition_slack(&p2, 3).unwrap(), vec![0, 0, 0]);
}

/// `A_1` has one edge too many vertices, and that edge has no common neighbour.
fn slack_infeasible_instance() -> Graph {
    let a = range(0, 6);
    let mut g = split_graph(15, std::slice::from_ref(&a));
    g.add_edge(0, 1);
    for b in 6..15 {
        if b >= 10 {
            g.remove_edge(0, b);
        } else {
            g.remove_edge(1, b);
        }
    }
    g
}

#[test]
fn infeasible_slack_is_certified() {
    let g = slack_infeasible_instance();
    assert!(!has_factor(&g, 3));
    let cfg = SolverConfig::default().with_mode(Mode::Extremal);
    let cert = solve(&g, 3, &cfg).unwrap();
    assert_eq!(cert.verdict, Verdict::NoFactor);
    assert!(
        matches!(cert.evidence, Some(Evidence::SlackInfeasible { .. })),
        "{:?}",
        cert.evidence
    );
    assert!(verify_certificate(&g, &cert));
}

#[test]
fn extremal_construction_has_no_admissible_tiling() {
    let gen = generate(&GenSpec::new(GenKind::Extremal, 18, 3).seed(1)).unwrap();
    let g = &gen.graph;
    let hollow = gen.meta.hollow.clone().unwrap();
    let rest: Vec<usize> = (0..18).filter(|v| !hollow.contains(v)).collect();
    let p = Partition::new(18, vec![hollow, rest], 1).unwrap();
    let ss = admissible_tilings(g, 3, 1, &p, &Thresholds::default(), &SolverConfig::default(), 1).unwrap();
    assert!(ss.admissible.is_empty());
    assert!(!has_factor(g, 3));
}

#[test]
fn no_bad_vertices_is_identity() {
    let g = split_graph(9, &[range(0, 3)]);
    let p = Partition::new(9, vec![range(0, 3), range(3, 9)], 1).unwrap();
    let (p2, copies) = clean_bad_vertices(&g, 3, &p, &[]).unwrap();
    assert_eq!(p2, p);
    assert!(copies.is_empty());
}

/// r = 4, A_1 = 0..8, A_2 = 8..16, B = 16..32. Each vertex in `bad` sees all of
/// A_2 but only two vertices of A_1.
fn bad_vertex_instance(bad: &[usize]) -> (Graph, Partition) {
    let a1 = range(0, 8);
    let a2 = range(8, 16);
    let mut g = split_graph(32, &[a1.clone(), a2.clone()]);
    for &v in bad {
        for u in 2..8 {
            g.remove_edge(u, v);
        }
    }
    let p = Partition::new(32, vec![a1, a2, range(16, 32)], 2).unwrap();
    (g, p)
}

#[test]
fn one_bad_vertex_gets_a_balanced_copy() {
    let (g, p) = bad_vertex_instance(&[20]);
    let (p2, copies) = clean_bad_vertices(&g, 4, &p, &[20]).unwrap();
    assert_eq!(copies.len(), 1);
    let c = &copies.cliques()[0];
    assert!(c.contains(&20) && g.is_clique(c));
    assert_eq!(p.type_of(c), Some(vec![1, 1, 2]));
    assert_eq!(partition_slack(&p2, 4).unwrap(), vec![0, 0, 0]);
}

#[test]
fn two_bad_vertices_get_disjoint_copies() {
    let (g, p) = bad_vertex_instance(&[20, 21]);
    let (_, copies) = clean_bad_vertices(&g, 4, &p, &[20, 21]).unwrap();
    assert_eq!(copies.len(), 2);
    let mut seen = BitSet::new(32);
    for c in copies.cliques() {
        assert!(g.is_clique(c));
        assert_eq!(p.type_of(c), Some(vec![1, 1, 2]));
        for &v in c {
            assert!(!seen.contains(v));
            seen.insert(v);
        }
    }
    assert!(seen.contains(20) && seen.contains(21));
}

#[test]
fn singleton_remainder_is_matched_in() {
    // r = 3, s = 2: B is covered by singletons and matched into A_1, A_2
    let parts = vec![range(0, 5), range(5, 10), range(10, 15)];
    let mut g = split_graph(15, &parts[..2]);
    g.remove_edge(0, 5);
    g.remove_edge(3, 12);
    let p = Partition::new(15, parts, 2).unwrap();
    let out = assemble(&g, 3, 2, &p, false, &SolverConfig::default()).unwrap();
    assert!(is_factor_of(&g, &out.factor, 3));
}

/// r = 3, s = 1: A = 0..5 independent and complete to B = 5..15, B split into
/// cliques of the given sizes with `bridge` edges between them.
fn two_clique_remainder(left: usize, bridge: bool) -> (Graph, Partition) {
    let mut g = split_graph(15, &[range(0, 5)]);
    for u in 5..5 + left {
        for v in 5 + left..15 {
            g.remove_edge(u, v);
        }
    }
    if bridge {
        g.add_edge(5, 14);
    }
    let p = Partition::new(15, vec![range(0, 5), range(5, 15)], 1).unwrap();
    (g, p)
}

#[test]
fn even_cliques_joined_by_an_edge_assemble() {
    let (g, p) = two_clique_remainder(4, true);
    let out = assemble(&g, 3, 1, &p, false, &SolverConfig::default()).unwrap();
    assert!(is_factor_of(&g, &out.factor, 3));
}

#[test]
fn odd_cliques_give_parity_evidence() {
    let (g, p) = two_clique_remainder(5, false);
    assert!(!has_factor(&g, 3));
    match assemble(&g, 3, 1, &p, false, &SolverConfig::default()) {
        Err(AssembleError::Parity { tutte, .. }) => assert!(tutte.odd_components.len() > tutte.s.len()),
        other => panic!("expected a parity failure, got {other:?}"),
    }
    // at n = 15 the default gamma would also call a 4-edge 5-set across the two cliques sparse
    let mut cfg = SolverConfig::default().with_mode(Mode::Extremal);
    cfg.detector.gamma = clique_factor::Rational::new(1, 100);
    let cert = solve(&g, 3, &cfg).unwrap();
    assert_eq!(cert.verdict, Verdict::NoFactor);
    assert!(matches!(cert.evidence, Some(Evidence::TutteParity { .. })), "{:?}", cert.evidence);
    assert!(verify_certificate(&g, &cert));
}

#[test]
fn extremal_construction_is_refuted() {
    let gen = generate(&GenSpec::new(GenKind::Extremal, 12, 3)).unwrap();
    let cert = solve_extremal(&gen.graph, 3, 1, &SolverConfig::default());
    assert_eq!(cert.verdict, Verdict::NoFactor);
    match &cert.evidence {
        Some(Evidence::IndependentSetTooLarge { set }) => assert_eq!(set.len(), 5),
        other => panic!("unexpected evidence {other:?}"),
    }
    assert!(verify_certificate(&gen.graph, &cert));
}

#[test]
fn noisy_planted_yes_instance_is_solved() {
    for seed in 0..4 {
        let gen = generate(&GenSpec::new(GenKind::PlantedSparse, 30, 3).s(1).seed(seed).noise(0.02)).unwrap();
        let g = &gen.graph;
        let cert = solve_extremal(g, 3, 1, &SolverConfig::default());
        assert!(has_factor(g, 3));
        assert_eq!(cert.verdict, Verdict::FactorFound, "seed {seed}");
        assert!(is_factor_of(g, cert.factor.as_ref().unwrap(), 3));
    }
}

#[test]
fn balanced_tripartite_uses_case_two() {
    let g = split_graph(9, &[range(0, 3), range(3, 6), range(6, 9)]);
    let cert = solve_extremal(&g, 3, 0, &SolverConfig::default());
    assert_eq!(cert.verdict, Verdict::FactorFound);
    assert!(cert.trace.extremal.as_ref().unwrap().case_two);
    assert!(is_factor_of(&g, cert.factor.as_ref().unwrap(), 3));
}
