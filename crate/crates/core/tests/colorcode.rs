mod common;

use clique_factor::colorcode::{
    build_hash_family, count_vectors, enumerate_pattern_multisets, enumerate_types, find_tiling_with_pattern,
    hash_family, HashError,
};
use clique_factor::{Graph, Partition};
use common::{brute_pattern, type_of};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn choose(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn singleton_family() {
    let f = build_hash_family(5, 1).unwrap();
    for v in 0..5 {
        assert!(f.injective_on(&[v]).is_some());
    }
    assert!(matches!(build_hash_family(3, 4), Err(HashError::BadSize { .. })));
    assert!(matches!(build_hash_family(3, 0), Err(HashError::BadSize { .. })));
}

#[test]
fn random_subsets_have_injective_colourings() {
    let f = hash_family(20, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let all: Vec<usize> = (0..20).collect();
    for _ in 0..200 {
        let set: Vec<usize> = all.choose_multiple(&mut rng, 4).copied().collect();
        let i = f.injective_on(&set).expect("some colouring separates the set");
        let c = f.coloring(i);
        let mut colours: Vec<u8> = set.iter().map(|&v| c[v]).collect();
        colours.sort_unstable();
        colours.dedup();
        assert_eq!(colours.len(), 4);
        assert!(c.iter().all(|&x| (x as usize) < f.palette()));
    }
}

#[test]
fn type_lists() {
    assert_eq!(enumerate_types(2, 2), vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
    assert_eq!(enumerate_types(3, 2), vec![vec![0, 3], vec![1, 2], vec![2, 1], vec![3, 0]]);
    for r in 2..6 {
        for rp in 2..=r {
            let ts = enumerate_types(r, rp);
            assert_eq!(ts.len() as u64, choose((r + rp - 1) as u64, (rp - 1) as u64));
            assert!(ts.iter().all(|t| t.len() == rp && t.iter().sum::<usize>() == r));
            assert!(ts.windows(2).all(|w| w[0] < w[1]));
        }
    }
}

#[test]
fn multiset_counts() {
    assert_eq!(count_vectors(3, 1).len(), 4);
    assert_eq!(count_vectors(4, 2).len(), 15);
    assert_eq!(count_vectors(5, 0), vec![vec![0; 5]]);
    // r = 3, r' = 2 has 4 types
    assert_eq!(enumerate_pattern_multisets(3, 2, 2).len(), 15);
    for y in 1..5u64 {
        for b in 0..5u64 {
            let vs = count_vectors(y as usize, b as usize);
            assert_eq!(vs.len() as u64, choose(b + y, y));
            assert!(vs.iter().all(|v| v.iter().sum::<usize>() <= b as usize));
        }
    }
}

#[test]
fn pattern_examples() {
    let g = Graph::complete(9);
    let p = Partition::new(9, vec![vec![0, 1, 2], (3..9).collect()], 1).unwrap();
    let pattern = vec![vec![1, 2]; 3];
    let t = find_tiling_with_pattern(&g, &p, &pattern).unwrap().unwrap();
    assert_eq!(t.len(), 3);
    for c in t.cliques() {
        assert_eq!(p.type_of(c), Some(vec![1, 2]));
    }

    let mut h = Graph::complete(9);
    h.remove_edge(0, 1);
    h.remove_edge(0, 2);
    h.remove_edge(1, 2);
    assert_eq!(find_tiling_with_pattern(&h, &p, &[vec![2, 1]]).unwrap(), None);
    assert_eq!(find_tiling_with_pattern(&h, &p, &[]).unwrap().unwrap().len(), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn colour_coding_agrees_with_exhaustive_search(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=5) * 3;
        let p = rng.gen_range(0.3..0.9);
        let mut g = Graph::empty(n);
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(p) {
                    g.add_edge(u, v);
                }
            }
        }
        let parts = rng.gen_range(2..=3);
        let part_of: Vec<usize> = (0..n).map(|v| v % parts).collect();
        let mut groups = vec![Vec::new(); parts];
        for v in 0..n {
            groups[part_of[v]].push(v);
        }
        let partition = Partition::new(n, groups, parts - 1).unwrap();
        let types = enumerate_types(3, parts);
        let m = rng.gen_range(1..=2);
        let pattern: Vec<Vec<usize>> = (0..m).map(|_| types.choose(&mut rng).unwrap().clone()).collect();
        let got = find_tiling_with_pattern(&g, &partition, &pattern).unwrap();
        prop_assert_eq!(got.is_some(), brute_pattern(&g, &part_of, &pattern));
        if let Some(t) = got {
            let mut have: Vec<Vec<usize>> = t.cliques().iter().map(|c| type_of(&part_of, parts, c)).collect();
            let mut want = pattern.clone();
            have.sort();
            want.sort();
            prop_assert_eq!(have, want);
            prop_assert!(t.cliques().iter().all(|c| g.is_clique(c)));
        }
    }
}
