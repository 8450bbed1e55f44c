//! Index vectors and slacks of tilings with respect to an ordered partition
//! `(V_1, ..., V_{r'})`, and the three procedures that manipulate them:
//! slack-preserving reduction of a factor, the small/large split of slack
//! values, and the greedy assignment of transfers between parts.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Clique, Partition, Rational, Tiling};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SlackError {
    #[error("tiling member {0} has a vertex outside the partition")]
    Uncovered(usize),
    #[error("slack coordinates sum to {0}, expected 0")]
    NonZeroSum(i64),
    #[error("no member keeps the running slack within {limit}; input is not a factor")]
    NoCandidate { limit: i64 },
    #[error("partition covers {covered} vertices, not a multiple of r = {r}")]
    Indivisible { covered: usize, r: usize },
    #[error("index {index} out of range for {parts} parts")]
    BadIndex { index: usize, parts: usize },
}

/// `b = (1, ..., 1, r - r' + 1)`.
pub fn base_vector(r: usize, rprime: usize) -> Vec<i64> {
    let mut b = vec![1i64; rprime];
    if let Some(last) = b.last_mut() {
        *last = (r + 1 - rprime) as i64;
    }
    b
}

/// Per-part vertex counts of one clique.
pub fn clique_type(partition: &Partition, c: &[usize]) -> Option<Vec<usize>> {
    partition.type_of(c)
}

pub fn index_vector(partition: &Partition, t: &Tiling) -> Result<Vec<i64>, SlackError> {
    let mut x = vec![0i64; partition.num_parts()];
    for (i, c) in t.cliques().iter().enumerate() {
        for &v in c {
            let p = partition.part_of(v).ok_or(SlackError::Uncovered(i))?;
            x[p] += 1;
        }
    }
    Ok(x)
}

/// `i(T) - |T| b`.
pub fn slack(partition: &Partition, t: &Tiling, r: usize) -> Result<Vec<i64>, SlackError> {
    let b = base_vector(r, partition.num_parts());
    let f = t.len() as i64;
    Ok(index_vector(partition, t)?
        .into_iter()
        .zip(b)
        .map(|(x, bi)| x - f * bi)
        .collect())
}

/// `(|V_1|, ..., |V_{r'}|) - (n/r) b`, with `n` the number of covered vertices.
pub fn partition_slack(partition: &Partition, r: usize) -> Result<Vec<i64>, SlackError> {
    let covered = partition.covered();
    if !covered.is_multiple_of(r) {
        return Err(SlackError::Indivisible { covered, r });
    }
    let q = (covered / r) as i64;
    let b = base_vector(r, partition.num_parts());
    Ok(partition
        .sizes()
        .into_iter()
        .zip(b)
        .map(|(s, bi)| s as i64 - q * bi)
        .collect())
}

pub fn restrict(v: &[i64], index_set: &[usize]) -> Vec<i64> {
    index_set.iter().map(|&i| v[i]).collect()
}

/// `t_I = sum over I of |t_i|`.
pub fn t_of(v: &[i64], index_set: &[usize]) -> i64 {
    index_set.iter().map(|&i| v[i].abs()).sum()
}

pub fn is_balanced(partition: &Partition, c: &[usize], r: usize) -> bool {
    let b = base_vector(r, partition.num_parts());
    partition
        .type_of(c)
        .is_some_and(|t| t.iter().zip(&b).all(|(&x, &bi)| x as i64 == bi))
}

/// Size bound for a slack-preserving sub-tiling: `(3 t_I)^r` when
/// `t_I > 4r - 3`, otherwise `(2 t_I + 4r - 3)^{|I|}`, the count of distinct
/// prefix slacks from which both bounds are derived.
pub fn slack_bound(t_i: i64, r: usize, index_len: usize) -> BigInt {
    let r_i = r as i64;
    if t_i > 4 * r_i - 3 {
        BigInt::from(3 * t_i).pow(r as u32)
    } else {
        BigInt::from(2 * t_i + 4 * r_i - 3).pow(index_len as u32)
    }
}

fn slack_of_members(members: &[&Clique], partition: &Partition, b: &[i64], index_set: &[usize]) -> Vec<i64> {
    let mut s = vec![0i64; index_set.len()];
    for c in members {
        let t = partition.type_of(c).expect("checked on entry");
        for (j, &i) in index_set.iter().enumerate() {
            s[j] += t[i] as i64 - b[i];
        }
    }
    s
}

fn abs_sum(v: &[i64]) -> i64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Greedy selection of a sub-tiling `K'` of the factor `k` with the same slack
/// on `index_set`: members are added in index order (when the running slack
/// overshoots `t_I`, the first member that keeps it within `t_I + 2(r-1)`),
/// and after each addition the sequence is cut back to its shortest prefix
/// with the same restricted slack. The empty prefix counts, so balanced
/// members never survive.
pub fn reduce_slack(
    k: &Tiling,
    index_set: &[usize],
    partition: &Partition,
    r: usize,
) -> Result<Tiling, SlackError> {
    let parts = partition.num_parts();
    if let Some(&bad) = index_set.iter().find(|&&i| i >= parts) {
        return Err(SlackError::BadIndex { index: bad, parts });
    }
    let b = base_vector(r, parts);
    let mut member_slack: Vec<Vec<i64>> = Vec::with_capacity(k.len());
    for (i, c) in k.cliques().iter().enumerate() {
        let t = partition.type_of(c).ok_or(SlackError::Uncovered(i))?;
        member_slack.push(index_set.iter().map(|&j| t[j] as i64 - b[j]).collect());
    }
    let full: Vec<&Clique> = k.cliques().iter().collect();
    let target = slack_of_members(&full, partition, &b, index_set);
    let t_i = abs_sum(&target);
    let limit = t_i + 2 * (r as i64 - 1);

    let mut remaining: Vec<usize> = (0..k.len()).collect();
    let mut q: Vec<usize> = Vec::new();
    // prefix[j] = restricted slack of the first j members of q
    let mut prefix: Vec<Vec<i64>> = vec![vec![0; index_set.len()]];
    while !remaining.is_empty() {
        let cur = prefix.last().expect("nonempty").clone();
        let pos = if abs_sum(&cur) > t_i {
            remaining
                .iter()
                .position(|&m| {
                    let s: Vec<i64> = cur.iter().zip(&member_slack[m]).map(|(a, d)| a + d).collect();
                    abs_sum(&s) <= limit
                })
                .ok_or(SlackError::NoCandidate { limit })?
        } else {
            0
        };
        let m = remaining.remove(pos);
        let next: Vec<i64> = cur.iter().zip(&member_slack[m]).map(|(a, d)| a + d).collect();
        q.push(m);
        prefix.push(next);
        let last = prefix.last().expect("nonempty").clone();
        if let Some(j) = (0..q.len()).find(|&j| prefix[j] == last) {
            q.truncate(j);
            prefix.truncate(j + 1);
        }
        assert!(
            abs_sum(prefix.last().expect("nonempty")) <= limit,
            "running slack exceeded t_I + 2(r-1)"
        );
    }
    Ok(Tiling::new(q.iter().map(|&m| k.cliques()[m].clone()).collect()))
}

/// Algorithm for splitting sorted slack values into small and large ones.
///
/// `t` must be sorted in non-increasing order. The band is `[-c/c_band, c/c_band]`.
/// Returns the 0-based half-open range of positions forming `I`.
pub fn split_small_large(t: &[i64], c: i64, c_band: Rational, r: usize) -> std::ops::Range<usize> {
    let rp = t.len();
    debug_assert!(t.windows(2).all(|w| w[0] >= w[1]), "input must be sorted");
    // x > c / c_band  <=>  x * num > c * den   (c_band > 0)
    let (num, den) = (*c_band.numer() as i128, *c_band.denom() as i128);
    let above = |x: i64| x as i128 * num > c as i128 * den;
    let below = |x: i64| (x as i128) * num < -(c as i128) * den;
    let i1 = t.iter().take_while(|&&x| above(x)).count();
    let i2 = rp - t.iter().rev().take_while(|&&x| below(x)).count();
    // 1-based positions as in the pseudocode: I = [j+1, l-1]
    let mut j = i1;
    let mut l = i2 + 1;
    let at = |pos: usize| -> Option<BigInt> {
        if (1..=rp).contains(&pos) {
            Some(BigInt::from(t[pos - 1]))
        } else {
            None
        }
    };
    let three_r = BigInt::from(3 * r as i64);
    while !(j == 0 && l == rp + 1) {
        let left = at(j + 1).map(|x| (&three_r * x).pow(r as u32));
        let right = at(l - 1).map(|x| (&three_r * x).abs().pow(r as u32));
        let m = match (left, right) {
            (Some(a), Some(b)) => a.max(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => BigInt::zero(),
        };
        let jc = j >= 1 && BigInt::from(t[j - 1]) <= m;
        let lc = l <= rp && BigInt::from(t[l - 1]).abs() <= m;
        match (jc, lc) {
            (true, true) => {
                j -= 1;
                l += 1;
            }
            (true, false) => j -= 1,
            (false, true) => l += 1,
            (false, false) => break,
        }
    }
    j..l - 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransferVariant {
    /// The last coordinate (the remainder part) is not positive.
    DeficitInB,
    /// The last coordinate is positive and acts as a surplus row.
    SurplusInB,
}

/// `entries[a][b]` copies move one vertex of surplus from `rows[a]` to deficit `cols[b]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub variant: TransferVariant,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub entries: Vec<Vec<u64>>,
}

impl TransferMatrix {
    pub fn get(&self, i: usize, k: usize) -> u64 {
        match (
            self.rows.iter().position(|&x| x == i),
            self.cols.iter().position(|&x| x == k),
        ) {
            (Some(a), Some(b)) => self.entries[a][b],
            _ => 0,
        }
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.rows
            .iter()
            .position(|&x| x == i)
            .map_or(0, |a| self.entries[a].iter().sum())
    }

    pub fn col_sum(&self, k: usize) -> u64 {
        self.cols
            .iter()
            .position(|&x| x == k)
            .map_or(0, |b| self.entries.iter().map(|row| row[b]).sum())
    }

    /// Nonzero entries as `(surplus part, deficit part, count)`.
    pub fn nonzero(&self) -> Vec<(usize, usize, u64)> {
        let mut out = Vec::new();
        for (a, &i) in self.rows.iter().enumerate() {
            for (b, &k) in self.cols.iter().enumerate() {
                if self.entries[a][b] > 0 {
                    out.push((i, k, self.entries[a][b]));
                }
            }
        }
        out
    }
}

/// Greedy north-west-corner transport from positive to negative coordinates,
/// both taken in index order.
pub fn assign_transfers(tprime: &[i64]) -> Result<TransferMatrix, SlackError> {
    let sum: i64 = tprime.iter().sum();
    if sum != 0 {
        return Err(SlackError::NonZeroSum(sum));
    }
    let variant = match tprime.last() {
        Some(&x) if x > 0 => TransferVariant::SurplusInB,
        _ => TransferVariant::DeficitInB,
    };
    let rows: Vec<usize> = (0..tprime.len()).filter(|&i| tprime[i] > 0).collect();
    let cols: Vec<usize> = (0..tprime.len()).filter(|&i| tprime[i] < 0).collect();
    let mut entries = vec![vec![0u64; cols.len()]; rows.len()];
    let mut col_used = vec![0u64; cols.len()];
    for (a, &i) in rows.iter().enumerate() {
        let supply = tprime[i] as u64;
        let mut row_used = 0u64;
        for (b, &k) in cols.iter().enumerate() {
            let demand = tprime[k].unsigned_abs();
            if col_used[b] < demand {
                let x = (demand - col_used[b]).min(supply - row_used);
                entries[a][b] = x;
                col_used[b] += x;
                row_used += x;
            }
        }
    }
    Ok(TransferMatrix {
        variant,
        rows,
        cols,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p3(sizes: [usize; 3]) -> Partition {
        let mut parts = Vec::new();
        let mut next = 0;
        for s in sizes {
            parts.push((next..next + s).collect());
            next += s;
        }
        Partition::new(next, parts, 2).unwrap()
    }

    #[test]
    fn index_and_slack() {
        let p = p3([3, 3, 6]);
        // r = 4, r' = 3: b = (1, 1, 2)
        assert_eq!(base_vector(4, 3), vec![1, 1, 2]);
        let balanced = Tiling::new(vec![vec![0, 3, 6, 7]]);
        assert_eq!(index_vector(&p, &balanced).unwrap(), vec![1, 1, 2]);
        assert_eq!(slack(&p, &balanced, 4).unwrap(), vec![0, 0, 0]);
        assert_eq!(index_vector(&p, &Tiling::default()).unwrap(), vec![0, 0, 0]);
        // (1,2)-copy
        let c12 = Tiling::new(vec![vec![0, 1, 6, 7]]);
        assert_eq!(slack(&p, &c12, 4).unwrap(), vec![1, -1, 0]);
        assert!(is_balanced(&p, &[0, 3, 6, 7], 4));
        assert!(!is_balanced(&p, &[0, 1, 6, 7], 4));
    }

    #[test]
    fn partition_slack_example() {
        // n = 12, r = 3, r' = 3: sizes (n/r + 2, n/r - 2, n/r)
        let p = p3([6, 2, 4]);
        assert_eq!(partition_slack(&p, 3).unwrap(), vec![2, -2, 0]);
    }

    #[test]
    fn reduce_all_balanced_is_empty() {
        let p = p3([3, 3, 3]);
        let k = Tiling::new(vec![vec![0, 3, 6], vec![1, 4, 7], vec![2, 5, 8]]);
        assert!(reduce_slack(&k, &[0, 1, 2], &p, 3).unwrap().is_empty());
    }

    #[test]
    fn reduce_pair_of_opposite_copies() {
        let p = p3([3, 3, 3]);
        // (1,3)-copy, (3,1)-copy, balanced
        let k = Tiling::new(vec![vec![0, 1, 3], vec![6, 7, 4], vec![2, 5, 8]]);
        let out = reduce_slack(&k, &[0], &p, 3).unwrap();
        assert!(out.is_empty() || out.len() == 2);
        assert_eq!(slack(&p, &out, 3).unwrap()[0], 0);
    }

    #[test]
    fn split_examples() {
        let one = Rational::new(99, 100);
        assert_eq!(split_small_large(&[1, 0, -1], 1, one, 3), 0..3);
        assert_eq!(split_small_large(&[1_000_000, 1, -1_000_001], 1, one, 3), 1..2);
        assert_eq!(split_small_large(&[5, 1, -6], 1, one, 3), 0..3);
    }

    #[test]
    fn transfer_examples() {
        let m = assign_transfers(&[2, 0, -2]).unwrap();
        assert_eq!(m.get(0, 2), 2);
        assert_eq!(m.nonzero(), vec![(0, 2, 2)]);
        let z = assign_transfers(&[0, 0, 0]).unwrap();
        assert!(z.nonzero().is_empty());
        let m = assign_transfers(&[3, 2, -4, -1]).unwrap();
        assert_eq!(m.get(0, 2), 3);
        assert_eq!(m.get(1, 2), 1);
        assert_eq!(m.get(1, 3), 1);
        assert_eq!(m.get(0, 3), 0);
        assert_eq!(assign_transfers(&[1, 0]), Err(SlackError::NonZeroSum(1)));
        assert_eq!(assign_transfers(&[-1, 1]).unwrap().variant, TransferVariant::SurplusInB);
    }

    #[test]
    fn bound_switches_at_threshold() {
        // r = 3: 4r - 3 = 9
        assert_eq!(slack_bound(12, 3, 2), BigInt::from(36).pow(3));
        assert_eq!(slack_bound(2, 3, 2), BigInt::from(13).pow(2));
    }
}
