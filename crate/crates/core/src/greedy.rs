//! Greedy candidate generation.
//!
//! Every alteration starts as a singleton set. Each iteration adds the union
//! of the two pool entries whose indicators ("at least one member present")
//! are most significantly anti-co-occurring: a one-sided Fisher test per
//! group, combined as mid-p Stouffer. Iterations are split into `k_max − 1`
//! epochs; in epoch `e` new sets may have at most `e + 1` members.

use alloc::collections::{BTreeSet, BinaryHeap};
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use crate::bits::{Layout, Word};
use crate::combine::{pairwise_weight, stouffer_ln};
use crate::dataset::{AlterationMatrix, AlterationSet};
use crate::exact::upper_p;
use crate::exec::Executor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GreedyParams {
    /// Total number of new sets to generate across all epochs.
    pub max_iter: usize,
    pub k_max: usize,
}

impl Default for GreedyParams {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            k_max: 10,
        }
    }
}

impl GreedyParams {
    /// Iterations granted to each epoch: equal shares, remainder to the last.
    pub fn epoch_lengths(&self) -> Vec<usize> {
        let epochs = self.k_max.saturating_sub(1).max(1);
        let share = self.max_iter / epochs;
        let mut v = alloc::vec![share; epochs];
        v[epochs - 1] += self.max_iter - share * epochs;
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub set: AlterationSet,
    /// Log of the score of the pair whose union created this set; `None` for
    /// seeds and closure additions.
    pub ln_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    entries: Vec<Candidate>,
    index: BTreeSet<AlterationSet>,
    params: GreedyParams,
}

impl CandidatePool {
    fn push(&mut self, set: AlterationSet, ln_score: Option<f64>) -> bool {
        if !self.index.insert(set.clone()) {
            return false;
        }
        self.entries.push(Candidate { set, ln_score });
        true
    }

    pub fn entries(&self) -> &[Candidate] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, set: &AlterationSet) -> bool {
        self.index.contains(set)
    }

    pub fn params(&self) -> GreedyParams {
        self.params
    }

    /// Sets of size >= 2, in insertion order.
    pub fn candidates(&self) -> impl Iterator<Item = &AlterationSet> {
        self.entries.iter().map(|c| &c.set).filter(|s| s.len() >= 2)
    }
}

/// Log of the mid-p Stouffer score between two indicator rows.
fn ln_indicator_score(layout: &Layout, a: &[Word], cov_a: &[u32], b: &[Word], cov_b: &[u32]) -> f64 {
    let mut ln_ps: Vec<f64> = Vec::with_capacity(cov_a.len());
    let mut ws: Vec<f64> = Vec::with_capacity(cov_a.len());
    for g in 0..layout.groups() {
        let n = layout.group_size(g);
        let w = pairwise_weight(n, cov_a[g], cov_b[g]);
        if w == 0.0 {
            continue;
        }
        let union = layout.union_count_in(a, b, g);
        let t = upper_p(n, &[cov_a[g], cov_b[g]], union).expect("union within support");
        if t.is_uninformative() {
            continue;
        }
        ln_ps.push(t.ln_mid());
        ws.push(w);
    }
    if ws.is_empty() {
        return 0.0;
    }
    stouffer_ln(&ln_ps, &ws).unwrap_or(0.0)
}

/// Mid-p Stouffer score for anti-co-occurrence of two sets' indicators.
pub fn score_pair(matrix: &AlterationMatrix, s1: &AlterationSet, s2: &AlterationSet) -> f64 {
    let (a, b) = (matrix.indicator(s1), matrix.indicator(s2));
    let layout = matrix.layout();
    let (ca, cb) = (layout.group_counts(&a), layout.group_counts(&b));
    libm::exp(ln_indicator_score(layout, &a, &ca, &b, &cb))
}

struct Slot {
    indicator: Vec<Word>,
    group_cov: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
struct Pending {
    ln_score: f64,
    union: AlterationSet,
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.ln_score
            .total_cmp(&other.ln_score)
            .then(self.union.len().cmp(&other.union.len()))
            .then_with(|| self.union.cmp(&other.union))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Runs the greedy search. Deterministic for a given matrix and parameters,
/// whatever the executor.
pub fn generate_candidates<E: Executor>(matrix: &AlterationMatrix, params: GreedyParams, exec: &E) -> CandidatePool {
    let layout = matrix.layout();
    let m = matrix.rows();
    let mut pool = CandidatePool {
        entries: Vec::new(),
        index: BTreeSet::new(),
        params,
    };
    let mut slots: Vec<Slot> = Vec::with_capacity(m + params.max_iter);
    for r in 0..m as u32 {
        pool.push(AlterationSet::singleton(r), None);
        let indicator = matrix.row_bits(r).to_vec();
        let group_cov = layout.group_counts(&indicator);
        slots.push(Slot { indicator, group_cov });
    }
    if params.k_max < 2 || m < 2 {
        return pool;
    }

    let score = |slots: &[Slot], i: usize, j: usize| -> f64 {
        let (a, b) = (&slots[i], &slots[j]);
        ln_indicator_score(layout, &a.indicator, &a.group_cov, &b.indicator, &b.group_cov)
    };

    let mut heap: BinaryHeap<Reverse<Pending>> = BinaryHeap::new();
    let seeds = exec.map(m, |i| {
        ((i + 1)..m)
            .map(|j| Pending {
                ln_score: score(&slots, i, j),
                union: AlterationSet::new([i as u32, j as u32]),
            })
            .collect::<Vec<_>>()
    });
    heap.extend(seeds.into_iter().flatten().map(Reverse));

    let mut deferred: Vec<Vec<Pending>> = (0..=params.k_max).map(|_| Vec::new()).collect();
    for (epoch, &iters) in params.epoch_lengths().iter().enumerate() {
        let cap = epoch + 2;
        heap.extend(core::mem::take(&mut deferred[cap]).into_iter().map(Reverse));
        for _ in 0..iters {
            let Some(best) = pop_admissible(&mut heap, &mut deferred, &pool, cap) else {
                break;
            };
            let new_set = best.union.clone();
            let indicator = matrix.indicator(&new_set);
            let group_cov = layout.group_counts(&indicator);
            pool.push(new_set.clone(), Some(best.ln_score));
            slots.push(Slot { indicator, group_cov });
            let u = slots.len() - 1;
            let fresh = exec.map(u, |i| {
                let union = new_set.union(&pool.entries[i].set);
                if union.len() > params.k_max || pool.contains(&union) {
                    return None;
                }
                Some(Pending {
                    ln_score: score(&slots, u, i),
                    union,
                })
            });
            heap.extend(fresh.into_iter().flatten().map(Reverse));
        }
    }
    pool
}

fn pop_admissible(
    heap: &mut BinaryHeap<Reverse<Pending>>,
    deferred: &mut [Vec<Pending>],
    pool: &CandidatePool,
    cap: usize,
) -> Option<Pending> {
    while let Some(Reverse(p)) = heap.pop() {
        if pool.contains(&p.union) {
            continue;
        }
        if p.union.len() > cap {
            deferred[p.union.len()].push(p);
            continue;
        }
        return Some(p);
    }
    None
}

/// Adds every subset of size >= 2 of every pool set. Fails if the pool would
/// exceed `budget` sets.
pub fn subset_closure(pool: &CandidatePool, budget: usize) -> Result<CandidatePool> {
    let mut out = pool.clone();
    if out.len() > budget {
        return Err(Error::ClosureBudget {
            count: out.len(),
            budget,
        });
    }
    for entry in &pool.entries {
        let members = entry.set.members();
        let k = members.len();
        if k < 3 {
            continue;
        }
        if k >= 64 {
            return Err(Error::ClosureBudget {
                count: usize::MAX,
                budget,
            });
        }
        let full = (1u64 << k) - 1;
        for mask in 1..full {
            if mask.count_ones() < 2 {
                continue;
            }
            let subset = AlterationSet::new((0..k).filter(|b| mask & (1 << b) != 0).map(|b| members[b]));
            if out.push(subset, None) && out.len() > budget {
                return Err(Error::ClosureBudget {
                    count: out.len(),
                    budget,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Serial;
    use alloc::string::{String, ToString};
    use alloc::vec;

    fn build(rows: &[Vec<bool>], groups: &[&str]) -> AlterationMatrix {
        let labels: Vec<String> = (0..rows.len()).map(|i| alloc::format!("R{i}")).collect();
        let samples: Vec<String> = (0..groups.len()).map(|j| alloc::format!("S{j}")).collect();
        let groups: Vec<String> = groups.iter().map(|g| g.to_string()).collect();
        AlterationMatrix::from_rows(&labels, &samples, &groups, rows).unwrap()
    }

    fn pool_of(sets: &[&[u32]]) -> CandidatePool {
        let mut p = CandidatePool {
            entries: Vec::new(),
            index: BTreeSet::new(),
            params: GreedyParams::default(),
        };
        for s in sets {
            p.push(AlterationSet::new(s.iter().copied()), None);
        }
        p
    }

    #[test]
    fn closure_counts() {
        let c = subset_closure(&pool_of(&[&[0, 1, 2]]), 100).unwrap();
        assert_eq!(c.len(), 4);
        for s in [[0, 1], [0, 2], [1, 2]] {
            assert!(c.contains(&AlterationSet::new(s)));
        }
        let pairs = pool_of(&[&[0, 1], &[2, 3]]);
        assert_eq!(subset_closure(&pairs, 100).unwrap(), pairs);
        let quad = subset_closure(&pool_of(&[&[0, 1, 2, 3]]), 100).unwrap();
        assert_eq!(quad.len(), 1 + 10);
        assert_eq!(
            subset_closure(&pool_of(&[&[0, 1, 2, 3]]), 5),
            Err(Error::ClosureBudget { count: 6, budget: 5 })
        );
    }

    #[test]
    fn epoch_split() {
        let p = GreedyParams {
            max_iter: 5000,
            k_max: 10,
        };
        let e = p.epoch_lengths();
        assert_eq!(e.len(), 9);
        assert_eq!(e[0], 555);
        assert_eq!(e.iter().sum::<usize>(), 5000);
        assert_eq!(e[8], 5000 - 8 * 555);
    }

    fn exclusive_pair_matrix() -> AlterationMatrix {
        // Rows 0 and 1 perfectly exclusive, row 2 overlaps both.
        let n = 40;
        let rows: Vec<Vec<bool>> = vec![
            (0..n).map(|j| j < 10).collect(),
            (0..n).map(|j| (10..20).contains(&j)).collect(),
            (0..n).map(|j| j % 4 == 0).collect(),
        ];
        build(&rows, &vec!["g"; n])
    }

    #[test]
    fn score_for_exclusive_pair_at_most_half() {
        let a = exclusive_pair_matrix();
        let s = score_pair(&a, &AlterationSet::singleton(0), &AlterationSet::singleton(1));
        assert!(s <= 0.5);
        // Singletons: score equals the mid-p of the exact union test.
        let t = upper_p(40, &[10, 10], 20).unwrap();
        assert!((s - t.mid()).abs() < 1e-15);
    }

    #[test]
    fn constant_indicator_scores_one() {
        let n = 10;
        let rows = vec![vec![true; n], (0..n).map(|j| j % 2 == 0).collect()];
        let a = build(&rows, &vec!["g"; n]);
        assert_eq!(
            score_pair(&a, &AlterationSet::singleton(0), &AlterationSet::singleton(1)),
            1.0
        );
    }

    #[test]
    fn one_iteration_adds_best_pair() {
        let a = exclusive_pair_matrix();
        let pool = generate_candidates(&a, GreedyParams { max_iter: 1, k_max: 2 }, &Serial);
        assert_eq!(pool.len(), 4);
        assert_eq!(pool.entries()[3].set.members(), [0, 1]);
    }

    #[test]
    fn first_epoch_only_pairs() {
        let n = 60;
        let rows: Vec<Vec<bool>> = (0..6)
            .map(|i| (0..n).map(|j| (j * (i + 3) + i) % 7 < 2).collect())
            .collect();
        let a = build(&rows, &vec!["g"; n]);
        let pool = generate_candidates(&a, GreedyParams { max_iter: 10, k_max: 2 }, &Serial);
        let cands: Vec<_> = pool.candidates().collect();
        assert_eq!(cands.len(), 10);
        assert!(cands.iter().all(|s| s.len() == 2));
        let big = generate_candidates(&a, GreedyParams { max_iter: 30, k_max: 4 }, &Serial);
        // First epoch (10 iterations) yields pairs only.
        assert!(big.entries()[6..16].iter().all(|c| c.set.len() == 2));
        assert!(big.candidates().all(|s| s.len() <= 4));
    }
}
