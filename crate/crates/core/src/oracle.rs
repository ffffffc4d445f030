//! Brute-force and Monte Carlo references for the exact union test. Slow on
//! purpose; used to check [`crate::exact`].

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bits::Word;
use crate::dataset::{AlterationMatrix, AlterationSet};
use crate::exact::TailDistribution;
use crate::special::ln_choose;
use crate::{Error, Result};

pub const DEFAULT_ENUMERATION_BUDGET: u128 = 10_000_000;

/// Row margins under the conditional null, optionally per group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NullModel {
    pub n: u32,
    pub margins: Vec<u32>,
    pub groups: Option<Vec<u32>>,
}

/// Next `k`-subset of `0..64` in colexicographic order (Gosper's hack).
fn next_combination(x: u64) -> u64 {
    let c = x & x.wrapping_neg();
    let r = x + c;
    (((r ^ x) >> 2) / c) | r
}

fn for_each_subset(n: u32, k: u32, mut f: impl FnMut(u64)) {
    if k == 0 {
        f(0);
        return;
    }
    let mut x: u64 = (1u64 << k) - 1;
    let limit: u64 = 1u64 << n;
    while x < limit {
        f(x);
        x = next_combination(x);
    }
}

/// Exact pmf of the union size over every tuple of row subsets with the
/// given sizes, by exhaustive enumeration. Requires `n <= 62`.
pub fn enumerate_gamma(n: u32, coverages: &[u32], budget: u128) -> Result<TailDistribution> {
    if n > 62 {
        return Err(Error::Config(alloc::format!("enumeration needs n <= 62, got {n}")));
    }
    let mut tuples: u128 = 1;
    for &c in coverages {
        if c > n {
            return Err(Error::CoverageAboveN { coverage: c, n });
        }
        let count = libm::round(libm::exp(ln_choose(n as u64, c as u64))) as u128;
        tuples = tuples.saturating_mul(count);
    }
    if tuples > budget {
        return Err(Error::EnumerationBudget { count: tuples, budget });
    }
    let mut counts = alloc::vec![0u64; n as usize + 1];
    fn recurse(n: u32, rest: &[u32], union: u64, counts: &mut [u64]) {
        match rest.split_first() {
            None => counts[union.count_ones() as usize] += 1,
            Some((&c, tail)) => for_each_subset(n, c, |s| recurse(n, tail, union | s, counts)),
        }
    }
    recurse(n, coverages, 0, &mut counts);
    let total: u64 = counts.iter().sum();
    let floor = counts.iter().position(|&c| c > 0).unwrap_or(0);
    let last = counts.iter().rposition(|&c| c > 0).unwrap_or(0);
    let ln_total = libm::log(total as f64);
    let ln_masses = counts[floor..=last]
        .iter()
        .map(|&c| {
            if c == 0 {
                f64::NEG_INFINITY
            } else {
                libm::log(c as f64) - ln_total
            }
        })
        .collect();
    let max = coverages.iter().sum::<u32>().min(n);
    Ok(TailDistribution::from_ln_masses(n, floor as u32, max, ln_masses))
}

/// One permutation of `0..n_τ` per group. A partial Fisher–Yates shuffle of
/// any permutation yields a uniform subset, so the buffers are never reset.
fn scratch(matrix: &AlterationMatrix) -> Vec<Vec<u32>> {
    (0..matrix.groups())
        .map(|g| (0..matrix.group_size(g)).collect())
        .collect()
}

/// Random `count`-subset of the columns of one group, ORed into `row`.
fn scatter(
    matrix: &AlterationMatrix,
    group: usize,
    count: u32,
    perm: &mut [u32],
    rng: &mut ChaCha8Rng,
    row: &mut [Word],
) {
    let (chosen, _) = perm.partial_shuffle(rng, count as usize);
    for &col in chosen.iter() {
        let (w, m) = matrix.layout().position(group, col as usize);
        row[w] |= m;
    }
}

/// Permutes every row independently within each group's columns.
pub fn permute_rows(matrix: &AlterationMatrix, seed: u64) -> AlterationMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perms = scratch(matrix);
    let words = matrix.layout().words();
    let mut bits = Vec::with_capacity(matrix.rows() * words);
    for r in 0..matrix.rows() as u32 {
        let mut row = matrix.layout().empty_row();
        for (g, perm) in perms.iter_mut().enumerate() {
            scatter(matrix, g, matrix.row_group_coverage(r, g), perm, &mut rng, &mut row);
        }
        bits.extend_from_slice(&row);
    }
    AlterationMatrix::assemble(
        matrix.alterations().to_vec(),
        matrix.samples().to_vec(),
        (0..matrix.samples().len())
            .map(|j| matrix.sample_group(j) as u32)
            .collect(),
        matrix.group_labels().to_vec(),
        matrix.layout().clone(),
        bits,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    /// `(hits + 1) / (n_perm + 1)`.
    pub p: f64,
    /// Binomial standard error of `p`.
    pub se: f64,
    pub hits: u64,
    pub n_perm: u64,
}

/// Monte Carlo p-value of `Γ(M) >= observed` with rows permuted within groups.
pub fn mc_permutation_p(matrix: &AlterationMatrix, set: &AlterationSet, n_perm: u64, seed: u64) -> Result<McEstimate> {
    let observed = matrix.coverage(set, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perms = scratch(matrix);
    let margins: Vec<(usize, u32)> = set
        .members()
        .iter()
        .flat_map(|&r| (0..matrix.groups()).map(move |g| (g, matrix.row_group_coverage(r, g))))
        .filter(|&(_, c)| c > 0)
        .collect();
    let mut row = matrix.layout().empty_row();
    let mut hits = 0u64;
    for _ in 0..n_perm {
        row.iter_mut().for_each(|w| *w = 0);
        for &(g, c) in &margins {
            scatter(matrix, g, c, &mut perms[g], &mut rng, &mut row);
        }
        if crate::bits::count(&row) >= observed {
            hits += 1;
        }
    }
    let p = (hits + 1) as f64 / (n_perm + 1) as f64;
    Ok(McEstimate {
        p,
        se: libm::sqrt(p * (1.0 - p) / n_perm as f64),
        hits,
        n_perm,
    })
}
