//! Exact conditional null distribution of the union size Γ(M) given the row
//! margins, and its tail p-values.
//!
//! Under independence of rows with fixed coverages, adding one more row of
//! coverage `c` to a union of current size `y` out of `n` samples grows it
//! by `Hyperg(n, n - y, c)`. Iterating that step over the members gives the
//! pmf of Γ(M). All masses are carried as natural logarithms.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{AlterationMatrix, AlterationSet};
use crate::special::{ln_choose, ln_sum_exp, LnAccumulator};
use crate::{Error, Result};

/// Hypergeometric pmf: `C(k,x)·C(n−k,r−x)/C(n,r)`, zero outside the support.
pub fn hypergeom_pmf(n: u32, k: u32, r: u32, x: u32) -> Result<f64> {
    Ok(libm::exp(ln_hypergeom_pmf(n, k, r, x)?))
}

pub fn ln_hypergeom_pmf(n: u32, k: u32, r: u32, x: u32) -> Result<f64> {
    if k > n || r > n {
        return Err(Error::HypergeomParams { n, k, r });
    }
    let lo = (k + r).saturating_sub(n);
    let hi = k.min(r);
    if x < lo || x > hi {
        return Ok(f64::NEG_INFINITY);
    }
    let (n, k, r, x) = (n as u64, k as u64, r as u64, x as u64);
    Ok(ln_choose(k, x) + ln_choose(n - k, r - x) - ln_choose(n, r))
}

/// Probability masses of Γ(M) over `support_floor..=support_floor + len - 1`.
/// A truncated distribution keeps only the union sizes that can still reach
/// the tail of interest, so its masses need not sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct TailDistribution {
    n: u32,
    support_floor: u32,
    support_max: u32,
    ln_masses: Vec<f64>,
}

impl TailDistribution {
    pub(crate) fn from_ln_masses(n: u32, support_floor: u32, support_max: u32, ln_masses: Vec<f64>) -> Self {
        Self {
            n,
            support_floor,
            support_max,
            ln_masses,
        }
    }

    fn point(n: u32, at: u32) -> Self {
        Self::from_ln_masses(n, at, at, vec![0.0])
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn support_floor(&self) -> u32 {
        self.support_floor
    }

    /// `min(n, Σ coverages)`.
    pub fn support_max(&self) -> u32 {
        self.support_max
    }

    /// Last union size with a retained entry.
    pub fn retained_max(&self) -> u32 {
        self.support_floor + (self.ln_masses.len() as u32).saturating_sub(1)
    }

    pub fn ln_mass(&self, x: u32) -> f64 {
        if x < self.support_floor {
            return f64::NEG_INFINITY;
        }
        self.ln_masses
            .get((x - self.support_floor) as usize)
            .copied()
            .unwrap_or(f64::NEG_INFINITY)
    }

    pub fn mass(&self, x: u32) -> f64 {
        libm::exp(self.ln_mass(x))
    }

    /// Masses from `support_floor` upwards.
    pub fn masses(&self) -> Vec<f64> {
        self.ln_masses.iter().map(|&l| libm::exp(l)).collect()
    }

    pub fn total(&self) -> f64 {
        libm::exp(ln_sum_exp(self.ln_masses.iter().copied()))
    }

    fn ln_sum_where(&self, keep: impl Fn(u32) -> bool) -> f64 {
        let floor = self.support_floor;
        ln_sum_exp(
            self.ln_masses
                .iter()
                .enumerate()
                .filter(|(i, _)| keep(floor + *i as u32))
                .map(|(_, &l)| l),
        )
    }
}

/// Tails of a discrete statistic: `p = P(T ≥ t)` and `p⁻ = P(T > t)`
/// (or the mirrored pair for a lower tail). Stored as logarithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PValueTriple {
    ln_p: f64,
    ln_p_minus: f64,
}

impl PValueTriple {
    pub fn new(p: f64, p_minus: f64) -> Self {
        Self::from_ln(libm::log(p), libm::log(p_minus))
    }

    pub fn from_ln(ln_p: f64, ln_p_minus: f64) -> Self {
        Self {
            ln_p: ln_p.min(0.0),
            ln_p_minus: ln_p_minus.min(ln_p.min(0.0)),
        }
    }

    pub fn p(&self) -> f64 {
        libm::exp(self.ln_p)
    }

    pub fn p_minus(&self) -> f64 {
        libm::exp(self.ln_p_minus)
    }

    pub fn ln_p(&self) -> f64 {
        self.ln_p
    }

    pub fn ln_p_minus(&self) -> f64 {
        self.ln_p_minus
    }

    /// `(p + p⁻) / 2`.
    pub fn mid(&self) -> f64 {
        libm::exp(self.ln_mid())
    }

    pub fn ln_mid(&self) -> f64 {
        crate::special::ln_add_exp(self.ln_p, self.ln_p_minus) - core::f64::consts::LN_2
    }

    /// `ln(p − p⁻)`, the log-probability of the observed value.
    pub fn ln_point(&self) -> f64 {
        if self.ln_p_minus == f64::NEG_INFINITY {
            return self.ln_p;
        }
        self.ln_p + crate::special::ln_one_minus_exp(self.ln_p_minus - self.ln_p)
    }

    /// True when the observation carries no information (`p = 1`, `p⁻ = 0`).
    pub fn is_uninformative(&self) -> bool {
        self.ln_p == 0.0 && self.ln_p_minus == f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone, Copy)]
enum Tail {
    Full,
    /// Keep union sizes that can still end `>= observed`.
    Upper(u32),
    /// Keep union sizes `<= observed`.
    Lower(u32),
}

fn check_coverages(n: u32, coverages: &[u32]) -> Result<()> {
    for &c in coverages {
        if c > n {
            return Err(Error::CoverageAboveN { coverage: c, n });
        }
    }
    Ok(())
}

fn support_max(n: u32, coverages: &[u32]) -> u32 {
    coverages.iter().fold(0u64, |a, &c| a + c as u64).min(n as u64) as u32
}

/// Nonzero coverages, largest first. Large members first narrow the
/// intermediate supports; the result does not depend on the order.
fn sorted_coverages(coverages: &[u32]) -> Vec<u32> {
    let mut cov: Vec<u32> = coverages.iter().copied().filter(|&c| c > 0).collect();
    cov.sort_unstable_by(|a, b| b.cmp(a));
    cov
}

/// `remaining[s] = Σ_{t > s} cov[t]`.
fn remaining_coverage(cov: &[u32]) -> Vec<u64> {
    let mut remaining = vec![0u64; cov.len()];
    for s in (0..cov.len().saturating_sub(1)).rev() {
        remaining[s] = remaining[s + 1] + cov[s + 1] as u64;
    }
    remaining
}

/// Union sizes kept after step `s`, given the reachable range `lo..=hi`.
fn keep_range(tail: Tail, remaining: &[u64], s: usize, lo: u32, hi: u32) -> (u32, u32) {
    match tail {
        Tail::Full => (lo, hi),
        Tail::Upper(obs) => {
            let need = (obs as u64).saturating_sub(remaining[s]) as u32;
            (lo.max(need), hi)
        }
        Tail::Lower(obs) => (lo, hi.min(obs)),
    }
}

/// Masses `exp(ln_scale) · lin[i]` at union size `floor + i`, `max(lin) = 1`.
struct Scaled {
    floor: u32,
    ln_scale: f64,
    lin: Vec<f64>,
}

impl Scaled {
    fn empty(floor: u32) -> Self {
        Self {
            floor,
            ln_scale: f64::NEG_INFINITY,
            lin: Vec::new(),
        }
    }

    fn ln_sum_where(&self, keep: impl Fn(u32) -> bool) -> f64 {
        let sum: f64 = (self.floor..)
            .zip(&self.lin)
            .filter(|(x, _)| keep(*x))
            .map(|(_, &v)| v)
            .sum();
        if sum > 0.0 {
            self.ln_scale + libm::log(sum)
        } else {
            f64::NEG_INFINITY
        }
    }

    fn into_tail(self, n: u32, max: u32) -> TailDistribution {
        let ln_scale = self.ln_scale;
        let ln_masses = self
            .lin
            .into_iter()
            .map(|v| {
                if v > 0.0 {
                    ln_scale + libm::log(v)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        TailDistribution::from_ln_masses(n, self.floor, max, ln_masses)
    }
}

/// Relative size below which a linear term counts as lost to underflow.
const TINY: f64 = 1e-290;

/// Iterated convolution in scaled linear arithmetic. Each kernel row is
/// evaluated outwards from its mode, so terms only shrink along the walk.
/// Returns `None` as soon as any term falls below [`TINY`] relative to the
/// largest contribution of its step; the caller then uses the log route.
fn union_scaled(n: u32, coverages: &[u32], tail: Tail) -> Option<Scaled> {
    let cov = sorted_coverages(coverages);
    let Some(&first) = cov.first() else {
        return Some(Scaled {
            floor: 0,
            ln_scale: 0.0,
            lin: vec![1.0],
        });
    };
    let remaining = remaining_coverage(&cov);
    let (lo, hi) = keep_range(tail, &remaining, 0, first, first);
    if lo > hi {
        return Some(Scaled::empty(first));
    }
    let mut dist = Scaled {
        floor: first,
        ln_scale: 0.0,
        lin: vec![1.0],
    };
    // (y, j_lo, j_hi, j_mode, ln of the row's largest term)
    let mut rows: Vec<(u32, u32, u32, u32, f64)> = Vec::new();
    for (s, &c) in cov.iter().enumerate().skip(1) {
        let cur_hi = dist.floor + dist.lin.len() as u32 - 1;
        let (keep_lo, keep_hi) = keep_range(tail, &remaining, s, dist.floor.max(c), (cur_hi + c).min(n));
        if keep_lo > keep_hi {
            return Some(Scaled::empty(keep_lo.min(support_max(n, coverages))));
        }
        let ln_nc = ln_choose(n as u64, c as u64);
        rows.clear();
        let mut ln_top = f64::NEG_INFINITY;
        for (y, &f) in (dist.floor..).zip(&dist.lin) {
            if f == 0.0 || keep_hi < y {
                continue;
            }
            let k = n - y;
            let j_lo = c.saturating_sub(y).max(keep_lo.saturating_sub(y));
            let j_hi = k.min(c).min(keep_hi - y);
            if j_lo > j_hi {
                continue;
            }
            let mode = (((c as u64 + 1) * (k as u64 + 1)) / (n as u64 + 2)) as u32;
            let j = mode.clamp(j_lo, j_hi);
            let ln_peak =
                dist.ln_scale + libm::log(f) + ln_choose(k as u64, j as u64) + ln_choose(y as u64, (c - j) as u64)
                    - ln_nc;
            ln_top = ln_top.max(ln_peak);
            rows.push((y, j_lo, j_hi, j, ln_peak));
        }
        if rows.is_empty() {
            return Some(Scaled::empty(keep_lo));
        }
        let mut acc = vec![0.0f64; (keep_hi - keep_lo + 1) as usize];
        for &(y, j_lo, j_hi, mode, ln_peak) in &rows {
            let k = n - y;
            let start = libm::exp(ln_peak - ln_top);
            if start < TINY {
                return None;
            }
            let at = |j: u32| (y + j - keep_lo) as usize;
            acc[at(mode)] += start;
            // h(j+1)/h(j) = (k−j)(c−j) / ((j+1)(y−c+j+1))
            let mut v = start;
            for j in mode..j_hi {
                v *= ((k - j) as f64 * (c - j) as f64) / ((j + 1) as f64 * (y + j + 1 - c) as f64);
                if v < TINY {
                    return None;
                }
                acc[at(j + 1)] += v;
            }
            let mut v = start;
            for j in ((j_lo + 1)..=mode).rev() {
                v *= (j as f64 * (y + j - c) as f64) / ((k - j + 1) as f64 * (c - j + 1) as f64);
                if v < TINY {
                    return None;
                }
                acc[at(j - 1)] += v;
            }
        }
        let top = acc.iter().copied().fold(0.0, f64::max);
        acc.iter_mut().for_each(|a| *a /= top);
        dist = Scaled {
            floor: keep_lo,
            ln_scale: ln_top + libm::log(top),
            lin: acc,
        };
    }
    Some(dist)
}

/// Upper tail of a two-member union without allocation: the union is
/// `big + j` with `j ~ Hyperg(n, n − big, small)`. Returns `None` when
/// `P(Γ > observed)` is lost to underflow, so the caller falls back.
fn pair_upper(n: u32, big: u32, small: u32, observed: u32) -> Option<(f64, f64)> {
    let (y, c) = (big, small);
    let k = n - y;
    let j_floor = c.saturating_sub(y);
    let j_hi = k.min(c);
    if observed < y + j_floor {
        return Some((0.0, 0.0));
    }
    let need = observed - y;
    if need > j_hi {
        return Some((f64::NEG_INFINITY, f64::NEG_INFINITY));
    }
    let mode = ((((c as u64 + 1) * (k as u64 + 1)) / (n as u64 + 2)) as u32).clamp(need, j_hi);
    let ln_peak =
        ln_choose(k as u64, mode as u64) + ln_choose(y as u64, (c - mode) as u64) - ln_choose(n as u64, c as u64);
    // Masses relative to the peak: `at_need` for j = need, `above` for j > need.
    let (mut at_need, mut above) = if mode == need { (1.0, 0.0) } else { (0.0, 1.0) };
    let mut v = 1.0f64;
    for j in mode..j_hi {
        v *= ((k - j) as f64 * (c - j) as f64) / ((j + 1) as f64 * (y + j + 1 - c) as f64);
        if v < TINY {
            break;
        }
        above += v;
    }
    let mut v = 1.0f64;
    for j in ((need + 1)..=mode).rev() {
        v *= (j as f64 * (y + j - c) as f64) / ((k - j + 1) as f64 * (c - j + 1) as f64);
        if v < TINY {
            break;
        }
        if j - 1 == need {
            at_need = v;
        } else {
            above += v;
        }
    }
    if at_need == 0.0 || (above == 0.0 && need < j_hi) {
        return None;
    }
    let ln_above = if above > 0.0 {
        ln_peak + libm::log(above)
    } else {
        f64::NEG_INFINITY
    };
    Some((ln_peak + libm::log(at_need + above), ln_above))
}

/// `(ln P(kept ∈ a), ln P(kept ∈ b))` over the truncated distribution.
fn tail_pair(n: u32, coverages: &[u32], tail: Tail, a: impl Fn(u32) -> bool, b: impl Fn(u32) -> bool) -> (f64, f64) {
    match union_scaled(n, coverages, tail) {
        Some(d) => (d.ln_sum_where(a), d.ln_sum_where(b)),
        None => {
            let d = union_distribution_ln(n, coverages, tail);
            (d.ln_sum_where(a), d.ln_sum_where(b))
        }
    }
}

fn union_distribution(n: u32, coverages: &[u32], tail: Tail) -> TailDistribution {
    match union_scaled(n, coverages, tail) {
        Some(d) => d.into_tail(n, support_max(n, coverages)),
        None => union_distribution_ln(n, coverages, tail),
    }
}

/// Iterated convolution in log space with the requested truncation.
fn union_distribution_ln(n: u32, coverages: &[u32], tail: Tail) -> TailDistribution {
    let max = support_max(n, coverages);
    let cov = sorted_coverages(coverages);
    if cov.is_empty() {
        return TailDistribution::point(n, 0);
    }
    let remaining = remaining_coverage(&cov);
    let keep_range = |s: usize, lo: u32, hi: u32| keep_range(tail, &remaining, s, lo, hi);

    let first = cov[0];
    let (lo, hi) = keep_range(0, first, first);
    if lo > hi {
        return TailDistribution::from_ln_masses(n, first, max, Vec::new());
    }
    let mut floor = first;
    let mut ln_masses = vec![0.0];

    for (s, &c) in cov.iter().enumerate().skip(1) {
        let cur_hi = floor + ln_masses.len() as u32 - 1;
        // New union size x = y + j lies in [max(y, c), min(n, y + c)].
        let new_lo = floor.max(c);
        let new_hi = (cur_hi + c).min(n);
        let (keep_lo, keep_hi) = keep_range(s, new_lo, new_hi);
        if keep_lo > keep_hi {
            return TailDistribution::from_ln_masses(n, keep_lo.min(max), max, Vec::new());
        }
        let mut acc = vec![LnAccumulator::default(); (keep_hi - keep_lo + 1) as usize];
        for (i, &ln_f) in ln_masses.iter().enumerate() {
            if ln_f == f64::NEG_INFINITY {
                continue;
            }
            let y = floor + i as u32;
            convolve_row(n, y, c, ln_f, keep_lo, keep_hi, &mut acc);
        }
        floor = keep_lo;
        ln_masses = acc.iter().map(LnAccumulator::value).collect();
    }
    TailDistribution::from_ln_masses(n, floor, max, ln_masses)
}

/// Adds `ln_f + ln Hyperg(n, n−y, c)(x − y)` into `acc[x − keep_lo]` for
/// `x` in `[keep_lo, keep_hi]`.
#[inline]
fn convolve_row(n: u32, y: u32, c: u32, ln_f: f64, keep_lo: u32, keep_hi: u32, acc: &mut [LnAccumulator]) {
    // j = number of newly covered samples; white balls k = n − y, draws r = c.
    let k = n - y;
    let j_lo = c.saturating_sub(y).max(keep_lo.saturating_sub(y));
    let j_hi = k.min(c).min(keep_hi.saturating_sub(y));
    if keep_hi < y || j_lo > j_hi {
        return;
    }
    let (nn, kk, cc) = (n as u64, k as u64, c as u64);
    let mut ln_h = ln_choose(kk, j_lo as u64) + ln_choose(nn - kk, cc - j_lo as u64) - ln_choose(nn, cc);
    let mut j = j_lo;
    loop {
        let x = y + j;
        acc[(x - keep_lo) as usize].push(ln_f + ln_h);
        if j == j_hi {
            break;
        }
        // h(j+1)/h(j) = (k−j)(c−j) / ((j+1)(y−c+j+1))
        let num = ((k - j) as f64) * ((c - j) as f64);
        let den = ((j + 1) as f64) * ((y + j + 1 - c) as f64);
        ln_h += libm::log(num / den);
        j += 1;
    }
}

/// Exact pmf of Γ(M) given the member coverages.
pub fn gamma_distribution(n: u32, coverages: &[u32]) -> Result<TailDistribution> {
    check_coverages(n, coverages)?;
    Ok(union_distribution(n, coverages, Tail::Full))
}

/// Upper-tail test: `p = P(Γ ≥ observed)`, `p⁻ = P(Γ > observed)`.
pub fn upper_p(n: u32, coverages: &[u32], observed: u32) -> Result<PValueTriple> {
    check_coverages(n, coverages)?;
    let max = support_max(n, coverages);
    if observed > max {
        return Err(Error::ObservedAboveSupport { observed, max });
    }
    let mut nonzero = coverages.iter().copied().filter(|&c| c > 0);
    if let (Some(a), Some(b), None) = (nonzero.next(), nonzero.next(), nonzero.next()) {
        if let Some((ln_p, ln_pm)) = pair_upper(n, a.max(b), a.min(b), observed) {
            return Ok(PValueTriple::from_ln(ln_p, ln_pm));
        }
    }
    let (ln_p, ln_pm) = tail_pair(n, coverages, Tail::Upper(observed), |x| x >= observed, |x| x > observed);
    Ok(PValueTriple::from_ln(ln_p, ln_pm))
}

/// Lower-tail test (co-occurrence): `p = P(Γ ≤ observed)`, `p⁻ = P(Γ < observed)`.
pub fn lower_p(n: u32, coverages: &[u32], observed: u32) -> Result<PValueTriple> {
    check_coverages(n, coverages)?;
    let max = support_max(n, coverages);
    if observed > max {
        return Err(Error::ObservedAboveSupport { observed, max });
    }
    let (ln_p, ln_pm) = tail_pair(n, coverages, Tail::Lower(observed), |x| x <= observed, |x| x < observed);
    Ok(PValueTriple::from_ln(ln_p, ln_pm))
}

/// Margins of one set within one group, with members of the same gene fused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupMargins {
    pub group: usize,
    /// `n_τ`.
    pub size: u32,
    /// Per pseudo-member coverage within the group.
    pub coverages: Vec<u32>,
    /// Observed Γ_τ(M).
    pub observed: u32,
}

/// Splits `set` into pseudo-members, one per gene, each carrying the
/// coverage of the union of that gene's alterations, and returns their
/// coverages in every group.
pub fn effective_members(matrix: &AlterationMatrix, set: &AlterationSet) -> Result<Vec<GroupMargins>> {
    let parts = gene_parts(matrix, set)?;
    let layout = matrix.layout();
    let part_rows: Vec<Vec<u64>> = parts.iter().map(|p| matrix.indicator(p)).collect();
    let union = matrix.indicator(set);
    Ok((0..matrix.groups())
        .map(|g| GroupMargins {
            group: g,
            size: matrix.group_size(g),
            coverages: part_rows.iter().map(|r| layout.count_in(r, g)).collect(),
            observed: layout.count_in(&union, g),
        })
        .collect())
}

/// Partition of `set` by gene, in order of first appearance.
pub fn gene_parts(matrix: &AlterationMatrix, set: &AlterationSet) -> Result<Vec<AlterationSet>> {
    matrix.check_set(set)?;
    let mut genes: Vec<(&str, Vec<u32>)> = Vec::new();
    for &r in set.members() {
        let gene = matrix.alteration(r).gene();
        match genes.iter_mut().find(|(g, _)| *g == gene) {
            Some((_, rows)) => rows.push(r),
            None => genes.push((gene, vec![r])),
        }
    }
    Ok(genes.into_iter().map(|(_, rows)| AlterationSet::new(rows)).collect())
}
