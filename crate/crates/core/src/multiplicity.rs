//! Size-dependent hypothesis weights and the multiple-testing procedures
//! built on them.
//!
//! With `q_k = 1 − (1 − α)^{1/(m−k+1)}`, a set of size `s` gets weight
//! proportional to `Π_{k=2}^{s} q_k`, normalised so that the average weight
//! over all `Σ_{ℓ=2}^{k_max} C(m, ℓ)` possible sets is 1. Everything is
//! evaluated in log space.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::dataset::AlterationSet;
use crate::special::{ln_choose, ln_sum_exp};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WeightScheme {
    m: usize,
    k_max: usize,
    alpha_w: f64,
    /// `ln Π_{k=2}^{s} q_k`, indexed by `s`; entries 0 and 1 unused.
    ln_prod: Vec<f64>,
    /// `ln Σ_ℓ C(m,ℓ) Π q`.
    ln_norm: f64,
    /// `ln Σ_ℓ C(m,ℓ)`.
    ln_universe: f64,
}

impl WeightScheme {
    pub fn new(m: usize, k_max: usize, alpha_w: f64) -> Result<Self> {
        if k_max < 2 || k_max > m {
            return Err(Error::Config(alloc::format!("k_max must lie in 2..={m}, got {k_max}")));
        }
        if !(alpha_w > 0.0 && alpha_w <= 1.0) {
            return Err(Error::Config(alloc::format!(
                "weight parameter must lie in (0, 1], got {alpha_w}"
            )));
        }
        let ln_keep = libm::log1p(-alpha_w);
        let mut ln_prod = alloc::vec![0.0; k_max + 1];
        for k in 2..=k_max {
            // q_k = −expm1(ln(1−α)/(m−k+1))
            let q = -libm::expm1(ln_keep / (m - k + 1) as f64);
            ln_prod[k] = ln_prod[k - 1] + libm::log(q);
        }
        let ln_norm = ln_sum_exp((2..=k_max).map(|l| ln_choose(m as u64, l as u64) + ln_prod[l]));
        let ln_universe = ln_sum_exp((2..=k_max).map(|l| ln_choose(m as u64, l as u64)));
        Ok(Self {
            m,
            k_max,
            alpha_w,
            ln_prod,
            ln_norm,
            ln_universe,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn alpha_w(&self) -> f64 {
        self.alpha_w
    }

    fn check(&self, size: usize) -> Result<()> {
        if size < 2 || size > self.k_max {
            return Err(Error::SizeOutOfRange {
                size,
                k_max: self.k_max,
            });
        }
        Ok(())
    }

    /// Number of sets that could have been tested, `Σ_{ℓ=2}^{k_max} C(m, ℓ)`.
    pub fn universe(&self) -> f64 {
        libm::exp(self.ln_universe)
    }

    pub fn ln_universe(&self) -> f64 {
        self.ln_universe
    }

    pub fn ln_set_weight(&self, size: usize) -> Result<f64> {
        self.check(size)?;
        Ok(self.ln_universe + self.ln_prod[size] - self.ln_norm)
    }

    pub fn set_weight(&self, size: usize) -> Result<f64> {
        Ok(libm::exp(self.ln_set_weight(size)?))
    }

    /// `ln(universe / w(size))`.
    pub fn ln_correction_factor(&self, size: usize) -> Result<f64> {
        self.check(size)?;
        Ok(self.ln_norm - self.ln_prod[size])
    }

    /// Factor applied to the raw p-value of a set of this size.
    pub fn correction_factor(&self, size: usize) -> Result<f64> {
        Ok(libm::exp(self.ln_correction_factor(size)?))
    }
}

/// Closed-form large-`m`, large-`k_max` approximation of the correction
/// factor: `(e^α − 1 − α)·α^{−s}·s!·C(m, s)`.
pub fn correction_factor_approx(m: usize, alpha_w: f64, size: usize) -> f64 {
    let lead = libm::expm1(alpha_w) - alpha_w;
    let ln = libm::log(lead) - size as f64 * libm::log(alpha_w)
        + libm::lgamma(size as f64 + 1.0)
        + ln_choose(m as u64, size as u64);
    libm::exp(ln)
}

/// A tested set and its raw log p-value.
#[derive(Debug, Clone, PartialEq)]
pub struct TestedSet {
    pub set: AlterationSet,
    pub ln_p: f64,
}

impl TestedSet {
    pub fn new(set: AlterationSet, p: f64) -> Self {
        Self {
            set,
            ln_p: libm::log(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedResult {
    pub set: AlterationSet,
    pub ln_p_raw: f64,
    /// Unclamped; may exceed `ln 1`.
    pub ln_p_adjusted: f64,
    pub weight: f64,
    pub significant: bool,
}

impl AdjustedResult {
    pub fn p_raw(&self) -> f64 {
        libm::exp(self.ln_p_raw)
    }

    /// Adjusted p-value clamped to 1.
    pub fn p_adjusted(&self) -> f64 {
        libm::exp(self.ln_p_adjusted.min(0.0))
    }

    /// Report order: adjusted p, then smaller set, then member order.
    pub fn report_cmp(&self, other: &Self) -> Ordering {
        self.ln_p_adjusted
            .total_cmp(&other.ln_p_adjusted)
            .then(self.set.len().cmp(&other.set.len()))
            .then_with(|| self.set.cmp(&other.set))
    }
}

fn adjust(results: &[TestedSet], scheme: &WeightScheme) -> Result<Vec<AdjustedResult>> {
    results
        .iter()
        .map(|r| {
            let size = r.set.len();
            Ok(AdjustedResult {
                set: r.set.clone(),
                ln_p_raw: r.ln_p,
                ln_p_adjusted: r.ln_p + scheme.ln_correction_factor(size)?,
                weight: libm::exp(scheme.ln_set_weight(size)?),
                significant: false,
            })
        })
        .collect()
}

/// Weighted Bonferroni: `p·universe/w(|M|)`, significant when `<= level`.
pub fn weighted_bonferroni(results: &[TestedSet], scheme: &WeightScheme, level: f64) -> Result<Vec<AdjustedResult>> {
    let ln_level = libm::log(level);
    let mut out = adjust(results, scheme)?;
    for r in &mut out {
        r.significant = r.ln_p_adjusted <= ln_level;
    }
    Ok(out)
}

/// Weighted Benjamini–Hochberg step-up over a universe of `universe`
/// hypotheses, of which `ln_ps` are the tested ones (the rest count as
/// p = 1). Rejects the `k` smallest `p/w` where `k` is the largest index with
/// `p_(k)/w_(k) <= k·level/universe`.
pub fn weighted_bh_flags(ln_ps: &[f64], ln_weights: &[f64], ln_universe: f64, level: f64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..ln_ps.len()).collect();
    let ln_q: Vec<f64> = ln_ps.iter().zip(ln_weights).map(|(p, w)| p - w).collect();
    order.sort_by(|&a, &b| ln_q[a].total_cmp(&ln_q[b]).then(a.cmp(&b)));
    let ln_level = libm::log(level) - ln_universe;
    let mut cutoff = 0;
    for (rank, &i) in order.iter().enumerate() {
        if ln_q[i] <= ln_level + libm::log((rank + 1) as f64) {
            cutoff = rank + 1;
        }
    }
    let mut flags = alloc::vec![false; ln_ps.len()];
    for &i in &order[..cutoff] {
        flags[i] = true;
    }
    flags
}

/// Weighted BH with the scheme's average-1 weights. Adjusted values are the
/// Bonferroni products, used for ordering and pruning.
pub fn weighted_bh(results: &[TestedSet], scheme: &WeightScheme, level: f64) -> Result<Vec<AdjustedResult>> {
    let mut out = adjust(results, scheme)?;
    let ln_ps: Vec<f64> = out.iter().map(|r| r.ln_p_raw).collect();
    let ln_ws: Vec<f64> = out.iter().map(|r| libm::log(r.weight)).collect();
    let flags = weighted_bh_flags(&ln_ps, &ln_ws, scheme.ln_universe(), level);
    for (r, f) in out.iter_mut().zip(flags) {
        r.significant = f;
    }
    Ok(out)
}

/// Drops every set that has a strict subset or superset with a smaller
/// adjusted p-value among `significant` (retained or not). On ties the
/// smaller set wins.
pub fn prune_nested(significant: &[AdjustedResult]) -> Vec<AdjustedResult> {
    let beats = |a: &AdjustedResult, b: &AdjustedResult| -> bool {
        match a.ln_p_adjusted.total_cmp(&b.ln_p_adjusted) {
            Ordering::Less => true,
            Ordering::Equal => a.set.len() < b.set.len(),
            Ordering::Greater => false,
        }
    };
    significant
        .iter()
        .enumerate()
        .filter(|(i, r)| {
            !significant.iter().enumerate().any(|(j, o)| {
                j != *i && o.set != r.set && (o.set.is_subset_of(&r.set) || r.set.is_subset_of(&o.set)) && beats(o, r)
            })
        })
        .map(|(_, r)| r.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn single_size_class_has_unit_weight() {
        let s = WeightScheme::new(40, 2, 0.05).unwrap();
        assert!((s.set_weight(2).unwrap() - 1.0).abs() < 1e-13);
        assert!(rel(s.correction_factor(2).unwrap(), 780.0) < 1e-12);
    }

    #[test]
    fn average_one_identity_small_case() {
        // m=6, k_max=4: 15 + 20 + 15 = 50 sets.
        let s = WeightScheme::new(6, 4, 0.05).unwrap();
        let total: f64 = [(2, 15.0), (3, 20.0), (4, 15.0)]
            .iter()
            .map(|&(size, count)| count * s.set_weight(size).unwrap())
            .sum();
        assert!(rel(total, 50.0) < 1e-12);
        assert!(rel(s.universe(), 50.0) < 1e-12);
    }

    #[test]
    fn weight_ratio_telescopes() {
        let (m, alpha) = (30usize, 0.05);
        let s = WeightScheme::new(m, 6, alpha).unwrap();
        for size in 2..6 {
            let ratio = s.set_weight(size + 1).unwrap() / s.set_weight(size).unwrap();
            let expected = 1.0 - libm::pow(1.0 - alpha, 1.0 / (m - size) as f64);
            assert!(rel(ratio, expected) < 1e-12);
        }
    }

    #[test]
    fn size_checks() {
        let s = WeightScheme::new(10, 3, 0.05).unwrap();
        assert_eq!(s.correction_factor(4), Err(Error::SizeOutOfRange { size: 4, k_max: 3 }));
        assert!(s.set_weight(1).is_err());
        assert!(WeightScheme::new(3, 4, 0.05).is_err());
        assert!(WeightScheme::new(10, 3, 0.0).is_err());
    }

    #[test]
    fn approximation_near_exact_for_pairs() {
        let approx = correction_factor_approx(1418, 0.05, 2);
        assert!(rel(approx, 1.022_053e6) < 1e-3, "{approx}");
        // Small-α limit: (α²/2)·α⁻²·2·C(m,2) → C(m,2).
        let tiny = correction_factor_approx(100, 1e-6, 2);
        assert!(rel(tiny, 4950.0) < 1e-5);
    }

    #[test]
    fn bonferroni_flags() {
        let s = WeightScheme::new(20, 2, 0.05).unwrap();
        let r = weighted_bonferroni(
            &[
                TestedSet::new(AlterationSet::new([0, 1]), 1e-5),
                TestedSet::new(AlterationSet::new([2, 3]), 0.0),
                TestedSet::new(AlterationSet::new([4, 5]), 0.01),
            ],
            &s,
            0.05,
        )
        .unwrap();
        assert!(r[0].significant && r[1].significant && !r[2].significant);
        assert_eq!(r[1].p_adjusted(), 0.0);
        assert_eq!(r[2].p_adjusted(), 1.0);
        assert!(weighted_bonferroni(&[], &s, 0.05).unwrap().is_empty());
    }

    #[test]
    fn bh_reduces_to_classical() {
        let ps: [f64; 5] = [0.01, 0.02, 0.04, 0.2, 0.9];
        let ln: Vec<f64> = ps.iter().map(|p| p.ln()).collect();
        // Thresholds 0.01, 0.02, 0.03, 0.04, 0.05: the third p exceeds its own.
        let flags = weighted_bh_flags(&ln, &[0.0; 5], 5f64.ln(), 0.05);
        assert_eq!(flags, [true, true, false, false, false]);
        let ln3: Vec<f64> = [0.01f64, 0.02, 0.03, 0.2, 0.9].iter().map(|p| p.ln()).collect();
        assert_eq!(
            weighted_bh_flags(&ln3, &[0.0; 5], 5f64.ln(), 0.05),
            [true, true, true, false, false]
        );
        // Step-up: a later pass rescues an earlier failure.
        let ln_up: Vec<f64> = [0.011f64, 0.02, 0.03, 0.2, 0.9].iter().map(|p| p.ln()).collect();
        assert_eq!(
            weighted_bh_flags(&ln_up, &[0.0; 5], 5f64.ln(), 0.05),
            [true, true, true, false, false]
        );
        let zeros = weighted_bh_flags(&[f64::NEG_INFINITY; 3], &[0.0; 3], 3f64.ln(), 0.05);
        assert_eq!(zeros, [true; 3]);
        // One hypothesis: reject iff p/w <= level.
        assert_eq!(weighted_bh_flags(&[0.1f64.ln()], &[2f64.ln()], 0.0, 0.05), [true]);
        assert_eq!(weighted_bh_flags(&[0.2f64.ln()], &[2f64.ln()], 0.0, 0.05), [false]);
    }

    #[test]
    fn bh_single_tested_set_matches_bonferroni() {
        let s = WeightScheme::new(20, 3, 0.05).unwrap();
        for p in [1e-6, 1e-5, 1e-4] {
            let t = [TestedSet::new(AlterationSet::new([0, 1, 2]), p)];
            let bh = weighted_bh(&t, &s, 0.05).unwrap();
            let bf = weighted_bonferroni(&t, &s, 0.05).unwrap();
            assert_eq!(bh[0].significant, bf[0].significant);
        }
    }

    fn adj(members: &[u32], p: f64) -> AdjustedResult {
        AdjustedResult {
            set: AlterationSet::new(members.iter().copied()),
            ln_p_raw: p.ln(),
            ln_p_adjusted: p.ln(),
            weight: 1.0,
            significant: true,
        }
    }

    #[test]
    fn pruning() {
        let kept = prune_nested(&[adj(&[0, 1], 1e-10), adj(&[0, 1, 2], 1e-8)]);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].set.members(), [0, 1]);

        let disjoint = prune_nested(&[adj(&[0, 1], 1e-3), adj(&[2, 3], 1e-9)]);
        assert_eq!(disjoint.len(), 2);

        let chain = prune_nested(&[adj(&[0, 1], 1e-6), adj(&[0, 1, 2], 1e-9), adj(&[0, 1, 2, 3], 1e-7)]);
        assert_eq!(chain.len(), 1);
        assert_eq!(chain[0].set.members(), [0, 1, 2]);

        let tie = prune_nested(&[adj(&[0, 1, 2], 1e-5), adj(&[0, 1], 1e-5)]);
        assert_eq!(tie.len(), 1);
        assert_eq!(tie[0].set.members(), [0, 1]);
    }

    proptest! {
        #[test]
        fn average_one_randomized(m in 4usize..400, k in 2usize..12, alpha in 0.001f64..1.0) {
            let k = k.min(m);
            let s = WeightScheme::new(m, k, alpha).unwrap();
            let total = ln_sum_exp((2..=k).map(|l| ln_choose(m as u64, l as u64) + s.ln_set_weight(l).unwrap()));
            prop_assert!((total - s.ln_universe()).abs() < 1e-10);
            for size in 2..k {
                prop_assert!(s.set_weight(size + 1).unwrap() < s.set_weight(size).unwrap());
                prop_assert!(s.correction_factor(size + 1).unwrap() > s.correction_factor(size).unwrap());
            }
            if k < m {
                let bigger = WeightScheme::new(m, k + 1, alpha).unwrap();
                for size in 2..=k {
                    prop_assert!(bigger.correction_factor(size).unwrap() >= s.correction_factor(size).unwrap() * (1.0 - 1e-12));
                }
            }
        }

        #[test]
        fn approx_converges_with_kmax(m in prop::sample::select(alloc::vec![50usize, 200]), size in 2usize..5) {
            let alpha = 0.05;
            let approx = correction_factor_approx(m, alpha, size);
            let far = WeightScheme::new(m, 40, alpha).unwrap().correction_factor(size).unwrap();
            let near = WeightScheme::new(m, size, alpha).unwrap().correction_factor(size).unwrap();
            prop_assert!((approx / far - 1.0).abs() <= (approx / near - 1.0).abs() + 1e-12);
        }
    }
}
