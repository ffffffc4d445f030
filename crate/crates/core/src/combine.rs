//! Combining per-group discrete p-values with weighted Stouffer.

use alloc::vec::Vec;

use crate::exact::PValueTriple;
use crate::special::{ln_norm_cdf, ln_one_minus_exp, norm_ppf_ln};
use crate::{Error, Result};

/// Inverse asymptotic standard deviation of the log-odds ratio of the 2×2
/// table with margins `c1`, `c2` in a group of `n_tau` samples. Zero for a
/// degenerate margin.
pub fn pairwise_weight(n_tau: u32, c1: u32, c2: u32) -> f64 {
    if c1 == 0 || c2 == 0 || c1 >= n_tau || c2 >= n_tau {
        return 0.0;
    }
    let n = n_tau as f64;
    let (a, b) = (c1 as f64, c2 as f64);
    let (na, nb) = (n - a, n - b);
    let s = n / (a * b) + n / (a * nb) + n / (na * b) + n / (na * nb);
    1.0 / libm::sqrt(s)
}

/// `sqrt(Σ v²)` over the pairwise weights of a set.
pub fn group_weight(pair_weights: &[f64]) -> Result<f64> {
    if pair_weights.is_empty() {
        return Err(Error::EmptyWeights);
    }
    Ok(libm::sqrt(pair_weights.iter().map(|v| v * v).sum()))
}

/// Set weight in one group from the pseudo-member coverages.
pub fn set_group_weight(n_tau: u32, coverages: &[u32]) -> f64 {
    let mut acc = 0.0;
    for (i, &a) in coverages.iter().enumerate() {
        for &b in &coverages[i + 1..] {
            let v = pairwise_weight(n_tau, a, b);
            acc += v * v;
        }
    }
    libm::sqrt(acc)
}

/// Φ(Σ w·Φ⁻¹(p) / sqrt(Σ w²)).
pub fn stouffer(ps: &[f64], ws: &[f64]) -> Result<f64> {
    let ln: Vec<f64> = ps.iter().map(|&p| libm::log(p)).collect();
    Ok(libm::exp(stouffer_ln(&ln, ws)?))
}

/// Stouffer on log p-values, returning the log of the combined p-value.
pub fn stouffer_ln(ln_ps: &[f64], ws: &[f64]) -> Result<f64> {
    if ln_ps.len() != ws.len() {
        return Err(Error::LengthMismatch(ln_ps.len(), ws.len()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut any_zero = false;
    for (&lp, &w) in ln_ps.iter().zip(ws) {
        if w.is_nan() || w <= 0.0 {
            continue;
        }
        if lp == f64::NEG_INFINITY {
            any_zero = true;
        }
        num += w * norm_ppf_ln(lp);
        den += w * w;
    }
    if den == 0.0 {
        return Err(Error::NoPositiveWeight);
    }
    if any_zero {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(ln_norm_cdf(num / libm::sqrt(den)))
}

/// Pearson randomisation `p − (p − p⁻)·u`.
pub fn randomize_p(triple: &PValueTriple, u: f64) -> f64 {
    libm::exp(randomize_ln_p(triple, u))
}

/// `ln(p − (p − p⁻)·u) = ln p + ln(1 − (1 − p⁻/p)·u)`.
pub fn randomize_ln_p(triple: &PValueTriple, u: f64) -> f64 {
    let ln_p = triple.ln_p();
    if ln_p == f64::NEG_INFINITY {
        return ln_p;
    }
    // 1 − p⁻/p, as a log.
    let ln_gap = ln_one_minus_exp(triple.ln_p_minus() - ln_p);
    let shrink = libm::exp(ln_gap) * u;
    ln_p + libm::log1p(-shrink)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineMode {
    /// Mid-p per group.
    Mid,
    /// Randomised p per group, draws keyed by `(seed, set key, group label)`.
    Randomized { seed: u64 },
}

/// Evidence from a single group for one set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupEvidence<'a> {
    pub group: &'a str,
    pub triple: PValueTriple,
    pub weight: f64,
}

/// Combined log p-value over groups. Groups with zero weight or an
/// uninformative triple are skipped; no remaining evidence gives `ln 1 = 0`.
pub fn combine_across_groups_ln(evidence: &[GroupEvidence<'_>], mode: CombineMode, set_key: &str) -> f64 {
    let mut ln_ps = Vec::with_capacity(evidence.len());
    let mut ws = Vec::with_capacity(evidence.len());
    for e in evidence {
        if e.weight.is_nan() || e.weight <= 0.0 || e.triple.is_uninformative() {
            continue;
        }
        let lp = match mode {
            CombineMode::Mid => e.triple.ln_mid(),
            CombineMode::Randomized { seed } => randomize_ln_p(&e.triple, uniform(seed, set_key, e.group)),
        };
        ln_ps.push(lp);
        ws.push(e.weight);
    }
    if ws.is_empty() {
        return 0.0;
    }
    stouffer_ln(&ln_ps, &ws).unwrap_or(0.0)
}

pub fn combine_across_groups(evidence: &[GroupEvidence<'_>], mode: CombineMode, set_key: &str) -> f64 {
    libm::exp(combine_across_groups_ln(evidence, mode, set_key))
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based uniform draw in the open interval (0, 1), a pure function
/// of `(seed, set_key, group)`.
pub fn uniform(seed: u64, set_key: &str, group: &str) -> f64 {
    let mut h = fnv1a(FNV_OFFSET, set_key.as_bytes());
    // Separator byte outside UTF-8 so ("a","bc") and ("ab","c") differ.
    h = fnv1a(h, &[0xff]);
    h = fnv1a(h, group.as_bytes());
    let bits = mix64(mix64(seed) ^ mix64(h));
    ((bits >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pairwise_weight_values() {
        assert!((pairwise_weight(100, 50, 50) - 2.5).abs() < 1e-14);
        assert_eq!(pairwise_weight(100, 0, 30), 0.0);
        assert_eq!(pairwise_weight(100, 100, 30), 0.0);
        assert_eq!(pairwise_weight(100, 20, 70), pairwise_weight(100, 70, 20));
        assert!(pairwise_weight(200, 40, 140) > pairwise_weight(100, 20, 70));
    }

    #[test]
    fn group_weight_values() {
        assert_eq!(group_weight(&[1.7]).unwrap(), 1.7);
        assert!((group_weight(&[2.0, 2.0, 2.0]).unwrap() - 2.0 * libm::sqrt(3.0)).abs() < 1e-15);
        assert_eq!(group_weight(&[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(group_weight(&[]), Err(Error::EmptyWeights));
    }

    #[test]
    fn stouffer_values() {
        assert!((stouffer(&[0.5, 0.5], &[3.0, 0.2]).unwrap() - 0.5).abs() < 1e-15);
        // Φ(−1.6448536·2/√2) = Φ(−2.3262) ≈ 0.01001
        let two = stouffer(&[0.05, 0.05], &[1.0, 1.0]).unwrap();
        assert!((two - 0.010_003).abs() < 1e-5, "{two}");
        assert!((stouffer(&[0.0123], &[4.0]).unwrap() - 0.0123).abs() < 1e-15);
        assert_eq!(stouffer(&[0.0, 0.3], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(stouffer(&[0.3], &[0.0]), Err(Error::NoPositiveWeight));
        assert_eq!(stouffer(&[0.3], &[1.0, 2.0]), Err(Error::LengthMismatch(1, 2)));
    }

    #[test]
    fn stouffer_log_scale_extremes() {
        // Two groups of p = 1e-200 each combine to a far smaller value.
        let lp = -200.0 * core::f64::consts::LN_10;
        let c = stouffer_ln(&[lp, lp], &[1.0, 1.0]).unwrap();
        assert!(c < 2.0 * lp * 0.9 && c.is_finite());
        // A single group is returned unchanged, even below f64 range.
        let tiny = -2000.0;
        assert!((stouffer_ln(&[tiny], &[2.0]).unwrap() - tiny).abs() < 1e-8 * 2000.0);
    }

    #[test]
    fn randomization_endpoints() {
        let t = PValueTriple::new(1.0 / 6.0, 0.0);
        assert!((randomize_p(&t, 0.5) - 1.0 / 12.0).abs() < 1e-15);
        assert!((randomize_p(&t, 1e-12) - 1.0 / 6.0).abs() < 1e-12);
        assert!(randomize_p(&t, 1.0 - 1e-12) < 1e-12);
        let cont = PValueTriple::new(0.3, 0.3);
        assert!((randomize_p(&cont, 0.7) - 0.3).abs() < 1e-15);
        let inner = PValueTriple::new(0.4, 0.1);
        let r = randomize_p(&inner, 0.25);
        assert!((r - 0.325).abs() < 1e-14);
    }

    #[test]
    fn combine_modes() {
        let t = PValueTriple::new(0.2, 0.1);
        let one = [GroupEvidence {
            group: "a",
            triple: t,
            weight: 1.0,
        }];
        assert!((combine_across_groups(&one, CombineMode::Mid, "k") - 0.15).abs() < 1e-14);
        assert_eq!(combine_across_groups(&[], CombineMode::Mid, "k"), 1.0);
        let zero = [GroupEvidence {
            group: "a",
            triple: t,
            weight: 0.0,
        }];
        assert_eq!(combine_across_groups(&zero, CombineMode::Mid, "k"), 1.0);
        let r1 = combine_across_groups(&one, CombineMode::Randomized { seed: 9 }, "k");
        let r2 = combine_across_groups(&one, CombineMode::Randomized { seed: 9 }, "k");
        assert_eq!(r1, r2);
        assert!(r1 > 0.1 && r1 < 0.2);
    }

    #[test]
    fn uniform_draws_are_keyed() {
        let a = uniform(1, "A,B", "x");
        assert_eq!(a, uniform(1, "A,B", "x"));
        assert_ne!(a, uniform(2, "A,B", "x"));
        assert_ne!(a, uniform(1, "A,B", "y"));
        assert_ne!(uniform(1, "a", "bc"), uniform(1, "ab", "c"));
        // Rough uniformity over many keys.
        let n = 20_000;
        let mean: f64 = (0..n).map(|i| uniform(7, &alloc::format!("{i}"), "g")).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn stouffer_scale_invariant(ps in proptest::collection::vec(0.001f64..0.999, 1..6), scale in 0.01f64..100.0) {
            let ws: Vec<f64> = (0..ps.len()).map(|i| 1.0 + i as f64).collect();
            let scaled: Vec<f64> = ws.iter().map(|w| w * scale).collect();
            let a = stouffer(&ps, &ws).unwrap();
            let b = stouffer(&ps, &scaled).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }

        #[test]
        fn randomized_inside_interval(p in 0.01f64..1.0, frac in 0.0f64..1.0, u in 0.001f64..0.999) {
            let pm = p * frac;
            let t = PValueTriple::new(p, pm);
            let r = randomize_p(&t, u);
            prop_assert!(r >= pm - 1e-15 && r <= p + 1e-15);
        }
    }
}
