//! Log-space special functions: binomial coefficients, log-sum-exp and the
//! standard normal distribution with accurate far tails.

use libm::{erfc, exp, expm1, lgamma, log, log1p, sqrt};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const SQRT_2: f64 = core::f64::consts::SQRT_2;

/// `ln C(n, k)`, or `-inf` when `k > n`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    if let Some(c) = exact_choose(n, k) {
        return log(c as f64);
    }
    let (n, k) = (n as f64, k as f64);
    lgamma(n + 1.0) - lgamma(k + 1.0) - lgamma(n - k + 1.0)
}

/// `C(n, k)` in integers for small `min(k, n − k)` while it fits in `u128`.
fn exact_choose(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    if k > 8 {
        return None;
    }
    let mut c: u128 = 1;
    for i in 0..k {
        // c * (n - i) is divisible by (i + 1).
        c = c.checked_mul((n - i) as u128)? / (i + 1) as u128;
    }
    Some(c)
}

/// `ln(e^a + e^b)`.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + log1p(exp(lo - hi))
}

/// `ln Σ e^x` over the iterator.
pub fn ln_sum_exp<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut acc = LnAccumulator::default();
    for t in terms {
        acc.push(t);
    }
    acc.value()
}

/// Streaming log-sum-exp.
#[derive(Debug, Clone, Copy)]
pub struct LnAccumulator {
    max: f64,
    scaled: f64,
}

impl Default for LnAccumulator {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }
}

impl LnAccumulator {
    #[inline]
    pub fn push(&mut self, t: f64) {
        if t == f64::NEG_INFINITY {
            return;
        }
        if t > self.max {
            self.scaled = self.scaled * exp(self.max - t) + 1.0;
            self.max = t;
        } else {
            self.scaled += exp(t - self.max);
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + log(self.scaled)
        }
    }
}

/// `ln(1 - e^x)` for `x <= 0`.
pub fn ln_one_minus_exp(x: f64) -> f64 {
    if x > -core::f64::consts::LN_2 {
        log(-expm1(x))
    } else {
        log1p(-exp(x))
    }
}

pub fn ln_norm_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// `ln Φ(z)`, accurate in both tails.
pub fn ln_norm_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if z >= 0.0 {
        // Φ(z) = 1 - Q(z) with Q small.
        return log1p(-0.5 * erfc(z / SQRT_2));
    }
    if z > -37.0 {
        return log(0.5 * erfc(-z / SQRT_2));
    }
    // Mills-ratio asymptotic series; error below 1e-16 relative for z < -37.
    let z2 = z * z;
    let mut term = 1.0;
    let mut series = 1.0;
    for k in 1..8 {
        term *= -((2 * k - 1) as f64) / z2;
        series += term;
    }
    ln_norm_pdf(z) - log(-z) + log(series)
}

/// Standard normal quantile.
pub fn norm_ppf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    norm_ppf_ln(log(p))
}

/// Standard normal quantile of `e^ln_p`; resolves probabilities far below
/// the smallest positive `f64`.
pub fn norm_ppf_ln(ln_p: f64) -> f64 {
    if ln_p == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if ln_p >= 0.0 {
        return f64::INFINITY;
    }
    if ln_p <= -core::f64::consts::LN_2 {
        lower_quantile(ln_p)
    } else {
        // Upper half by symmetry: Φ⁻¹(p) = -Φ⁻¹(1 - p).
        let ln_q = log(-expm1(ln_p));
        -lower_quantile(ln_q)
    }
}

/// Solves `ln Φ(z) = ln_p` for `ln_p <= ln 0.5` by Newton's method. `ln Φ` is
/// increasing and concave, so the iteration converges monotonically after
/// the first step.
fn lower_quantile(ln_p: f64) -> f64 {
    let mut z = if ln_p > -1.5 {
        // p above ~0.22: start from a linearisation around zero.
        let p = exp(ln_p);
        (p - 0.5) * 2.506_628_274_631_000_5
    } else {
        let t = -2.0 * ln_p;
        -sqrt(t - log(t) - log(2.0 * core::f64::consts::PI))
    };
    for _ in 0..100 {
        let ln_cdf = ln_norm_cdf(z);
        let slope = exp(ln_norm_pdf(z) - ln_cdf);
        let step = (ln_cdf - ln_p) / slope;
        z -= step;
        if libm::fabs(step) <= 1e-15 * libm::fmax(1.0, libm::fabs(z)) {
            break;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        libm::fabs(a - b) / libm::fabs(b)
    }

    #[test]
    fn choose_small_values() {
        assert!(rel(exp(ln_choose(10, 4)), 210.0) < 1e-13);
        assert_eq!(ln_choose(3, 4), f64::NEG_INFINITY);
        assert_eq!(ln_choose(7, 0), 0.0);
        assert!(rel(exp(ln_choose(1418, 2)), 1_004_653.0) < 1e-12);
    }

    #[test]
    fn lse_matches_direct_sum() {
        let v = [-1.0, -2.0, -3.5];
        let direct = log(exp(-1.0) + exp(-2.0) + exp(-3.5));
        assert!(libm::fabs(ln_sum_exp(v) - direct) < 1e-15);
        assert_eq!(ln_sum_exp([]), f64::NEG_INFINITY);
        assert!(libm::fabs(ln_add_exp(-1000.0, -1000.0) - (-1000.0 + log(2.0))) < 1e-12);
    }

    #[test]
    fn normal_reference_points() {
        // Tabulated standard normal values.
        assert!(rel(norm_cdf(-1.959_963_984_540_054), 0.025) < 1e-14);
        assert!(libm::fabs(norm_ppf(0.975) - 1.959_963_984_540_054) < 1e-13);
        assert!(libm::fabs(norm_ppf(0.05) + 1.644_853_626_951_472_2) < 1e-13);
        assert!(libm::fabs(norm_ppf(0.5)) < 1e-15);
        // Φ(-10) = 7.619853024160527e-24
        assert!(rel(exp(ln_norm_cdf(-10.0)), 7.619_853_024_160_527e-24) < 1e-13);
    }

    #[test]
    fn far_tail_is_continuous_across_switch() {
        let a = ln_norm_cdf(-36.999_999);
        let b = ln_norm_cdf(-37.000_001);
        assert!(libm::fabs(a - b) < 1e-3);
        // High-precision reference values.
        assert!(libm::fabs(ln_norm_cdf(-40.0) + 804.608_442_013_753_8) < 1e-10);
        assert!(libm::fabs(ln_norm_cdf(-37.5) + 707.668_989_317_507_2) < 1e-10);
    }

    #[test]
    fn quantile_inverts_log_cdf() {
        for &lp in &[-1e-12, -0.01, -0.5, -0.693, -2.0, -50.0, -700.0, -5000.0] {
            let z = norm_ppf_ln(lp);
            let back = ln_norm_cdf(z);
            assert!(
                libm::fabs(back - lp) <= 1e-10 * libm::fmax(1.0, libm::fabs(lp)),
                "{lp} {z} {back}"
            );
        }
    }
}
