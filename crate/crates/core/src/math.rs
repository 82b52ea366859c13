//! Small special-function helpers shared by the numerics and scorers.

use core::f64::consts::{PI, SQRT_2};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Standard normal cdf.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Standard normal upper tail `1 - Φ(z)`, accurate in the far right tail.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    libm::exp(-0.5 * z * z) / libm::sqrt(2.0 * PI)
}

/// Clamp a probability produced by floating-point arithmetic into `[0, 1]`.
///
/// Excursions larger than `1e-12` indicate a numerical bug and trip a debug assertion.
pub fn clamp_probability(p: f64) -> f64 {
    debug_assert!(
        !(p < -1e-12 || p > 1.0 + 1e-12),
        "probability {p} outside [0,1] beyond rounding"
    );
    p.clamp(0.0, 1.0)
}

/// `ln(n!) - ln(sqrt(2πn) (n/e)^n)` for integer `n`.
fn stirling_error(n: u64) -> f64 {
    // ln(n!) - ln(sqrt(2πn)(n/e)^n) for n = 0..=15
    const TABLE: [f64; 16] = [
        0.0,
        0.081_061_466_795_327_26,
        0.041_340_695_955_409_29,
        0.027_677_925_684_998_34,
        0.020_790_672_103_765_093,
        0.016_644_691_189_821_193,
        0.013_876_128_823_070_748,
        0.011_896_709_945_891_77,
        0.010_411_265_261_972_096,
        0.009_255_462_182_712_733,
        0.008_330_563_433_362_871,
        0.007_573_675_487_951_841,
        0.006_942_840_107_209_53,
        0.006_408_994_188_004_207,
        0.005_951_370_112_758_848,
        0.005_554_733_551_962_801,
    ];
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;

    if n <= 15 {
        return TABLE[n as usize];
    }
    let n = n as f64;
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x/np) + np - x`, evaluated without cancellation near `x ≈ np`.
fn deviance(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * libm::log(x / np) + np - x
    }
}

/// Natural log of the binomial pmf `P{Bin(n, p) = x}` (saddle-point form, accurate for large `n`).
pub fn ln_binomial_pmf(x: u64, n: u64, p: f64) -> f64 {
    let q = 1.0 - p;
    if p == 0.0 {
        return if x == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if x == n { 0.0 } else { f64::NEG_INFINITY };
    }
    if x > n {
        return f64::NEG_INFINITY;
    }
    if x == 0 {
        return n as f64 * libm::log1p(-p);
    }
    if x == n {
        return n as f64 * libm::log(p);
    }
    let (xf, nf) = (x as f64, n as f64);
    let lc = stirling_error(n)
        - stirling_error(x)
        - stirling_error(n - x)
        - deviance(xf, nf * p)
        - deviance(nf - xf, nf * q);
    let lf = LN_2PI + libm::log(xf) + libm::log1p(-xf / nf);
    lc - 0.5 * lf
}

/// `ln Γ(x)` for positive `x`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stirling_table_matches_lgamma_definition() {
        for n in 1..=40u64 {
            let nf = n as f64;
            let direct = ln_gamma(nf + 1.0) - (nf + 0.5) * libm::log(nf) + nf - 0.5 * LN_2PI;
            assert!((stirling_error(n) - direct).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn binomial_pmf_small_cases() {
        // Bin(4, 0.5): 1/16, 4/16, 6/16
        assert!((libm::exp(ln_binomial_pmf(0, 4, 0.5)) - 1.0 / 16.0).abs() < 1e-15);
        assert!((libm::exp(ln_binomial_pmf(1, 4, 0.5)) - 0.25).abs() < 1e-15);
        assert!((libm::exp(ln_binomial_pmf(2, 4, 0.5)) - 0.375).abs() < 1e-15);
        assert_eq!(ln_binomial_pmf(3, 3, 1.0), 0.0);
        assert_eq!(ln_binomial_pmf(2, 3, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn pmf_sums_to_one() {
        for &(n, p) in &[(10u64, 0.3), (200, 0.97), (1000, 0.05), (5000, 0.5)] {
            let s: f64 = (0..=n).map(|x| libm::exp(ln_binomial_pmf(x, n, p))).sum();
            assert!((s - 1.0).abs() < 1e-12, "n={n} p={p} sum={s}");
        }
    }

    #[test]
    fn normal_tails() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-12);
        assert!((normal_sf(1.644_853_626_951_472_2) - 0.05).abs() < 1e-12);
    }
}
