//! Threshold numerics for order-statistic NP classifiers.
//!
//! Everything here is a pure function of its arguments. The central objects are
//! the rank `k` of the order statistic used as threshold on the left-out class-0
//! scores and the bounds that certify `P{R0 > α} ≤ δ3` for that rank:
//!
//! * the exact tail `Beta.cdf_{k, m3+1-k}(1 - δ)`, evaluated through the
//!   beta/binomial duality `Beta.cdf_{k, n+1-k}(p) = 1 - Bin.cdf_{n,p}(k-1)`;
//! * the Chebyshev-type bound `g(δ3, m3, k)` and its closed-form minimiser `k_min`;
//! * the Chernoff-type alternative `h(δ3, m3, k)` and `k_chern`;
//! * diagnostic bounds on `|R0(φ̂) - R0(φ*)|`, the excess type II error and
//!   the uniform deviation of the kernel density-ratio estimate.

use alloc::format;

use crate::error::{NpError, Result};
use crate::math::{clamp_probability, ln_binomial_pmf};

/// `(α, δ3, m3)`: target type I level, violation tolerance and size of the left-out class-0 sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdParams {
    alpha: f64,
    delta3: f64,
    m3: usize,
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(NpError::Domain(format!("{name}={v} must lie in (0,1)")))
    }
}

impl ThresholdParams {
    pub fn new(alpha: f64, delta3: f64, m3: usize) -> Result<Self> {
        open_unit("alpha", alpha)?;
        open_unit("delta3", delta3)?;
        if m3 == 0 {
            return Err(NpError::Domain("m3 must be at least 1".into()));
        }
        Ok(Self { alpha, delta3, m3 })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn delta3(&self) -> f64 {
        self.delta3
    }

    pub fn m3(&self) -> usize {
        self.m3
    }

    /// Smallest integer m3 satisfying the sufficient condition `m3 ≥ 4/(α δ3)`.
    pub fn sufficient_m3(&self) -> usize {
        libm::ceil(4.0 / (self.alpha * self.delta3)) as usize
    }

    /// Whether `m3 ≥ 4/(α δ3)`, the sufficient condition under which `k_min ≤ m3` is guaranteed.
    pub fn meets_sufficient_m3(&self) -> bool {
        self.m3 as f64 >= 4.0 / (self.alpha * self.delta3)
    }

    /// Whether some rank `k ≤ m3` satisfies `g(δ3, m3, k) ≤ α`.
    pub fn is_feasible(&self) -> bool {
        self.k_min() <= self.m3
    }

    /// Upper bound `Beta.cdf_{k, m3+1-k}(1 - δ)` on `P{R0(φ̂_k) > δ}`.
    pub fn type1_tail_bound(&self, k: usize, delta: f64) -> Result<f64> {
        if k == 0 || k > self.m3 {
            return Err(NpError::Domain(format!("k={k} outside 1..={}", self.m3)));
        }
        beta_cdf_via_duality(k, self.m3, 1.0 - delta)
    }

    /// Chebyshev-type bound `g(δ3, m3, k)`, defined for `1 ≤ k ≤ m3 + 1`.
    pub fn g_bound(&self, k: usize) -> f64 {
        debug_assert!(k >= 1 && k <= self.m3 + 1);
        let m = self.m3 as f64;
        let k = k as f64;
        let rest = m + 1.0 - k;
        rest / (m + 1.0) + libm::sqrt(k * rest / (self.delta3 * (m + 2.0) * (m + 1.0) * (m + 1.0)))
    }

    /// `A_{α,δ3}(m3) ∈ (1 - α, 1)`, the normalised location of `k_min`.
    pub fn a_of_m3(&self) -> f64 {
        let (a, d, m) = (self.alpha, self.delta3, self.m3 as f64);
        let num = 1.0
            + 2.0 * d * (m + 2.0) * (1.0 - a)
            + libm::sqrt(1.0 + 4.0 * d * (1.0 - a) * a * (m + 2.0));
        num / (2.0 * (d * (m + 2.0) + 1.0))
    }

    /// `⌈(m3 + 1) A⌉`: the smallest `k ∈ 1..=m3+1` with `g ≤ α`. A value of `m3 + 1` means no
    /// order statistic of the left-out sample certifies the guarantee.
    pub fn k_min(&self) -> usize {
        let k = libm::ceil((self.m3 as f64 + 1.0) * self.a_of_m3()) as usize;
        k.clamp(1, self.m3 + 1)
    }

    /// Rank actually used for the threshold: `min(k_min, m3)`.
    pub fn k_used(&self) -> usize {
        self.k_min().min(self.m3)
    }

    /// Chernoff-type bound `h(δ3, m3, k)` for `1 ≤ k ≤ m3`.
    ///
    /// Returns `+∞` when the denominator is not positive (the bound is undefined there).
    pub fn h_bound(&self, k: usize) -> f64 {
        debug_assert!(k >= 1 && k <= self.m3);
        let m = self.m3 as f64;
        let k = k as f64;
        let l = 2.0 * libm::sqrt(libm::log(2.0 / self.delta3));
        let upper = libm::sqrt(m - k + 1.0);
        let den = m + 1.0 + l * (upper - libm::sqrt(k));
        if den <= 0.0 {
            return f64::INFINITY;
        }
        (m + 1.0 - k + l * upper) / den
    }

    /// `min{k ∈ 1..=m3 : h(δ3, m3, k) ≤ α}`, or `None` when that set is empty.
    pub fn k_chern(&self) -> Option<usize> {
        (1..=self.m3).find(|&k| self.h_bound(k) <= self.alpha)
    }

    /// Width `ξ_{α,δ3,m3}(δ4)` of the high-probability band around `R0(φ*)` containing `R0(φ̂)`.
    pub fn xi_bound(&self, delta4: f64) -> Result<f64> {
        open_unit("delta4", delta4)?;
        if !self.meets_sufficient_m3() {
            return Err(NpError::InfeasibleM3 {
                m3: self.m3,
                required: self.sufficient_m3(),
            });
        }
        let m = self.m3 as f64;
        let k = self.k_min() as f64;
        let spread = libm::sqrt(k * (m + 1.0 - k) / ((m + 2.0) * (m + 1.0) * (m + 1.0) * delta4));
        Ok(spread + self.a_of_m3() - (1.0 - self.alpha) + 1.0 / (m + 1.0))
    }

    /// Upper bound on the excess type II error `R1(φ̂) - R1(φ*)`.
    ///
    /// Checks `m3 ≥ max{4/(αδ3), δ3⁻², δ4⁻²}`; the detection-level requirement on `δ*` is the
    /// caller's responsibility.
    pub fn excess_type2_bound(&self, diag: &DiagnosticConstants) -> Result<f64> {
        let required = (4.0 / (self.alpha * self.delta3))
            .max(1.0 / (self.delta3 * self.delta3))
            .max(1.0 / (diag.delta4 * diag.delta4));
        if (self.m3 as f64) < required {
            return Err(NpError::InfeasibleM3 {
                m3: self.m3,
                required: libm::ceil(required) as usize,
            });
        }
        let scale = 0.4 * libm::pow(self.m3 as f64, 0.25);
        let detect = libm::pow(scale * diag.m1_const, -1.0 / diag.gamma_under);
        let margin = 2.0 * diag.m0 * libm::pow(detect + 2.0 * diag.sup_dev, 1.0 + diag.gamma_bar);
        Ok(margin + diag.c_alpha / scale)
    }
}

/// Margin/detection constants used only by the diagnostic bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticConstants {
    pub delta4: f64,
    pub m0: f64,
    pub m1_const: f64,
    pub gamma_bar: f64,
    pub gamma_under: f64,
    pub c_alpha: f64,
    pub sup_dev: f64,
}

impl DiagnosticConstants {
    pub fn new(
        delta4: f64,
        m0: f64,
        m1_const: f64,
        gamma_bar: f64,
        gamma_under: f64,
        c_alpha: f64,
        sup_dev: f64,
    ) -> Result<Self> {
        open_unit("delta4", delta4)?;
        for (name, v) in [
            ("M0", m0),
            ("M1", m1_const),
            ("gamma_bar", gamma_bar),
            ("gamma_under", gamma_under),
            ("C_alpha", c_alpha),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(NpError::Domain(format!("{name}={v} must be positive")));
            }
        }
        if !(sup_dev >= 0.0 && sup_dev.is_finite()) {
            return Err(NpError::Domain(format!(
                "sup_dev={sup_dev} must be nonnegative"
            )));
        }
        Ok(Self {
            delta4,
            m0,
            m1_const,
            gamma_bar,
            gamma_under,
            c_alpha,
            sup_dev,
        })
    }
}

/// Sum of `exp(ln_pmf(i))` over `range`, scaled by the largest term for stability.
fn sum_pmf(n: u64, p: f64, lo: u64, hi: u64) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for i in lo..=hi {
        max = max.max(ln_binomial_pmf(i, n, p));
    }
    if max == f64::NEG_INFINITY {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in lo..=hi {
        acc += libm::exp(ln_binomial_pmf(i, n, p) - max);
    }
    acc * libm::exp(max)
}

/// `(P{Bin ≤ k}, P{Bin > k})` for `0 ≤ k < n`, summing whichever tail is shorter in probability.
fn binomial_tails(n: u64, p: f64, k: u64) -> (f64, f64) {
    if (k as f64) < n as f64 * p {
        let lower = clamp_probability(sum_pmf(n, p, 0, k));
        (lower, clamp_probability(1.0 - lower))
    } else {
        let upper = clamp_probability(sum_pmf(n, p, k + 1, n));
        (clamp_probability(1.0 - upper), upper)
    }
}

/// `P{Bin(n, p) ≤ k}`; `0` for `k < 0` and `1` for `k ≥ n`.
pub fn binomial_cdf(n: u64, p: f64, k: i64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    if k < 0 {
        return 0.0;
    }
    let k = k as u64;
    if k >= n || p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    binomial_tails(n, p, k).0
}

/// `Beta.cdf_{k, n+1-k}(p)`, computed as `1 - Bin.cdf_{n,p}(k - 1)`.
pub fn beta_cdf_via_duality(k: usize, n: usize, p: f64) -> Result<f64> {
    if k == 0 || k > n {
        return Err(NpError::Domain(format!("k={k} outside 1..={n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(NpError::Domain(format!("p={p} outside [0,1]")));
    }
    if p <= 0.0 {
        return Ok(0.0);
    }
    if p >= 1.0 {
        return Ok(1.0);
    }
    Ok(binomial_tails(n as u64, p, (k - 1) as u64).1)
}

/// How combinations with an empty candidate set enter the `k_chern < k_min` comparison count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmptySetConvention {
    /// Count over all combinations; `k_min` is always the ceiling formula (possibly `m3 + 1`)
    /// and an empty `K_chern` never counts as `k_chern < k_min`.
    AllCombinations,
    /// Only combinations where both `K` and `K_chern` are non-empty can count.
    NonEmptyBoth,
}

/// Grid of `α` values used by the Chernoff comparison table: `0.01, …, 0.10`.
pub fn comparison_alphas() -> impl Iterator<Item = f64> {
    (1..=10).map(|i| i as f64 / 100.0)
}

/// Grid of `m3` values used by the Chernoff comparison table: `100, …, 1000`.
pub fn comparison_m3s() -> impl Iterator<Item = usize> {
    (1..=10).map(|i| 100 * i)
}

/// Number of `(α, m3)` grid combinations where `k_chern < k_min` at the given `δ3`.
pub fn chernoff_wins(delta3: f64, convention: EmptySetConvention) -> Result<usize> {
    let mut count = 0;
    for alpha in comparison_alphas() {
        for m3 in comparison_m3s() {
            let params = ThresholdParams::new(alpha, delta3, m3)?;
            let k_min = params.k_min();
            if convention == EmptySetConvention::NonEmptyBoth && k_min > m3 {
                continue;
            }
            if matches!(params.k_chern(), Some(kc) if kc < k_min) {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Inputs of the uniform deviation bound `T = B e^B ‖r‖∞` for the screened kernel ratio estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationInputs {
    /// Number of signal features.
    pub s: usize,
    pub n2: usize,
    pub m2: usize,
    pub h1: f64,
    pub h0: f64,
    pub delta2: f64,
    pub c1: f64,
    pub c0: f64,
    /// Lower bound on the marginal densities over the signal set.
    pub mu_floor: f64,
    /// Sup norm of the true density ratio.
    pub r_sup: f64,
}

impl DeviationInputs {
    fn rate(&self, size: usize, h: f64, c: f64) -> f64 {
        let size = size as f64;
        c * libm::sqrt(libm::log(2.0 * size * self.s as f64 / self.delta2) / (size * h))
    }

    pub fn bound(&self) -> Result<f64> {
        if self.s == 0 || self.n2 == 0 || self.m2 == 0 {
            return Err(NpError::Domain("s, n2, m2 must be positive".into()));
        }
        open_unit("delta2", self.delta2)?;
        for (name, v) in [
            ("h1", self.h1),
            ("h0", self.h0),
            ("C1", self.c1),
            ("C0", self.c0),
            ("mu", self.mu_floor),
            ("r_sup", self.r_sup),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(NpError::Domain(format!("{name}={v} must be positive")));
            }
        }
        let e1 = self.rate(self.n2, self.h1, self.c1);
        let e0 = self.rate(self.m2, self.h0, self.c0);
        if e1 >= self.mu_floor || e0 >= self.mu_floor {
            return Err(NpError::VacuousBound(format!(
                "estimation error terms ({e1}, {e0}) reach the density floor {}",
                self.mu_floor
            )));
        }
        let b = self.s as f64 * (e1 / (self.mu_floor - e1) + e0 / (self.mu_floor - e0));
        Ok(b * libm::exp(b) * self.r_sup)
    }
}

/// Convenience wrapper over [`DeviationInputs::bound`].
pub fn deviation_bound(inputs: &DeviationInputs) -> Result<f64> {
    inputs.bound()
}
