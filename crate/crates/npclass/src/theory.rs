//! Checks of the threshold numerics against published values and independent oracles.

use npclass_core::numerics::{
    beta_cdf_via_duality, chernoff_wins, EmptySetConvention, ThresholdParams,
};
use npclass_core::NpError;

use crate::quadrature::beta_cdf_quadrature;

/// Published counts of `k_chern < k_min` over the 100-combination grid, for `δ3 = 0.01, …, 0.10`.
pub const PUBLISHED_CHERNOFF_TABLE: [usize; 10] = [83, 70, 49, 4, 0, 0, 0, 0, 0, 0];

pub fn chernoff_table(convention: EmptySetConvention) -> Result<Vec<(f64, usize)>, NpError> {
    (1..=10)
        .map(|i| {
            let delta3 = i as f64 / 100.0;
            chernoff_wins(delta3, convention).map(|c| (delta3, c))
        })
        .collect()
}

/// At least 9 of 10 cells exact and no cell off by more than 2.
pub fn table_agrees(counts: &[usize]) -> bool {
    counts.len() == PUBLISHED_CHERNOFF_TABLE.len()
        && counts
            .iter()
            .zip(PUBLISHED_CHERNOFF_TABLE)
            .filter(|(a, b)| **a != *b)
            .count()
            <= 1
        && counts
            .iter()
            .zip(PUBLISHED_CHERNOFF_TABLE)
            .all(|(a, b)| a.abs_diff(b) <= 2)
}

fn g(delta3: f64, m3: usize, k: usize) -> f64 {
    let (m, k) = (m3 as f64, k as f64);
    (m + 1.0 - k) / (m + 1.0)
        + (k * (m + 1.0 - k) / (delta3 * (m + 2.0) * (m + 1.0) * (m + 1.0))).sqrt()
}

/// Smallest `k ∈ 1..=m3+1` with `g(δ3, m3, k) ≤ α`, by linear scan.
pub fn brute_force_k_min(alpha: f64, delta3: f64, m3: usize) -> usize {
    (1..=m3 + 1)
        .find(|&k| g(delta3, m3, k) <= alpha)
        .unwrap_or(m3 + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMinMismatch {
    pub alpha: f64,
    pub delta3: f64,
    pub m3: usize,
    pub formula: usize,
    pub brute_force: usize,
}

/// Compares closed-form `k_min` with the scan over `(α, δ3) ∈ {0.01, 0.05, 0.1}²` and
/// `m3 = 50, 100, …` up to 2000 (500 when `small`). Returns the number of cells and the mismatches.
pub fn k_min_grid(small: bool) -> Result<(usize, Vec<KMinMismatch>), NpError> {
    let grid = [0.01, 0.05, 0.1];
    let top = if small { 500 } else { 2000 };
    let mut cells = 0;
    let mut bad = Vec::new();
    for alpha in grid {
        for delta3 in grid {
            for m3 in (50..=top).step_by(50) {
                cells += 1;
                let formula = ThresholdParams::new(alpha, delta3, m3)?.k_min();
                let brute_force = brute_force_k_min(alpha, delta3, m3);
                if formula != brute_force {
                    bad.push(KMinMismatch {
                        alpha,
                        delta3,
                        m3,
                        formula,
                        brute_force,
                    });
                }
            }
        }
    }
    Ok((cells, bad))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityCheck {
    pub cases: usize,
    pub max_error: f64,
    /// `(k, n, p)` where the largest discrepancy occurred.
    pub worst: (usize, usize, f64),
}

/// Largest `|Beta.cdf_{k, n+1-k}(p)|` discrepancy between the duality and quadrature over `n ≤ n_max`.
pub fn duality_check(n_max: usize) -> Result<DualityCheck, NpError> {
    const PS: [f64; 11] = [
        0.001, 0.01, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 0.99, 0.999,
    ];
    let mut ns: Vec<usize> = (1..=20.min(n_max)).collect();
    ns.extend((25..=n_max).step_by(5));
    let mut out = DualityCheck {
        cases: 0,
        max_error: 0.0,
        worst: (0, 0, 0.0),
    };
    for n in ns {
        let mut ks = vec![
            1,
            2,
            n.div_ceil(4),
            n.div_ceil(2),
            (3 * n).div_ceil(4),
            n.saturating_sub(1),
            n,
        ];
        ks.retain(|&k| (1..=n).contains(&k));
        ks.sort_unstable();
        ks.dedup();
        for k in ks {
            for p in PS {
                let dual = beta_cdf_via_duality(k, n, p)?;
                let quad = beta_cdf_quadrature(k as f64, (n + 1 - k) as f64, p);
                let err = (dual - quad).abs();
                out.cases += 1;
                if err > out.max_error {
                    out.max_error = err;
                    out.worst = (k, n, p);
                }
            }
        }
    }
    Ok(out)
}
