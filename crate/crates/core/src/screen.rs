//! Marginal feature screening by two-sample statistics.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::config::{CutoffRule, Exceedance, NPConfig, QuantileRank, Screening, TStatForm};
use crate::data::Matrix;
use crate::error::{NpError, Result};
use crate::rng::{derive_seed, seeded_rng};

/// Stand-in for an infinite |t| when both classes have zero variance but different means.
pub const T_SENTINEL: f64 = 1e300;

/// Screening statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistic {
    D,
    T(TStatForm),
}

impl Statistic {
    pub fn compute(self, class0: &Matrix, class1: &Matrix) -> Result<Vec<f64>> {
        match self {
            Statistic::D => d_statistics(class0, class1),
            Statistic::T(form) => t_statistics(class0, class1, form),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CutoffKind {
    TheoreticalTau,
    PermutationQ,
    Fixed,
}

/// Outcome of screening: the statistic of every feature and the surviving set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningResult {
    pub selected: Vec<usize>,
    pub stat_values: Vec<f64>,
    pub cutoff: f64,
    pub method: Statistic,
    pub cutoff_kind: CutoffKind,
    /// `true` when a feature must satisfy `stat > cutoff`, `false` for `stat >= cutoff`.
    pub strict: bool,
}

fn check_shapes(class0: &Matrix, class1: &Matrix) -> Result<()> {
    if class0.n_cols() != class1.n_cols() {
        return Err(NpError::DimensionMismatch {
            expected: class0.n_cols(),
            got: class1.n_cols(),
        });
    }
    if class0.is_empty() || class1.is_empty() {
        return Err(NpError::InsufficientClassSample {
            class: if class0.is_empty() { 0 } else { 1 },
            detail: "screening needs rows in both classes".into(),
        });
    }
    Ok(())
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// `sup_x |F0(x) - F1(x)|` for two sorted samples, by a merged sweep over distinct values.
///
/// The gap is tracked as the integer `|i·nb - j·na|` and divided once, so equal distances are
/// bit-identical and ties at a cutoff are resolved exactly.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as i128, b.len() as i128);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best: i128 = 0;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as i128 * nb - j as i128 * na).abs());
    }
    // once one sample is exhausted the gap only shrinks towards 0
    best = best.max((i as i128 * nb - j as i128 * na).abs());
    best as f64 / (na * nb) as f64
}

/// Kolmogorov–Smirnov distance between the class ecdfs of every feature.
pub fn d_statistics(class0: &Matrix, class1: &Matrix) -> Result<Vec<f64>> {
    check_shapes(class0, class1)?;
    Ok((0..class0.n_cols())
        .map(|j| ks_distance(&sorted(class0.column(j)), &sorted(class1.column(j))))
        .collect())
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// |t| of the class-1 minus class-0 mean difference for every feature.
pub fn t_statistics(class0: &Matrix, class1: &Matrix, form: TStatForm) -> Result<Vec<f64>> {
    check_shapes(class0, class1)?;
    if class0.n_rows() < 2 || class1.n_rows() < 2 {
        return Err(NpError::InsufficientClassSample {
            class: if class0.n_rows() < 2 { 0 } else { 1 },
            detail: "t-statistic needs at least 2 rows per class".into(),
        });
    }
    let (m, n) = (class0.n_rows() as f64, class1.n_rows() as f64);
    Ok((0..class0.n_cols())
        .map(|j| {
            let (mu0, v0) = mean_var(&class0.column(j));
            let (mu1, v1) = mean_var(&class1.column(j));
            let se2 = match form {
                TStatForm::Welch => v1 / n + v0 / m,
                TStatForm::Pooled => {
                    ((n - 1.0) * v1 + (m - 1.0) * v0) / (n + m - 2.0) * (1.0 / n + 1.0 / m)
                }
            };
            let diff = mu1 - mu0;
            if se2 > 0.0 {
                (diff / libm::sqrt(se2)).abs()
            } else if diff == 0.0 {
                0.0
            } else {
                T_SENTINEL
            }
        })
        .collect())
}

/// Exact-recovery interval `[Δ0, D - Δ0]` with `Δ0 = √(ln(4d/δ1)/(2n1)) + √(ln(4d/δ1)/(2m1))`.
pub fn theoretical_tau(
    d: usize,
    n1: usize,
    m1: usize,
    delta1: f64,
    big_d: f64,
) -> Result<(f64, f64)> {
    if d == 0 || !(delta1 > 0.0 && delta1 < 1.0) || !(big_d > 0.0 && big_d <= 1.0) {
        return Err(NpError::Domain(
            "need d >= 1, delta1 in (0,1), D in (0,1]".into(),
        ));
    }
    let log_term = libm::log(4.0 * d as f64 / delta1);
    let need = 8.0 * log_term / (big_d * big_d);
    let have = n1.min(m1) as f64;
    if have < need * (1.0 - 1e-12) {
        return Err(NpError::InsufficientScreeningSample {
            n1,
            m1,
            required: libm::ceil(need * (1.0 - 1e-12)) as usize,
        });
    }
    let delta0 =
        libm::sqrt(log_term / (2.0 * n1 as f64)) + libm::sqrt(log_term / (2.0 * m1 as f64));
    Ok((delta0, big_d - delta0))
}

/// Order statistic of rank `rank.rank(q, d)` among `values`.
pub fn empirical_quantile(values: &[f64], q: f64, rank: QuantileRank) -> f64 {
    let v = sorted(values.to_vec());
    v[rank.rank(q, v.len()) - 1]
}

/// Null cutoff `ω(Q)`: the `Q`-quantile of the statistics recomputed after randomly permuting the
/// pooled class labels, averaged over `permutations` independent permutations.
#[allow(clippy::too_many_arguments)]
pub fn permutation_cutoff(
    class0: &Matrix,
    class1: &Matrix,
    stat: Statistic,
    q: f64,
    rank: QuantileRank,
    permutations: usize,
    seed: u64,
) -> Result<f64> {
    check_shapes(class0, class1)?;
    if class0.n_rows() + class1.n_rows() < 4 {
        return Err(NpError::InsufficientClassSample {
            class: 0,
            detail: "permutation cutoff needs at least 4 pooled rows".into(),
        });
    }
    let pooled = class0.vstack(class1)?;
    let m = class0.n_rows();
    let mut idx: Vec<usize> = (0..pooled.n_rows()).collect();
    let mut total = 0.0;
    for b in 0..permutations.max(1) {
        let mut rng = seeded_rng(derive_seed(seed, b as u64));
        idx.shuffle(&mut rng);
        let null0 = pooled.select_rows(&idx[..m]);
        let null1 = pooled.select_rows(&idx[m..]);
        let stats = stat.compute(&null0, &null1)?;
        total += empirical_quantile(&stats, q, rank);
    }
    Ok(total / permutations.max(1) as f64)
}

/// Screening statistic implied by the configuration, if screening is on.
pub fn statistic_for(cfg: &NPConfig) -> Option<Statistic> {
    match cfg.screening {
        Screening::None => None,
        Screening::DStat => Some(Statistic::D),
        Screening::TStat => Some(Statistic::T(cfg.t_form)),
    }
}

/// Computes the statistics and the cutoff and keeps the features that clear it.
pub fn screen(
    class0: &Matrix,
    class1: &Matrix,
    cfg: &NPConfig,
    seed: u64,
) -> Result<ScreeningResult> {
    let method = statistic_for(cfg)
        .ok_or_else(|| NpError::InvalidConfig("screen called with screening disabled".into()))?;
    let stat_values = method.compute(class0, class1)?;
    let (cutoff, cutoff_kind, strict) = match cfg.cutoff {
        CutoffRule::Permutation => {
            let c = permutation_cutoff(
                class0,
                class1,
                method,
                cfg.q_quantile,
                cfg.quantile_rank,
                cfg.permutations,
                seed,
            )?;
            (
                c,
                CutoffKind::PermutationQ,
                cfg.exceedance == Exceedance::Strict,
            )
        }
        CutoffRule::Theoretical { signal_gap } => {
            let (lo, hi) = theoretical_tau(
                class0.n_cols(),
                class1.n_rows(),
                class0.n_rows(),
                cfg.delta1,
                signal_gap,
            )?;
            (0.5 * (lo + hi), CutoffKind::TheoreticalTau, false)
        }
        CutoffRule::Fixed(tau) => (tau, CutoffKind::Fixed, false),
    };
    let selected: Vec<usize> = stat_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| if strict { s > cutoff } else { s >= cutoff })
        .map(|(j, _)| j)
        .collect();
    if selected.is_empty() {
        return Err(NpError::NoFeaturesSurvive { cutoff });
    }
    Ok(ScreeningResult {
        selected,
        stat_values,
        cutoff,
        method,
        cutoff_kind,
        strict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Variant;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::Rng;

    fn col(v: &[f64]) -> Matrix {
        Matrix::new(v.len(), 1, v.to_vec()).unwrap()
    }

    fn brute_ks(a: &[f64], b: &[f64]) -> f64 {
        let ecdf =
            |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
        a.iter()
            .chain(b)
            .map(|&x| (ecdf(a, x) - ecdf(b, x)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn d_statistic_examples() {
        let x = col(&[0.3, -1.0, 2.0]);
        assert_eq!(d_statistics(&x, &x).unwrap(), vec![0.0]);
        assert_eq!(
            d_statistics(&col(&[1.0, 2.0]), &col(&[3.0, 4.0, 5.0])).unwrap(),
            vec![1.0]
        );
        let d = d_statistics(&col(&[1.0, 2.0, 3.0]), &col(&[2.0, 3.0, 4.0])).unwrap()[0];
        assert!((d - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn t_statistic_examples() {
        let t = t_statistics(
            &col(&[0.0, 0.0, 1.0, 1.0]),
            &col(&[1.0, 1.0, 2.0, 2.0]),
            TStatForm::Welch,
        )
        .unwrap();
        assert!((t[0] - 2.449_489_742_783_178).abs() < 1e-14);
        // equal sizes: pooled and Welch coincide
        let p = t_statistics(
            &col(&[0.0, 0.0, 1.0, 1.0]),
            &col(&[1.0, 1.0, 2.0, 2.0]),
            TStatForm::Pooled,
        )
        .unwrap();
        assert!((p[0] - t[0]).abs() < 1e-14);

        let flat = t_statistics(&col(&[1.0, 1.0]), &col(&[3.0, 3.0]), TStatForm::Welch).unwrap();
        assert_eq!(flat, vec![T_SENTINEL]);
        let same = t_statistics(&col(&[1.0, 1.0]), &col(&[1.0, 1.0]), TStatForm::Welch).unwrap();
        assert_eq!(same, vec![0.0]);
        assert!(t_statistics(&col(&[1.0]), &col(&[1.0, 2.0]), TStatForm::Welch).is_err());
    }

    #[test]
    fn t_statistic_null_is_small() {
        let mut rng = seeded_rng(3);
        let a: Vec<f64> = (0..20000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..20000).map(|_| rng.random::<f64>()).collect();
        let t = t_statistics(&col(&a), &col(&b), TStatForm::Welch).unwrap()[0];
        assert!(t < 3.0, "t={t}");
    }

    #[test]
    fn tau_interval() {
        let (lo, hi) = theoretical_tau(1000, 1_000_000, 1_000_000, 0.05, 0.5).unwrap();
        assert!((lo - 0.004_751_795_852_865_739_2).abs() < 1e-15);
        assert!((hi - (0.5 - lo)).abs() < 1e-15);

        // at the boundary the interval collapses to D/2
        let n = 1000;
        let gap = libm::sqrt(8.0 * libm::log(4.0 * 50.0 / 0.05) / n as f64);
        let (lo, hi) = theoretical_tau(50, n, n, 0.05, gap).unwrap();
        assert!((lo - gap / 2.0).abs() < 1e-12 && (hi - gap / 2.0).abs() < 1e-12);

        match theoretical_tau(1000, 100, 400, 0.05, 0.5) {
            Err(NpError::InsufficientScreeningSample { required, .. }) => {
                assert_eq!(required, libm::ceil(32.0 * libm::log(80000.0)) as usize)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn permutation_quantile_endpoints() {
        let mut rng = seeded_rng(5);
        let x0 = Matrix::new(30, 20, (0..600).map(|_| rng.random::<f64>()).collect()).unwrap();
        let x1 = Matrix::new(25, 20, (0..500).map(|_| rng.random::<f64>()).collect()).unwrap();
        let pooled = x0.vstack(&x1).unwrap();
        let mut idx: Vec<usize> = (0..55).collect();
        idx.shuffle(&mut seeded_rng(derive_seed(9, 0)));
        let null = d_statistics(
            &pooled.select_rows(&idx[..30]),
            &pooled.select_rows(&idx[30..]),
        )
        .unwrap();
        let hi = permutation_cutoff(&x0, &x1, Statistic::D, 1.0, QuantileRank::Ceil, 1, 9).unwrap();
        let lo = permutation_cutoff(&x0, &x1, Statistic::D, 0.0, QuantileRank::Ceil, 1, 9).unwrap();
        assert_eq!(hi, null.iter().copied().fold(f64::MIN, f64::max));
        assert_eq!(lo, null.iter().copied().fold(f64::MAX, f64::min));
        let again =
            permutation_cutoff(&x0, &x1, Statistic::D, 1.0, QuantileRank::Ceil, 1, 9).unwrap();
        assert_eq!(hi.to_bits(), again.to_bits());
    }

    #[test]
    fn screen_fixed_and_empty() {
        let x0 = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.1], [2.0, 0.2]]).unwrap();
        let x1 = Matrix::from_rows(&[[5.0, 0.05], [6.0, 0.15], [7.0, 0.25]]).unwrap();
        let mut cfg = NPConfig::for_variant(Variant::Nsn2);
        cfg.cutoff = CutoffRule::Fixed(1.0);
        let r = screen(&x0, &x1, &cfg, 0).unwrap();
        assert_eq!(r.selected, vec![0]);
        assert!(!r.strict);
        cfg.cutoff = CutoffRule::Fixed(1.5);
        assert!(matches!(
            screen(&x0, &x1, &cfg, 0),
            Err(NpError::NoFeaturesSurvive { .. })
        ));
    }

    proptest! {
        #[test]
        fn ks_matches_brute_force(
            a in proptest::collection::vec(-3i32..3, 1..25),
            b in proptest::collection::vec(-3i32..3, 1..25),
        ) {
            // small integer support forces plenty of ties
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let d = d_statistics(&col(&a), &col(&b)).unwrap()[0];
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert!((d - brute_ks(&a, &b)).abs() < 1e-12);
        }

        #[test]
        fn equal_distances_are_bit_identical(n in 2usize..60, k in 0usize..60) {
            let k = k.min(n);
            // a shifted block of k points gives D = k/n however the block is placed
            let a: Vec<f64> = (0..n).map(|v| v as f64).collect();
            let b: Vec<f64> = (0..n).map(|v| if v < k { v as f64 + 1000.0 } else { v as f64 }).collect();
            let d = d_statistics(&col(&a), &col(&b)).unwrap()[0];
            prop_assert_eq!(d.to_bits(), (k as f64 / n as f64).to_bits());
        }

        #[test]
        fn ks_invariant_under_exp(
            a in proptest::collection::vec(-5.0f64..5.0, 1..40),
            b in proptest::collection::vec(-5.0f64..5.0, 1..40),
        ) {
            let d = d_statistics(&col(&a), &col(&b)).unwrap()[0];
            let ea: Vec<f64> = a.iter().map(|v| libm::exp(*v)).collect();
            let eb: Vec<f64> = b.iter().map(|v| libm::exp(*v)).collect();
            prop_assert_eq!(d, d_statistics(&col(&ea), &col(&eb)).unwrap()[0]);
        }

        #[test]
        fn selected_matches_rule(seed: u64, tau in 0.0f64..1.0) {
            let mut rng = seeded_rng(seed);
            let x0 = Matrix::new(12, 6, (0..72).map(|_| rng.random::<f64>()).collect()).unwrap();
            let x1 = Matrix::new(10, 6, (0..60).map(|_| rng.random::<f64>() + 0.3).collect()).unwrap();
            let cfg = NPConfig { cutoff: CutoffRule::Fixed(tau), ..NPConfig::for_variant(Variant::Nsn2) };
            match screen(&x0, &x1, &cfg, seed) {
                Ok(r) => {
                    let want: Vec<usize> = (0..6).filter(|&j| r.stat_values[j] >= tau).collect();
                    prop_assert_eq!(r.selected, want);
                }
                Err(NpError::NoFeaturesSurvive { .. }) => {
                    let d = d_statistics(&x0, &x1).unwrap();
                    prop_assert!(d.iter().all(|&v| v < tau));
                }
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}
