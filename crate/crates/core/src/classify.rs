//! The NP plug-in classifier: split, screen, fit, threshold at an order statistic.

use alloc::vec::Vec;

use crate::config::{Estimator, NPConfig, QuantileRank, Variant};
use crate::data::{make_split, LabeledDataset, Matrix, SplitPlan};
use crate::density::{fit_kde, fit_parametric, ScoreModel};
use crate::error::{NpError, Result};
use crate::math::{clamp_probability, normal_sf};
use crate::numerics::ThresholdParams;
use crate::rng::derive_seed;
use crate::screen::{screen, ScreeningResult};

/// `k`-th smallest (1-based) of an ascending slice.
pub fn order_statistic(sorted: &[f64], k: usize) -> f64 {
    sorted[k - 1]
}

/// Baseline threshold without a high-probability guarantee: the `⌈m3(1-α)⌉`-th order statistic.
pub fn classical_quantile_threshold(scores: &[f64], alpha: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(NpError::Domain(
            "classical threshold needs at least one score".into(),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(NpError::Domain(alloc::format!(
            "alpha={alpha} must lie in (0,1)"
        )));
    }
    let mut s = scores.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    Ok(order_statistic(
        &s,
        QuantileRank::Ceil.rank(1.0 - alpha, s.len()),
    ))
}

/// Smallest `m3` for which `k_min <= m3`, i.e. the order-statistic threshold is defined.
pub fn minimal_feasible_m3(alpha: f64, delta3: f64) -> Result<usize> {
    let bound = ThresholdParams::new(alpha, delta3, 1)?.sufficient_m3();
    for m3 in 1..=bound {
        if ThresholdParams::new(alpha, delta3, m3)?.is_feasible() {
            return Ok(m3);
        }
    }
    Ok(bound)
}

/// `P{w·X + b >= c}` for `X ~ N(mean, I)`.
pub fn gaussian_exceedance(weights: &[f64], intercept: f64, threshold: f64, mean: &[f64]) -> f64 {
    let norm = libm::sqrt(weights.iter().map(|w| w * w).sum::<f64>());
    let center = intercept + weights.iter().zip(mean).map(|(w, m)| w * m).sum::<f64>();
    if norm == 0.0 {
        return if center >= threshold { 1.0 } else { 0.0 };
    }
    clamp_probability(normal_sf((threshold - center) / norm))
}

/// Trained Neyman-Pearson classifier `1{score(x) >= c_hat}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NPClassifier {
    model: ScoreModel,
    c_hat: f64,
    k_used: usize,
    alpha: f64,
    delta3: f64,
    variant: Variant,
    feasible: bool,
    dim: usize,
    s03_scores: Vec<f64>,
    screening: Option<ScreeningResult>,
}

/// Everything `train` produced, including the split and the class-0 hold-out scores.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub classifier: NPClassifier,
    pub split: SplitPlan,
}

pub fn train(data: &LabeledDataset, cfg: &NPConfig) -> Result<NPClassifier> {
    train_detailed(data, cfg).map(|t| t.classifier)
}

pub fn train_detailed(data: &LabeledDataset, cfg: &NPConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let split = make_split(data, cfg)?;
    let d = data.dim();

    let screening = if cfg.screening_enabled() {
        let x0 = data.rows_of(&split.s0_1);
        let x1 = data.rows_of(&split.s1_1);
        Some(screen(&x0, &x1, cfg, derive_seed(cfg.seed, 1))?)
    } else {
        None
    };
    let selected: Vec<usize> = match &screening {
        Some(s) => s.selected.clone(),
        None => (0..d).collect(),
    };

    let x0 = data.rows_of(&split.s0_2);
    let x1 = data.rows_of(&split.s1_2);
    let model = match cfg.estimator {
        Estimator::Parametric => ScoreModel::Gaussian(fit_parametric(&x0, &x1, &selected)?),
        Estimator::Nonparametric => ScoreModel::Kde(fit_kde(
            &x0,
            &x1,
            &selected,
            cfg.kernel,
            cfg.bandwidth,
            cfg.density_floor,
        )?),
    };

    let s03 = model.score_rows(&data.rows_of(&split.s0_3));
    let classifier = NPClassifier::from_scores(
        model,
        s03,
        cfg.alpha,
        cfg.delta3,
        cfg.variant(),
        d,
        screening,
    )?;
    Ok(TrainOutput { classifier, split })
}

impl NPClassifier {
    /// Thresholds `model` at `k = min(k_min, m3)` among the class-0 hold-out scores.
    pub fn from_scores(
        model: ScoreModel,
        mut s03_scores: Vec<f64>,
        alpha: f64,
        delta3: f64,
        variant: Variant,
        dim: usize,
        screening: Option<ScreeningResult>,
    ) -> Result<Self> {
        if s03_scores.is_empty() {
            return Err(NpError::InsufficientClassSample {
                class: 0,
                detail: "m3 = 0".into(),
            });
        }
        s03_scores.sort_unstable_by(f64::total_cmp);
        let params = ThresholdParams::new(alpha, delta3, s03_scores.len())?;
        let k_used = params.k_used();
        Ok(Self {
            model,
            c_hat: order_statistic(&s03_scores, k_used),
            k_used,
            alpha,
            delta3,
            variant,
            feasible: params.is_feasible(),
            dim,
            s03_scores,
            screening,
        })
    }

    /// Reassembles a stored classifier; `c_hat` and `k_used` must agree with the stored scores.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        model: ScoreModel,
        s03_scores: Vec<f64>,
        alpha: f64,
        delta3: f64,
        variant: Variant,
        dim: usize,
        k_used: usize,
        c_hat: f64,
    ) -> Result<Self> {
        let clf = Self::from_scores(model, s03_scores, alpha, delta3, variant, dim, None)?;
        if clf.k_used != k_used || clf.c_hat.to_bits() != c_hat.to_bits() {
            return Err(NpError::Domain(alloc::format!(
                "stored threshold (k={k_used}, c={c_hat}) disagrees with the stored scores (k={}, c={})",
                clf.k_used,
                clf.c_hat
            )));
        }
        Ok(clf)
    }

    pub fn model(&self) -> &ScoreModel {
        &self.model
    }

    pub fn c_hat(&self) -> f64 {
        self.c_hat
    }

    pub fn k_used(&self) -> usize {
        self.k_used
    }

    pub fn m3(&self) -> usize {
        self.s03_scores.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn delta3(&self) -> f64 {
        self.delta3
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// `k_min <= m3`; when false the type I guarantee is void and `k_used = m3`.
    pub fn feasible(&self) -> bool {
        self.feasible
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Ascending class-0 hold-out scores.
    pub fn s03_scores(&self) -> &[f64] {
        &self.s03_scores
    }

    pub fn screening(&self) -> Option<&ScreeningResult> {
        self.screening.as_ref()
    }

    pub fn selected(&self) -> &[usize] {
        self.model.selected()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.model.score(x)
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.score(x) >= self.c_hat)
    }

    pub fn predict_rows(&self, x: &Matrix) -> Vec<u8> {
        x.rows().map(|r| self.predict(r)).collect()
    }

    /// Same model thresholded at the `k`-th hold-out score.
    pub fn threshold_at_rank(&self, k: usize) -> Result<f64> {
        if k == 0 || k > self.m3() {
            return Err(NpError::Domain(alloc::format!(
                "rank {k} outside 1..={}",
                self.m3()
            )));
        }
        Ok(order_statistic(&self.s03_scores, k))
    }

    /// Re-thresholds the stored scores for a new `(α, δ3)` without refitting.
    pub fn rethreshold(&self, alpha: f64, delta3: f64) -> Result<Self> {
        Self::from_scores(
            self.model.clone(),
            self.s03_scores.clone(),
            alpha,
            delta3,
            self.variant,
            self.dim,
            self.screening.clone(),
        )
    }

    /// Replaces the threshold by the classical `⌈m3(1-α)⌉`-th order statistic.
    pub fn classical_threshold(&self) -> f64 {
        order_statistic(
            &self.s03_scores,
            QuantileRank::Ceil.rank(1.0 - self.alpha, self.m3()),
        )
    }

    /// Test-set `(R0, R1)`; an error rate is `None` when its class is absent from `test`.
    pub fn empirical_errors(&self, test: &LabeledDataset) -> Result<(Option<f64>, Option<f64>)> {
        self.empirical_errors_at(test, self.c_hat)
    }

    pub fn empirical_errors_at(
        &self,
        test: &LabeledDataset,
        threshold: f64,
    ) -> Result<(Option<f64>, Option<f64>)> {
        if test.dim() != self.dim {
            return Err(NpError::DimensionMismatch {
                expected: self.dim,
                got: test.dim(),
            });
        }
        let mut wrong = [0usize; 2];
        let mut total = [0usize; 2];
        for (row, &y) in test.features().rows().zip(test.labels()) {
            let pred = u8::from(self.score(row) >= threshold);
            total[y as usize] += 1;
            wrong[y as usize] += usize::from(pred != y);
        }
        let rate = |c: usize| (total[c] > 0).then(|| wrong[c] as f64 / total[c] as f64);
        Ok((rate(0), rate(1)))
    }

    /// Population type I error when class 0 is `N(0, I)` and the score is affine; `None` for KDE models.
    pub fn analytic_r0_standard_normal(&self) -> Option<f64> {
        self.analytic_exceedance(self.c_hat, &alloc::vec![0.0; self.dim])
    }

    /// `P{score(X) >= threshold}` for `X ~ N(mean, I)` under an affine score.
    pub fn analytic_exceedance(&self, threshold: f64, mean: &[f64]) -> Option<f64> {
        match &self.model {
            ScoreModel::Gaussian(m) => Some(gaussian_exceedance(
                &m.dense_weights(self.dim),
                m.intercept(),
                threshold,
                mean,
            )),
            ScoreModel::Kde(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{CutoffRule, Variant};
    use crate::density::GaussianNb;
    use crate::rng::seeded_rng;
    use alloc::vec;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn example1(m: usize, n: usize, d: usize, seed: u64) -> LabeledDataset {
        let mut rng = seeded_rng(seed);
        let mut draw = |rows: usize, shift: f64| {
            let data: Vec<f64> = (0..rows * d)
                .map(|i| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    if i % d < 10 {
                        z + shift
                    } else {
                        z
                    }
                })
                .collect();
            Matrix::new(rows, d, data).unwrap()
        };
        let x0 = draw(m, 0.0);
        let x1 = draw(n, 0.5);
        LabeledDataset::from_classes(&x0, &x1).unwrap()
    }

    /// One-feature model with `score(x) = x - 1/2`.
    fn unit_model() -> ScoreModel {
        ScoreModel::Gaussian(
            GaussianNb::from_parts(vec![0], vec![0.0], vec![1.0], vec![1.0]).unwrap(),
        )
    }

    #[test]
    fn classical_threshold_ranks() {
        let scores: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        assert_eq!(classical_quantile_threshold(&scores, 0.05).unwrap(), 95.0);
        let scores: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(classical_quantile_threshold(&scores, 0.05).unwrap(), 950.0);
        assert_eq!(classical_quantile_threshold(&scores, 1e-9).unwrap(), 1000.0);
        let k_min = ThresholdParams::new(0.05, 0.05, 1000).unwrap().k_min();
        assert!(950 < k_min);
    }

    #[test]
    fn infeasible_m3_still_builds() {
        let clf = NPClassifier::from_scores(
            unit_model(),
            vec![0.3, 0.1, 0.2],
            0.05,
            0.05,
            Variant::Pn2,
            1,
            None,
        )
        .unwrap();
        assert!(!clf.feasible());
        assert_eq!(clf.k_used(), 3);
        assert_eq!(clf.c_hat(), 0.3);
        let m = minimal_feasible_m3(0.05, 0.05).unwrap();
        assert!(ThresholdParams::new(0.05, 0.05, m).unwrap().is_feasible());
        assert!(!ThresholdParams::new(0.05, 0.05, m - 1)
            .unwrap()
            .is_feasible());
    }

    #[test]
    fn tie_predicts_one() {
        let clf = NPClassifier::from_scores(
            unit_model(),
            vec![-0.5, 0.5],
            0.4,
            0.4,
            Variant::Pn2,
            1,
            None,
        )
        .unwrap();
        // score(x) = x - 1/2
        let c = clf.c_hat();
        assert_eq!(clf.predict(&[c + 0.5]), 1);
        assert_eq!(clf.predict(&[c + 0.5 - 1e-9]), 0);
    }

    #[test]
    fn empirical_error_extremes() {
        let clf =
            NPClassifier::from_scores(unit_model(), vec![0.0], 0.5, 0.5, Variant::Pn2, 1, None)
                .unwrap();
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let test = LabeledDataset::new(x, vec![0, 1, 1], None).unwrap();
        assert_eq!(
            clf.empirical_errors_at(&test, f64::NEG_INFINITY).unwrap(),
            (Some(1.0), Some(0.0))
        );
        assert_eq!(
            clf.empirical_errors_at(&test, f64::INFINITY).unwrap(),
            (Some(0.0), Some(1.0))
        );
        let only1 =
            LabeledDataset::new(Matrix::from_rows(&[[3.0]]).unwrap(), vec![1], None).unwrap();
        assert_eq!(clf.empirical_errors(&only1).unwrap().0, None);
    }

    #[test]
    fn train_all_variants_deterministic() {
        let data = example1(400, 400, 30, 1);
        for v in Variant::ALL {
            let cfg = NPConfig {
                seed: 7,
                ..NPConfig::for_variant(v)
            };
            let a = train(&data, &cfg).unwrap();
            let b = train(&data, &cfg).unwrap();
            assert_eq!(a.c_hat().to_bits(), b.c_hat().to_bits(), "{v}");
            assert_eq!(a.m3(), 200);
            assert_eq!(
                a.k_used(),
                ThresholdParams::new(0.05, 0.05, 200).unwrap().k_used()
            );
            assert_eq!(a.variant(), v);
            assert_eq!(
                a.screening().is_some(),
                !matches!(v, Variant::Nn2 | Variant::Pn2)
            );
        }
    }

    #[test]
    fn hold_out_prediction_count() {
        let data = example1(1000, 300, 12, 2);
        let cfg = NPConfig {
            seed: 3,
            ..NPConfig::for_variant(Variant::Pn2)
        };
        let out = train_detailed(&data, &cfg).unwrap();
        let clf = &out.classifier;
        let ones: usize = clf
            .predict_rows(&data.rows_of(&out.split.s0_3))
            .iter()
            .map(|&p| p as usize)
            .sum();
        assert_eq!(ones, clf.m3() - clf.k_used() + 1);
        assert!(clf.feasible());
        assert_eq!(clf.k_used(), 491);
    }

    #[test]
    fn rethreshold_matches_retrain() {
        let data = example1(600, 300, 12, 4);
        let cfg = NPConfig {
            seed: 5,
            ..NPConfig::for_variant(Variant::Pn2)
        };
        let a = train(&data, &cfg).unwrap();
        let b = train(
            &data,
            &NPConfig {
                alpha: 0.1,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert_eq!(a.rethreshold(0.1, 0.05).unwrap(), b);
    }

    #[test]
    fn empty_screening_propagates() {
        let data = example1(100, 100, 12, 6);
        let mut cfg = NPConfig::for_variant(Variant::Psn2);
        cfg.cutoff = CutoffRule::Fixed(1e9);
        assert!(matches!(
            train(&data, &cfg),
            Err(NpError::NoFeaturesSurvive { .. })
        ));
    }

    #[test]
    fn analytic_r0_matches_monte_carlo() {
        let data = example1(400, 400, 10, 8);
        let clf = train(&data, &NPConfig::for_variant(Variant::Pn2)).unwrap();
        let r0 = clf.analytic_r0_standard_normal().unwrap();
        let test = example1(100_000, 1, 10, 9);
        let (mc, _) = clf.empirical_errors(&test).unwrap();
        let se = libm::sqrt(r0 * (1.0 - r0) / 100_000.0);
        assert!((mc.unwrap() - r0).abs() < 4.0 * se, "{mc:?} vs {r0}");
    }

    proptest! {
        #[test]
        fn threshold_monotone_in_k(scores in proptest::collection::vec(-10.0f64..10.0, 2..60), test in proptest::collection::vec(-12.0f64..12.0, 1..40)) {
            let clf = NPClassifier::from_scores(unit_model(), scores, 0.05, 0.05, Variant::Pn2, 1, None).unwrap();
            let mut prev = f64::NEG_INFINITY;
            let mut prev_pos = usize::MAX;
            for k in 1..=clf.m3() {
                let c = clf.threshold_at_rank(k).unwrap();
                prop_assert!(c >= prev);
                let pos = test.iter().filter(|&&s| s >= c).count();
                prop_assert!(pos <= prev_pos);
                prev = c;
                prev_pos = pos;
            }
        }

        #[test]
        fn predictions_invariant_under_monotone_transform(scores in proptest::collection::vec(-5.0f64..5.0, 1..80), test in proptest::collection::vec(-6.0f64..6.0, 1..40), a in 0.1f64..3.0) {
            let f = |s: f64| libm::exp(a * s) + s * s * s;
            let params = ThresholdParams::new(0.1, 0.1, scores.len()).unwrap();
            let mut s = scores.clone();
            s.sort_unstable_by(f64::total_cmp);
            let mut fs: Vec<f64> = scores.iter().map(|&v| f(v)).collect();
            fs.sort_unstable_by(f64::total_cmp);
            let k = params.k_used();
            let (c, fc) = (order_statistic(&s, k), order_statistic(&fs, k));
            for &t in &test {
                prop_assert_eq!(t >= c, f(t) >= fc);
            }
        }
    }
}
