//! Naive-Bayes log density-ratio scorers over a selected feature set.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::config::{BandwidthRule, Kernel};
use crate::data::Matrix;
use crate::error::{NpError, Result};

/// Bandwidth for a sample of size `n` with standard deviation `sd`.
pub fn bandwidth(rule: BandwidthRule, n: usize, sd: f64) -> f64 {
    let n = n as f64;
    match rule {
        BandwidthRule::LogRate => libm::pow(libm::log(n) / n, 0.2) * sd,
        BandwidthRule::Silverman => 1.06 * sd * libm::pow(n, -0.2),
    }
}

fn mean_and_ss(x: &[f64]) -> (f64, f64) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    (mean, x.iter().map(|v| (v - mean) * (v - mean)).sum())
}

fn check_fit_inputs(class0: &Matrix, class1: &Matrix, selected: &[usize]) -> Result<()> {
    if class0.n_cols() != class1.n_cols() {
        return Err(NpError::DimensionMismatch {
            expected: class0.n_cols(),
            got: class1.n_cols(),
        });
    }
    for (class, x) in [(0u8, class0), (1, class1)] {
        if x.n_rows() < 2 {
            return Err(NpError::InsufficientClassSample {
                class,
                detail: alloc::format!("density fit needs at least 2 rows, got {}", x.n_rows()),
            });
        }
    }
    if let Some(&j) = selected.iter().find(|&&j| j >= class0.n_cols()) {
        return Err(NpError::DimensionMismatch {
            expected: class0.n_cols(),
            got: j + 1,
        });
    }
    if selected.is_empty() {
        return Err(NpError::NoFeaturesSurvive { cutoff: f64::NAN });
    }
    Ok(())
}

/// Gaussian naive Bayes with a pooled per-feature variance. Its log ratio is affine in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    selected: Vec<usize>,
    mu0: Vec<f64>,
    mu1: Vec<f64>,
    var: Vec<f64>,
    weights: Vec<f64>,
    intercept: f64,
}

impl GaussianNb {
    pub fn from_parts(
        selected: Vec<usize>,
        mu0: Vec<f64>,
        mu1: Vec<f64>,
        var: Vec<f64>,
    ) -> Result<Self> {
        let s = selected.len();
        for len in [mu0.len(), mu1.len(), var.len()] {
            if len != s {
                return Err(NpError::DimensionMismatch {
                    expected: s,
                    got: len,
                });
            }
        }
        if let Some(i) = var.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(NpError::ZeroVariance {
                feature: selected[i],
            });
        }
        let weights = (0..s).map(|i| (mu1[i] - mu0[i]) / var[i]).collect();
        let intercept = 0.5
            * (0..s)
                .map(|i| (mu0[i] * mu0[i] - mu1[i] * mu1[i]) / var[i])
                .sum::<f64>();
        Ok(Self {
            selected,
            mu0,
            mu1,
            var,
            weights,
            intercept,
        })
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn mu0(&self) -> &[f64] {
        &self.mu0
    }

    pub fn mu1(&self) -> &[f64] {
        &self.mu1
    }

    pub fn variances(&self) -> &[f64] {
        &self.var
    }

    /// Coefficients of the selected coordinates in the affine score.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    /// Weight vector embedded in `d` dimensions (zero outside the selected set).
    pub fn dense_weights(&self, d: usize) -> Vec<f64> {
        let mut w = alloc::vec![0.0; d];
        for (&j, &wj) in self.selected.iter().zip(&self.weights) {
            w[j] = wj;
        }
        w
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.selected
            .iter()
            .zip(&self.weights)
            .map(|(&j, &w)| w * x[j])
            .sum::<f64>()
            + self.intercept
    }
}

pub fn fit_parametric(class0: &Matrix, class1: &Matrix, selected: &[usize]) -> Result<GaussianNb> {
    check_fit_inputs(class0, class1, selected)?;
    let (m, n) = (class0.n_rows() as f64, class1.n_rows() as f64);
    let mut mu0 = Vec::with_capacity(selected.len());
    let mut mu1 = Vec::with_capacity(selected.len());
    let mut var = Vec::with_capacity(selected.len());
    for &j in selected {
        let (a, ss0) = mean_and_ss(&class0.column(j));
        let (b, ss1) = mean_and_ss(&class1.column(j));
        let v = (ss0 + ss1) / (m + n - 2.0);
        if !(v > 0.0) {
            return Err(NpError::ZeroVariance { feature: j });
        }
        mu0.push(a);
        mu1.push(b);
        var.push(v);
    }
    GaussianNb::from_parts(selected.to_vec(), mu0, mu1, var)
}

/// Terms of the truncated Taylor expansion used by the fast Gauss transform.
const FGT_TERMS: usize = 24;
/// Bins further than this many bandwidths from a query are ignored (`e^{-50}` relative).
const FGT_REACH: f64 = 10.5;

/// One-dimensional fast Gauss transform over bins of width `h`.
///
/// For a bin centred at `c`, `Σ_i exp(-(x-u_i)²/2h²) = exp(-t²/2) Σ_k A_k t^k` with
/// `t = (x-c)/h`, `s_i = (u_i-c)/h` and `A_k = Σ_i exp(-s_i²/2) s_i^k / k!`.
#[derive(Debug, Clone, PartialEq)]
struct GaussTransform {
    origin: f64,
    h: f64,
    bins: Vec<(i64, [f64; FGT_TERMS])>,
}

impl GaussTransform {
    fn new(sorted: &[f64], h: f64) -> Self {
        let origin = sorted[0];
        let mut bins: Vec<(i64, [f64; FGT_TERMS])> = Vec::new();
        for &u in sorted {
            let b = libm::floor((u - origin) / h) as i64;
            if bins.last().is_none_or(|(last, _)| *last != b) {
                bins.push((b, [0.0; FGT_TERMS]));
            }
            let coeffs = &mut bins.last_mut().unwrap().1;
            let s = (u - origin) / h - (b as f64 + 0.5);
            let mut term = libm::exp(-0.5 * s * s);
            for (k, c) in coeffs.iter_mut().enumerate() {
                *c += term;
                term *= s / (k + 1) as f64;
            }
        }
        Self { origin, h, bins }
    }

    /// `Σ_i exp(-(x-u_i)²/2h²)`.
    fn sum(&self, x: f64) -> f64 {
        let z = (x - self.origin) / self.h;
        if !z.is_finite()
            || z < -FGT_REACH - 1.0
            || z > self.bins.last().map_or(0, |b| b.0) as f64 + FGT_REACH + 1.0
        {
            return 0.0;
        }
        let first = libm::ceil(z - 0.5 - FGT_REACH) as i64;
        let start = self.bins.partition_point(|(b, _)| *b < first);
        let mut total = 0.0;
        for (b, coeffs) in &self.bins[start..] {
            let t = z - (*b as f64 + 0.5);
            if t < -FGT_REACH {
                break;
            }
            let poly = coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c);
            total += libm::exp(-0.5 * t * t) * poly;
        }
        total
    }
}

/// Univariate kernel density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde1d {
    samples: Vec<f64>,
    h: f64,
    kernel: Kernel,
    transform: Option<GaussTransform>,
}

impl Kde1d {
    pub fn new(mut samples: Vec<f64>, h: f64, kernel: Kernel) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(NpError::NonPositiveBandwidth {
                feature: 0,
                bandwidth: h,
            });
        }
        if samples.is_empty() || samples.iter().any(|v| !v.is_finite()) {
            return Err(NpError::Domain("KDE needs a nonempty finite sample".into()));
        }
        samples.sort_unstable_by(f64::total_cmp);
        let transform = match kernel {
            Kernel::Gaussian => Some(GaussTransform::new(&samples, h)),
            Kernel::Epanechnikov => None,
        };
        Ok(Self {
            samples,
            h,
            kernel,
            transform,
        })
    }

    /// Sorted sample.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn density(&self, x: f64) -> f64 {
        let nh = self.samples.len() as f64 * self.h;
        match &self.transform {
            Some(t) => t.sum(x) / (nh * libm::sqrt(2.0 * PI)),
            None => {
                let lo = self.samples.partition_point(|&u| u < x - self.h);
                let hi = self.samples.partition_point(|&u| u <= x + self.h);
                let s: f64 = self.samples[lo..hi]
                    .iter()
                    .map(|&u| {
                        let v = (u - x) / self.h;
                        (0.75 * (1.0 - v * v)).max(0.0)
                    })
                    .sum();
                s / nh
            }
        }
    }
}

/// Per-feature pair of class densities and the floor applied before taking logs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureKde {
    pub class0: Kde1d,
    pub class1: Kde1d,
    pub floor: f64,
}

impl FeatureKde {
    pub fn log_ratio(&self, x: f64) -> f64 {
        let p = self.class1.density(x).max(self.floor);
        let q = self.class0.density(x).max(self.floor);
        libm::log(p) - libm::log(q)
    }
}

/// Product-form kernel naive Bayes.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeNb {
    selected: Vec<usize>,
    features: Vec<FeatureKde>,
    kernel: Kernel,
    floor_coef: f64,
}

impl KdeNb {
    /// Rebuilds a model from stored `(class-0 sample, h0, class-1 sample, h1)` per selected feature.
    pub fn from_parts(
        selected: Vec<usize>,
        kernel: Kernel,
        floor_coef: f64,
        parts: Vec<(Vec<f64>, f64, Vec<f64>, f64)>,
    ) -> Result<Self> {
        if parts.len() != selected.len() {
            return Err(NpError::DimensionMismatch {
                expected: selected.len(),
                got: parts.len(),
            });
        }
        let mut features = Vec::with_capacity(parts.len());
        for (&j, (x0, h0, x1, h1)) in selected.iter().zip(parts) {
            let tag = |e: NpError| match e {
                NpError::NonPositiveBandwidth { bandwidth, .. } => NpError::NonPositiveBandwidth {
                    feature: j,
                    bandwidth,
                },
                other => other,
            };
            let class0 = Kde1d::new(x0, h0, kernel).map_err(tag)?;
            let class1 = Kde1d::new(x1, h1, kernel).map_err(tag)?;
            let floor = floor_coef * 2.0 / (h0 + h1);
            features.push(FeatureKde {
                class0,
                class1,
                floor,
            });
        }
        Ok(Self {
            selected,
            features,
            kernel,
            floor_coef,
        })
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn features(&self) -> &[FeatureKde] {
        &self.features
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn floor_coef(&self) -> f64 {
        self.floor_coef
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.selected
            .iter()
            .zip(&self.features)
            .map(|(&j, f)| f.log_ratio(x[j]))
            .sum()
    }
}

pub fn fit_kde(
    class0: &Matrix,
    class1: &Matrix,
    selected: &[usize],
    kernel: Kernel,
    rule: BandwidthRule,
    floor_coef: f64,
) -> Result<KdeNb> {
    check_fit_inputs(class0, class1, selected)?;
    let mut parts = Vec::with_capacity(selected.len());
    for &j in selected {
        let x0 = class0.column(j);
        let x1 = class1.column(j);
        let h = |x: &[f64]| {
            let (_, ss) = mean_and_ss(x);
            bandwidth(rule, x.len(), libm::sqrt(ss / (x.len() as f64 - 1.0)))
        };
        let (h0, h1) = (h(&x0), h(&x1));
        for bw in [h0, h1] {
            if !(bw > 0.0 && bw.is_finite()) {
                return Err(NpError::NonPositiveBandwidth {
                    feature: j,
                    bandwidth: bw,
                });
            }
        }
        parts.push((x0, h0, x1, h1));
    }
    KdeNb::from_parts(selected.to_vec(), kernel, floor_coef, parts)
}

/// A fitted log density-ratio scorer `log p̂(x)/q̂(x)` (class 1 over class 0).
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreModel {
    Gaussian(GaussianNb),
    Kde(KdeNb),
}

impl ScoreModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        match self {
            ScoreModel::Gaussian(m) => m.score(x),
            ScoreModel::Kde(m) => m.score(x),
        }
    }

    pub fn score_rows(&self, x: &Matrix) -> Vec<f64> {
        x.rows().map(|r| self.score(r)).collect()
    }

    pub fn selected(&self) -> &[usize] {
        match self {
            ScoreModel::Gaussian(m) => m.selected(),
            ScoreModel::Kde(m) => m.selected(),
        }
    }

    pub fn is_parametric(&self) -> bool {
        matches!(self, ScoreModel::Gaussian(_))
    }
}
