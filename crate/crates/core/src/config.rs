use alloc::format;

use crate::error::{NpError, Result};

/// Marginal screening statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Screening {
    None,
    /// Two-sample Kolmogorov–Smirnov distance between the class ecdfs.
    DStat,
    /// Absolute two-sample t-statistic.
    TStat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    /// Gaussian naive Bayes with a shared diagonal covariance.
    Parametric,
    /// Per-feature kernel density estimates.
    Nonparametric,
}

/// The four NP naive-Bayes classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Nonparametric, screening-based.
    Nsn2,
    /// Parametric, screening-based.
    Psn2,
    /// Nonparametric, no screening.
    Nn2,
    /// Parametric, no screening.
    Pn2,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Nsn2, Variant::Psn2, Variant::Nn2, Variant::Pn2];

    /// Default screening statistic and estimator for the variant.
    pub fn parts(self) -> (Screening, Estimator) {
        match self {
            Variant::Nsn2 => (Screening::DStat, Estimator::Nonparametric),
            Variant::Psn2 => (Screening::TStat, Estimator::Parametric),
            Variant::Nn2 => (Screening::None, Estimator::Nonparametric),
            Variant::Pn2 => (Screening::None, Estimator::Parametric),
        }
    }

    /// Family of a (screening, estimator) pair; any screening statistic counts as screening-based.
    pub fn of(screening: Screening, estimator: Estimator) -> Variant {
        match (screening, estimator) {
            (Screening::None, Estimator::Nonparametric) => Variant::Nn2,
            (Screening::None, Estimator::Parametric) => Variant::Pn2,
            (_, Estimator::Nonparametric) => Variant::Nsn2,
            (_, Estimator::Parametric) => Variant::Psn2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Nsn2 => "nsn2",
            Variant::Psn2 => "psn2",
            Variant::Nn2 => "nn2",
            Variant::Pn2 => "pn2",
        }
    }

    pub fn from_name(name: &str) -> Option<Variant> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(name))
    }

    pub fn is_parametric(self) -> bool {
        self.parts().1 == Estimator::Parametric
    }
}

impl core::fmt::Display for Variant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Variance used in the denominator of the t-statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TStatForm {
    Welch,
    Pooled,
}

/// Which order statistic of the `d` null statistics serves as the `Q`-quantile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuantileRank {
    /// Rank `max(1, ⌊Q d⌋)`.
    Floor,
    /// Rank `max(1, ⌈Q d⌉)`.
    Ceil,
}

impl QuantileRank {
    /// 1-based rank among `d` sorted values.
    pub fn rank(self, q: f64, d: usize) -> usize {
        let x = q * d as f64;
        // guard against 0.95 * 100 = 95.00000000000001 style rounding
        let r = match self {
            QuantileRank::Floor => libm::floor(x + 1e-9),
            QuantileRank::Ceil => libm::ceil(x - 1e-9),
        };
        (r as usize).clamp(1, d.max(1))
    }
}

/// Whether a feature must strictly exceed the permutation cutoff or may tie it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Exceedance {
    Strict,
    Inclusive,
}

/// How the screening cutoff is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutoffRule {
    /// Quantile of statistics recomputed under permuted labels.
    Permutation,
    /// Midpoint `D/2` of the exact-recovery interval for a known signal gap `D`.
    Theoretical { signal_gap: f64 },
    /// A user-supplied cutoff.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kernel {
    Gaussian,
    Epanechnikov,
}

impl Kernel {
    pub fn name(self) -> &'static str {
        match self {
            Kernel::Gaussian => "gaussian",
            Kernel::Epanechnikov => "epanechnikov",
        }
    }

    pub fn from_name(name: &str) -> Option<Kernel> {
        [Kernel::Gaussian, Kernel::Epanechnikov]
            .into_iter()
            .find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BandwidthRule {
    /// `(ln n / n)^{1/5}` scaled by the sample standard deviation.
    LogRate,
    /// `1.06 sd n^{-1/5}`.
    Silverman,
}

impl BandwidthRule {
    pub fn name(self) -> &'static str {
        match self {
            BandwidthRule::LogRate => "log_rate",
            BandwidthRule::Silverman => "silverman",
        }
    }

    pub fn from_name(name: &str) -> Option<BandwidthRule> {
        [BandwidthRule::LogRate, BandwidthRule::Silverman]
            .into_iter()
            .find(|k| k.name() == name)
    }
}

/// Training configuration for the NP plug-in procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct NPConfig {
    pub alpha: f64,
    pub delta1: f64,
    pub delta3: f64,
    /// Permutation screening quantile `Q`.
    pub q_quantile: f64,
    pub screening: Screening,
    pub estimator: Estimator,
    pub seed: u64,
    /// Number of label permutations averaged into the null cutoff.
    pub permutations: usize,
    pub t_form: TStatForm,
    pub quantile_rank: QuantileRank,
    pub exceedance: Exceedance,
    pub cutoff: CutoffRule,
    pub kernel: Kernel,
    pub bandwidth: BandwidthRule,
    /// Density floor coefficient; each feature's floor is this value divided by its mean bandwidth.
    pub density_floor: f64,
}

impl Default for NPConfig {
    fn default() -> Self {
        Self::for_variant(Variant::Nsn2)
    }
}

impl NPConfig {
    pub fn for_variant(variant: Variant) -> Self {
        let (screening, estimator) = variant.parts();
        Self {
            alpha: 0.05,
            delta1: 0.05,
            delta3: 0.05,
            q_quantile: 0.95,
            screening,
            estimator,
            seed: 0,
            permutations: 1,
            t_form: TStatForm::Welch,
            quantile_rank: QuantileRank::Floor,
            exceedance: Exceedance::Strict,
            cutoff: CutoffRule::Permutation,
            kernel: Kernel::Gaussian,
            bandwidth: BandwidthRule::LogRate,
            density_floor: 1e-12,
        }
    }

    pub fn variant(&self) -> Variant {
        Variant::of(self.screening, self.estimator)
    }

    pub fn screening_enabled(&self) -> bool {
        self.screening != Screening::None
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("delta1", self.delta1),
            ("delta3", self.delta3),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(NpError::InvalidConfig(format!(
                    "{name}={v} must lie in (0,1)"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.q_quantile) {
            return Err(NpError::InvalidConfig(format!(
                "q={} must lie in [0,1]",
                self.q_quantile
            )));
        }
        if self.permutations == 0 {
            return Err(NpError::InvalidConfig(
                "permutations must be at least 1".into(),
            ));
        }
        if !(self.density_floor >= 0.0 && self.density_floor.is_finite()) {
            return Err(NpError::InvalidConfig(format!(
                "density_floor={} must be >= 0",
                self.density_floor
            )));
        }
        match self.cutoff {
            CutoffRule::Theoretical { signal_gap } if !(signal_gap > 0.0 && signal_gap <= 1.0) => {
                Err(NpError::InvalidConfig(format!(
                    "signal gap D={signal_gap} must lie in (0,1]"
                )))
            }
            CutoffRule::Fixed(tau) if !tau.is_finite() => Err(NpError::InvalidConfig(format!(
                "fixed cutoff {tau} must be finite"
            ))),
            _ => Ok(()),
        }
    }
}
