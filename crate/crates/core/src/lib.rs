//! Neyman-Pearson plug-in classification with a high-probability type I error guarantee.
//!
//! The pipeline splits each class into subsamples, optionally screens features by a marginal
//! two-sample statistic, fits a naive-Bayes log density ratio, and thresholds it at an order
//! statistic of held-out class-0 scores.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod classify;
pub mod config;
pub mod data;
pub mod density;
pub mod error;
pub mod math;
pub mod numerics;
pub mod rng;
pub mod screen;

pub use classify::{train, NPClassifier};
pub use config::{
    BandwidthRule, CutoffRule, Estimator, Exceedance, Kernel, NPConfig, QuantileRank, Screening,
    TStatForm, Variant,
};
pub use data::{LabeledDataset, Matrix, SplitPlan, SplitSizes};
pub use density::ScoreModel;
pub use error::{NpError, Result};
pub use numerics::ThresholdParams;
pub use screen::ScreeningResult;
