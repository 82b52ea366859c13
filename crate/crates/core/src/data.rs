//! Labeled datasets and the five-way sample split.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::config::NPConfig;
use crate::error::{NpError, Result};
use crate::rng::seeded_rng;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(NpError::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: alloc::vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(NpError::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(NpError::DimensionMismatch {
                expected: self.cols,
                got: other.cols,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }
}

/// Feature matrix with 0/1 class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Vec<u8>,
    feature_names: Option<Vec<String>>,
}

impl LabeledDataset {
    pub fn new(
        features: Matrix,
        labels: Vec<u8>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if labels.len() != features.n_rows() {
            return Err(NpError::DimensionMismatch {
                expected: features.n_rows(),
                got: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
            return Err(NpError::InvalidLabel(bad));
        }
        if let Some(names) = &feature_names {
            if names.len() != features.n_cols() {
                return Err(NpError::DimensionMismatch {
                    expected: features.n_cols(),
                    got: names.len(),
                });
            }
        }
        Ok(Self {
            features,
            labels,
            feature_names,
        })
    }

    /// Stacks a class-0 block and a class-1 block.
    pub fn from_classes(class0: &Matrix, class1: &Matrix) -> Result<Self> {
        let features = class0.vstack(class1)?;
        let mut labels = alloc::vec![0u8; class0.n_rows()];
        labels.resize(class0.n_rows() + class1.n_rows(), 1);
        Self::new(features, labels, None)
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.features.n_cols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Row indices with the given label, in ascending order.
    pub fn class_indices(&self, label: u8) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &y)| y == label)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn class_count(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&y| y == label).count()
    }

    pub fn rows_of(&self, idx: &[usize]) -> Matrix {
        self.features.select_rows(idx)
    }
}

/// Problem found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Issue {
    Empty,
    NonFinite {
        row: usize,
        col: usize,
    },
    ConstantFeature {
        col: usize,
    },
    /// Only one label value is present; `present` is that value.
    SingleClass {
        present: u8,
    },
}

impl Issue {
    /// Issues that make training impossible (constant features are merely suspicious).
    pub fn is_fatal(&self) -> bool {
        !matches!(self, Issue::ConstantFeature { .. })
    }
}

impl core::fmt::Display for Issue {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Issue::Empty => write!(f, "dataset has no rows"),
            Issue::NonFinite { row, col } => {
                write!(f, "non-finite value at row {row}, column {col}")
            }
            Issue::ConstantFeature { col } => write!(f, "column {col} is constant"),
            Issue::SingleClass { present } => {
                write!(f, "single-class labels (only {present} present)")
            }
        }
    }
}

/// Reports non-finite cells, constant features and single-class labels. Empty means clean.
pub fn validate(data: &LabeledDataset) -> Vec<Issue> {
    let mut issues = Vec::new();
    if data.is_empty() {
        issues.push(Issue::Empty);
        return issues;
    }
    let x = data.features();
    for (i, row) in x.rows().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() {
                issues.push(Issue::NonFinite { row: i, col: j });
            }
        }
    }
    for j in 0..x.n_cols() {
        let first = x.get(0, j);
        if (0..x.n_rows()).all(|i| x.get(i, j) == first) {
            issues.push(Issue::ConstantFeature { col: j });
        }
    }
    let ones = data.class_count(1);
    if ones == 0 {
        issues.push(Issue::SingleClass { present: 0 });
    } else if ones == data.len() {
        issues.push(Issue::SingleClass { present: 1 });
    }
    issues
}

/// Subsample sizes `(n1, n2)` for class 1 and `(m1, m2, m3)` for class 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSizes {
    pub n1: usize,
    pub n2: usize,
    pub m1: usize,
    pub m2: usize,
    pub m3: usize,
}

/// Default sizes: `m1 = min{⌈10 ln(4d/δ1)⌉, ⌊m/4⌋}`, `n1 = min{⌈10 ln(4d/δ1)⌉, ⌊n/2⌋}` when
/// screening (else 0), `m2 = ⌊m/2⌋ - m1`, `n2 = n - n1`, `m3 = m - ⌊m/2⌋`.
pub fn split_sizes(
    m: usize,
    n: usize,
    d: usize,
    delta1: f64,
    screening: bool,
) -> Result<SplitSizes> {
    if screening && (m < 8 || n < 4) {
        return Err(NpError::InsufficientClassSample {
            class: if m < 8 { 0 } else { 1 },
            detail: format!("screening needs m >= 8 and n >= 4 (m={m}, n={n})"),
        });
    }
    let (m1, n1) = if screening {
        let size = libm::ceil(10.0 * libm::log(4.0 * d as f64 / delta1)).max(0.0) as usize;
        (size.min(m / 4), size.min(n / 2))
    } else {
        (0, 0)
    };
    let half = m / 2;
    if half <= m1 {
        return Err(NpError::InsufficientClassSample {
            class: 0,
            detail: format!("m={m} leaves no class-0 estimation rows"),
        });
    }
    if n <= n1 {
        return Err(NpError::InsufficientClassSample {
            class: 1,
            detail: format!("n={n} leaves no class-1 estimation rows"),
        });
    }
    Ok(SplitSizes {
        n1,
        n2: n - n1,
        m1,
        m2: half - m1,
        m3: m - half,
    })
}

/// Disjoint row-index sets `S¹₁, S¹₂` (class 1) and `S⁰₁, S⁰₂, S⁰₃` (class 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub s1_1: Vec<usize>,
    pub s1_2: Vec<usize>,
    pub s0_1: Vec<usize>,
    pub s0_2: Vec<usize>,
    pub s0_3: Vec<usize>,
}

impl SplitPlan {
    pub fn sizes(&self) -> SplitSizes {
        SplitSizes {
            n1: self.s1_1.len(),
            n2: self.s1_2.len(),
            m1: self.s0_1.len(),
            m2: self.s0_2.len(),
            m3: self.s0_3.len(),
        }
    }
}

/// Seeded split of the dataset into the five subsamples.
pub fn make_split(data: &LabeledDataset, cfg: &NPConfig) -> Result<SplitPlan> {
    let mut class0 = data.class_indices(0);
    let mut class1 = data.class_indices(1);
    if class0.is_empty() || class1.is_empty() {
        return Err(NpError::InsufficientClassSample {
            class: if class0.is_empty() { 0 } else { 1 },
            detail: "class has no rows".into(),
        });
    }
    let sizes = split_sizes(
        class0.len(),
        class1.len(),
        data.dim(),
        cfg.delta1,
        cfg.screening_enabled(),
    )?;
    let mut rng = seeded_rng(cfg.seed);
    class0.shuffle(&mut rng);
    class1.shuffle(&mut rng);

    let s0_3 = class0.split_off(sizes.m1 + sizes.m2);
    let s0_2 = class0.split_off(sizes.m1);
    let s1_2 = class1.split_off(sizes.n1);
    Ok(SplitPlan {
        s1_1: class1,
        s1_2,
        s0_1: class0,
        s0_2,
        s0_3,
    })
}
