//! JSON persistence of trained classifiers.

use std::path::Path;

use npclass_core::classify::NPClassifier;
use npclass_core::config::Kernel;
use npclass_core::data::LabeledDataset;
use npclass_core::density::{GaussianNb, KdeNb, ScoreModel};
use npclass_core::{NPConfig, NpError, Variant};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unsupported schema_version `{0}`")]
    Schema(String),

    #[error("inconsistent model file: {0}")]
    Inconsistent(String),

    #[error(transparent)]
    Core(#[from] NpError),
}

/// Row counts and content hash of the training data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub n_rows: usize,
    pub n_class0: usize,
    pub n_class1: usize,
    pub d: usize,
    pub sha256: String,
}

impl Fingerprint {
    /// Hash over `(label, features as little-endian f64)` per row, in order.
    pub fn of(data: &LabeledDataset) -> Self {
        let mut h = Sha256::new();
        h.update((data.len() as u64).to_le_bytes());
        h.update((data.dim() as u64).to_le_bytes());
        for (row, &y) in data.features().rows().zip(data.labels()) {
            h.update([y]);
            for v in row {
                h.update(v.to_le_bytes());
            }
        }
        Self {
            n_rows: data.len(),
            n_class0: data.class_count(0),
            n_class1: data.class_count(1),
            d: data.dim(),
            sha256: hex::encode(h.finalize()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeFeatureParams {
    pub h0: f64,
    pub h1: f64,
    pub class0: Vec<f64>,
    pub class1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    ParametricGaussian {
        mu0: Vec<f64>,
        mu1: Vec<f64>,
        var: Vec<f64>,
    },
    NonparametricKde {
        kernel: String,
        floor_coef: f64,
        features: Vec<KdeFeatureParams>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArtifactFile {
    pub schema_version: String,
    /// Seconds since the Unix epoch at save time.
    pub created_unix: u64,
    pub variant: String,
    pub alpha: f64,
    pub delta1: f64,
    pub delta3: f64,
    pub q_quantile: f64,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub selected: Vec<usize>,
    pub selected_names: Vec<String>,
    pub model: ModelParams,
    pub c_hat: f64,
    pub k_used: usize,
    pub m3: usize,
    pub feasible: bool,
    /// Sorted class-0 hold-out scores.
    pub s03_scores: Vec<f64>,
    pub fingerprint: Fingerprint,
}

fn model_params(model: &ScoreModel) -> ModelParams {
    match model {
        ScoreModel::Gaussian(g) => ModelParams::ParametricGaussian {
            mu0: g.mu0().to_vec(),
            mu1: g.mu1().to_vec(),
            var: g.variances().to_vec(),
        },
        ScoreModel::Kde(k) => ModelParams::NonparametricKde {
            kernel: k.kernel().name().to_owned(),
            floor_coef: k.floor_coef(),
            features: k
                .features()
                .iter()
                .map(|f| KdeFeatureParams {
                    h0: f.class0.bandwidth(),
                    h1: f.class1.bandwidth(),
                    class0: f.class0.samples().to_vec(),
                    class1: f.class1.samples().to_vec(),
                })
                .collect(),
        },
    }
}

impl ModelArtifactFile {
    /// Artifact for `clf`, trained with `cfg` on `data`.
    pub fn new(clf: &NPClassifier, cfg: &NPConfig, data: &LabeledDataset) -> Self {
        let feature_names: Vec<String> = match data.feature_names() {
            Some(n) => n.to_vec(),
            None => (0..data.dim()).map(|j| format!("x{j}")).collect(),
        };
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            schema_version: SCHEMA_VERSION.to_owned(),
            created_unix,
            variant: clf.variant().name().to_owned(),
            alpha: clf.alpha(),
            delta1: cfg.delta1,
            delta3: clf.delta3(),
            q_quantile: cfg.q_quantile,
            seed: cfg.seed,
            selected_names: clf
                .selected()
                .iter()
                .map(|&j| feature_names[j].clone())
                .collect(),
            feature_names,
            selected: clf.selected().to_vec(),
            model: model_params(clf.model()),
            c_hat: clf.c_hat(),
            k_used: clf.k_used(),
            m3: clf.m3(),
            feasible: clf.feasible(),
            s03_scores: clf.s03_scores().to_vec(),
            fingerprint: Fingerprint::of(data),
        }
    }

    /// Rebuilds the classifier, checking every stored derived quantity.
    pub fn to_classifier(&self) -> Result<NPClassifier, ModelFileError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ModelFileError::Schema(self.schema_version.clone()));
        }
        let bad = |m: String| Err(ModelFileError::Inconsistent(m));
        let variant = match Variant::from_name(&self.variant) {
            Some(v) => v,
            None => return bad(format!("unknown variant `{}`", self.variant)),
        };
        let d = self.feature_names.len();
        if let Some(&j) = self.selected.iter().find(|&&j| j >= d) {
            return bad(format!("selected index {j} outside {d} features"));
        }
        let model = match &self.model {
            ModelParams::ParametricGaussian { mu0, mu1, var } => {
                if variant.is_parametric() {
                    ScoreModel::Gaussian(GaussianNb::from_parts(
                        self.selected.clone(),
                        mu0.clone(),
                        mu1.clone(),
                        var.clone(),
                    )?)
                } else {
                    return bad(format!(
                        "variant {} stores a parametric model",
                        self.variant
                    ));
                }
            }
            ModelParams::NonparametricKde {
                kernel,
                floor_coef,
                features,
            } => {
                let Some(kernel) = Kernel::from_name(kernel) else {
                    return bad(format!("unknown kernel `{kernel}`"));
                };
                if variant.is_parametric() {
                    return bad(format!("variant {} stores a KDE model", self.variant));
                }
                let parts = features
                    .iter()
                    .map(|f| (f.class0.clone(), f.h0, f.class1.clone(), f.h1))
                    .collect();
                ScoreModel::Kde(KdeNb::from_parts(
                    self.selected.clone(),
                    kernel,
                    *floor_coef,
                    parts,
                )?)
            }
        };
        if self.m3 != self.s03_scores.len() {
            return bad(format!(
                "m3={} but {} stored scores",
                self.m3,
                self.s03_scores.len()
            ));
        }
        let clf = NPClassifier::from_parts(
            model,
            self.s03_scores.clone(),
            self.alpha,
            self.delta3,
            variant,
            d,
            self.k_used,
            self.c_hat,
        )?;
        if clf.feasible() != self.feasible {
            return bad(format!(
                "stored feasible={} disagrees with k_min",
                self.feasible
            ));
        }
        Ok(clf)
    }

    pub fn to_json(&self) -> String {
        let mut s =
            serde_json::to_string_pretty(self).expect("model artifacts hold only finite values");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, ModelFileError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelFileError> {
        std::fs::write(path, self.to_json()).map_err(|source| ModelFileError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelFileError> {
        let s = std::fs::read_to_string(path).map_err(|source| ModelFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&s)
    }
}
