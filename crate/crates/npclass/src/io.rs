//! CSV ingestion with name-based column binding, and prediction output.

use std::io::{Read, Write};
use std::path::Path;

use npclass_core::data::{LabeledDataset, Matrix};
use npclass_core::NpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Open {
        path: String,
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("duplicate column `{0}` in header")]
    DuplicateColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("label column has values other than `{class0}`: {others:?}; exactly one other value is allowed")]
    TooManyLabels { class0: String, others: Vec<String> },

    #[error("no feature columns")]
    NoFeatures,

    #[error(transparent)]
    Core(#[from] NpError),
}

/// Header plus raw records of a comma-separated file.
#[derive(Debug, Clone)]
pub struct CsvTable {
    header: Vec<String>,
    records: Vec<csv::StringRecord>,
}

impl CsvTable {
    pub fn from_reader(reader: impl Read) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        for (i, name) in header.iter().enumerate() {
            if header[..i].contains(name) {
                return Err(DataError::DuplicateColumn(name.clone()));
            }
        }
        let records = rdr.records().collect::<Result<Vec<_>, _>>()?;
        Ok(Self { header, records })
    }

    pub fn from_path(path: &Path) -> Result<Self, DataError> {
        let file = std::fs::File::open(path).map_err(|source| DataError::Open {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize, DataError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_owned()))
    }

    /// Numeric matrix of the named columns, in the given order.
    pub fn matrix(&self, names: &[String]) -> Result<Matrix, DataError> {
        let idx = names
            .iter()
            .map(|n| self.column_index(n))
            .collect::<Result<Vec<_>, _>>()?;
        let mut out = Matrix::zeros(self.records.len(), idx.len());
        for (i, rec) in self.records.iter().enumerate() {
            let row = out.row_mut(i);
            for (slot, (&c, name)) in row.iter_mut().zip(idx.iter().zip(names)) {
                let raw = rec.get(c).unwrap_or("");
                *slot = raw.parse::<f64>().map_err(|_| DataError::Parse {
                    row: i + 1,
                    column: name.clone(),
                    value: raw.to_owned(),
                })?;
            }
        }
        Ok(out)
    }

    /// Every column except `label_col`, in header order.
    pub fn feature_names(&self, label_col: &str) -> Vec<String> {
        self.header
            .iter()
            .filter(|h| *h != label_col)
            .cloned()
            .collect()
    }

    /// Labels from `label_col`: `class0_value` maps to 0 and the single other value to 1.
    pub fn labels(&self, label_col: &str, class0_value: &str) -> Result<Vec<u8>, DataError> {
        let c = self.column_index(label_col)?;
        let mut others: Vec<String> = Vec::new();
        let mut labels = Vec::with_capacity(self.records.len());
        for rec in &self.records {
            let raw = rec.get(c).unwrap_or("");
            if same_label(raw, class0_value) {
                labels.push(0);
            } else {
                if !others.iter().any(|o| same_label(o, raw)) {
                    others.push(raw.to_owned());
                }
                labels.push(1);
            }
        }
        if others.len() > 1 {
            return Err(DataError::TooManyLabels {
                class0: class0_value.to_owned(),
                others,
            });
        }
        Ok(labels)
    }

    /// Labeled dataset using `features` (or every non-label column when `None`).
    pub fn labeled(
        &self,
        label_col: &str,
        class0_value: &str,
        features: Option<&[String]>,
    ) -> Result<LabeledDataset, DataError> {
        let names = match features {
            Some(f) => f.to_vec(),
            None => {
                self.column_index(label_col)?;
                self.feature_names(label_col)
            }
        };
        if names.is_empty() {
            return Err(DataError::NoFeatures);
        }
        let x = self.matrix(&names)?;
        let y = self.labels(label_col, class0_value)?;
        Ok(LabeledDataset::new(x, y, Some(names))?)
    }
}

// "1" and "1.0" name the same class
fn same_label(a: &str, b: &str) -> bool {
    if a == b {
        return true;
    }
    matches!((a.parse::<f64>(), b.parse::<f64>()), (Ok(x), Ok(y)) if x == y)
}

/// Writes `row_index,score,prediction` rows.
pub fn write_predictions(out: impl Write, scores: &[f64], predictions: &[u8]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row_index", "score", "prediction"])?;
    for (i, (s, p)) in scores.iter().zip(predictions).enumerate() {
        w.write_record([i.to_string(), s.to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One parsed prediction row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRow {
    pub row_index: usize,
    pub score: f64,
    pub prediction: u8,
}

pub fn read_predictions(input: impl Read) -> Result<Vec<PredictionRow>, DataError> {
    let table = CsvTable::from_reader(input)?;
    let (ri, si, pi) = (
        table.column_index("row_index")?,
        table.column_index("score")?,
        table.column_index("prediction")?,
    );
    table
        .records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let field = |c: usize| {
                let raw = rec.get(c).unwrap_or("");
                raw.parse::<f64>().map_err(|_| DataError::Parse {
                    row: i + 1,
                    column: table.header[c].clone(),
                    value: raw.to_owned(),
                })
            };
            Ok(PredictionRow {
                row_index: field(ri)? as usize,
                score: field(si)?,
                prediction: field(pi)? as u8,
            })
        })
        .collect()
}
