use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Feature matrix `X` (`M × d`) and targets `Y` (`M`).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: DMatrix<f64>,
    pub targets: DVector<f64>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, targets: DVector<f64>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::Argument("dataset needs at least one sample".into()));
        }
        if features.nrows() != targets.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} targets",
                features.nrows(),
                targets.len()
            )));
        }
        if features.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Argument("dataset contains non-finite entries".into()));
        }
        Ok(Self { features, targets })
    }

    /// Builds from row slices.
    pub fn from_rows(rows: &[Vec<f64>], targets: &[f64]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("ragged feature rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(
            DMatrix::from_row_slice(rows.len(), d, &flat),
            DVector::from_column_slice(targets),
        )
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Design matrix `[X, 1]`.
    pub fn augmented(&self) -> DMatrix<f64> {
        self.features.clone().insert_column(self.feature_dim(), 1.0)
    }

    pub fn is_binary(&self) -> bool {
        self.targets.iter().all(|&y| y == 0.0 || y == 1.0)
    }

    /// CSV with a header row; the last column is the target.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let width = rdr.headers().map_err(csv_err)?.len();
        if width < 1 {
            return Err(Error::Argument("CSV header has no columns".into()));
        }
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != width {
                return Err(Error::Shape(format!("CSV row {} has {} fields, expected {width}", line + 2, rec.len())));
            }
            let vals = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::Argument(format!("CSV row {}: `{s}` is not a number", line + 2)))
                })
                .collect::<Result<Vec<f64>>>()?;
            targets.push(vals[width - 1]);
            rows.push(vals[..width - 1].to_vec());
        }
        Self::from_rows(&rows, &targets)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// Rows of `[features..., target]`, handy for unsupervised loaders that
    /// treat every column as a coordinate.
    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| {
                let mut r: Vec<f64> = self.features.row(i).iter().copied().collect();
                r.push(self.targets[i]);
                r
            })
            .collect()
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Argument(format!("CSV: {e}"))
}
