//! CSV datasets: a header row, float feature columns, and an optional final
//! integer column named `label`.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Option<Vec<usize>>) -> Result<Self> {
        let width = features.first().map_or(0, Vec::len);
        if features.iter().any(|row| row.len() != width) {
            return Err(Error::Dataset("rows have differing widths".into()));
        }
        if labels.as_ref().is_some_and(|l| l.len() != features.len()) {
            return Err(Error::Dataset("label count differs from row count".into()));
        }
        Ok(Self {
            feature_names: (0..width).map(|i| format!("f{i}")).collect(),
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Dataset(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let labelled = headers.last().is_some_and(|h| h == "label");
        let width = if labelled {
            headers.len() - 1
        } else {
            headers.len()
        };
        if width == 0 {
            return Err(Error::Dataset("no feature columns".into()));
        }

        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Dataset(e.to_string()))?;
            let line = i + 2;
            if record.len() != headers.len() {
                return Err(Error::Dataset(format!(
                    "line {line}: expected {} fields, found {}",
                    headers.len(),
                    record.len()
                )));
            }
            let row = record
                .iter()
                .take(width)
                .enumerate()
                .map(|(col, field)| {
                    field
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| {
                            Error::Dataset(format!(
                                "line {line}, column {}: invalid number {field:?}",
                                headers[col]
                            ))
                        })
                })
                .collect::<Result<Vec<f64>>>()?;
            features.push(row);
            if labelled {
                let field = &record[width];
                let label = field.parse::<usize>().map_err(|_| {
                    Error::Dataset(format!("line {line}: invalid label {field:?}"))
                })?;
                labels.push(label);
            }
        }
        Ok(Self {
            feature_names: headers.into_iter().take(width).collect(),
            features,
            labels: labelled.then_some(labels),
        })
    }
}
