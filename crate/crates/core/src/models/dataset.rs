//! Tabular datasets and their CSV form: a header row, a `label` column, and
//! numeric feature columns.

use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    feature_names: Vec<String>,
    rows: DMatrix<f64>,
    labels: Vec<f64>,
    batch_size: usize,
}

impl TabularDataset {
    pub fn new(feature_names: Vec<String>, rows: DMatrix<f64>, labels: Vec<f64>, batch_size: usize) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if rows.nrows() != labels.len() {
            return Err(Error::dims("dataset labels", rows.nrows(), labels.len()));
        }
        if rows.ncols() != feature_names.len() {
            return Err(Error::dims("dataset columns", feature_names.len(), rows.ncols()));
        }
        if let Some(bad) = rows.iter().chain(labels.iter()).find(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("non-finite value {bad} in dataset")));
        }
        Ok(Self {
            feature_names,
            rows,
            labels,
            batch_size,
        })
    }

    pub fn from_rows(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<f64>,
        batch_size: usize,
    ) -> Result<Self> {
        let n = feature_names.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::dims("dataset row", n, bad.len()));
        }
        let m = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
        Self::new(feature_names, m, labels, batch_size)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.rows.row(i).iter().copied().collect()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        self.batch_size = batch_size;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.rows.ncols()
    }

    /// Labels as class ids; fails on negative or fractional labels.
    pub fn class_labels(&self) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .map(|&y| {
                if y >= 0.0 && y.fract() == 0.0 {
                    Ok(y as usize)
                } else {
                    Err(Error::Parse(format!("label {y} is not a class id")))
                }
            })
            .collect()
    }

    pub fn num_classes(&self) -> Result<usize> {
        Ok(self.class_labels()?.into_iter().max().map_or(0, |m| m + 1))
    }

    /// Contiguous row ranges of at most `batch_size` rows.
    pub fn batches(&self) -> Vec<Range<usize>> {
        (0..self.len())
            .step_by(self.batch_size)
            .map(|s| s..(s + self.batch_size).min(self.len()))
            .collect()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let rows = self.rows.select_rows(indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self {
            feature_names: self.feature_names.clone(),
            rows,
            labels,
            batch_size: self.batch_size,
        }
    }

    pub fn select_columns(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_features()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                n: self.n_features(),
            });
        }
        Ok(Self {
            feature_names: indices.iter().map(|&i| self.feature_names[i].clone()).collect(),
            rows: self.rows.select_columns(indices),
            labels: self.labels.clone(),
            batch_size: self.batch_size,
        })
    }

    /// First `round(train_fraction * len)` rows versus the rest.
    pub fn split(&self, train_fraction: f64) -> Result<(Self, Self)> {
        if !(0.0..=1.0).contains(&train_fraction) {
            return Err(Error::range("train_fraction", train_fraction, "[0, 1]"));
        }
        let cut = (train_fraction * self.len() as f64).round() as usize;
        let train: Vec<usize> = (0..cut).collect();
        let val: Vec<usize> = (cut..self.len()).collect();
        Ok((self.select_rows(&train), self.select_rows(&val)))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let label_col = headers
            .iter()
            .position(|h| h == LABEL_COLUMN)
            .ok_or_else(|| Error::Parse(format!("missing '{LABEL_COLUMN}' column")))?;
        let feature_names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != label_col)
            .map(|(_, h)| h.to_string())
            .collect();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let mut row = Vec::with_capacity(feature_names.len());
            for (i, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Parse(format!(
                        "row {}: column '{}' value '{field}' is not numeric",
                        line + 1,
                        &headers[i]
                    ))
                })?;
                if i == label_col {
                    labels.push(v);
                } else {
                    row.push(v);
                }
            }
            rows.push(row);
        }
        let batch_size = rows.len().clamp(1, 512);
        Self::from_rows(feature_names, rows, labels, batch_size)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(LABEL_COLUMN);
        w.write_record(&header)?;
        for (i, y) in self.labels.iter().enumerate() {
            let mut rec: Vec<String> = self.rows.row(i).iter().map(|v| format!("{v:?}")).collect();
            rec.push(format!("{y:?}"));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_and_label_column_anywhere() {
        let text = "x,label,y\n1.5,1,2\n-3,0,0.25\n";
        let d = TabularDataset::read_csv(text.as_bytes()).unwrap();
        assert_eq!(d.feature_names(), &["x".to_string(), "y".to_string()]);
        assert_eq!(d.row(1), vec![-3.0, 0.25]);
        assert_eq!(d.class_labels().unwrap(), vec![1, 0]);

        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = TabularDataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.rows(), d.rows());
        assert_eq!(back.labels(), d.labels());
    }

    #[test]
    fn csv_errors() {
        assert!(TabularDataset::read_csv("x,y\n1,2\n".as_bytes()).is_err());
        assert!(TabularDataset::read_csv("x,label\nfoo,1\n".as_bytes()).is_err());
        assert!(TabularDataset::read_csv("x,label\n,1\n".as_bytes()).is_err());
        assert!(TabularDataset::read_csv("x,label\nnan,1\n".as_bytes()).is_err());
    }

    #[test]
    fn batches_cover_rows() {
        let rows = (0..10).map(|i| vec![i as f64]).collect();
        let d = TabularDataset::from_rows(vec!["x".into()], rows, vec![0.0; 10], 4).unwrap();
        assert_eq!(d.batches(), vec![0..4, 4..8, 8..10]);
        assert!(d.clone().with_batch_size(0).is_err());
        let (a, b) = d.split(0.8).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
    }

    #[test]
    fn fractional_labels_are_not_classes() {
        let d = TabularDataset::from_rows(vec!["x".into()], vec![vec![0.0]], vec![0.5], 1).unwrap();
        assert!(d.class_labels().is_err());
    }
}
