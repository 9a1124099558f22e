//! Tabular ingestion, one-hot encoding, splitting and planted synthetic data.

mod encoder;
mod split;
mod synth;
mod table;

use std::io::{Read, Write};

pub use encoder::{apply_encoder, fit_encoder, EncoderSpec, FeatureDef, ENCODER_VERSION};
pub use split::{split, split_indices, SplitSizes, SplitSpec};
pub use synth::synth_dataset;
pub use table::{drop_missing, load_csv, read_csv, ColumnKind, CsvOptions, RawTable};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::TruthRanking;

/// Header of the class column in encoded CSV files.
pub const CLASS_COLUMN: &str = "__class__";

/// Numeric design matrix with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    x: Matrix,
    y: Vec<usize>,
    feature_names: Vec<String>,
    n_classes: usize,
    truth: Option<TruthRanking>,
}

impl EncodedDataset {
    pub fn new(x: Matrix, y: Vec<usize>, feature_names: Vec<String>, n_classes: usize) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::EmptyDataset("encoded dataset".into()));
        }
        if x.cols() < 2 {
            return Err(Error::invalid(format!("need at least 2 features, got {}", x.cols())));
        }
        if y.len() != x.rows() || feature_names.len() != x.cols() {
            return Err(Error::invalid(format!(
                "{} rows, {} labels, {} features, {} names",
                x.rows(),
                y.len(),
                x.cols(),
                feature_names.len()
            )));
        }
        if !x.is_finite() {
            return Err(Error::invalid("non-finite feature value"));
        }
        if let Some(&label) = y.iter().find(|&&l| l >= n_classes) {
            return Err(Error::LabelOutOfRange {
                label,
                classes: n_classes,
            });
        }
        Ok(EncodedDataset {
            x,
            y,
            feature_names,
            n_classes,
            truth: None,
        })
    }

    pub fn with_truth(mut self, truth: TruthRanking) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[usize] {
        &self.y
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn truth(&self) -> Option<&TruthRanking> {
        self.truth.as_ref()
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> Result<EncodedDataset> {
        let mut ds = EncodedDataset::new(
            self.x.select_rows(idx),
            idx.iter().map(|&i| self.y[i]).collect(),
            self.feature_names.clone(),
            self.n_classes,
        )?;
        ds.truth = self.truth.clone();
        Ok(ds)
    }

    /// Replaces the feature matrix, keeping labels and names.
    pub fn with_x(&self, x: Matrix) -> Result<EncodedDataset> {
        let mut ds = EncodedDataset::new(x, self.y.clone(), self.feature_names.clone(), self.n_classes)?;
        ds.truth = self.truth.clone();
        Ok(ds)
    }

    /// Writes `feature..., __class__` rows. Values use the shortest decimal
    /// form that parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(CLASS_COLUMN);
        wtr.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = self.x.row(i).iter().map(|v| format!("{v:?}")).collect();
            rec.push(self.y[i].to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, n_classes: usize) -> Result<EncodedDataset> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.last().map(String::as_str) != Some(CLASS_COLUMN) {
            return Err(Error::MissingColumn(CLASS_COLUMN.into()));
        }
        let d = header.len() - 1;
        let mut data = Vec::new();
        let mut y = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != header.len() {
                return Err(Error::RaggedRow {
                    line,
                    expected: header.len(),
                    found: rec.len(),
                });
            }
            for cell in rec.iter().take(d) {
                data.push(cell.parse::<f64>().map_err(|_| {
                    Error::invalid(format!("line {line}: `{cell}` is not a number"))
                })?);
            }
            y.push(rec[d].parse::<usize>().map_err(|_| {
                Error::invalid(format!("line {line}: bad class `{}`", &rec[d]))
            })?);
        }
        let n = y.len();
        EncodedDataset::new(Matrix::from_vec(n, d, data)?, y, header[..d].to_vec(), n_classes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validation() {
        let x = Matrix::zeros(2, 1);
        assert!(EncodedDataset::new(x, vec![0, 1], vec!["a".into()], 2).is_err());
        let x = Matrix::zeros(2, 2);
        let names = vec!["a".to_string(), "b".to_string()];
        assert!(matches!(
            EncodedDataset::new(x.clone(), vec![0, 2], names.clone(), 2),
            Err(Error::LabelOutOfRange { .. })
        ));
        assert!(EncodedDataset::new(x, vec![0, 1], names, 2).is_ok());
    }

    proptest! {
        #[test]
        fn encoded_csv_round_trip(values in proptest::collection::vec(-1e12f64..1e12, 6), labels in proptest::collection::vec(0usize..3, 3)) {
            let x = Matrix::from_vec(3, 2, values).unwrap();
            let ds = EncodedDataset::new(x, labels, vec!["a".into(), "b=c".into()], 3).unwrap();
            let mut buf = Vec::new();
            ds.write_csv(&mut buf).unwrap();
            let back = EncodedDataset::read_csv(buf.as_slice(), 3).unwrap();
            prop_assert_eq!(back, ds);
        }

        /// Passthrough values survive encoding exactly and each categorical
        /// column contributes exactly one hot indicator per fitted row.
        #[test]
        fn encoding_invariants(rows in proptest::collection::vec((-1e6f64..1e6, 0usize..4, 0usize..2), 2..30)) {
            let cats = ["a", "b", "c", "d"];
            let mut text = String::from("num,cat,label\n");
            for (v, c, l) in &rows {
                text.push_str(&format!("{v:?},{},{}\n", cats[*c], l));
            }
            let t = read_csv(text.as_bytes(), "label", &CsvOptions::default()).unwrap();
            let labels: std::collections::BTreeSet<_> = rows.iter().map(|r| r.2).collect();
            prop_assume!(labels.len() == 2);
            let spec = fit_encoder(&t).unwrap();
            let ds = apply_encoder(&spec, &t).unwrap();
            prop_assert!(ds.x().is_finite());
            for (i, (v, _, _)) in rows.iter().enumerate() {
                prop_assert_eq!(ds.x()[(i, 0)].to_bits(), v.to_bits());
                let hot: f64 = ds.x().row(i)[1..].iter().sum();
                prop_assert_eq!(hot, 1.0);
            }
        }
    }
}
