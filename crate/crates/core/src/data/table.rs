use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub missing_tokens: Vec<String>,
    /// Explicit kinds; columns not listed are inferred.
    pub kinds: HashMap<String, ColumnKind>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: b',',
            missing_tokens: vec![String::new(), "NA".into(), "?".into()],
            kinds: HashMap::new(),
        }
    }
}

/// Parsed CSV with per-column kinds. `None` cells are missing.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    columns: Vec<String>,
    kinds: Vec<ColumnKind>,
    rows: Vec<Vec<Option<String>>>,
    label: String,
}

pub(crate) fn parse_number(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn infer_kind(rows: &[Vec<Option<String>>], col: usize) -> ColumnKind {
    let numeric = rows
        .iter()
        .filter_map(|r| r[col].as_deref())
        .all(|c| parse_number(c).is_some());
    if numeric {
        ColumnKind::Numeric
    } else {
        ColumnKind::Categorical
    }
}

impl RawTable {
    /// Builds a table; the label column is always categorical.
    pub fn new(
        columns: Vec<String>,
        kinds: Option<Vec<ColumnKind>>,
        rows: Vec<Vec<Option<String>>>,
        label: &str,
    ) -> Result<Self> {
        let label_idx = columns
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::MissingColumn(label.to_string()))?;
        for (i, r) in rows.iter().enumerate() {
            if r.len() != columns.len() {
                return Err(Error::RaggedRow {
                    line: i as u64 + 2,
                    expected: columns.len(),
                    found: r.len(),
                });
            }
        }
        let mut kinds = match kinds {
            Some(k) if k.len() == columns.len() => k,
            Some(k) => {
                return Err(Error::invalid(format!(
                    "{} kinds for {} columns",
                    k.len(),
                    columns.len()
                )))
            }
            None => (0..columns.len()).map(|c| infer_kind(&rows, c)).collect(),
        };
        kinds[label_idx] = ColumnKind::Categorical;
        Ok(RawTable {
            columns,
            kinds,
            rows,
            label: label.to_string(),
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn rows(&self) -> &[Vec<Option<String>>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn label_index(&self) -> usize {
        self.columns
            .iter()
            .position(|c| *c == self.label)
            .expect("label column present by construction")
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn has_missing(&self) -> bool {
        self.rows.iter().any(|r| r.iter().any(Option::is_none))
    }

    /// Removes the named columns. The label column cannot be dropped.
    pub fn drop_columns(&self, names: &[String]) -> Result<RawTable> {
        let mut keep = Vec::new();
        for name in names {
            if *name == self.label {
                return Err(Error::invalid(format!("cannot drop label column `{name}`")));
            }
            if self.column_index(name).is_none() {
                return Err(Error::MissingColumn(name.clone()));
            }
        }
        for (i, c) in self.columns.iter().enumerate() {
            if !names.contains(c) {
                keep.push(i);
            }
        }
        Ok(RawTable {
            columns: keep.iter().map(|&i| self.columns[i].clone()).collect(),
            kinds: keep.iter().map(|&i| self.kinds[i]).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| keep.iter().map(|&i| r[i].clone()).collect())
                .collect(),
            label: self.label.clone(),
        })
    }
}

/// Reads a headered CSV. Kinds are inferred per column unless given in
/// `options.kinds`: numeric when every non-missing cell parses as a number.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, options: &CsvOptions) -> Result<RawTable> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, label_column, options)
}

pub fn read_csv<R: Read>(reader: R, label_column: &str, options: &CsvOptions) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if !header.iter().any(|h| h == label_column) {
        return Err(Error::MissingColumn(label_column.to_string()));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                line: record.position().map_or(0, |p| p.line()),
                expected: header.len(),
                found: record.len(),
            });
        }
        rows.push(
            record
                .iter()
                .map(|cell| {
                    let cell = cell.trim();
                    if options.missing_tokens.iter().any(|t| t == cell) {
                        None
                    } else {
                        Some(cell.to_string())
                    }
                })
                .collect(),
        );
    }
    let kinds = (0..header.len())
        .map(|c| {
            options
                .kinds
                .get(&header[c])
                .copied()
                .unwrap_or_else(|| infer_kind(&rows, c))
        })
        .collect();
    RawTable::new(header, Some(kinds), rows, label_column)
}

/// Drops every row with at least one missing cell.
pub fn drop_missing(t: &RawTable) -> Result<RawTable> {
    let rows: Vec<_> = t
        .rows
        .iter()
        .filter(|r| r.iter().all(Option::is_some))
        .cloned()
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyDataset("drop_missing".into()));
    }
    Ok(RawTable {
        columns: t.columns.clone(),
        kinds: t.kinds.clone(),
        rows,
        label: t.label.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<RawTable> {
        read_csv(text.as_bytes(), "label", &CsvOptions::default())
    }

    #[test]
    fn clean_rows() {
        let t = read("a,b,label\n1,2,x\n3,4,y\n").unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.kinds(), &[ColumnKind::Numeric, ColumnKind::Numeric, ColumnKind::Categorical]);
    }

    #[test]
    fn mixed_column_is_categorical() {
        let t = read("a,label\n1,p\n2,q\nx,p\n").unwrap();
        assert_eq!(t.kinds()[0], ColumnKind::Categorical);
    }

    #[test]
    fn ragged_row() {
        let err = read("a,b,label\n1,2,x\n3,y\n").unwrap_err();
        assert!(matches!(err, Error::RaggedRow { expected: 3, found: 2, .. }), "{err}");
    }

    #[test]
    fn missing_label_column() {
        assert!(matches!(read("a,b\n1,2\n"), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn missing_tokens_and_drop() {
        let t = read("a,b,label\n1,2,x\n,2,x\n3,NA,y\n4,?,y\n5,6,y\n").unwrap();
        assert!(t.has_missing());
        assert_eq!(t.kinds()[1], ColumnKind::Numeric);
        let d = drop_missing(&t).unwrap();
        assert_eq!(d.n_rows(), 2);
        assert_eq!(d.rows()[1][0].as_deref(), Some("5"));

        let clean = read("a,label\n1,x\n2,y\n").unwrap();
        assert_eq!(drop_missing(&clean).unwrap(), clean);

        let all = read("a,label\n,x\nNA,y\n").unwrap();
        assert!(matches!(drop_missing(&all), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn explicit_kinds_and_label_forced_categorical() {
        let mut opts = CsvOptions::default();
        opts.kinds.insert("a".into(), ColumnKind::Categorical);
        let t = read_csv("a,label\n1,0\n2,1\n".as_bytes(), "label", &opts).unwrap();
        assert_eq!(t.kinds(), &[ColumnKind::Categorical, ColumnKind::Categorical]);
    }

    #[test]
    fn drop_columns_keeps_order() {
        let t = read("a,b,c,label\n1,2,3,x\n").unwrap();
        let d = t.drop_columns(&["b".to_string()]).unwrap();
        assert_eq!(d.columns(), &["a", "c", "label"]);
        assert!(t.drop_columns(&["label".to_string()]).is_err());
        assert!(t.drop_columns(&["zz".to_string()]).is_err());
    }
}
