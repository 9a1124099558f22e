use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::table::{parse_number, ColumnKind, RawTable};
use super::EncodedDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const ENCODER_VERSION: &str = "ifenet-encoder/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureDef {
    Passthrough { column: String },
    Indicator { column: String, value: String },
}

impl FeatureDef {
    pub fn name(&self) -> String {
        match self {
            FeatureDef::Passthrough { column } => column.clone(),
            FeatureDef::Indicator { column, value } => format!("{column}={value}"),
        }
    }
}

/// Fitted one-hot encoding. Serialized as versioned JSON so inference can
/// re-apply the training-time layout exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub version: String,
    pub label_column: String,
    pub features: Vec<FeatureDef>,
    /// Class names; index = class id.
    pub classes: Vec<String>,
}

impl EncoderSpec {
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(FeatureDef::name).collect()
    }

    pub fn class_index(&self, value: &str) -> Option<usize> {
        self.classes.binary_search_by(|c| c.as_str().cmp(value)).ok()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: EncoderSpec = serde_json::from_str(text)?;
        if spec.version != ENCODER_VERSION {
            return Err(Error::Version {
                expected: ENCODER_VERSION.into(),
                found: spec.version,
            });
        }
        Ok(spec)
    }
}

/// Numeric columns pass through; categorical columns expand to one indicator
/// per distinct value. Categories and classes are ordered lexicographically.
pub fn fit_encoder(t: &RawTable) -> Result<EncoderSpec> {
    if t.has_missing() {
        return Err(Error::invalid("fit_encoder: table has missing cells"));
    }
    let label_idx = t.label_index();
    let mut features = Vec::new();
    for (c, (name, kind)) in t.columns().iter().zip(t.kinds()).enumerate() {
        if c == label_idx {
            continue;
        }
        match kind {
            ColumnKind::Numeric => features.push(FeatureDef::Passthrough {
                column: name.clone(),
            }),
            ColumnKind::Categorical => {
                let values: BTreeSet<&str> = t
                    .rows()
                    .iter()
                    .filter_map(|r| r[c].as_deref())
                    .collect();
                if values.len() == 1 {
                    log::warn!("categorical column `{name}` has a single value");
                }
                features.extend(values.into_iter().map(|v| FeatureDef::Indicator {
                    column: name.clone(),
                    value: v.to_string(),
                }));
            }
        }
    }
    let classes: BTreeSet<&str> = t
        .rows()
        .iter()
        .filter_map(|r| r[label_idx].as_deref())
        .collect();
    if classes.len() < 2 {
        return Err(Error::SingleClass(t.label().to_string()));
    }
    Ok(EncoderSpec {
        version: ENCODER_VERSION.into(),
        label_column: t.label().to_string(),
        features,
        classes: classes.into_iter().map(str::to_string).collect(),
    })
}

/// Encodes rows with a fitted spec. Unseen categories become all-zero
/// indicators; unseen labels are an error.
pub fn apply_encoder(spec: &EncoderSpec, t: &RawTable) -> Result<EncodedDataset> {
    let label_idx = t
        .column_index(&spec.label_column)
        .ok_or_else(|| Error::MissingColumn(spec.label_column.clone()))?;
    let sources = spec
        .features
        .iter()
        .map(|f| {
            let column = match f {
                FeatureDef::Passthrough { column } | FeatureDef::Indicator { column, .. } => column,
            };
            t.column_index(column)
                .ok_or_else(|| Error::MissingColumn(column.clone()))
        })
        .collect::<Result<Vec<_>>>()?;

    let d = spec.n_features();
    let mut x = Matrix::zeros(t.n_rows(), d);
    let mut y = Vec::with_capacity(t.n_rows());
    for (i, row) in t.rows().iter().enumerate() {
        for (j, (f, &src)) in spec.features.iter().zip(&sources).enumerate() {
            let cell = row[src].as_deref().ok_or_else(|| {
                Error::invalid(format!("row {}: missing value in `{}`", i + 1, t.columns()[src]))
            })?;
            x[(i, j)] = match f {
                FeatureDef::Passthrough { column } => parse_number(cell).ok_or_else(|| {
                    Error::invalid(format!("row {}: `{cell}` in `{column}` is not a number", i + 1))
                })?,
                FeatureDef::Indicator { value, .. } => {
                    if cell == value {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
        }
        let label = row[label_idx]
            .as_deref()
            .ok_or_else(|| Error::invalid(format!("row {}: missing label", i + 1)))?;
        y.push(
            spec.class_index(label)
                .ok_or_else(|| Error::UnseenLabel(label.to_string()))?,
        );
    }
    EncodedDataset::new(x, y, spec.feature_names(), spec.n_classes())
}
