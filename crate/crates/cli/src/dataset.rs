//! On-disk layout of a prepared dataset directory.
//!
//! ```text
//! dataset.json   manifest: feature names, class names, split sizes, seed
//! encoder.json   fitted one-hot encoder (prep only)
//! train.csv, val.csv, test.csv
//! truth.txt      planted ranking (synth only)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ifenet::data::{EncodedDataset, SplitSpec};
use ifenet::metrics::TruthRanking;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_VERSION: &str = "ifenet-dataset/1";
pub const MANIFEST_FILE: &str = "dataset.json";
pub const ENCODER_FILE: &str = "encoder.json";
pub const TRUTH_FILE: &str = "truth.txt";
pub const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub d: usize,
    pub classes: usize,
}

impl Summary {
    pub fn of(ds: &EncodedDataset) -> Self {
        Self {
            n: ds.n(),
            d: ds.d(),
            classes: ds.n_classes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub train: Summary,
    pub val: Summary,
    pub test: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub source: String,
    pub label_column: Option<String>,
    pub feature_names: Vec<String>,
    pub classes: Vec<String>,
    pub split: SplitSpec,
    pub summary: SplitSummary,
    /// SHA-256 of `encoder.json`, when present.
    pub encoder: Option<String>,
    pub truth: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn split_csv(ds: &EncodedDataset) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    ds.write_csv(&mut buf)?;
    Ok(buf)
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub train: EncodedDataset,
    pub val: EncodedDataset,
    pub test: EncodedDataset,
}

impl Splits {
    pub fn get(&self, name: &str) -> Result<&EncodedDataset> {
        match name {
            "train" => Ok(&self.train),
            "val" => Ok(&self.val),
            "test" => Ok(&self.test),
            other => bail!("unknown split `{other}` (expected train, val or test)"),
        }
    }

    pub fn truth(&self) -> Option<&TruthRanking> {
        self.train.truth()
    }
}

pub fn load_splits(dir: &Path) -> Result<Splits> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path)
        .with_context(|| format!("reading {}", manifest_path.display()))?;
    let manifest: Manifest =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", manifest_path.display()))?;
    if manifest.version != MANIFEST_VERSION {
        bail!(
            "{}: unsupported version `{}` (expected `{MANIFEST_VERSION}`)",
            manifest_path.display(),
            manifest.version
        );
    }
    let truth = match &manifest.truth {
        Some(file) => {
            let path = dir.join(file);
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            Some(TruthRanking::parse(&text, &manifest.feature_names).with_context(|| format!("parsing {}", path.display()))?)
        }
        None => None,
    };
    let load = |name: &str| -> Result<EncodedDataset> {
        let path = dir.join(format!("{name}.csv"));
        let file = fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        let ds = EncodedDataset::read_csv(file, manifest.classes.len())
            .with_context(|| format!("reading {}", path.display()))?;
        if ds.feature_names() != manifest.feature_names.as_slice() {
            bail!("{}: header does not match the manifest's feature names", path.display());
        }
        Ok(match &truth {
            Some(t) => ds.with_truth(t.clone()),
            None => ds,
        })
    };
    Ok(Splits {
        dir: dir.to_path_buf(),
        train: load("train")?,
        val: load("val")?,
        test: load("test")?,
        manifest,
    })
}
