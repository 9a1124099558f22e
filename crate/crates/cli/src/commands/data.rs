use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use ifenet::data::{
    apply_encoder, drop_missing, fit_encoder, load_csv, split, synth_dataset, ColumnKind, CsvOptions, EncodedDataset,
    SplitSizes, SplitSpec,
};

use crate::dataset::{
    sha256_hex, split_csv, Manifest, SplitSummary, Summary, ENCODER_FILE, MANIFEST_FILE, MANIFEST_VERSION, TRUTH_FILE,
};
use crate::output::Outputs;
use crate::report::summary_line;
use crate::{PrepArgs, SynthArgs};

/// Three numbers; any with a decimal point or exponent makes them fractions.
pub fn parse_split(text: &str) -> Result<SplitSizes> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        bail!("--split needs three comma-separated values, got `{text}`");
    }
    if parts.iter().any(|p| p.contains(['.', 'e', 'E'])) {
        let mut f = [0.0; 3];
        for (v, p) in f.iter_mut().zip(&parts) {
            *v = p.parse().with_context(|| format!("bad fraction `{p}`"))?;
        }
        Ok(SplitSizes::Fractions(f))
    } else {
        let mut c = [0usize; 3];
        for (v, p) in c.iter_mut().zip(&parts) {
            *v = p.parse().with_context(|| format!("bad count `{p}`"))?;
        }
        Ok(SplitSizes::Counts(c))
    }
}

fn stage_splits(
    out: &mut Outputs,
    dir: &std::path::Path,
    parts: [&EncodedDataset; 3],
) -> Result<SplitSummary> {
    for (name, ds) in ["train", "val", "test"].into_iter().zip(parts) {
        out.add(dir.join(format!("{name}.csv")), split_csv(ds)?);
    }
    Ok(SplitSummary {
        train: Summary::of(parts[0]),
        val: Summary::of(parts[1]),
        test: Summary::of(parts[2]),
    })
}

fn print_summary(full: &EncodedDataset, summary: &SplitSummary) {
    println!(
        "{}  train {}  val {}  test {}",
        summary_line(&Summary::of(full)),
        summary.train.n,
        summary.val.n,
        summary.test.n
    );
}

pub fn prep(a: &PrepArgs) -> Result<Vec<PathBuf>> {
    if !a.delimiter.is_ascii() {
        bail!("delimiter must be a single ASCII character");
    }
    let mut options = CsvOptions {
        delimiter: a.delimiter as u8,
        ..CsvOptions::default()
    };
    for c in &a.categorical {
        options.kinds.insert(c.clone(), ColumnKind::Categorical);
    }
    let raw = load_csv(&a.data, &a.label_col, &options).with_context(|| format!("loading {}", a.data.display()))?;
    let raw = if a.drop_cols.is_empty() {
        raw
    } else {
        raw.drop_columns(&a.drop_cols)?
    };
    let before = raw.n_rows();
    let clean = drop_missing(&raw)?;
    log::info!("dropped {} of {before} rows with missing values", before - clean.n_rows());
    let encoder = fit_encoder(&clean)?;
    let full = apply_encoder(&encoder, &clean)?;
    let spec = SplitSpec {
        sizes: parse_split(&a.split)?,
        seed: a.seed,
        stratify: !a.no_stratify,
    };
    let (tr, va, te) = split(&full, &spec)?;

    let mut out = Outputs::new();
    let encoder_json = encoder.to_json()?;
    let summary = stage_splits(&mut out, &a.out, [&tr, &va, &te])?;
    let manifest = Manifest {
        version: MANIFEST_VERSION.into(),
        source: a.data.display().to_string(),
        label_column: Some(a.label_col.clone()),
        feature_names: encoder.feature_names(),
        classes: encoder.classes.clone(),
        split: spec,
        summary: summary.clone(),
        encoder: Some(sha256_hex(encoder_json.as_bytes())),
        truth: None,
    };
    out.add(a.out.join(ENCODER_FILE), encoder_json);
    out.add_json(a.out.join(MANIFEST_FILE), &manifest)?;
    print_summary(&full, &summary);
    out.commit()
}

pub fn synth(a: &SynthArgs) -> Result<Vec<PathBuf>> {
    let full = synth_dataset(a.n, a.d, a.k, a.noise, a.seed)?;
    let spec = SplitSpec {
        sizes: parse_split(&a.split)?,
        seed: a.seed,
        stratify: true,
    };
    let (tr, va, te) = split(&full, &spec)?;
    let names = full.feature_names().to_vec();
    let truth = full.truth().expect("synthetic data carries a truth ranking");

    let mut out = Outputs::new();
    let summary = stage_splits(&mut out, &a.out, [&tr, &va, &te])?;
    let manifest = Manifest {
        version: MANIFEST_VERSION.into(),
        source: format!("synth n={} d={} k={} noise={} seed={}", a.n, a.d, a.k, a.noise, a.seed),
        label_column: None,
        feature_names: names.clone(),
        classes: vec!["0".into(), "1".into()],
        split: spec,
        summary: summary.clone(),
        encoder: None,
        truth: Some(TRUTH_FILE.into()),
    };
    out.add(a.out.join(TRUTH_FILE), format!("{}\n", truth.to_text(&names)));
    out.add_json(a.out.join(MANIFEST_FILE), &manifest)?;
    print_summary(&full, &summary);
    out.commit()
}
