//! Delimiter-separated and JSON renderings of the tabular outputs.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use ifenet::metrics::FeatureRanking;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Serializes `rows` as CSV (header from the field names) or a JSON array.
pub fn render<T: Serialize>(rows: &[T], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r)?;
            }
            Ok(w.into_inner().context("flushing csv")?)
        }
        Format::Json => {
            let mut text = serde_json::to_string_pretty(rows)?;
            text.push('\n');
            Ok(text.into_bytes())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub rank: usize,
    pub feature: String,
    pub score: f64,
}

pub fn rank_rows(ranking: &FeatureRanking, names: &[String]) -> Vec<RankRow> {
    ranking
        .order()
        .iter()
        .enumerate()
        .map(|(i, &j)| RankRow {
            rank: i + 1,
            feature: names[j].clone(),
            score: ranking.scores()[j],
        })
        .collect()
}

/// Reads a ranking written by `rank` (CSV or JSON, chosen by extension) and
/// returns its rows sorted by rank.
pub fn read_ranking(path: &Path) -> Result<Vec<RankRow>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows: Vec<RankRow> = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    } else {
        csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<Result<_, _>>()
            .with_context(|| format!("parsing {}", path.display()))?
    };
    rows.sort_by_key(|r| r.rank);
    for (i, r) in rows.iter().enumerate() {
        if r.rank != i + 1 {
            bail!("{}: ranks must be 1..{}", path.display(), rows.len());
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NdcgRow {
    pub k: usize,
    pub ndcg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCsvRow {
    pub r: f64,
    pub test_accuracy: f64,
}

/// `"1,2,5"` or `"1..4"` (inclusive) or a mix: `"1..3,8"`.
pub fn parse_usize_list(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
            if a > b {
                bail!("empty range `{part}`");
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().with_context(|| format!("bad integer `{part}`"))?);
        }
    }
    if out.is_empty() {
        bail!("empty list");
    }
    Ok(out)
}

pub fn parse_f64_list(text: &str) -> Result<Vec<f64>> {
    let out: Vec<f64> = text
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<f64>().with_context(|| format!("bad number `{p}`")))
        .collect::<Result<_>>()?;
    if out.is_empty() {
        bail!("empty list");
    }
    Ok(out)
}
