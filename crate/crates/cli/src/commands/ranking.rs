use std::collections::HashSet;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use ifenet::ife::global_ranking;
use ifenet::metrics::{evaluate_ranking, TruthRanking};
use ifenet::model::{importance_scores, load, Architecture};
use ifenet::Matrix;

use crate::dataset::load_splits;
use crate::tables::{parse_usize_list, rank_rows, read_ranking, render, Format, NdcgRow};
use crate::output::Outputs;
use crate::{EvalRankingArgs, RankArgs};

fn score_matrix(s: &Matrix, names: &[String], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(names)?;
            for i in 0..s.rows() {
                w.write_record(s.row(i).iter().map(|v| format!("{v:?}")))?;
            }
            Ok(w.into_inner().context("flushing csv")?)
        }
        Format::Json => {
            let rows: Vec<&[f64]> = (0..s.rows()).map(|i| s.row(i)).collect();
            let mut text = serde_json::to_string(&serde_json::json!({ "features": names, "scores": rows }))?;
            text.push('\n');
            Ok(text.into_bytes())
        }
    }
}

pub fn rank(a: &RankArgs) -> Result<Vec<PathBuf>> {
    let params = load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    if params.arch() == Architecture::Fnn {
        bail!("{} is an ablation model without a trained exclusion module", a.model.display());
    }
    let splits = load_splits(&a.data)?;
    let ds = splits.get(&a.split)?;
    params.check_input(ds.x())?;
    if params.meta.encoder.is_some() && params.meta.encoder != splits.manifest.encoder {
        log::warn!("checkpoint was trained with a different encoder than {}", a.data.display());
    }
    let names = &splits.manifest.feature_names;
    let s = importance_scores(&params, ds.x())?;
    let global = global_ranking(&s)?;
    let rows = rank_rows(&global, names);

    let mut out = Outputs::new();
    out.add(a.out.join(format!("ranking.{}", a.format.ext())), render(&rows, a.format)?);
    if a.per_instance {
        out.add(a.out.join(format!("scores.{}", a.format.ext())), score_matrix(&s, names, a.format)?);
    }
    for r in &rows {
        println!("{:>3}  {:<24} {:.6}", r.rank, r.feature, r.score);
    }
    out.commit()
}

pub fn eval_ranking(a: &EvalRankingArgs) -> Result<Vec<PathBuf>> {
    let rows = read_ranking(&a.ranking)?;
    let names: Vec<String> = rows.iter().map(|r| r.feature.clone()).collect();
    let unique: HashSet<&String> = names.iter().collect();
    if unique.len() != names.len() {
        bail!("{} lists a feature twice", a.ranking.display());
    }
    let text = std::fs::read_to_string(&a.truth).with_context(|| format!("reading {}", a.truth.display()))?;
    let truth = TruthRanking::parse(&text, &names)
        .with_context(|| format!("{} and {} cover different features", a.truth.display(), a.ranking.display()))?;
    let ks = match &a.k_list {
        Some(list) => parse_usize_list(list)?,
        None => (1..=names.len()).collect(),
    };
    // Names are indexed in ranking order, so the predicted order is 0..d.
    let order: Vec<usize> = (0..names.len()).collect();
    let eval = evaluate_ranking(&order, &truth, &ks)?;
    let table: Vec<NdcgRow> = eval.ndcg.iter().map(|&(k, ndcg)| NdcgRow { k, ndcg }).collect();

    let mut out = Outputs::new();
    out.add(a.out.join(format!("ndcg.{}", a.format.ext())), render(&table, a.format)?);
    println!("{:>3}  ndcg", "k");
    for r in &table {
        println!("{:>3}  {:.4}", r.k, r.ndcg);
    }
    out.commit()
}
