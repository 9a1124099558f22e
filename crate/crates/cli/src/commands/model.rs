use std::path::PathBuf;
use std::time::Instant;

use anyhow::Result;
use ifenet::model::{to_text, IfeNetParams};
use ifenet::train::{self as core_train, fit, random_search, SearchSpace, SweepRow};
use serde::Serialize;

use crate::dataset::{load_splits, Splits};
use crate::output::Outputs;
use crate::report::{self, RunConfig, RunReport, REPORT_VERSION};
use crate::tables::{parse_f64_list, render, Format, SweepCsvRow};
use crate::{threads, SweepArgs, TrainArgs, TuneArgs};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const REPORT_FILE: &str = "report.json";

fn stamp(params: &mut IfeNetParams, splits: &Splits) {
    params.meta.encoder = splits.manifest.encoder.clone();
    params.meta.feature_names = splits.manifest.feature_names.clone();
}

fn print_result(r: &RunReport) {
    let test = &r.metrics["test"];
    println!(
        "test accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}",
        test.accuracy, test.precision_macro, test.recall_macro, test.f1_macro
    );
    if let Some(o) = &r.oracle {
        if let Some(row) = o.ndcg.iter().find(|row| row.k == 3).or(o.ndcg.last()) {
            println!("ndcg@{} vs {} oracle {:.4}", row.k, o.kind.as_str(), row.ndcg);
        }
    }
}

pub fn train(a: &TrainArgs) -> Result<Vec<PathBuf>> {
    let splits = load_splits(&a.data)?;
    let cfg = a.train.resolve()?;
    let start = Instant::now();
    let (mut params, history) = fit(&splits.train, &splits.val, &cfg)?;
    log::info!(
        "trained {} epochs in {:.2?} (best epoch {})",
        history.records.len(),
        start.elapsed(),
        history.best_epoch
    );
    stamp(&mut params, &splits);
    let config = RunConfig {
        data: a.data.display().to_string(),
        train: cfg,
        oracle_repeats: a.repeats,
        trials: None,
        space: None,
        r_values: None,
    };
    let report = report::build("train", config, &splits, &params, Some(&history))?;

    let mut out = Outputs::new();
    out.add(a.out.join(CHECKPOINT_FILE), to_text(&params));
    out.add(
        a.out.join(format!("history.{}", a.format.ext())),
        render(&history.records, a.format)?,
    );
    out.add_json(a.out.join(REPORT_FILE), &report)?;
    print_result(&report);
    out.commit()
}

pub fn tune(a: &TuneArgs) -> Result<Vec<PathBuf>> {
    let splits = load_splits(&a.data)?;
    let base = a.train.resolve()?;
    let space = SearchSpace::default();
    let start = Instant::now();
    let result = random_search(&space, a.trials, &base, &splits.train, &splits.val, base.seed, threads())?;
    log::info!("{} trials in {:.2?}", a.trials, start.elapsed());
    let best = result.best_config().clone();
    let mut params = result.best_params.clone();
    stamp(&mut params, &splits);
    let config = RunConfig {
        data: a.data.display().to_string(),
        train: best.clone(),
        oracle_repeats: a.repeats,
        trials: Some(a.trials),
        space: Some(space),
        r_values: None,
    };
    let report = report::build("tune", config, &splits, &params, None)?;

    let mut out = Outputs::new();
    let trials = match a.format {
        Format::Csv => result.to_csv().into_bytes(),
        Format::Json => render(&result.trials, Format::Json)?,
    };
    out.add(a.out.join(format!("trials.{}", a.format.ext())), trials);
    out.add_json(a.out.join("best_config.json"), &best)?;
    out.add(a.out.join(CHECKPOINT_FILE), to_text(&params));
    out.add_json(a.out.join(REPORT_FILE), &report)?;
    println!(
        "best trial {} of {}: lr {} batch {} hidden {} r {:.3} (val accuracy {:.4})",
        result.best_trial,
        a.trials,
        best.learning_rate,
        best.batch_size,
        best.hidden.unwrap_or_default(),
        best.r,
        result.trials[result.best_trial].val_accuracy
    );
    print_result(&report);
    out.commit()
}

#[derive(Debug, Serialize)]
struct SweepReport<'a> {
    version: &'a str,
    command: &'a str,
    config: RunConfig,
    rows: &'a [SweepRow],
}

pub fn sweep_r(a: &SweepArgs) -> Result<Vec<PathBuf>> {
    let splits = load_splits(&a.data)?;
    let rs = parse_f64_list(&a.r_list)?;
    let base = a.train.resolve()?;
    let start = Instant::now();
    let rows = core_train::sweep_r(&rs, &base, &splits.train, &splits.val, &splits.test, threads())?;
    log::info!("{} runs in {:.2?}", rs.len(), start.elapsed());

    let mut out = Outputs::new();
    let table = match a.format {
        Format::Csv => {
            let slim: Vec<SweepCsvRow> = rows
                .iter()
                .map(|r| SweepCsvRow {
                    r: r.r,
                    test_accuracy: r.test_accuracy,
                })
                .collect();
            render(&slim, Format::Csv)?
        }
        Format::Json => render(&rows, Format::Json)?,
    };
    out.add(a.out.join(format!("sweep.{}", a.format.ext())), table);
    let config = RunConfig {
        data: a.data.display().to_string(),
        train: base,
        oracle_repeats: 0,
        trials: None,
        space: None,
        r_values: Some(rs),
    };
    out.add_json(
        a.out.join(REPORT_FILE),
        &SweepReport {
            version: REPORT_VERSION,
            command: "sweep-r",
            config,
            rows: &rows,
        },
    )?;
    println!("{:>6}  {}", "r", "test_accuracy");
    for r in &rows {
        println!("{:>6}  {:.4}", r.r, r.test_accuracy);
    }
    out.commit()
}
