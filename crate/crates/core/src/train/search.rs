use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{accuracy, fit, TrainConfig};
use crate::data::EncodedDataset;
use crate::error::{Error, Result};
use crate::model::IfeNetParams;
use crate::seed::{self, tag};

/// Hyperparameter domains for random search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    /// Inclusive integer interval.
    pub hidden: (usize, usize),
    /// Closed real interval.
    pub r: (f64, f64),
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            learning_rates: vec![0.01, 0.001, 0.0001],
            batch_sizes: vec![32, 64, 128],
            hidden: (16, 128),
            r: (1.0, 5.0),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rates.is_empty() || self.batch_sizes.is_empty() {
            return Err(Error::EmptySearchSpace);
        }
        if self.hidden.0 > self.hidden.1 || !(self.r.0 <= self.r.1) {
            return Err(Error::EmptySearchSpace);
        }
        Ok(())
    }

    /// Independent uniform draws for trial `t`.
    pub fn sample(&self, base: &TrainConfig, seed: u64, trial: usize) -> TrainConfig {
        let mut rng = seed::rng(seed, &[tag::TRIAL, trial as u64]);
        let learning_rate = self.learning_rates[rng.random_range(0..self.learning_rates.len())];
        let batch_size = self.batch_sizes[rng.random_range(0..self.batch_sizes.len())];
        let hidden = rng.random_range(self.hidden.0..=self.hidden.1);
        let r = if self.r.0 == self.r.1 {
            self.r.0
        } else {
            rng.random_range(self.r.0..=self.r.1)
        };
        TrainConfig {
            learning_rate,
            batch_size,
            hidden: Some(hidden),
            r,
            seed: seed::derive_seed(seed, &[tag::TRIAL, trial as u64, tag::INIT]),
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub config: TrainConfig,
    pub val_accuracy: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best_trial: usize,
    pub best_params: IfeNetParams,
    pub trials: Vec<TrialRecord>,
}

impl SearchResult {
    pub fn best_config(&self) -> &TrainConfig {
        &self.trials[self.best_trial].config
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,learning_rate,batch_size,hidden,r,seed,val_accuracy,best_epoch,epochs_run\n");
        for t in &self.trials {
            let c = &t.config;
            out.push_str(&format!(
                "{},{:?},{},{},{:?},{},{:?},{},{}\n",
                t.trial,
                c.learning_rate,
                c.batch_size,
                c.hidden.map_or(String::new(), |h| h.to_string()),
                c.r,
                c.seed,
                t.val_accuracy,
                t.best_epoch,
                t.epochs_run
            ));
        }
        out
    }
}

/// Runs `f(i)` for `i in 0..n`, results in index order. Uses up to
/// `threads` workers when the `parallel` feature is on.
#[cfg(feature = "parallel")]
fn run_indexed<T: Send>(n: usize, threads: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    use rayon::prelude::*;
    if threads <= 1 {
        return (0..n).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}

#[cfg(not(feature = "parallel"))]
fn run_indexed<T>(n: usize, _threads: usize, f: impl Fn(usize) -> Result<T>) -> Result<Vec<T>> {
    (0..n).map(f).collect()
}

/// Random search; the winner has the highest validation accuracy, earlier
/// trials winning ties. Results do not depend on `threads`.
pub fn random_search(
    space: &SearchSpace,
    trials: usize,
    base: &TrainConfig,
    train_set: &EncodedDataset,
    val_set: &EncodedDataset,
    seed: u64,
    threads: usize,
) -> Result<SearchResult> {
    space.validate()?;
    if trials == 0 {
        return Err(Error::invalid("random search needs at least one trial"));
    }
    let outcomes = run_indexed(trials, threads, |t| {
        let cfg = space.sample(base, seed, t);
        let (params, hist) = fit(train_set, val_set, &cfg)?;
        log::info!(
            "trial {t}: lr {} batch {} hidden {:?} r {:.3} -> val acc {:.4}",
            cfg.learning_rate,
            cfg.batch_size,
            cfg.hidden,
            cfg.r,
            hist.best_val_accuracy
        );
        let record = TrialRecord {
            trial: t,
            config: cfg,
            val_accuracy: hist.best_val_accuracy,
            best_epoch: hist.best_epoch,
            epochs_run: hist.records.len(),
        };
        Ok((record, params))
    })?;
    let mut best_trial = 0;
    for (i, (rec, _)) in outcomes.iter().enumerate() {
        if rec.val_accuracy > outcomes[best_trial].0.val_accuracy {
            best_trial = i;
        }
    }
    let mut trials_out = Vec::with_capacity(trials);
    let mut best_params = None;
    for (i, (rec, params)) in outcomes.into_iter().enumerate() {
        if i == best_trial {
            best_params = Some(params);
        }
        trials_out.push(rec);
    }
    Ok(SearchResult {
        best_trial,
        best_params: best_params.expect("best trial exists"),
        trials: trials_out,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub r: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub best_epoch: usize,
}

/// Trains one model per `r`, everything else fixed.
pub fn sweep_r(
    rs: &[f64],
    base: &TrainConfig,
    train_set: &EncodedDataset,
    val_set: &EncodedDataset,
    test_set: &EncodedDataset,
    threads: usize,
) -> Result<Vec<SweepRow>> {
    if rs.is_empty() {
        return Err(Error::invalid("sweep needs at least one r"));
    }
    run_indexed(rs.len(), threads, |i| {
        let cfg = TrainConfig {
            r: rs[i],
            ..base.clone()
        };
        let (params, hist) = fit(train_set, val_set, &cfg)?;
        let test_accuracy = accuracy(&params, test_set)?;
        log::info!("r {}: test acc {test_accuracy:.4}", rs[i]);
        Ok(SweepRow {
            r: rs[i],
            val_accuracy: hist.best_val_accuracy,
            test_accuracy,
            best_epoch: hist.best_epoch,
        })
    })
}
