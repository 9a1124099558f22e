//! Minibatch training with early stopping, random search and the `r` sweep.

mod adam;
mod search;

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use search::{random_search, sweep_r, SearchResult, SearchSpace, SweepRow, TrialRecord};

use crate::data::EncodedDataset;
use crate::error::{Error, Result};
use crate::model::{init, predict, Architecture, IfeNetParams, Mode};
use crate::seed::{self, tag};
use crate::tape::Tape;

pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
pub const DEFAULT_BATCH_SIZE: usize = 64;
pub const DEFAULT_MAX_EPOCHS: usize = 120;
pub const DEFAULT_PATIENCE: usize = 10;
pub const DEFAULT_R: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub arch: Architecture,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub r: f64,
    /// Hidden width; `None` means `d`.
    pub hidden: Option<usize>,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            arch: Architecture::IfeNet,
            learning_rate: DEFAULT_LEARNING_RATE,
            batch_size: DEFAULT_BATCH_SIZE,
            max_epochs: DEFAULT_MAX_EPOCHS,
            patience: DEFAULT_PATIENCE,
            seed: 0,
            r: DEFAULT_R,
            hidden: None,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    /// `learning_rate = 0` is allowed so a run can be checked against its
    /// initialization.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid(format!("learning rate must be >= 0, got {}", self.learning_rate)));
        }
        if self.batch_size < 2 {
            return Err(Error::invalid(format!("batch size must be >= 2, got {}", self.batch_size)));
        }
        if self.max_epochs < 1 || self.patience < 1 {
            return Err(Error::invalid("max_epochs and patience must be >= 1"));
        }
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(Error::invalid(format!("r must be > 0, got {}", self.r)));
        }
        if self.hidden == Some(0) {
            return Err(Error::invalid("hidden size must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub stop_reason: StopReason,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_accuracy\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{:?},{:?}", r.epoch, r.train_loss, r.val_accuracy);
        }
        out
    }
}

pub fn accuracy(params: &IfeNetParams, ds: &EncodedDataset) -> Result<f64> {
    let pred = predict(params, ds.x())?;
    let hits = pred.classes.iter().zip(ds.y()).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / ds.n() as f64)
}

fn check_compatible(params: &IfeNetParams, ds: &EncodedDataset, what: &str) -> Result<()> {
    if ds.d() != params.d() {
        return Err(Error::DimensionMismatch {
            what: format!("{what} features"),
            expected: params.d(),
            found: ds.d(),
        });
    }
    if ds.n_classes() != params.n_classes() {
        return Err(Error::DimensionMismatch {
            what: format!("{what} classes"),
            expected: params.n_classes(),
            found: ds.n_classes(),
        });
    }
    Ok(())
}

/// Contiguous minibatches over `order`; a trailing batch of one row is dropped.
fn batches(order: &[usize], size: usize) -> impl Iterator<Item = &[usize]> {
    order.chunks(size).filter(|b| b.len() >= 2)
}

/// One optimizer step on the rows `idx`; returns the batch loss.
fn step(
    params: &mut IfeNetParams,
    ds: &EncodedDataset,
    idx: &[usize],
    adam: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<f64> {
    let x = ds.x().select_rows(idx);
    let y: Vec<usize> = idx.iter().map(|&i| ds.y()[i]).collect();
    let mut tape = Tape::new();
    let fwd = params.forward(&mut tape, &x, Mode::Train)?;
    let loss = tape.cross_entropy_loss(fwd.logits, &y)?;
    let grads = tape.backward(loss)?;
    let ids = fwd.ids.all();
    let g: Vec<_> = ids
        .iter()
        .map(|&id| grads.get(id).ok_or_else(|| Error::invalid("missing gradient")))
        .collect::<Result<_>>()?;
    adam_step(&mut params.trainable_mut(), &g, adam, cfg.learning_rate, &cfg.adam)?;
    if let Some((mean, var)) = fwd.batch_stats {
        // Running variance tracks the unbiased estimate.
        let b = idx.len() as f64;
        let var: Vec<f64> = var.iter().map(|v| v * b / (b - 1.0)).collect();
        params.bn.update_running(&mean, &var);
    }
    Ok(tape.value(loss)[(0, 0)])
}

/// Trains from `params`, returning the snapshot with the best validation
/// accuracy (earliest epoch on ties) and the per-epoch history.
pub fn train(
    mut params: IfeNetParams,
    train_set: &EncodedDataset,
    val_set: &EncodedDataset,
    cfg: &TrainConfig,
) -> Result<(IfeNetParams, TrainHistory)> {
    cfg.validate()?;
    check_compatible(&params, train_set, "train")?;
    check_compatible(&params, val_set, "validation")?;
    if train_set.n() < 2 {
        return Err(Error::EmptyDataset("training needs at least two rows".into()));
    }

    let mut adam = AdamState::new(params.trainable());
    let mut order: Vec<usize> = (0..train_set.n()).collect();
    let mut records = Vec::new();
    let mut best: Option<(IfeNetParams, usize, f64)> = None;
    let mut stale = 0;
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=cfg.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut seed::rng(cfg.seed, &[tag::SHUFFLE, epoch as u64]));
        let mut loss_sum = 0.0;
        let mut n_batches = 0;
        for idx in batches(&order, cfg.batch_size) {
            loss_sum += step(&mut params, train_set, idx, &mut adam, cfg)?;
            n_batches += 1;
        }
        let val_accuracy = accuracy(&params, val_set)?;
        records.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n_batches as f64,
            val_accuracy,
        });
        log::debug!("epoch {epoch}: loss {:.5} val acc {val_accuracy:.4}", loss_sum / n_batches as f64);

        if best.as_ref().is_none_or(|b| val_accuracy > b.2) {
            best = Some((params.clone(), epoch, val_accuracy));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                stop_reason = StopReason::EarlyStop;
                break;
            }
        }
    }

    let (best_params, best_epoch, best_val_accuracy) = best.expect("at least one epoch ran");
    Ok((
        best_params,
        TrainHistory {
            records,
            best_epoch,
            best_val_accuracy,
            stop_reason,
        },
    ))
}

/// Initializes from `cfg` (seeded) and trains.
pub fn fit(
    train_set: &EncodedDataset,
    val_set: &EncodedDataset,
    cfg: &TrainConfig,
) -> Result<(IfeNetParams, TrainHistory)> {
    cfg.validate()?;
    let mut params = init(
        cfg.arch,
        train_set.d(),
        train_set.n_classes(),
        cfg.hidden,
        cfg.r,
        cfg.seed,
    )?;
    params.meta.feature_names = train_set.feature_names().to_vec();
    train(params, train_set, val_set, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split, synth_dataset, SplitSizes, SplitSpec};

    fn splits(n: usize, d: usize, k: usize, noise: f64, seed: u64) -> (EncodedDataset, EncodedDataset, EncodedDataset) {
        let ds = synth_dataset(n, d, k, noise, seed).unwrap();
        let spec = SplitSpec {
            sizes: SplitSizes::Fractions([0.7, 0.15, 0.15]),
            seed,
            stratify: true,
        };
        split(&ds, &spec).unwrap()
    }

    #[test]
    fn zero_learning_rate_keeps_init_and_stops_after_patience() {
        let (tr, va, _) = splits(200, 4, 2, 0.1, 1);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            patience: 4,
            seed: 5,
            ..TrainConfig::default()
        };
        let start = init(cfg.arch, 4, 2, None, cfg.r, cfg.seed).unwrap();
        let (p, h) = fit(&tr, &va, &cfg).unwrap();
        assert_eq!(p.trainable(), start.trainable());
        assert_eq!(h.records.len(), 1 + cfg.patience);
        assert_eq!(h.best_epoch, 1);
        assert_eq!(h.stop_reason, StopReason::EarlyStop);
    }

    #[test]
    fn separable_data_is_learned() {
        let (tr, va, _) = splits(600, 4, 4, 0.0, 2);
        let (p, h) = fit(&tr, &va, &TrainConfig::default()).unwrap();
        assert!(h.best_val_accuracy >= 0.95, "{}", h.best_val_accuracy);
        assert!(h.records.len() <= DEFAULT_MAX_EPOCHS);
        assert_eq!(accuracy(&p, &va).unwrap(), h.best_val_accuracy);
        let max = h.records.iter().map(|r| r.val_accuracy).fold(0.0, f64::max);
        assert_eq!(max, h.best_val_accuracy);
        let first = h.records.iter().find(|r| r.val_accuracy == max).unwrap();
        assert_eq!(first.epoch, h.best_epoch);
    }

    #[test]
    fn deterministic_history() {
        let (tr, va, _) = splits(300, 5, 2, 0.2, 3);
        let cfg = TrainConfig {
            max_epochs: 8,
            seed: 11,
            ..TrainConfig::default()
        };
        let (pa, ha) = fit(&tr, &va, &cfg).unwrap();
        let (pb, hb) = fit(&tr, &va, &cfg).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(pa, pb);
        assert_eq!(ha.to_csv(), hb.to_csv());
    }

    fn batch_loss(p: &IfeNetParams, ds: &EncodedDataset, idx: &[usize]) -> f64 {
        let x = ds.x().select_rows(idx);
        let y: Vec<usize> = idx.iter().map(|&i| ds.y()[i]).collect();
        let mut tape = Tape::new();
        let fwd = p.forward(&mut tape, &x, Mode::Train).unwrap();
        let loss = tape.cross_entropy_loss(fwd.logits, &y).unwrap();
        tape.value(loss)[(0, 0)]
    }

    #[test]
    fn first_step_lowers_batch_loss() {
        let (tr, _, _) = splits(200, 4, 2, 0.1, 4);
        let idx: Vec<usize> = (0..32).collect();
        for seed in 0..10 {
            let cfg = TrainConfig {
                learning_rate: 1e-4,
                seed,
                ..TrainConfig::default()
            };
            let mut p = init(cfg.arch, 4, 2, None, cfg.r, seed).unwrap();
            let before = batch_loss(&p, &tr, &idx);
            let mut adam = AdamState::new(p.trainable());
            step(&mut p, &tr, &idx, &mut adam, &cfg).unwrap();
            let after = batch_loss(&p, &tr, &idx);
            assert!(after < before, "seed {seed}: {after} >= {before}");
        }
    }

    #[test]
    fn each_row_once_per_epoch() {
        let order: Vec<usize> = (0..10).collect();
        let seen: Vec<usize> = batches(&order, 3).flatten().copied().collect();
        assert_eq!(seen, (0..9).collect::<Vec<_>>());
        let seen: Vec<usize> = batches(&order, 4).flatten().copied().collect();
        assert_eq!(seen, order);
    }

    #[test]
    fn mismatched_splits_rejected() {
        let (tr, _, _) = splits(100, 4, 2, 0.1, 5);
        let (_, other, _) = splits(100, 5, 2, 0.1, 5);
        assert!(matches!(
            fit(&tr, &other, &TrainConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad = TrainConfig {
            batch_size: 1,
            ..TrainConfig::default()
        };
        assert!(fit(&tr, &tr, &bad).is_err());
        let tiny = tr.subset(&[0]).unwrap();
        assert!(fit(&tiny, &tr, &TrainConfig::default()).is_err());
    }
}
