//! Iterative feature exclusion (IFE) for tabular classification.
//!
//! The crate is layered bottom-up:
//!
//! - [`tape`]: a small reverse-mode autodiff tape over dense `f64` matrices.
//! - [`data`]: CSV ingestion, one-hot encoding, stratified splits and planted
//!   synthetic data.
//! - [`ife`]: the exclusion module that scores each feature per instance.
//! - [`model`]: batch norm, IFE weighting and a one-hidden-layer network,
//!   plus the checkpoint format.
//! - [`train`]: Adam, early stopping, random search and the `r` sweep.
//! - [`metrics`]: accuracy/precision/recall/F, NDCG@K and permutation
//!   importance.
//!
//! ```
//! use ifenet::data::synth_dataset;
//! use ifenet::ife::{global_ranking, importance_scores, IfeParams};
//! use ifenet::seed;
//!
//! let ds = synth_dataset(50, 4, 2, 0.1, 7).unwrap();
//! let params = IfeParams::init(4, 2, 3.0, &mut seed::rng(7, &[seed::tag::INIT])).unwrap();
//! let s = importance_scores(ds.x(), &params).unwrap();
//! let ranking = global_ranking(&s).unwrap();
//! assert_eq!(ranking.order().len(), 4);
//! ```

pub mod data;
pub mod error;
pub mod ife;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod seed;
pub mod tape;
pub mod train;

pub use error::{Error, Result};
pub use matrix::Matrix;
