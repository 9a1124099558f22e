mod data;
mod model;
mod ranking;

pub use data::{parse_split, prep, synth};
pub use model::{sweep_r, train, tune};
pub use ranking::{eval_ranking, rank};
