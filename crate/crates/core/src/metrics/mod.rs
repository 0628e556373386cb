//! Evaluation quantities: concordance, robustness, fairness, per-speaker
//! bootstrap and rank agreement.

mod bootstrap;
mod ccc;
mod fairness;
mod rank;
mod robustness;

pub use bootstrap::{speaker_bootstrap_ccc, BootstrapConfig, BootstrapEstimate};
pub use ccc::{ccc, ccc_loss_grad, pearson, PairedSeries};
pub(crate) use ccc::{ccc_loss_grad_slices as ccc_loss_grad_impl, ccc_slices as ccc_slices_impl};
pub use fairness::{
    sex_fairness_bias, sex_fairness_score, DimensionFairness, FairnessReport,
};
pub use rank::{average_ranks, spearman};
pub use robustness::{robustness_score, RobustnessConfig};

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
