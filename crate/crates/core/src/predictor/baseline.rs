//! Built-in affine baseline trained with CCC loss and Adam.
//!
//! The model standardizes the fixed acoustic features and applies one affine
//! map per emotion dimension. Weights start from a ridge least-squares fit on
//! the training subset and are then fine-tuned on the batch CCC loss (mean of
//! `1 - CCC` over the three dimensions) with Adam. After every epoch the dev
//! set is scored and the best epoch's weights are kept.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{extract_features, FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
use crate::audio::{read_wav, AudioClip};
use crate::data::{DatasetManifest, Dimension, DimensionTriple, PerDimension};
use crate::error::{Error, Result};
use crate::metrics::{ccc_loss_grad_impl, ccc_slices_impl};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            epochs: 5,
            batch_size: 32,
            train_fraction: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "train fraction must lie in (0, 1], got {}",
                self.train_fraction
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("need at least one epoch".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config(format!(
                "batch size must be at least 2 for CCC, got {}",
                self.batch_size
            )));
        }
        Ok(())
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
/// Ridge penalty per training sample. Strong enough that the warm start sits
/// short of the CCC optimum, so the Adam epochs still descend.
const RIDGE_LAMBDA: f64 = 0.1;

/// Named features with the standardization fitted on the training subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FeatureSpec {
    fn fit(rows: &[FeatureVector]) -> Self {
        let n = rows.len() as f64;
        let mut mean = vec![0.0; FEATURE_COUNT];
        let mut scale = vec![0.0; FEATURE_COUNT];
        for j in 0..FEATURE_COUNT {
            mean[j] = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
            scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Self {
            names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            mean,
            scale,
        }
    }

    fn standardize(&self, row: &FeatureVector) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| (v - self.mean[j]) / self.scale[j])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub feature_spec: FeatureSpec,
    /// Per dimension: one weight per feature, bias last.
    pub weights: PerDimension<Vec<f64>>,
    pub trained_epochs: usize,
    pub best_epoch: usize,
    pub best_dev_ccc: PerDimension<f64>,
}

impl BaselineModel {
    fn raw_output(&self, z: &[f64], dim: Dimension) -> f64 {
        let w = self.weights.get(dim);
        z.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() + w[FEATURE_COUNT]
    }

    /// Unclamped outputs on a feature row.
    pub fn raw_predict(&self, features: &FeatureVector) -> [f64; 3] {
        let z = self.feature_spec.standardize(features);
        Dimension::ALL.map(|d| self.raw_output(&z, d))
    }

    pub fn predict_features(&self, features: &FeatureVector) -> DimensionTriple {
        let [a, d, v] = self.raw_predict(features);
        DimensionTriple::clamped(a, d, v)
    }

    pub fn predict_clip(&self, clip: &AudioClip) -> Result<DimensionTriple> {
        Ok(self.predict_features(&extract_features(clip)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: Self = serde_json::from_str(&text)?;
        for d in Dimension::ALL {
            if model.weights.get(d).len() != FEATURE_COUNT + 1 {
                return Err(Error::Config(format!(
                    "{}: {} weights must have length {}",
                    path.display(),
                    d.name(),
                    FEATURE_COUNT + 1
                )));
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean over dimensions of `1 - CCC` on the full training subset.
    pub train_loss: f64,
    pub mean_batch_loss: f64,
    pub dev_ccc: PerDimension<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub config: TrainConfig,
    pub train_records: usize,
    pub train_size: usize,
    pub dev_size: usize,
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_dev_ccc: PerDimension<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: BaselineModel,
    pub log: TrainingLog,
}

/// Number of training records kept at `fraction` (rounded up).
pub fn subsample_size(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).ceil() as usize).clamp(1, n.max(1))
}

/// Seeded uniform subset of `0..n`, returned in ascending order.
pub fn subsample_indices(n: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let keep = subsample_size(n, fraction);
    let mut idx: Vec<usize> = (0..n).collect();
    if keep < n {
        SplitMix64::from_key(&[&seed.to_string(), "subsample"]).shuffle(&mut idx);
        idx.truncate(keep);
        idx.sort_unstable();
    }
    idx
}

/// Features and normalized labels of every record, in manifest order.
pub fn extract_dataset(manifest: &DatasetManifest) -> Result<(Vec<FeatureVector>, Vec<DimensionTriple>)> {
    let features = manifest
        .records
        .par_iter()
        .map(|r| {
            let path = manifest.audio_path(r);
            let clip = read_wav(&path)?;
            extract_features(&clip).map_err(|e| match e {
                Error::Degenerate(m) => Error::Degenerate(format!("{}: {m}", r.sample_id)),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((features, manifest.labels()))
}

pub fn train_baseline(
    train: &DatasetManifest,
    dev: &DatasetManifest,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (train_x, train_y) = extract_dataset(train)?;
    let (dev_x, dev_y) = extract_dataset(dev)?;
    train_on_features(&train_x, &train_y, &dev_x, &dev_y, cfg)
}

pub fn train_on_features(
    train_x: &[FeatureVector],
    train_y: &[DimensionTriple],
    dev_x: &[FeatureVector],
    dev_y: &[DimensionTriple],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_x.len() != train_y.len() || dev_x.len() != dev_y.len() {
        return Err(Error::Shape("features and labels differ in length".into()));
    }
    if dev_x.len() < 2 {
        return Err(Error::Config("dev set needs at least 2 samples".into()));
    }
    let keep = subsample_indices(train_x.len(), cfg.train_fraction, cfg.seed);
    if keep.len() < cfg.batch_size {
        return Err(Error::Config(format!(
            "{} training samples after subsampling, need at least one batch of {}",
            keep.len(),
            cfg.batch_size
        )));
    }

    let rows: Vec<FeatureVector> = keep.iter().map(|&i| train_x[i]).collect();
    let spec = FeatureSpec::fit(&rows);
    let z: Vec<Vec<f64>> = rows.iter().map(|r| spec.standardize(r)).collect();
    let y: Vec<[f64; 3]> = keep.iter().map(|&i| train_y[i].to_array()).collect();
    let dev_z: Vec<Vec<f64>> = dev_x.iter().map(|r| spec.standardize(r)).collect();
    let dev_t: Vec<[f64; 3]> = dev_y.iter().map(|t| t.to_array()).collect();

    let mut model = BaselineModel {
        feature_spec: spec,
        weights: PerDimension::from_fn(|d| ridge_fit(&z, &y, d.index())),
        trained_epochs: 0,
        best_epoch: 0,
        best_dev_ccc: PerDimension::default(),
    };

    let n_params = FEATURE_COUNT + 1;
    let mut adam_m = [vec![0.0; n_params], vec![0.0; n_params], vec![0.0; n_params]];
    let mut adam_v = adam_m.clone();
    let mut step = 0i32;

    let mut order: Vec<usize> = (0..z.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, BaselineModel, PerDimension<f64>, usize)> = None;

    for epoch in 1..=cfg.epochs {
        SplitMix64::from_key(&[&cfg.seed.to_string(), "epoch", &epoch.to_string()])
            .shuffle(&mut order);
        let mut batch_losses = Vec::new();
        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            if batch.len() < 2 {
                continue;
            }
            let mut grads = [vec![0.0; n_params], vec![0.0; n_params], vec![0.0; n_params]];
            let mut loss = 0.0;
            for dim in Dimension::ALL {
                let d = dim.index();
                let truth: Vec<f64> = batch.iter().map(|&i| y[i][d]).collect();
                let pred: Vec<f64> = batch.iter().map(|&i| model.raw_output(&z[i], dim)).collect();
                let (l, g) = match ccc_loss_grad_impl(&truth, &pred) {
                    Ok(v) => v,
                    // constant batch with equal means: nothing to learn from it
                    Err(Error::Degenerate(_)) => (0.0, vec![0.0; batch.len()]),
                    Err(e) => return Err(e),
                };
                loss += l / 3.0;
                for (k, &i) in batch.iter().enumerate() {
                    let scaled = g[k] / 3.0;
                    for (j, zj) in z[i].iter().enumerate() {
                        grads[d][j] += scaled * zj;
                    }
                    grads[d][FEATURE_COUNT] += scaled;
                }
            }
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    batch: batch_no,
                    loss,
                });
            }
            batch_losses.push(loss);

            step += 1;
            let bias1 = 1.0 - ADAM_BETA1.powi(step);
            let bias2 = 1.0 - ADAM_BETA2.powi(step);
            for dim in Dimension::ALL {
                let d = dim.index();
                let w = weights_mut(&mut model.weights, dim);
                for j in 0..n_params {
                    let g = grads[d][j];
                    adam_m[d][j] = ADAM_BETA1 * adam_m[d][j] + (1.0 - ADAM_BETA1) * g;
                    adam_v[d][j] = ADAM_BETA2 * adam_v[d][j] + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = adam_m[d][j] / bias1;
                    let v_hat = adam_v[d][j] / bias2;
                    w[j] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
        model.trained_epochs = epoch;

        let train_loss = Dimension::ALL
            .iter()
            .map(|&dim| {
                let truth: Vec<f64> = y.iter().map(|t| t[dim.index()]).collect();
                let pred: Vec<f64> = z.iter().map(|r| model.raw_output(r, dim)).collect();
                1.0 - ccc_slices_impl(&truth, &pred).unwrap_or(0.0)
            })
            .sum::<f64>()
            / 3.0;
        let dev_ccc = PerDimension::from_fn(|dim| {
            let truth: Vec<f64> = dev_t.iter().map(|t| t[dim.index()]).collect();
            let pred: Vec<f64> = dev_z
                .iter()
                .map(|r| model.raw_output(r, dim).clamp(0.0, 1.0))
                .collect();
            ccc_slices_impl(&truth, &pred).unwrap_or(0.0)
        });
        let mean_batch_loss = batch_losses.iter().sum::<f64>() / batch_losses.len().max(1) as f64;
        epochs.push(EpochLog {
            epoch,
            train_loss,
            mean_batch_loss,
            dev_ccc,
        });

        let score = (dev_ccc.arousal + dev_ccc.dominance + dev_ccc.valence) / 3.0;
        if best.as_ref().map_or(true, |(s, ..)| score > *s) {
            best = Some((score, model.clone(), dev_ccc, epoch));
        }
    }

    let (_, mut best_model, best_dev_ccc, best_epoch) = best.expect("at least one epoch");
    best_model.best_epoch = best_epoch;
    best_model.best_dev_ccc = best_dev_ccc;
    best_model.trained_epochs = cfg.epochs;
    let log = TrainingLog {
        config: *cfg,
        train_records: train_x.len(),
        train_size: keep.len(),
        dev_size: dev_x.len(),
        epochs,
        best_epoch,
        best_dev_ccc,
    };
    Ok(TrainOutcome {
        model: best_model,
        log,
    })
}

fn weights_mut(w: &mut PerDimension<Vec<f64>>, dim: Dimension) -> &mut Vec<f64> {
    match dim {
        Dimension::Arousal => &mut w.arousal,
        Dimension::Dominance => &mut w.dominance,
        Dimension::Valence => &mut w.valence,
    }
}

/// Ridge least squares on standardized features; the bias is not penalized.
fn ridge_fit(z: &[Vec<f64>], y: &[[f64; 3]], dim: usize) -> Vec<f64> {
    let n = z.len();
    let p = FEATURE_COUNT + 1;
    let design = DMatrix::from_fn(n, p, |i, j| if j < FEATURE_COUNT { z[i][j] } else { 1.0 });
    let target = DVector::from_fn(n, |i, _| y[i][dim]);
    let mut gram = design.transpose() * &design;
    for j in 0..FEATURE_COUNT {
        gram[(j, j)] += RIDGE_LAMBDA * n as f64;
    }
    let rhs = design.transpose() * target;
    let solution = gram
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| gram.lu().solve(&rhs))
        .unwrap_or_else(|| DVector::zeros(p));
    solution.iter().copied().collect()
}
