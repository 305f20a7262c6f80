use std::io::Write;

use ndarray::{s, Array2, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, Optimizer};
use super::mlp::{cross_entropy, ForwardOptions, Mlp};
use crate::error::{Error, Result};
use crate::features::{argmax, FeatureVector};
use crate::seed::{self, stream};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
/// Rows per eval-mode chunk when scoring a whole dataset.
const EVAL_CHUNK: usize = 1024;

/// Adam moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    pub fn new(model: &Mlp) -> Self {
        let zeros: Vec<Vec<f64>> = model.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Adam {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn update(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
            }
        }
    }
}

/// A model together with its optimizer state.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: Mlp,
    adam: Adam,
    step: u64,
}

impl Trainer {
    pub fn new(model: Mlp) -> Self {
        let adam = Adam::new(&model);
        Trainer { model, adam, step: 0 }
    }

    /// One train-mode forward/backward pass and parameter update. Returns the
    /// batch loss before the update.
    pub fn step(&mut self, x: ArrayView2<'_, f64>, y: &Array2<f64>, class_weights: &[f64]) -> Result<f64> {
        let mut rng = seed::derived_rng(self.model.config.seed(), stream::DROPOUT, self.step);
        self.step += 1;
        let cache = self.model.forward(x, ForwardOptions::TRAIN, Some(&mut rng))?;
        let loss = self.model.loss(&cache.probs, y, class_weights)?;
        if !loss.is_finite() {
            return Err(Error::numeric(format!("non-finite training loss at step {}", self.step)));
        }
        let grads = self.model.backward(&cache, y, class_weights)?;
        let lr = self.model.config.learning_rate;
        match self.model.config.optimizer {
            Optimizer::Adam => self.adam.update(self.model.tensors_mut(), grads.tensors(), lr),
            Optimizer::Sgd => {
                for (p, g) in self.model.tensors_mut().into_iter().zip(grads.tensors()) {
                    p.iter_mut().zip(g).for_each(|(p, g)| *p -= lr * g);
                }
            }
        }
        self.model.update_running_stats(&cache);
        Ok(loss)
    }
}

/// See [`Trainer::step`].
pub fn backward_and_step(
    trainer: &mut Trainer,
    x: ArrayView2<'_, f64>,
    y: &Array2<f64>,
    class_weights: &[f64],
) -> Result<f64> {
    trainer.step(x, y, class_weights)
}

/// Stacks feature values and soft labels into matrices.
pub fn batch_from_features(items: &[FeatureVector]) -> Result<(Array2<f64>, Array2<f64>)> {
    let first = items.first().ok_or_else(|| Error::data("empty feature set"))?;
    let (d, k) = (first.dim(), first.soft_label.len());
    let mut x = Array2::zeros((items.len(), d));
    let mut y = Array2::zeros((items.len(), k));
    for (i, fv) in items.iter().enumerate() {
        if fv.dim() != d || fv.soft_label.len() != k {
            return Err(Error::data("feature vectors differ in shape"));
        }
        x.row_mut(i).assign(&ndarray::ArrayView1::from(&fv.values[..]));
        y.row_mut(i).assign(&ndarray::ArrayView1::from(&fv.soft_label[..]));
    }
    Ok((x, y))
}

/// Eval-mode loss (including the L2 term) and hard-label accuracy.
pub fn dataset_loss(model: &Mlp, x: &Array2<f64>, y: &Array2<f64>, class_weights: &[f64]) -> Result<(f64, f64)> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::data("empty evaluation set"));
    }
    let mut ce_sum = 0.0;
    let mut correct = 0usize;
    for start in (0..n).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(n);
        let xs = x.slice(s![start..end, ..]);
        let ys = y.slice(s![start..end, ..]).to_owned();
        let p = model.predict_proba(xs)?;
        ce_sum += cross_entropy(&p, &ys, class_weights)? * (end - start) as f64;
        for (pr, yr) in p.rows().into_iter().zip(ys.rows()) {
            if argmax(pr.as_slice().expect("row-major")) == argmax(yr.as_slice().expect("row-major")) {
                correct += 1;
            }
        }
    }
    let loss = ce_sum / n as f64 + model.config.l2_lambda * model.weight_sq_sum();
    Ok((loss, correct as f64 / n as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch with the lowest validation loss; its parameters are returned.
    pub best_epoch: usize,
    /// Last epoch run.
    pub stopped_epoch: usize,
}

impl TrainHistory {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch - 1]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["epoch", "train_loss", "val_loss", "val_accuracy"])?;
        for e in &self.epochs {
            out.serialize((e.epoch, e.train_loss, e.val_loss, e.val_accuracy))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Batch index ranges over a permutation of `n` rows. A trailing batch of a
/// single row is merged into its predecessor (batch norm needs two rows).
fn batch_ranges(n: usize, batch: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (0..n).step_by(batch).map(|s| (s, (s + batch).min(n))).collect();
    if out.len() >= 2 && out.last().is_some_and(|&(s, e)| e - s == 1) {
        let (_, e) = out.pop().expect("len ≥ 2");
        out.last_mut().expect("len ≥ 1").1 = e;
    }
    out
}

/// Mini-batch training with per-epoch shuffling and early stopping on
/// validation loss. Returns the parameters of the best epoch.
///
/// `on_epoch` sees every epoch record as it is produced.
pub fn train(
    train_set: &[FeatureVector],
    val_set: &[FeatureVector],
    cfg: &ModelConfig,
    class_weights: &[f64],
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<(Mlp, TrainHistory)> {
    if train_set.len() < 2 || val_set.is_empty() {
        return Err(Error::data(
            "training needs at least 2 training and 1 validation samples",
        ));
    }
    let (x, y) = batch_from_features(train_set)?;
    let (xv, yv) = batch_from_features(val_set)?;
    if x.ncols() != cfg.input_dim || xv.ncols() != cfg.input_dim {
        return Err(Error::data(format!(
            "features have {} columns, model expects {}",
            x.ncols(),
            cfg.input_dim
        )));
    }
    let mut trainer = Trainer::new(Mlp::new(cfg)?);
    let n = x.nrows();
    let ranges = batch_ranges(n, cfg.batch_size);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = TrainHistory {
        epochs: Vec::new(),
        best_epoch: 0,
        stopped_epoch: 0,
    };
    let mut best: Option<(f64, Mlp)> = None;
    let mut wait = 0usize;

    for epoch in 1..=cfg.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut seed::derived_rng(cfg.seed(), stream::SHUFFLE, epoch as u64));
        let mut loss_sum = 0.0;
        for &(s, e) in &ranges {
            let idx = &order[s..e];
            let xb = x.select(ndarray::Axis(0), idx);
            let yb = y.select(ndarray::Axis(0), idx);
            loss_sum += trainer.step(xb.view(), &yb, class_weights)? * (e - s) as f64;
        }
        let (val_loss, val_accuracy) = dataset_loss(&trainer.model, &xv, &yv, class_weights)?;
        if !val_loss.is_finite() {
            return Err(Error::numeric(format!("non-finite validation loss at epoch {epoch}")));
        }
        let rec = EpochRecord {
            epoch,
            train_loss: loss_sum / n as f64,
            val_loss,
            val_accuracy,
        };
        on_epoch(&rec);
        history.epochs.push(rec);
        history.stopped_epoch = epoch;

        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, trainer.model.clone()));
            history.best_epoch = epoch;
            wait = 0;
        } else {
            wait += 1;
            if wait >= cfg.early_stop_patience {
                break;
            }
        }
    }
    let (_, model) = best.expect("at least one epoch ran");
    Ok((model, history))
}
