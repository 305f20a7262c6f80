use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use super::kernels::{matmul_nn, matmul_nt, matmul_tn};
use crate::error::{Error, Result};
use crate::features::argmax;
use crate::seed::{self, stream, Rng};

/// Lower clamp applied to probabilities inside the logarithm.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// out × in.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    fn he(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite std");
        Dense {
            w: Array2::from_shape_simple_fn((fan_out, fan_in), || normal.sample(rng)),
            b: Array1::zeros(fan_out),
        }
    }

    fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = matmul_nt(x, self.w.view());
        z += &self.b;
        z
    }

    pub fn in_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hidden {
    pub dense: Dense,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub run_mean: Array1<f64>,
    pub run_var: Array1<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    /// Normalise with the statistics of the current batch.
    Batch,
    /// Normalise with the running statistics.
    Running,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForwardOptions {
    pub bn: BnMode,
    pub dropout: bool,
}

impl ForwardOptions {
    pub const TRAIN: Self = ForwardOptions {
        bn: BnMode::Batch,
        dropout: true,
    };
    pub const EVAL: Self = ForwardOptions {
        bn: BnMode::Running,
        dropout: false,
    };
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Array2<f64>,
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    batch_mean: Array1<f64>,
    batch_var: Array1<f64>,
    /// Post-ReLU activation, before dropout.
    relu: Array2<f64>,
    /// Dropout multipliers (0 or 1/(1−rate)).
    mask: Option<Array2<f64>>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    last: Array2<f64>,
    pub logits: Array2<f64>,
    pub probs: Array2<f64>,
    pub options: ForwardOptions,
}

/// (dW, db, dγ, dβ) for one hidden layer.
pub type HiddenGrads = (Array2<f64>, Array1<f64>, Array1<f64>, Array1<f64>);

/// Parameter gradients, same layout as the model.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub hidden: Vec<HiddenGrads>,
    pub output: (Array2<f64>, Array1<f64>),
}

impl Gradients {
    /// Flattened tensors in [`Mlp::tensors_mut`] order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(4 * self.hidden.len() + 2);
        for (w, b, g, be) in &self.hidden {
            out.push(w.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
            out.push(g.as_slice().expect("standard layout"));
            out.push(be.as_slice().expect("standard layout"));
        }
        out.push(self.output.0.as_slice().expect("standard layout"));
        out.push(self.output.1.as_slice().expect("standard layout"));
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Trainable parameters: weights and biases of every dense layer plus γ and β
/// of every batch-norm layer.
pub fn count_parameters(cfg: &ModelConfig) -> usize {
    let dims = cfg.layer_dims();
    let dense: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    let bn: usize = cfg.hidden_dims.iter().map(|d| 2 * d).sum();
    dense + bn
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub config: ModelConfig,
    pub hidden: Vec<Hidden>,
    pub output: Dense,
}

impl Mlp {
    /// He-initialised weights, zero biases, γ = 1, β = 0, running stats (0, 1).
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let dims = cfg.layer_dims();
        let mut hidden = Vec::with_capacity(cfg.hidden_dims.len());
        for l in 0..cfg.hidden_dims.len() {
            let mut rng = seed::derived_rng(cfg.seed(), stream::INIT, l as u64);
            let width = dims[l + 1];
            hidden.push(Hidden {
                dense: Dense::he(dims[l], width, &mut rng),
                gamma: Array1::ones(width),
                beta: Array1::zeros(width),
                run_mean: Array1::zeros(width),
                run_var: Array1::ones(width),
            });
        }
        let l = cfg.hidden_dims.len();
        let mut rng = seed::derived_rng(cfg.seed(), stream::INIT, l as u64);
        let output = Dense::he(dims[l], dims[l + 1], &mut rng);
        Ok(Mlp {
            config: cfg.clone(),
            hidden,
            output,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.output.out_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Checks that every array agrees with the configured widths and that
    /// all values are finite with positive running variances.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let dims = self.config.layer_dims();
        if self.hidden.len() != self.config.hidden_dims.len() {
            return Err(Error::data("layer count does not match hidden_dims"));
        }
        let check_dense = |d: &Dense, fan_in: usize, fan_out: usize, name: &str| -> Result<()> {
            if d.w.dim() != (fan_out, fan_in) || d.b.len() != fan_out {
                return Err(Error::data(format!(
                    "{name}: expected {fan_out}×{fan_in} weights, found {}×{} with {} biases",
                    d.w.nrows(),
                    d.w.ncols(),
                    d.b.len()
                )));
            }
            Ok(())
        };
        for (l, h) in self.hidden.iter().enumerate() {
            let name = format!("layer {l}");
            check_dense(&h.dense, dims[l], dims[l + 1], &name)?;
            let w = dims[l + 1];
            if [&h.gamma, &h.beta, &h.run_mean, &h.run_var].iter().any(|a| a.len() != w) {
                return Err(Error::data(format!("{name}: batch-norm vectors must have length {w}")));
            }
            if h.run_var.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::data(format!("{name}: running variance must be positive")));
            }
        }
        let l = self.hidden.len();
        check_dense(&self.output, dims[l], dims[l + 1], "output layer")?;
        if self.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite()))
            || self.hidden.iter().any(|h| h.run_mean.iter().chain(&h.run_var).any(|v| !v.is_finite()))
        {
            return Err(Error::numeric("model has non-finite parameters"));
        }
        Ok(())
    }

    /// Trainable tensors: per hidden layer `w, b, γ, β`, then output `w, b`.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(4 * self.hidden.len() + 2);
        for h in &self.hidden {
            out.push(h.dense.w.as_slice().expect("standard layout"));
            out.push(h.dense.b.as_slice().expect("standard layout"));
            out.push(h.gamma.as_slice().expect("standard layout"));
            out.push(h.beta.as_slice().expect("standard layout"));
        }
        out.push(self.output.w.as_slice().expect("standard layout"));
        out.push(self.output.b.as_slice().expect("standard layout"));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(4 * self.hidden.len() + 2);
        for h in &mut self.hidden {
            out.push(h.dense.w.as_slice_mut().expect("standard layout"));
            out.push(h.dense.b.as_slice_mut().expect("standard layout"));
            out.push(h.gamma.as_slice_mut().expect("standard layout"));
            out.push(h.beta.as_slice_mut().expect("standard layout"));
        }
        out.push(self.output.w.as_slice_mut().expect("standard layout"));
        out.push(self.output.b.as_slice_mut().expect("standard layout"));
        out
    }

    /// `Σ W²` over dense weight matrices; biases and batch-norm parameters
    /// are not penalised.
    pub fn weight_sq_sum(&self) -> f64 {
        self.hidden
            .iter()
            .map(|h| &h.dense.w)
            .chain(std::iter::once(&self.output.w))
            .map(|w| w.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    pub fn forward(
        &self,
        x: ArrayView2<'_, f64>,
        opts: ForwardOptions,
        mut rng: Option<&mut Rng>,
    ) -> Result<ForwardCache> {
        if x.ncols() != self.input_dim() {
            return Err(Error::data(format!(
                "input has {} features, model expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        let b = x.nrows();
        if b == 0 {
            return Err(Error::data("empty batch"));
        }
        if opts.bn == BnMode::Batch && b < 2 {
            return Err(Error::data("batch statistics need at least 2 rows"));
        }
        let rate = self.config.dropout_rate;
        let dropout = opts.dropout && rate > 0.0;
        if dropout && rng.is_none() {
            return Err(Error::config("dropout needs a random stream"));
        }
        let eps = self.config.bn_eps;
        let mut layers = Vec::with_capacity(self.hidden.len());
        let mut cur = x.to_owned();
        for h in &self.hidden {
            let z = h.dense.apply(cur.view());
            let batch_mean = z.mean_axis(Axis(0)).expect("non-empty batch");
            let batch_var = z.var_axis(Axis(0), 0.0);
            let (mean, var) = match opts.bn {
                BnMode::Batch => (&batch_mean, &batch_var),
                BnMode::Running => (&h.run_mean, &h.run_var),
            };
            let inv_std = var.mapv(|v| 1.0 / (v + eps).sqrt());
            let xhat = (&z - mean) * &inv_std;
            let relu = (&xhat * &h.gamma + &h.beta).mapv(|v| v.max(0.0));
            let (out, mask) = if dropout {
                let keep = 1.0 / (1.0 - rate);
                let r = rng.as_deref_mut().expect("checked above");
                let mask = Array2::from_shape_simple_fn(relu.dim(), || {
                    if r.random::<f64>() < rate {
                        0.0
                    } else {
                        keep
                    }
                });
                (&relu * &mask, Some(mask))
            } else {
                (relu.clone(), None)
            };
            layers.push(LayerCache {
                input: cur,
                xhat,
                inv_std,
                batch_mean,
                batch_var,
                relu,
                mask,
            });
            cur = out;
        }
        let logits = self.output.apply(cur.view());
        let probs = softmax_rows(&logits);
        Ok(ForwardCache {
            layers,
            last: cur,
            logits,
            probs,
            options: opts,
        })
    }

    /// Eval-mode class probabilities, one row per input row.
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.forward(x, ForwardOptions::EVAL, None)?.probs)
    }

    /// Most probable class (lowest index on ties) and the probability vector.
    pub fn predict(&self, values: &[f64]) -> Result<(usize, Vec<f64>)> {
        let x = ArrayView2::from_shape((1, values.len()), values)
            .map_err(|e| Error::data(e.to_string()))?;
        let p = self.predict_proba(x)?.row(0).to_vec();
        Ok((argmax(&p), p))
    }

    /// Mean class-weighted cross-entropy plus `λ · Σ W²`.
    pub fn loss(&self, probs: &Array2<f64>, labels: &Array2<f64>, class_weights: &[f64]) -> Result<f64> {
        Ok(cross_entropy(probs, labels, class_weights)? + self.config.l2_lambda * self.weight_sq_sum())
    }

    pub fn backward(&self, cache: &ForwardCache, labels: &Array2<f64>, class_weights: &[f64]) -> Result<Gradients> {
        let sw = sample_weights(labels, class_weights, cache.probs.dim())?;
        let b = cache.probs.nrows() as f64;
        let two_l = 2.0 * self.config.l2_lambda;

        let mut d = &cache.probs - labels;
        Zip::from(d.rows_mut()).and(&sw).for_each(|mut row, &w| row *= w / b);
        let out_w = matmul_tn(d.view(), cache.last.view()) + &self.output.w * two_l;
        let out_b = d.sum_axis(Axis(0));
        let mut dh = matmul_nn(d.view(), self.output.w.view());

        let mut hidden = Vec::with_capacity(self.hidden.len());
        for (l, (h, c)) in self.hidden.iter().zip(&cache.layers).enumerate().rev() {
            if let Some(mask) = &c.mask {
                dh *= mask;
            }
            Zip::from(&mut dh).and(&c.relu).for_each(|g, &a| {
                if a <= 0.0 {
                    *g = 0.0;
                }
            });
            let dgamma = (&dh * &c.xhat).sum_axis(Axis(0));
            let dbeta = dh.sum_axis(Axis(0));
            let dxhat = dh * &h.gamma;
            let dz = match cache.options.bn {
                BnMode::Running => dxhat * &c.inv_std,
                BnMode::Batch => {
                    let s1 = dxhat.sum_axis(Axis(0));
                    let s2 = (&dxhat * &c.xhat).sum_axis(Axis(0));
                    ((dxhat * b - &s1) - &c.xhat * &s2) * &c.inv_std / b
                }
            };
            let dw = matmul_tn(dz.view(), c.input.view()) + &h.dense.w * two_l;
            let db = dz.sum_axis(Axis(0));
            if l > 0 {
                dh = matmul_nn(dz.view(), h.dense.w.view());
            } else {
                dh = Array2::zeros((0, 0));
            }
            hidden.push((dw, db, dgamma, dbeta));
        }
        hidden.reverse();
        let grads = Gradients {
            hidden,
            output: (out_w, out_b),
        };
        if !grads.is_finite() {
            return Err(Error::numeric("non-finite gradient"));
        }
        Ok(grads)
    }

    /// Folds the batch statistics of a batch-mode forward pass into the
    /// running statistics.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        if cache.options.bn != BnMode::Batch {
            return;
        }
        let m = self.config.bn_momentum;
        for (h, c) in self.hidden.iter_mut().zip(&cache.layers) {
            h.run_mean = &h.run_mean * m + &c.batch_mean * (1.0 - m);
            h.run_var = &h.run_var * m + &c.batch_var * (1.0 - m);
        }
    }
}

fn sample_weights(labels: &Array2<f64>, class_weights: &[f64], shape: (usize, usize)) -> Result<Array1<f64>> {
    if labels.dim() != shape {
        return Err(Error::data(format!(
            "labels are {:?}, predictions are {:?}",
            labels.dim(),
            shape
        )));
    }
    if class_weights.len() != shape.1 {
        return Err(Error::data(format!(
            "{} class weights for {} classes",
            class_weights.len(),
            shape.1
        )));
    }
    for (i, row) in labels.rows().into_iter().enumerate() {
        if row.iter().any(|&v| !(v >= 0.0)) || (row.sum() - 1.0).abs() > 1e-6 {
            return Err(Error::data(format!("label row {i} is not a probability vector")));
        }
    }
    let w = ndarray::ArrayView1::from(class_weights);
    Ok(labels.dot(&w))
}

/// Mean over rows of `−w(y) · Σ_k y_k ln p_k`, where `w(y) = Σ_k y_k w_k`.
pub fn cross_entropy(probs: &Array2<f64>, labels: &Array2<f64>, class_weights: &[f64]) -> Result<f64> {
    let sw = sample_weights(labels, class_weights, probs.dim())?;
    let mut total = 0.0;
    for ((p, y), w) in probs.rows().into_iter().zip(labels.rows()).zip(&sw) {
        let ce: f64 = p.iter().zip(y).map(|(&p, &y)| -y * p.max(LOG_CLAMP).ln()).sum();
        total += w * ce;
    }
    Ok(total / probs.nrows() as f64)
}
