use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub n_classes: usize,
    pub dropout_rate: f64,
    pub l2_lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub optimizer: Optimizer,
    /// Weight of the previous running statistic in the batch-norm update.
    pub bn_momentum: f64,
    pub bn_eps: f64,
    /// Falls back to 0 outside a pipeline that derives it from the master seed.
    pub rng_seed: Option<u64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_dim: 272,
            hidden_dims: vec![256, 128, 64, 32],
            n_classes: 6,
            dropout_rate: 0.4,
            l2_lambda: 1e-3,
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 200,
            early_stop_patience: 20,
            optimizer: Optimizer::Adam,
            bn_momentum: 0.9,
            bn_eps: 1e-5,
            rng_seed: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(format!("ModelConfig: {m}")));
        if self.input_dim == 0 || self.n_classes == 0 || self.hidden_dims.contains(&0) {
            return bad("all layer widths must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if !(self.l2_lambda >= 0.0) || !self.l2_lambda.is_finite() {
            return bad("l2_lambda must be non-negative");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if !(0.0..1.0).contains(&self.bn_momentum) {
            return bad("bn_momentum must lie in [0, 1)");
        }
        if !(self.bn_eps > 0.0) {
            return bad("bn_eps must be positive");
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.rng_seed.unwrap_or(0)
    }

    /// Hidden widths joined with `-`, e.g. `256-128-64-32`.
    pub fn signature(&self) -> String {
        self.hidden_dims.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
    }

    /// Widths of every layer from input to output.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend(&self.hidden_dims);
        dims.push(self.n_classes);
        dims
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        assert_eq!(c.signature(), "256-128-64-32");
        assert_eq!(c.layer_dims(), vec![272, 256, 128, 64, 32, 6]);
    }

    #[test]
    fn rejects_bad_values() {
        for c in [
            ModelConfig { dropout_rate: 1.0, ..Default::default() },
            ModelConfig { hidden_dims: vec![8, 0], ..Default::default() },
            ModelConfig { learning_rate: 0.0, ..Default::default() },
            ModelConfig { l2_lambda: -1.0, ..Default::default() },
            ModelConfig { batch_size: 1, ..Default::default() },
        ] {
            assert!(c.validate().is_err());
        }
    }
}
