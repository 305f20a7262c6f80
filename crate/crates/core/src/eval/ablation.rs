use std::fmt::Write as _;

use serde::Serialize;

use super::report::{evaluate, EvalReport};
use crate::audit::{Audit, Split};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, Standardizer};
use crate::model::{train, ModelConfig, TrainHistory};

/// Published accuracies (%) for the four reference architectures, shown next
/// to measured values for comparison only.
pub const REFERENCE_ACCURACY: [(&str, f64); 4] = [
    ("128-64-32", 74.3),
    ("256-128-64-32", 81.0),
    ("512-256-128-64", 76.1),
    ("128-128-64-64", 73.2),
];

pub fn reference_accuracy(signature: &str) -> Option<f64> {
    REFERENCE_ACCURACY.iter().find(|(s, _)| *s == signature).map(|&(_, a)| a)
}

pub fn default_ablation_dims() -> Vec<Vec<usize>> {
    vec![
        vec![128, 64, 32],
        vec![256, 128, 64, 32],
        vec![512, 256, 128, 64],
        vec![128, 128, 64, 64],
    ]
}

/// Everything a training run consumes, prepared once and shared by all rows.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    /// Augmented and standardized.
    pub train: Split<FeatureVector>,
    /// Standardized.
    pub validation: Split<FeatureVector>,
    /// Raw; [`evaluate`] standardizes it.
    pub test: Split<FeatureVector>,
    pub standardizer: Standardizer,
    pub class_weights: Vec<f64>,
    pub split_hash: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub config: String,
    pub hidden_dims: Vec<usize>,
    pub accuracy: f64,
    pub best_epoch: usize,
    pub split_hash: String,
    #[serde(skip)]
    pub report: EvalReport,
    #[serde(skip)]
    pub history: TrainHistory,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    /// `config,accuracy` with accuracy as a fraction.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["config", "accuracy"])?;
        for r in &self.rows {
            w.write_record([r.config.clone(), format!("{:.6}", r.accuracy)])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<20} {:>12} {:>14}", "classifier", "accuracy (%)", "reference (%)");
        for r in &self.rows {
            let reference = reference_accuracy(&r.config).map_or("-".to_string(), |a| format!("{a:.1}"));
            let _ = writeln!(
                out,
                "{:<20} {:>12.1} {:>14}",
                format!("FC: {}", r.config),
                100.0 * r.accuracy,
                reference
            );
        }
        out
    }
}

/// Trains and evaluates every configuration on the same prepared data.
pub fn run_ablation(
    data: &ExperimentData,
    configs: &[ModelConfig],
    audit: Option<&Audit>,
    on_row: &mut dyn FnMut(&AblationRow),
) -> Result<AblationTable> {
    if configs.is_empty() {
        return Err(Error::config("ablation needs at least one model configuration"));
    }
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in configs {
        let (model, history) = train(
            &data.train.items,
            &data.validation.items,
            cfg,
            &data.class_weights,
            &mut |_| {},
        )?;
        let report = evaluate(&model, &data.standardizer, &data.test, audit)?;
        let row = AblationRow {
            config: cfg.signature(),
            hidden_dims: cfg.hidden_dims.clone(),
            accuracy: report.overall_accuracy,
            best_epoch: history.best_epoch,
            split_hash: data.split_hash.clone(),
            report,
            history,
        };
        on_row(&row);
        rows.push(row);
    }
    debug_assert!(rows.windows(2).all(|w| w[0].split_hash == w[1].split_hash));
    Ok(AblationTable { rows })
}
