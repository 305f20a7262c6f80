//! Model JSON: `{format_version, config, layers: [{w, b, gamma, beta,
//! run_mean, run_var}], output: {w, b}}` with matrices as nested lists.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::mlp::{Dense, Hidden, Mlp};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    gamma: Vec<f64>,
    beta: Vec<f64>,
    run_mean: Vec<f64>,
    run_var: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputDoc {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    format_version: u32,
    config: ModelConfig,
    layers: Vec<LayerDoc>,
    output: OutputDoc,
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matrix(rows: Vec<Vec<f64>>, what: &str) -> Result<Array2<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::data(format!("{what}: ragged weight matrix")));
    }
    Array2::from_shape_vec((n, m), rows.into_iter().flatten().collect())
        .map_err(|e| Error::data(format!("{what}: {e}")))
}

impl Mlp {
    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            format_version: MODEL_FORMAT_VERSION,
            config: self.config.clone(),
            layers: self
                .hidden
                .iter()
                .map(|h| LayerDoc {
                    w: rows(&h.dense.w),
                    b: h.dense.b.to_vec(),
                    gamma: h.gamma.to_vec(),
                    beta: h.beta.to_vec(),
                    run_mean: h.run_mean.to_vec(),
                    run_var: h.run_var.to_vec(),
                })
                .collect(),
            output: OutputDoc {
                w: rows(&self.output.w),
                b: self.output.b.to_vec(),
            },
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::data(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        let mut hidden = Vec::with_capacity(doc.layers.len());
        for (l, d) in doc.layers.into_iter().enumerate() {
            hidden.push(Hidden {
                dense: Dense {
                    w: matrix(d.w, &format!("layer {l}"))?,
                    b: Array1::from(d.b),
                },
                gamma: Array1::from(d.gamma),
                beta: Array1::from(d.beta),
                run_mean: Array1::from(d.run_mean),
                run_var: Array1::from(d.run_var),
            });
        }
        let m = Mlp {
            config: doc.config,
            hidden,
            output: Dense {
                w: matrix(doc.output.w, "output layer")?,
                b: Array1::from(doc.output.b),
            },
        };
        m.validate()?;
        Ok(m)
    }
}

pub fn save_model(m: &Mlp, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, m.to_json()?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Mlp> {
    Mlp::from_json(&std::fs::read_to_string(path)?)
}
