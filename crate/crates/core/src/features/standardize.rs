use serde::{Deserialize, Serialize};

use super::FeatureVector;
use crate::audit::{self, Audit, Split, SplitRole, Stage};
use crate::error::{Error, Result};

/// Lower bound on a fitted standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-feature z-scoring fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(items: &[FeatureVector]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::data("cannot fit standardizer on an empty training set"))?;
        let dim = first.dim();
        if items.iter().any(|fv| fv.dim() != dim) {
            return Err(Error::data("feature vectors differ in dimension"));
        }
        let n = items.len() as f64;
        let mut mean = vec![0.0; dim];
        for fv in items {
            for (m, v) in mean.iter_mut().zip(&fv.values) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for fv in items {
            for ((s, v), m) in var.iter_mut().zip(&fv.values).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        Ok(Standardizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Features whose fitted std sits at the floor map to 0.
    pub fn transform(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.dim() {
            return Err(Error::data(format!(
                "dimension mismatch: standardizer has {}, vector has {}",
                self.dim(),
                values.len()
            )));
        }
        Ok(values
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| if *s <= STD_FLOOR { 0.0 } else { (v - m) / s })
            .collect())
    }

    pub fn apply(&self, fv: &FeatureVector) -> Result<FeatureVector> {
        Ok(FeatureVector {
            values: self.transform(&fv.values)?,
            soft_label: fv.soft_label.clone(),
            subject_id: fv.subject_id,
        })
    }

    pub fn apply_split(&self, split: &Split<FeatureVector>, audit: Option<&Audit>) -> Result<Split<FeatureVector>> {
        audit::record(audit, Stage::ApplyStandardizer, split.role, split.len());
        let items = split.items.iter().map(|fv| self.apply(fv)).collect::<Result<_>>()?;
        Ok(Split::new(split.role, items))
    }
}

/// Fits on the training split only; any other role is rejected.
pub fn fit_standardizer(train: &Split<FeatureVector>, audit: Option<&Audit>) -> Result<Standardizer> {
    train.require_role(SplitRole::Train, "standardizer fitting")?;
    audit::record(audit, Stage::FitStandardizer, train.role, train.len());
    Standardizer::fit(&train.items)
}

pub fn apply_standardizer(s: &Standardizer, fv: &FeatureVector) -> Result<FeatureVector> {
    s.apply(fv)
}
