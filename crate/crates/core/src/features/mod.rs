//! Per-channel descriptors and the concatenated feature vector.
//!
//! For each channel, in order: the first `n_psd_bins` Welch PSD bins, the
//! AR(p) coefficients, Hjorth activity/mobility/complexity, and spectral
//! entropy. Channels are concatenated in recording order, so the vector has
//! `C · (n_psd_bins + p + 4)` entries (272 for 8 channels, 20 bins, p = 10).

mod ar;
mod entropy;
mod hjorth;
mod io;
mod standardize;
mod welch;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::Segment;

pub use ar::{autocovariance, levinson_durbin, yule_walker, ArFeatures};
pub use entropy::{entropy_bits, spectral_entropy};
pub use hjorth::{hjorth, HjorthFeatures};
pub use io::{read_features_csv, write_features_csv};
pub use standardize::{apply_standardizer, fit_standardizer, Standardizer, STD_FLOOR};
pub use welch::{retain_psd_features, welch_psd, PsdEstimate, Welch, WelchConfig, WindowFn};

/// Hjorth triple plus entropy.
pub const SCALAR_FEATURES_PER_CHANNEL: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub nperseg: usize,
    pub noverlap: usize,
    pub ar_order: usize,
    pub n_psd_bins: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            nperseg: 256,
            noverlap: 128,
            ar_order: 10,
            n_psd_bins: 20,
        }
    }
}

impl FeatureConfig {
    pub fn per_channel(&self) -> usize {
        self.n_psd_bins + self.ar_order + SCALAR_FEATURES_PER_CHANNEL
    }

    pub fn dim(&self, n_channels: usize) -> usize {
        n_channels * self.per_channel()
    }
}

/// AR order implied by a total feature dimension for the given channel count
/// and PSD bin count, if the dimension splits evenly.
pub fn implied_ar_order(dim: usize, n_channels: usize, n_psd_bins: usize) -> Option<usize> {
    if n_channels == 0 || !dim.is_multiple_of(n_channels) {
        return None;
    }
    (dim / n_channels).checked_sub(n_psd_bins + SCALAR_FEATURES_PER_CHANNEL)
}

/// Sorted subject ids; a subject's class index is its position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassMap {
    subject_ids: Vec<u16>,
}

impl ClassMap {
    pub fn from_subjects(ids: impl IntoIterator<Item = u16>) -> Self {
        let mut subject_ids: Vec<u16> = ids.into_iter().collect();
        subject_ids.sort_unstable();
        subject_ids.dedup();
        ClassMap { subject_ids }
    }

    pub fn n_classes(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn class_of(&self, subject_id: u16) -> Result<usize> {
        self.subject_ids
            .binary_search(&subject_id)
            .map_err(|_| Error::data(format!("subject {subject_id} is not enrolled")))
    }

    pub fn subject_of(&self, class: usize) -> Option<u16> {
        self.subject_ids.get(class).copied()
    }

    pub fn subject_ids(&self) -> &[u16] {
        &self.subject_ids
    }

    pub fn one_hot(&self, subject_id: u16) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.n_classes()];
        v[self.class_of(subject_id)?] = 1.0;
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// Probability vector over classes; one-hot except after MixUp.
    pub soft_label: Vec<f64>,
    /// Subject of the dominant label entry.
    pub subject_id: u16,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Index of the largest label entry, ties toward the lowest index.
    pub fn hard_class(&self) -> usize {
        argmax(&self.soft_label)
    }

    pub fn is_one_hot(&self) -> bool {
        self.soft_label.iter().filter(|&&v| v != 0.0).count() == 1
            && self.soft_label.contains(&1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("feature vector has non-finite values"));
        }
        let sum: f64 = self.soft_label.iter().sum();
        if self.soft_label.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::data("soft label is not a probability vector"));
        }
        Ok(())
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Extracts feature vectors from segments. Holds the Welch plan, so build one
/// and share it across segments and threads.
#[derive(Debug)]
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    welch: Welch,
}

impl FeatureExtractor {
    pub fn new(cfg: &FeatureConfig, fs: f64) -> Result<Self> {
        if cfg.ar_order == 0 {
            return Err(Error::config("FeatureConfig: ar_order must be positive"));
        }
        if cfg.n_psd_bins == 0 {
            return Err(Error::config("empty feature slice"));
        }
        let welch = Welch::new(WelchConfig {
            nperseg: cfg.nperseg,
            noverlap: cfg.noverlap,
            window_fn: WindowFn::Hann,
            fs,
        })?;
        if cfg.n_psd_bins > welch.config().n_bins() {
            return Err(Error::config(format!(
                "FeatureConfig: {} PSD bins requested, grid has {}",
                cfg.n_psd_bins,
                welch.config().n_bins()
            )));
        }
        Ok(FeatureExtractor {
            cfg: cfg.clone(),
            welch,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    pub fn dim(&self, n_channels: usize) -> usize {
        self.cfg.dim(n_channels)
    }

    /// Descriptors of a single channel.
    pub fn channel_features(&self, x: &[f64]) -> Result<Vec<f64>> {
        let psd = self.welch.estimate(x)?;
        let mut out = retain_psd_features(&psd, self.cfg.n_psd_bins)?;
        out.extend(yule_walker(x, self.cfg.ar_order)?.coeffs);
        let h = hjorth(x)?;
        out.extend([h.activity, h.mobility, h.complexity]);
        out.push(spectral_entropy(&psd)?);
        Ok(out)
    }

    pub fn extract(&self, seg: &Segment, classes: &ClassMap) -> Result<FeatureVector> {
        let mut values = Vec::with_capacity(self.dim(seg.n_channels()));
        for (c, row) in seg.channels.rows().into_iter().enumerate() {
            let x = row.to_vec();
            let f = self.channel_features(&x).map_err(|e| match e {
                Error::Data(msg) => Error::data(format!("channel {c}: {msg}")),
                other => other,
            })?;
            values.extend(f);
        }
        debug_assert_eq!(values.len(), self.dim(seg.n_channels()));
        let fv = FeatureVector {
            values,
            soft_label: classes.one_hot(seg.subject_id)?,
            subject_id: seg.subject_id,
        };
        fv.validate()?;
        Ok(fv)
    }
}

pub fn extract_features(
    seg: &Segment,
    welch_cfg: &WelchConfig,
    ar_order: usize,
    classes: &ClassMap,
) -> Result<FeatureVector> {
    let cfg = FeatureConfig {
        nperseg: welch_cfg.nperseg,
        noverlap: welch_cfg.noverlap,
        ar_order,
        ..FeatureConfig::default()
    };
    FeatureExtractor::new(&cfg, welch_cfg.fs)?.extract(seg, classes)
}
