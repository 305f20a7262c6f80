//! Training-set augmentation.
//!
//! Raw-signal techniques (Gaussian noise, temporal shift) act on segments
//! before feature extraction; MixUp and random oversampling act on feature
//! vectors afterwards. Class weights for the loss come from the final label
//! distribution. Every random draw comes from a stream derived from
//! `rng_seed` and the item index, so the output does not depend on thread
//! count.

use rand::Rng as _;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::audit::{self, Audit, Split, SplitRole, Stage};
use crate::dataio::EegRecording;
use crate::error::{Error, Result};
use crate::features::{argmax, ClassMap, FeatureExtractor, FeatureVector};
use crate::par;
use crate::preprocess::segment::cut;
use crate::preprocess::{Segment, SegmentRef};
use crate::seed::{self, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Noise std relative to each channel's own std.
    pub noise_rel_std: f64,
    pub max_shift_samples: usize,
    pub mixup_alpha: f64,
    /// Output size as a multiple of the input size, before oversampling.
    pub target_multiplier: f64,
    /// Falls back to 0 outside a pipeline that derives it from the master seed.
    pub rng_seed: Option<u64>,
    pub noise: bool,
    pub shift: bool,
    pub mixup: bool,
    pub oversample: bool,
    pub class_weights: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            noise_rel_std: 0.05,
            max_shift_samples: 100,
            mixup_alpha: 0.2,
            target_multiplier: 6.0,
            rng_seed: None,
            noise: true,
            shift: true,
            mixup: true,
            oversample: true,
            class_weights: true,
        }
    }
}

impl AugmentConfig {
    /// Everything off, multiplier 1.
    pub fn disabled() -> Self {
        AugmentConfig {
            target_multiplier: 1.0,
            noise: false,
            shift: false,
            mixup: false,
            oversample: false,
            class_weights: false,
            ..AugmentConfig::default()
        }
    }

    pub fn validate(&self, window_len: usize) -> Result<()> {
        if !(self.noise_rel_std >= 0.0) || !self.noise_rel_std.is_finite() {
            return Err(Error::config("AugmentConfig: noise_rel_std must be a non-negative number"));
        }
        if self.max_shift_samples >= window_len {
            return Err(Error::config(format!(
                "AugmentConfig: max_shift_samples {} must be below the window length {window_len}",
                self.max_shift_samples
            )));
        }
        if !(self.mixup_alpha > 0.0) || !self.mixup_alpha.is_finite() {
            return Err(Error::config("AugmentConfig: mixup_alpha must be positive"));
        }
        if !(self.target_multiplier >= 1.0) || !self.target_multiplier.is_finite() {
            return Err(Error::config("AugmentConfig: target_multiplier must be at least 1"));
        }
        if self.target_multiplier > 1.0 && !(self.noise || self.shift || self.mixup) {
            return Err(Error::config(
                "AugmentConfig: target_multiplier > 1 needs noise, shift or mixup enabled",
            ));
        }
        Ok(())
    }

    fn seed(&self) -> u64 {
        self.rng_seed.unwrap_or(0)
    }
}

fn channel_std(x: ndarray::ArrayView1<'_, f64>) -> f64 {
    let n = x.len() as f64;
    let mean = x.sum() / n;
    (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Adds N(0, (noise_rel_std·σ_c)²) to every sample of channel c.
pub fn add_gaussian_noise<R: rand::Rng + ?Sized>(seg: &Segment, noise_rel_std: f64, rng: &mut R) -> Segment {
    let mut out = seg.clone();
    if noise_rel_std == 0.0 {
        return out;
    }
    for mut row in out.channels.rows_mut() {
        let scale = noise_rel_std * channel_std(row.view());
        for v in row.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v += scale * z;
        }
    }
    out
}

/// Re-cuts `seg` from its parent at `source_offset + shift`. Shifts that
/// would leave the parent are clamped; the shift actually applied is returned.
pub fn temporal_shift(parent: &EegRecording, seg: &Segment, shift: i64) -> Result<(Segment, i64)> {
    let wl = seg.window_len();
    if wl > parent.n_samples() {
        return Err(Error::data("segment is longer than its parent recording"));
    }
    let max_offset = (parent.n_samples() - wl) as i64;
    let offset = (seg.source_offset as i64 + shift).clamp(0, max_offset);
    let applied = offset - seg.source_offset as i64;
    Ok((cut(parent, seg.recording, offset as usize, wl)?, applied))
}

/// Convex combination `λ·a + (1−λ)·b` of values and labels.
pub fn mixup(a: &FeatureVector, b: &FeatureVector, lambda: f64) -> Result<FeatureVector> {
    if a.dim() != b.dim() || a.soft_label.len() != b.soft_label.len() {
        return Err(Error::data(format!(
            "mixup dimension mismatch: {}/{} vs {}/{}",
            a.dim(),
            a.soft_label.len(),
            b.dim(),
            b.soft_label.len()
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::config(format!("mixup lambda {lambda} outside [0, 1]")));
    }
    if lambda == 1.0 {
        return Ok(a.clone());
    }
    let mu = 1.0 - lambda;
    let values = a.values.iter().zip(&b.values).map(|(x, y)| lambda * x + mu * y).collect();
    let soft_label: Vec<f64> = a
        .soft_label
        .iter()
        .zip(&b.soft_label)
        .map(|(x, y)| lambda * x + mu * y)
        .collect();
    let subject_id = if argmax(&soft_label) == a.hard_class() {
        a.subject_id
    } else {
        b.subject_id
    };
    Ok(FeatureVector {
        values,
        soft_label,
        subject_id,
    })
}

/// Draws λ ~ Beta(α, α).
pub fn sample_mixup_lambda<R: rand::Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    let beta = Beta::new(alpha, alpha).map_err(|e| Error::config(format!("mixup_alpha: {e}")))?;
    Ok(beta.sample(rng))
}

/// Appends uniformly chosen same-class duplicates until every class matches
/// the largest one. Classes are taken from the hard label.
pub fn random_oversample<R: rand::Rng + ?Sized>(
    dataset: &[FeatureVector],
    n_classes: usize,
    rng: &mut R,
) -> Result<Vec<FeatureVector>> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, fv) in dataset.iter().enumerate() {
        let k = fv.hard_class();
        by_class
            .get_mut(k)
            .ok_or_else(|| Error::data(format!("label class {k} out of range")))?
            .push(i);
    }
    if let Some(k) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::data(format!("class {k} has no samples to oversample")));
    }
    let target = by_class.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = dataset.to_vec();
    for members in &by_class {
        for _ in members.len()..target {
            out.push(dataset[members[rng.random_range(0..members.len())]].clone());
        }
    }
    Ok(out)
}

/// Inverse-frequency weights `N / (K · N_k)`.
pub fn compute_class_weights(labels: &[usize], n_classes: usize) -> Result<Vec<f64>> {
    if n_classes < 2 {
        return Err(Error::config("class weights need at least two classes"));
    }
    let mut counts = vec![0usize; n_classes];
    for &k in labels {
        *counts
            .get_mut(k)
            .ok_or_else(|| Error::data(format!("label {k} out of range")))? += 1;
    }
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(Error::data(format!("class {k} is absent")));
    }
    let n = labels.len() as f64;
    Ok(counts.iter().map(|&c| n / (n_classes as f64 * c as f64)).collect())
}

/// Output of [`augment_training_set`].
#[derive(Debug, Clone)]
pub struct AugmentedSet {
    /// Originals first, then raw-signal variants, MixUp samples, and
    /// oversampled duplicates.
    pub features: Vec<FeatureVector>,
    /// One weight per class; all ones when class weighting is off.
    pub class_weights: Vec<f64>,
    pub n_original: usize,
    pub n_raw_variants: usize,
    pub n_mixup: usize,
    pub n_oversampled: usize,
    /// Raw variants whose shift had to be clamped at a recording edge.
    pub n_clamped_shifts: usize,
}

fn raw_variant(
    src: &SegmentRef,
    parents: &[EegRecording],
    cfg: &AugmentConfig,
    index: u64,
) -> Result<(Segment, bool)> {
    let mut seg = src.materialize(parents)?;
    let mut clamped = false;
    if cfg.shift && cfg.max_shift_samples > 0 {
        let mut rng = seed::derived_rng(cfg.seed(), stream::SHIFT, index);
        let m = cfg.max_shift_samples as i64;
        let wanted = rng.random_range(-m..=m);
        let (shifted, applied) = temporal_shift(&parents[src.recording], &seg, wanted)?;
        clamped = applied != wanted;
        seg = shifted;
    }
    if cfg.noise {
        let mut rng = seed::derived_rng(cfg.seed(), stream::NOISE, index);
        seg = add_gaussian_noise(&seg, cfg.noise_rel_std, &mut rng);
    }
    Ok((seg, clamped))
}

/// Extracts and augments the training split.
///
/// The budget above the original count is `ceil(target_multiplier · N) − N`.
/// With both raw-signal and MixUp techniques enabled it is split evenly
/// between them; raw variants cycle through the segments in order. Random
/// oversampling then balances classes, which can only add items.
pub fn augment_training_set(
    train: &Split<SegmentRef>,
    parents: &[EegRecording],
    extractor: &FeatureExtractor,
    classes: &ClassMap,
    cfg: &AugmentConfig,
    audit: Option<&Audit>,
) -> Result<AugmentedSet> {
    train.require_role(SplitRole::Train, "augmentation")?;
    let segs = &train.items;
    if segs.is_empty() {
        return Err(Error::data("augmentation needs a non-empty training split"));
    }
    cfg.validate(segs[0].window_len)?;
    audit::record(audit, Stage::Augment, train.role, segs.len());

    let n = segs.len();
    let mut features = par::try_map(segs, |r| extractor.extract(&r.materialize(parents)?, classes))?;

    let target = (cfg.target_multiplier * n as f64).ceil() as usize;
    let extra = target.saturating_sub(n);
    let raw_on = cfg.noise || cfg.shift;
    let (n_raw, n_mix) = match (raw_on, cfg.mixup) {
        (true, true) => (extra / 2, extra - extra / 2),
        (true, false) => (extra, 0),
        (false, true) => (0, extra),
        (false, false) => (0, 0),
    };

    let raw = par::try_map_range(n_raw, |i| {
        let (seg, clamped) = raw_variant(&segs[i % n], parents, cfg, i as u64)?;
        Ok((extractor.extract(&seg, classes)?, clamped))
    })?;
    let n_clamped_shifts = raw.iter().filter(|(_, c)| *c).count();
    features.extend(raw.into_iter().map(|(fv, _)| fv));

    let pool = features.len();
    let mixed = par::try_map_range(n_mix, |i| {
        let mut rng = seed::derived_rng(cfg.seed(), stream::MIXUP, i as u64);
        let a = rng.random_range(0..pool);
        let b = rng.random_range(0..pool);
        let lambda = sample_mixup_lambda(cfg.mixup_alpha, &mut rng)?;
        mixup(&features[a], &features[b], lambda)
    })?;
    features.extend(mixed);

    let before = features.len();
    if cfg.oversample {
        let mut rng = seed::derived_rng(cfg.seed(), stream::OVERSAMPLE, 0);
        features = random_oversample(&features, classes.n_classes(), &mut rng)?;
    }
    let n_oversampled = features.len() - before;

    let class_weights = if cfg.class_weights {
        let labels: Vec<usize> = features.iter().map(FeatureVector::hard_class).collect();
        compute_class_weights(&labels, classes.n_classes())?
    } else {
        vec![1.0; classes.n_classes()]
    };

    Ok(AugmentedSet {
        features,
        class_weights,
        n_original: n,
        n_raw_variants: n_raw,
        n_mixup: n_mix,
        n_oversampled,
        n_clamped_shifts,
    })
}
