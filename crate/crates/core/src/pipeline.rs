//! End-to-end runs driven by one JSON configuration.
//!
//! The master `seed` fans out to per-stage seeds with
//! [`derive_seed`](crate::seed::derive_seed)`(seed, stage, 0)` for the synthetic
//! cohort, split, augmentation and model, unless a section sets its own
//! `rng_seed`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audit::{self, Audit, Split, SplitRole, Stage};
use crate::augment::{augment_training_set, AugmentConfig};
use crate::dataio::{default_cohort, generate_synthetic_subject, load_recording, load_recording_csv, EegRecording};
use crate::error::{Error, Result};
use crate::eval::{
    default_ablation_dims, evaluate, run_ablation, split_dataset, split_items, AblationRow, AblationTable,
    EvalReport, ExperimentData, SplitKey, SplitSpec,
};
use crate::features::{fit_standardizer, ClassMap, FeatureConfig, FeatureExtractor, FeatureVector, Standardizer};
use crate::model::{save_model, train, EpochRecord, Mlp, ModelConfig, TrainHistory};
use crate::par;
use crate::preprocess::{clean_recording, segment_refs, PreprocessConfig, SegmentRef};
use crate::seed::{derive_seed, stream};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// `.earg` or `.csv` recordings; empty means use the synthetic cohort.
    pub recordings: Vec<PathBuf>,
    /// Sampling rate for CSV input. CSV recordings get subject ids by position.
    pub csv_fs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub duration_s: f64,
    pub fs: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        // 1001 s gives 1000 two-second windows at a one-second hop.
        SynthConfig {
            n_subjects: 6,
            duration_s: 1001.0,
            fs: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub hidden_dims: Vec<Vec<usize>>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            hidden_dims: default_ablation_dims(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub synth: SynthConfig,
    pub preprocess: PreprocessConfig,
    pub features: FeatureConfig,
    pub augment: AugmentConfig,
    /// `input_dim` and `n_classes` are derived from the data and overwritten.
    pub model: ModelConfig,
    pub split: SplitSpec,
    pub ablation: AblationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            output_dir: PathBuf::from("out"),
            data: DataConfig::default(),
            synth: SynthConfig::default(),
            preprocess: PreprocessConfig::default(),
            features: FeatureConfig::default(),
            augment: AugmentConfig::default(),
            model: ModelConfig::default(),
            split: SplitSpec::default(),
            ablation: AblationConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| Error::config(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Validates every section. Model widths that the data determines are
    /// not checked here.
    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        self.split.validate()?;
        self.augment.validate(self.preprocess.window_len)?;
        ModelConfig {
            input_dim: self.features.dim(self.preprocess.channels.len()),
            ..self.model.clone()
        }
        .validate()?;
        if self.data.recordings.is_empty() {
            if self.synth.n_subjects == 0 {
                return Err(Error::config("SynthConfig: n_subjects must be at least 1"));
            }
            if !(self.synth.fs > 0.0) || !(self.synth.duration_s > 0.0) {
                return Err(Error::config("SynthConfig: fs and duration_s must be positive"));
            }
            FeatureExtractor::new(&self.features, self.synth.fs)?;
        }
        for dims in &self.ablation.hidden_dims {
            if dims.is_empty() || dims.contains(&0) {
                return Err(Error::config(format!("AblationConfig: invalid hidden dims {dims:?}")));
            }
        }
        Ok(())
    }

    /// Copy with unset per-stage seeds derived from the master seed.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.augment.rng_seed.get_or_insert(derive_seed(self.seed, stream::AUGMENT, 0));
        c.model.rng_seed.get_or_insert(derive_seed(self.seed, stream::MODEL, 0));
        c.split.rng_seed.get_or_insert(derive_seed(self.seed, stream::SPLIT, 0));
        c
    }
}

/// Reads the configured recordings, or synthesizes the cohort when none are
/// listed, and cleans each one (channel selection, bandpass, notch). Raw
/// samples are dropped as soon as the cleaned copy exists.
pub fn load_clean_recordings(cfg: &PipelineConfig) -> Result<Vec<EegRecording>> {
    let clean = |rec: EegRecording| clean_recording(&rec, &cfg.preprocess).map_err(|e| e.in_stage("preprocess"));
    let recs = if cfg.data.recordings.is_empty() {
        let specs = default_cohort(cfg.synth.n_subjects, cfg.seed, cfg.synth.fs);
        par::try_map(&specs, |spec| {
            let raw = generate_synthetic_subject(spec, cfg.synth.duration_s, cfg.synth.fs)
                .map_err(|e| e.in_stage("synth"))?;
            clean(raw)
        })?
    } else {
        let paths = &cfg.data.recordings;
        par::try_map_range(paths.len(), |i| {
            let rec = load_any(&paths[i], i as u16, cfg.data.csv_fs).map_err(|e| e.in_stage("load"))?;
            clean(rec)
        })?
    };
    if let Some(r) = recs.iter().find(|r| r.sampling_rate_hz != recs[0].sampling_rate_hz) {
        return Err(Error::data(format!(
            "load: recordings mix sampling rates ({} Hz and {} Hz)",
            recs[0].sampling_rate_hz, r.sampling_rate_hz
        )));
    }
    Ok(recs)
}

/// Loads a `.earg` container, or a CSV file with the given rate and subject id.
pub fn load_any(path: &Path, subject_id: u16, csv_fs: Option<f64>) -> Result<EegRecording> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let fs = csv_fs.ok_or_else(|| {
            Error::config(format!("{}: CSV input needs a sampling rate (csv_fs / --fs)", path.display()))
        })?;
        load_recording_csv(path, fs, subject_id)
    } else {
        load_recording(path)
    }
}

/// Counts describing a prepared experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrepSummary {
    pub n_recordings: usize,
    pub n_classes: usize,
    pub feature_dim: usize,
    pub n_segments: usize,
    pub n_train_segments: usize,
    pub n_validation: usize,
    pub n_test: usize,
    pub n_train_augmented: usize,
    pub n_raw_variants: usize,
    pub n_mixup: usize,
    pub n_oversampled: usize,
    pub n_clamped_shifts: usize,
    pub split_hash: String,
}

/// Segments, splits, augments the training split, extracts features and
/// fits the standardizer on the (augmented) training features.
pub fn prepare_experiment(
    cfg: &PipelineConfig,
    cleaned: &[EegRecording],
    audit: Option<&Audit>,
) -> Result<(ExperimentData, PrepSummary, ClassMap)> {
    let first = cleaned.first().ok_or_else(|| Error::data("no recordings"))?;
    let classes = ClassMap::from_subjects(cleaned.iter().map(|r| r.subject_id));
    let extractor = FeatureExtractor::new(&cfg.features, first.sampling_rate_hz)?;
    let refs = segment_refs(cleaned, cfg.preprocess.window_len, cfg.preprocess.hop)
        .map_err(|e| e.in_stage("segment"))?;

    let keys = refs
        .iter()
        .map(|r| {
            Ok(SplitKey {
                class: classes.class_of(r.subject_id)?,
                recording: r.recording,
                offset: r.source_offset,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let assignment = split_dataset(&keys, &cfg.split).map_err(|e| e.in_stage("split"))?;
    let split_hash = assignment.hash();
    let (train_refs, val_refs, test_refs) = split_items(&refs, &assignment);

    let aug = augment_training_set(&train_refs, cleaned, &extractor, &classes, &cfg.augment, audit)
        .map_err(|e| e.in_stage("augment"))?;

    let extract = |split: &Split<SegmentRef>, stage: Stage| -> Result<Split<FeatureVector>> {
        audit::record(audit, stage, split.role, split.len());
        let items = par::try_map(&split.items, |r| extractor.extract(&r.materialize(cleaned)?, &classes))
            .map_err(|e| e.in_stage("extract"))?;
        Ok(Split::new(split.role, items))
    };
    let validation = extract(&val_refs, Stage::Validate)?;
    let test = extract(&test_refs, Stage::Evaluate)?;

    let train_raw = Split::new(SplitRole::Train, aug.features);
    let standardizer = fit_standardizer(&train_raw, audit).map_err(|e| e.in_stage("standardize"))?;
    let train_z = standardizer.apply_split(&train_raw, audit)?;
    let validation_z = standardizer.apply_split(&validation, audit)?;

    let summary = PrepSummary {
        n_recordings: cleaned.len(),
        n_classes: classes.n_classes(),
        feature_dim: extractor.dim(first.n_channels()),
        n_segments: refs.len(),
        n_train_segments: train_refs.len(),
        n_validation: validation.len(),
        n_test: test.len(),
        n_train_augmented: train_z.len(),
        n_raw_variants: aug.n_raw_variants,
        n_mixup: aug.n_mixup,
        n_oversampled: aug.n_oversampled,
        n_clamped_shifts: aug.n_clamped_shifts,
        split_hash: split_hash.clone(),
    };
    let data = ExperimentData {
        train: train_z,
        validation: validation_z,
        test,
        standardizer,
        class_weights: aug.class_weights,
        split_hash,
    };
    Ok((data, summary, classes))
}

/// Model configuration with widths taken from the prepared data.
pub fn model_config_for(cfg: &PipelineConfig, summary: &PrepSummary) -> ModelConfig {
    ModelConfig {
        input_dim: summary.feature_dim,
        n_classes: summary.n_classes,
        ..cfg.model.clone()
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: EvalReport,
    pub history: TrainHistory,
    pub model: Mlp,
    pub standardizer: Standardizer,
    pub summary: PrepSummary,
    pub classes: ClassMap,
}

/// Progress messages from a run.
pub type Logger<'a> = &'a mut dyn FnMut(&str);

pub fn run_pipeline(cfg: &PipelineConfig, audit: Option<&Audit>, log: Logger<'_>) -> Result<PipelineOutput> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    log("loading and filtering recordings");
    let cleaned = load_clean_recordings(&cfg)?;
    log(&format!("{} recordings; extracting and augmenting features", cleaned.len()));
    let (data, summary, classes) = prepare_experiment(&cfg, &cleaned, audit)?;
    drop(cleaned);
    log(&format!(
        "{} segments → train {} (augmented to {}), validation {}, test {}",
        summary.n_segments, summary.n_train_segments, summary.n_train_augmented, summary.n_validation, summary.n_test
    ));
    let model_cfg = model_config_for(&cfg, &summary);
    audit::record(audit, Stage::Train, SplitRole::Train, data.train.len());
    let mut on_epoch = |e: &EpochRecord| {
        log(&format!(
            "epoch {:>3}  train {:.4}  val {:.4}  val acc {:.4}",
            e.epoch, e.train_loss, e.val_loss, e.val_accuracy
        ))
    };
    let (model, history) = train(
        &data.train.items,
        &data.validation.items,
        &model_cfg,
        &data.class_weights,
        &mut on_epoch,
    )
    .map_err(|e| e.in_stage("train"))?;
    let report = evaluate(&model, &data.standardizer, &data.test, audit).map_err(|e| e.in_stage("eval"))?;
    log(&format!("test accuracy {:.4}", report.overall_accuracy));
    Ok(PipelineOutput {
        report,
        history,
        model,
        standardizer: data.standardizer,
        summary,
        classes,
    })
}

/// Writes `model.json`, `standardizer.json`, `report.json`, `report.txt`,
/// `history.csv` and `summary.json` into `dir`.
pub fn write_pipeline_outputs(out: &PipelineOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    save_model(&out.model, dir.join("model.json"))?;
    std::fs::write(dir.join("standardizer.json"), serde_json::to_string_pretty(&out.standardizer)?)?;
    std::fs::write(dir.join("report.json"), out.report.to_json()?)?;
    let names: Vec<String> = out.classes.subject_ids().iter().map(|s| format!("S{s}")).collect();
    std::fs::write(dir.join("report.txt"), out.report.render_text(&names))?;
    out.history.write_csv(std::fs::File::create(dir.join("history.csv"))?)?;
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&out.summary)? + "\n")?;
    Ok(())
}

/// Prepares the data once and trains every configured architecture on it.
pub fn run_ablation_from_config(
    cfg: &PipelineConfig,
    audit: Option<&Audit>,
    log: Logger<'_>,
) -> Result<(AblationTable, PrepSummary)> {
    cfg.validate()?;
    if cfg.ablation.hidden_dims.is_empty() {
        return Err(Error::config("AblationConfig: hidden_dims is empty"));
    }
    let cfg = cfg.resolved();
    log("loading and filtering recordings");
    let cleaned = load_clean_recordings(&cfg)?;
    let (data, summary, _) = prepare_experiment(&cfg, &cleaned, audit)?;
    drop(cleaned);
    log(&format!("split hash {}", summary.split_hash));
    let base = model_config_for(&cfg, &summary);
    let configs: Vec<ModelConfig> = cfg
        .ablation
        .hidden_dims
        .iter()
        .map(|d| ModelConfig {
            hidden_dims: d.clone(),
            ..base.clone()
        })
        .collect();
    let mut on_row = |r: &AblationRow| {
        log(&format!(
            "{}: accuracy {:.4} (best epoch {}, split {})",
            r.config,
            r.accuracy,
            r.best_epoch,
            &r.split_hash[..12]
        ))
    };
    let table = run_ablation(&data, &configs, audit, &mut on_row).map_err(|e| e.in_stage("ablate"))?;
    Ok((table, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_and_validates() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!(PipelineConfig::from_json(&c.to_json().unwrap()).unwrap(), c);
        assert_eq!(PipelineConfig::from_json("{}").unwrap(), c);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = PipelineConfig::from_json(r#"{"model": {"hidden": [3]}}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(PipelineConfig::from_json(r#"{"sede": 1}"#).is_err());
    }

    #[test]
    fn bad_ratios_name_split_spec() {
        let c = PipelineConfig::from_json(r#"{"split": {"ratios": [0.5, 0.1, 0.1]}}"#).unwrap();
        let err = c.validate().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("SplitSpec"));
    }

    #[test]
    fn seeds_fan_out() {
        let r = PipelineConfig::default().resolved();
        let seeds = [r.augment.rng_seed, r.model.rng_seed, r.split.rng_seed];
        assert!(seeds.iter().all(Option::is_some));
        assert_ne!(seeds[0], seeds[1]);
        let pinned = PipelineConfig::from_json(r#"{"model": {"rng_seed": 5}}"#).unwrap().resolved();
        assert_eq!(pinned.model.rng_seed, Some(5));
    }
}
