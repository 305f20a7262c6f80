use eareeg_core::audit::{Audit, SplitRole, Stage};
use eareeg_core::eval::SplitStrategy;
use eareeg_core::model::{load_model, save_model};
use eareeg_core::pipeline::{run_ablation_from_config, run_pipeline, PipelineConfig, PipelineOutput};
use eareeg_core::Error;

fn small() -> PipelineConfig {
    let mut cfg = PipelineConfig {
        seed: 11,
        ..PipelineConfig::default()
    };
    cfg.synth.n_subjects = 3;
    cfg.synth.duration_s = 30.0;
    cfg.augment.target_multiplier = 2.0;
    cfg.model.hidden_dims = vec![32, 16];
    cfg.model.max_epochs = 6;
    cfg.model.early_stop_patience = 3;
    cfg.split.min_per_class = 2;
    cfg
}

fn quiet(cfg: &PipelineConfig, audit: Option<&Audit>) -> PipelineOutput {
    run_pipeline(cfg, audit, &mut |_| {}).expect("pipeline")
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = small();
    let one = in_pool(1, || quiet(&cfg, None));
    let four = in_pool(4, || quiet(&cfg, None));
    assert_eq!(one.report.to_json().unwrap(), four.report.to_json().unwrap());
    assert_eq!(one.model.to_json().unwrap(), four.model.to_json().unwrap());
    assert_eq!(one.summary, four.summary);
    assert_eq!(one.history.epochs.len(), four.history.epochs.len());
    for (a, b) in one.history.epochs.iter().zip(&four.history.epochs) {
        assert_eq!(a.train_loss.to_bits(), b.train_loss.to_bits());
        assert_eq!(a.val_loss.to_bits(), b.val_loss.to_bits());
    }
}

#[test]
fn audit_sees_no_held_out_data_in_training_stages() {
    let audit = Audit::new();
    let out = quiet(&small(), Some(&audit));
    for stage in [Stage::Augment, Stage::FitStandardizer, Stage::Train] {
        assert_eq!(audit.count(stage, SplitRole::Validation), 0, "{stage:?}");
        assert_eq!(audit.count(stage, SplitRole::Test), 0, "{stage:?}");
    }
    assert_eq!(audit.count(Stage::Augment, SplitRole::Train), out.summary.n_train_segments);
    assert_eq!(audit.count(Stage::FitStandardizer, SplitRole::Train), out.summary.n_train_augmented);
    assert_eq!(audit.count(Stage::Evaluate, SplitRole::Test), 2 * out.summary.n_test);
    assert_eq!(out.report.n_test, out.summary.n_test);
}

#[test]
fn summary_counts_add_up() {
    let out = quiet(&small(), None);
    let s = &out.summary;
    // 30 s at 1 kHz with 2 s windows and 1 s hop
    assert_eq!(s.n_segments, 3 * 29);
    assert_eq!(s.n_train_segments + s.n_validation + s.n_test, s.n_segments);
    assert_eq!(s.n_train_augmented, s.n_train_segments + s.n_raw_variants + s.n_mixup + s.n_oversampled);
    assert!(s.n_train_augmented >= 2 * s.n_train_segments);
    assert_eq!(s.feature_dim, 272);
    assert_eq!(out.model.input_dim(), 272);
    assert_eq!(out.model.n_classes(), 3);
    assert!(out.history.best_epoch >= 1 && out.history.best_epoch <= out.history.stopped_epoch);
    let best = out.history.best().val_loss;
    assert!(out.history.epochs.iter().all(|e| e.val_loss >= best));
}

#[test]
fn block_contiguous_split_differs_and_runs() {
    let mut cfg = small();
    let random = quiet(&cfg, None);
    cfg.split.strategy = SplitStrategy::BlockContiguous;
    let block = quiet(&cfg, None);
    assert_ne!(random.summary.split_hash, block.summary.split_hash);
    assert_eq!(random.summary.n_test, block.summary.n_test);
}

#[test]
fn saved_model_reproduces_predictions() {
    let out = quiet(&small(), None);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_model(&out.model, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back.to_json().unwrap(), out.model.to_json().unwrap());
    let x = vec![0.25; 272];
    assert_eq!(back.predict(&x).unwrap(), out.model.predict(&x).unwrap());
}

#[test]
fn ablation_rows_share_one_split() {
    let mut cfg = small();
    cfg.ablation.hidden_dims = vec![vec![16], vec![32, 16]];
    let (table, summary) = run_ablation_from_config(&cfg, None, &mut |_| {}).unwrap();
    assert_eq!(table.rows.len(), 2);
    assert!(table.rows.iter().all(|r| r.split_hash == summary.split_hash));
    assert_eq!(table.rows[1].config, "32-16");

    cfg.ablation.hidden_dims.clear();
    assert!(matches!(run_ablation_from_config(&cfg, None, &mut |_| {}), Err(Error::Config(_))));
}

#[test]
fn invalid_configs_are_config_errors() {
    let mut cfg = small();
    cfg.split.ratios = [0.5, 0.5, 0.5];
    let err = run_pipeline(&cfg, None, &mut |_| {}).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("SplitSpec"));

    assert!(PipelineConfig::from_json(r#"{"seed": 1, "bogus": 2}"#).is_err());
    assert!(PipelineConfig::from_json(r#"{"model": {"dropout_rate": 1.5}}"#)
        .and_then(|c| c.validate())
        .is_err());
}
