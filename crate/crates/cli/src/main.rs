//! `eareeg`: command-line driver for the ear-EEG identification pipeline.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eareeg_core::augment::augment_training_set;
use eareeg_core::dataio::{default_cohort, generate_synthetic_subject, save_recording};
use eareeg_core::eval::{evaluate, split_dataset, split_items, SplitKey};
use eareeg_core::features::{fit_standardizer, read_features_csv, write_features_csv, ClassMap, FeatureExtractor};
use eareeg_core::model::{load_model, save_model, train, ModelConfig};
use eareeg_core::pipeline::{
    load_clean_recordings, run_ablation_from_config, run_pipeline, write_pipeline_outputs, PipelineConfig,
};
use eareeg_core::preprocess::segment_refs;
use eareeg_core::seed::{derive_seed, stream};
use eareeg_core::{par, Error, Result, Split, Standardizer};

#[derive(Parser)]
#[command(name = "eareeg", version, about = "Ear-EEG subject identification pipeline")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    /// JSON pipeline configuration (required for `pipeline` and `ablate`).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Sampling rate of CSV recordings in Hz.
    #[arg(long, global = true, value_name = "FLOAT")]
    fs: Option<f64>,
    /// Worker threads (default: all available processors).
    #[arg(long, global = true, value_name = "INT")]
    threads: Option<usize>,
    /// Print progress to standard error.
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Args, Clone)]
struct Inputs {
    /// Recordings (`.earg`, or `.csv` with --fs); overrides the configuration.
    #[arg(long = "input", short = 'i', value_name = "FILE", num_args = 1..)]
    input: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic cohort as `.earg` files plus a manifest.
    Synth {
        #[arg(long, value_name = "N")]
        n_subjects: Option<usize>,
        /// Recording length in seconds.
        #[arg(long, value_name = "SECONDS")]
        duration: Option<f64>,
    },
    /// Select channels and filter recordings; writes cleaned `.earg` files.
    Preprocess(Inputs),
    /// Filter, segment and extract features from recordings into one CSV.
    Extract(Inputs),
    /// Split, augment the training part, and write train/validation/test feature CSVs.
    Augment(Inputs),
    /// Fit the standardizer and train the classifier on feature CSVs.
    Train {
        #[arg(long, value_name = "CSV")]
        train: PathBuf,
        #[arg(long, value_name = "CSV")]
        validation: PathBuf,
        /// JSON array of per-class loss weights (default: all ones).
        #[arg(long, value_name = "JSON")]
        class_weights: Option<PathBuf>,
    },
    /// Evaluate a trained model on a test feature CSV.
    Eval {
        #[arg(long, value_name = "JSON")]
        model: PathBuf,
        #[arg(long, value_name = "JSON")]
        standardizer: PathBuf,
        #[arg(long, value_name = "CSV")]
        test: PathBuf,
    },
    /// Train and evaluate every configured architecture on one shared split.
    Ablate,
    /// Run preprocessing through evaluation end to end.
    Pipeline,
}

struct Ctx {
    cfg: PipelineConfig,
    out: PathBuf,
    verbose: bool,
}

impl Ctx {
    fn log(&self, msg: &str) {
        if self.verbose {
            eprintln!("[eareeg] {msg}");
        }
    }

    fn logger(&self) -> impl FnMut(&str) + '_ {
        move |m: &str| self.log(m)
    }

    fn with_inputs(&self, inputs: &Inputs) -> PipelineConfig {
        let mut cfg = self.cfg.clone();
        if !inputs.input.is_empty() {
            cfg.data.recordings = inputs.input.clone();
        }
        cfg
    }

    fn output(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out)?;
        Ok(self.out.join(name))
    }
}

fn build_context(g: &Global, needs_config: bool) -> Result<Ctx> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None if needs_config => return Err(Error::config("this command requires --config")),
        None => PipelineConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.output_dir = o.clone();
    }
    if let Some(fs) = g.fs {
        if !(fs > 0.0) {
            return Err(Error::config("--fs must be positive"));
        }
        cfg.data.csv_fs = Some(fs);
    }
    cfg.validate()?;
    Ok(Ctx {
        out: cfg.output_dir.clone(),
        cfg,
        verbose: g.verbose,
    })
}

fn configure_threads(n: Option<usize>) -> Result<()> {
    let Some(n) = n else { return Ok(()) };
    if n == 0 {
        return Err(Error::config("--threads must be at least 1"));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn cmd_synth(ctx: &Ctx, n_subjects: Option<usize>, duration: Option<f64>) -> Result<()> {
    let synth = &ctx.cfg.synth;
    let n = n_subjects.unwrap_or(synth.n_subjects);
    let duration = duration.unwrap_or(synth.duration_s);
    if n == 0 || !(duration > 0.0) {
        return Err(Error::config("SynthConfig: n_subjects and duration must be positive"));
    }
    let specs = default_cohort(n, ctx.cfg.seed, synth.fs);
    std::fs::create_dir_all(&ctx.out)?;
    let files = par::try_map(&specs, |spec| {
        let rec = generate_synthetic_subject(spec, duration, synth.fs)?;
        let name = format!("subject_{:02}.earg", spec.subject_id);
        save_recording(&rec, ctx.out.join(&name))?;
        Ok(serde_json::json!({
            "file": name,
            "subject_id": spec.subject_id,
            "rng_seed": spec.rng_seed,
            "n_samples": rec.n_samples(),
        }))
    })?;
    let manifest = serde_json::json!({
        "master_seed": ctx.cfg.seed,
        "fs": synth.fs,
        "duration_s": duration,
        "subjects": specs,
        "files": files,
    });
    write_json(&ctx.out.join("manifest.json"), &manifest)?;
    println!("wrote {} recordings to {}", n, ctx.out.display());
    Ok(())
}

fn cmd_preprocess(ctx: &Ctx, inputs: &Inputs) -> Result<()> {
    let cfg = ctx.with_inputs(inputs);
    let cleaned = load_clean_recordings(&cfg)?;
    for rec in &cleaned {
        let path = ctx.output(&format!("clean_subject_{:02}.earg", rec.subject_id))?;
        save_recording(rec, &path)?;
        ctx.log(&format!("wrote {}", path.display()));
    }
    println!("wrote {} cleaned recordings to {}", cleaned.len(), ctx.out.display());
    Ok(())
}

fn cmd_extract(ctx: &Ctx, inputs: &Inputs) -> Result<()> {
    let cfg = ctx.with_inputs(inputs);
    let cleaned = load_clean_recordings(&cfg)?;
    let classes = ClassMap::from_subjects(cleaned.iter().map(|r| r.subject_id));
    let ex = FeatureExtractor::new(&cfg.features, cleaned[0].sampling_rate_hz)?;
    let refs = segment_refs(&cleaned, cfg.preprocess.window_len, cfg.preprocess.hop)?;
    let features = par::try_map(&refs, |r| ex.extract(&r.materialize(&cleaned)?, &classes))
        .map_err(|e| e.in_stage("extract"))?;
    let path = ctx.output("features.csv")?;
    write_features_csv(&path, &features)?;
    println!("wrote {} feature vectors of dimension {} to {}", features.len(), ex.dim(cleaned[0].n_channels()), path.display());
    Ok(())
}

fn cmd_augment(ctx: &Ctx, inputs: &Inputs) -> Result<()> {
    let cfg = ctx.with_inputs(inputs).resolved();
    let cleaned = load_clean_recordings(&cfg)?;
    let classes = ClassMap::from_subjects(cleaned.iter().map(|r| r.subject_id));
    let ex = FeatureExtractor::new(&cfg.features, cleaned[0].sampling_rate_hz)?;
    let refs = segment_refs(&cleaned, cfg.preprocess.window_len, cfg.preprocess.hop)?;
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
    let (train_refs, val_refs, test_refs) = split_items(&refs, &assignment);
    let aug = augment_training_set(&train_refs, &cleaned, &ex, &classes, &cfg.augment, None)
        .map_err(|e| e.in_stage("augment"))?;
    write_features_csv(ctx.output("train.csv")?, &aug.features)?;
    for (name, split) in [("validation.csv", &val_refs), ("test.csv", &test_refs)] {
        let fv = par::try_map(&split.items, |r| ex.extract(&r.materialize(&cleaned)?, &classes))?;
        write_features_csv(ctx.output(name)?, &fv)?;
    }
    write_json(&ctx.output("class_weights.json")?, &serde_json::json!(aug.class_weights))?;
    write_json(
        &ctx.output("split.json")?,
        &serde_json::json!({
            "hash": assignment.hash(),
            "n_train": train_refs.len(),
            "n_validation": val_refs.len(),
            "n_test": test_refs.len(),
            "n_train_augmented": aug.features.len(),
        }),
    )?;
    println!(
        "train {} → {} augmented, validation {}, test {} (split {})",
        train_refs.len(),
        aug.features.len(),
        val_refs.len(),
        test_refs.len(),
        &assignment.hash()[..12]
    );
    Ok(())
}

fn cmd_train(ctx: &Ctx, train_csv: &Path, val_csv: &Path, weights: Option<&Path>) -> Result<()> {
    let cfg = ctx.cfg.resolved();
    let train_set = Split::train(read_features_csv(train_csv)?);
    let val_set = Split::validation(read_features_csv(val_csv)?);
    let first = train_set.items.first().ok_or_else(|| Error::data("training CSV is empty"))?;
    let n_classes = first.soft_label.len();
    let class_weights: Vec<f64> = match weights {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => vec![1.0; n_classes],
    };
    let standardizer = fit_standardizer(&train_set, None)?;
    let train_z = standardizer.apply_split(&train_set, None)?;
    let val_z = standardizer.apply_split(&val_set, None)?;
    let model_cfg = ModelConfig {
        input_dim: first.dim(),
        n_classes,
        ..cfg.model.clone()
    };
    let mut log = |e: &eareeg_core::model::EpochRecord| {
        ctx.log(&format!(
            "epoch {:>3}  train {:.4}  val {:.4}  val acc {:.4}",
            e.epoch, e.train_loss, e.val_loss, e.val_accuracy
        ))
    };
    let (model, history) = train(&train_z.items, &val_z.items, &model_cfg, &class_weights, &mut log)
        .map_err(|e| e.in_stage("train"))?;
    save_model(&model, ctx.output("model.json")?)?;
    std::fs::write(ctx.output("standardizer.json")?, serde_json::to_string_pretty(&standardizer)?)?;
    history.write_csv(std::fs::File::create(ctx.output("history.csv")?)?)?;
    println!(
        "best epoch {} of {}: validation accuracy {:.4}",
        history.best_epoch,
        history.stopped_epoch,
        history.best().val_accuracy
    );
    Ok(())
}

fn cmd_eval(ctx: &Ctx, model: &Path, standardizer: &Path, test: &Path) -> Result<()> {
    let model = load_model(model)?;
    let standardizer: Standardizer = serde_json::from_str(&std::fs::read_to_string(standardizer)?)?;
    let test = Split::test(read_features_csv(test)?);
    let report = evaluate(&model, &standardizer, &test, None)?;
    std::fs::write(ctx.output("report.json")?, report.to_json()?)?;
    let text = report.render_text(&[]);
    std::fs::write(ctx.output("report.txt")?, &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_ablate(ctx: &Ctx) -> Result<()> {
    let mut log = ctx.logger();
    let (table, summary) = run_ablation_from_config(&ctx.cfg, None, &mut log)?;
    std::fs::write(ctx.output("ablation.csv")?, table.to_csv()?)?;
    let text = table.render_text();
    std::fs::write(ctx.output("ablation.txt")?, &text)?;
    print!("{text}");
    println!("all rows trained on split {}", summary.split_hash);
    Ok(())
}

fn cmd_pipeline(ctx: &Ctx) -> Result<()> {
    let mut log = ctx.logger();
    let out = run_pipeline(&ctx.cfg, None, &mut log)?;
    write_pipeline_outputs(&out, &ctx.out)?;
    let names: Vec<String> = out.classes.subject_ids().iter().map(|s| format!("S{s}")).collect();
    print!("{}", out.report.render_text(&names));
    println!(
        "best epoch {} of {}; outputs in {}",
        out.history.best_epoch,
        out.history.stopped_epoch,
        ctx.out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads(cli.global.threads)?;
    let needs_config = matches!(cli.command, Command::Ablate | Command::Pipeline);
    let ctx = build_context(&cli.global, needs_config)?;
    ctx.log(&format!(
        "{} worker thread(s); master seed {} (model seed {})",
        par::current_num_threads(),
        ctx.cfg.seed,
        ctx.cfg.model.rng_seed.unwrap_or(derive_seed(ctx.cfg.seed, stream::MODEL, 0))
    ));
    match &cli.command {
        Command::Synth { n_subjects, duration } => cmd_synth(&ctx, *n_subjects, *duration),
        Command::Preprocess(i) => cmd_preprocess(&ctx, i),
        Command::Extract(i) => cmd_extract(&ctx, i),
        Command::Augment(i) => cmd_augment(&ctx, i),
        Command::Train {
            train,
            validation,
            class_weights,
        } => cmd_train(&ctx, train, validation, class_weights.as_deref()),
        Command::Eval {
            model,
            standardizer,
            test,
        } => cmd_eval(&ctx, model, standardizer, test),
        Command::Ablate => cmd_ablate(&ctx),
        Command::Pipeline => cmd_pipeline(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
