//! `mld` — command-line surface for the multi-label detection toolkit.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 training error.

use clap::{Args, Parser, Subcommand};
use mld_core::baselines::{BaseLearnerSpec, LearnerKind, Strategy};
use mld_core::dataset::{synth_generate, write_canonical, CorpusSchema, SidecarMeta, SynthSpec};
use mld_core::detector::{pretrain_ae, AeSpec};
use mld_core::error::Error;
use mld_core::experiment::{
    analyze, compare_reports, prepare_scaled, run_baseline, run_experiment, BaselineChoice,
    DatasetSpec, ExperimentReport, PretrainSource, RunConfig,
};
use mld_core::nn::save_checkpoint;
use mld_core::wgan::{build_augmented, train_category_wgan};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "mld",
    about = "Multi-label network attack detection: overlap analysis, augmentation, pre-training, detection and baselines",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze duplicate-merge overlap of a corpus and emit the report.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic raw corpus from a generator spec.
    Synth(SynthArgs),
    /// Train per-category generators and write the generated pool.
    Augment(RunArgs),
    /// Pre-train the autoencoder and write the encoder checkpoint.
    Pretrain(RunArgs),
    /// Run the full pipeline and write the experiment report.
    Run(RunArgs),
    /// Fit and evaluate one baseline with the same folds and metrics.
    Baseline(BaselineArgs),
    /// Align two or more reports from the same dataset into one table.
    Compare(CompareArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Run config whose dataset section names the corpus.
    #[arg(long, conflicts_with = "input")]
    config: Option<PathBuf>,
    /// Corpus files (alternative to --config).
    #[arg(long)]
    input: Vec<PathBuf>,
    /// Corpus schema for --input files: unsw-nb15, andmal-2020 or synth-raw.
    #[arg(long)]
    schema: Option<String>,
    /// Categorical columns to ordinal-encode before de-duplication.
    #[arg(long)]
    categorical: Vec<String>,
    /// Number of top duplicate groups to report.
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Synthetic generator spec (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output corpus path (synth-raw CSV).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Run config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Fold count override (k-fold over the training corpus).
    #[arg(long)]
    folds: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    run: RunArgs,
    /// br, clr, cc or ml-knn.
    #[arg(long)]
    strategy: String,
    /// Base learner for br/clr/cc: naive-bayes, logistic-regression,
    /// decision-tree, random-forest or svm.
    #[arg(long, default_value = "decision-tree")]
    learner: String,
    /// Neighbor count for ml-knn.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Smoothing for ml-knn.
    #[arg(long, default_value_t = 1.0)]
    smoothing: f64,
}

#[derive(Args)]
struct CompareArgs {
    /// Two or more experiment report files.
    reports: Vec<PathBuf>,
    /// Output path stem; writes <out>.json and <out>.txt.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are successful exits.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_config(
    path: &Path,
    seed: Option<u64>,
    folds: Option<usize>,
) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(folds) = folds {
        cfg.folds = Some(folds);
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Augment(args) => cmd_augment(args),
        Command::Pretrain(args) => cmd_pretrain(args),
        Command::Run(args) => cmd_run(args),
        Command::Baseline(args) => cmd_baseline(args),
        Command::Compare(args) => cmd_compare(args),
    }
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), Error> {
    let dataset = match (&args.config, args.input.is_empty()) {
        (Some(path), _) => RunConfig::load(path)?.dataset,
        (None, false) => {
            let schema = args
                .schema
                .as_deref()
                .ok_or_else(|| Error::Argument("--schema is required with --input".into()))?;
            DatasetSpec::Csv {
                schema: CorpusSchema::from_str(schema)?,
                train_paths: args.input.clone(),
                test_paths: Vec::new(),
                categorical_columns: args.categorical.clone(),
            }
        }
        (None, true) => {
            return Err(Error::Argument(
                "analyze needs either --config or --input files".into(),
            ))
        }
    };
    let report = analyze(&dataset, args.top_k)?;
    let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    match &args.out {
        Some(path) => std::fs::write(path, &json)?,
        None => println!("{json}"),
    }
    eprintln!(
        "lcard={:.3} ldiv={} top group total={}",
        report.lcard,
        report.ldiv,
        report.groups.first().map_or(0, |g| g.total)
    );
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), Error> {
    if !args.config.exists() {
        return Err(Error::MissingInput {
            path: args.config.clone(),
        });
    }
    let mut spec: SynthSpec = serde_json::from_str(&std::fs::read_to_string(&args.config)?)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let (raw, _) = synth_generate(&spec)?;
    // synth-raw CSV: features then a trailing label column.
    let file = std::fs::File::create(&args.out)?;
    let mut writer = std::io::BufWriter::new(file);
    use std::io::Write;
    let mut header = raw.feature_names.join(",");
    header.push_str(",label");
    writeln!(writer, "{header}")?;
    for sample in &raw.samples {
        let mut record: Vec<String> = sample.features.iter().map(|v| format!("{v}")).collect();
        record.push(sample.raw_label.clone());
        writeln!(writer, "{}", record.join(","))?;
    }
    writer.flush()?;
    eprintln!("wrote {} rows to {}", raw.samples.len(), args.out.display());
    Ok(())
}

fn cmd_augment(args: RunArgs) -> Result<(), Error> {
    let cfg = load_config(&args.config, args.seed, args.folds)?;
    let aug = cfg
        .augment
        .clone()
        .ok_or_else(|| Error::Argument("config has no augment section".into()))?;
    std::fs::create_dir_all(&args.out)?;
    let (train, _, _) = prepare_scaled(&cfg)?;
    let categories: Vec<String> = train
        .label_vocabulary
        .iter()
        .filter(|c| !aug.exclude.contains(c))
        .cloned()
        .collect();
    let mut manifest = Vec::new();
    let mut generators = Vec::new();
    for (i, category) in categories.iter().enumerate() {
        let mut wgan_cfg = aug.wgan.clone();
        wgan_cfg.train.seed = cfg.seed.wrapping_add(100 + i as u64);
        let (generator, log) = train_category_wgan(&train, category, &wgan_cfg)?;
        let ckpt_path = args.out.join(format!("generator_{category}.ckpt"));
        save_checkpoint(
            &generator.generator.spec,
            &generator.generator.params,
            &ckpt_path,
        )?;
        manifest.push(serde_json::json!({
            "category": category,
            "count": aug.per_category,
            "seed": wgan_cfg.train.seed,
            "config_digest": cfg.digest(),
            "final_critic_gap": log.epochs.last().map(|e| e.critic_gap),
            "checkpoint": ckpt_path.file_name().unwrap().to_str(),
        }));
        generators.push(generator);
    }
    let pool = build_augmented(&train, &generators, aug.per_category, cfg.seed)?;
    let mut rows = Vec::new();
    for (i, provenance) in pool.provenance.iter().enumerate() {
        if let mld_core::dataset::Provenance::Generated { category } = provenance {
            rows.push(mld_core::dataset::MultiLabeledSample {
                features: pool.features.row(i).to_vec(),
                multiplicity: [(category.clone(), 1u32)].into_iter().collect(),
                provenance: provenance.clone(),
            });
        }
    }
    let generated = mld_core::dataset::MultiLabelDataset {
        samples: rows,
        label_vocabulary: train.label_vocabulary.clone(),
    };
    write_canonical(
        &generated,
        &args.out.join("generated.csv"),
        &SidecarMeta {
            label_vocabulary: train.label_vocabulary.clone(),
            scaler: None,
            encodings: Default::default(),
        },
    )?;
    std::fs::write(
        args.out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).map_err(Error::from)?,
    )?;
    eprintln!(
        "trained {} generators, wrote {} generated rows",
        generators.len(),
        generated.samples.len()
    );
    Ok(())
}

fn cmd_pretrain(args: RunArgs) -> Result<(), Error> {
    let cfg = load_config(&args.config, args.seed, args.folds)?;
    std::fs::create_dir_all(&args.out)?;
    let (train, _, _) = prepare_scaled(&cfg)?;
    let pool = match cfg.pretrain {
        PretrainSource::None => {
            return Err(Error::Argument(
                "config has pretrain=none; nothing to pre-train".into(),
            ))
        }
        PretrainSource::Raw => build_augmented(&train, &[], 0, cfg.seed)?,
        PretrainSource::Augmented => {
            let aug = cfg.augment.clone().ok_or_else(|| {
                Error::Argument("pretrain=augmented needs an augment section".into())
            })?;
            let categories: Vec<String> = train
                .label_vocabulary
                .iter()
                .filter(|c| !aug.exclude.contains(c))
                .cloned()
                .collect();
            let mut generators = Vec::new();
            for (i, category) in categories.iter().enumerate() {
                let mut wgan_cfg = aug.wgan.clone();
                wgan_cfg.train.seed = cfg.seed.wrapping_add(100 + i as u64);
                let (generator, _) = train_category_wgan(&train, category, &wgan_cfg)?;
                generators.push(generator);
            }
            build_augmented(&train, &generators, aug.per_category, cfg.seed)?
        }
    };
    let ae_spec = AeSpec::new(cfg.encoder_widths.clone())?;
    let mut ae_train = cfg.ae_train.clone();
    ae_train.seed = cfg.seed.wrapping_add(500);
    let (ckpt, log) = pretrain_ae(&pool, &ae_spec, &ae_train)?;
    save_checkpoint(&ckpt.spec, &ckpt.params, &args.out.join("encoder.ckpt"))?;
    std::fs::write(
        args.out.join("pretrain_log.json"),
        serde_json::to_string_pretty(&log.epochs).map_err(Error::from)?,
    )?;
    eprintln!(
        "pre-trained on {} rows ({} generated); final reconstruction loss {:.6}",
        pool.len(),
        pool.generated_rows(),
        log.epochs.last().map_or(f64::NAN, |e| e.mean_loss)
    );
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), Error> {
    let cfg = load_config(&args.config, args.seed, args.folds)?;
    std::fs::create_dir_all(&args.out)?;
    let output = run_experiment(&cfg)?;
    output.report.save(&args.out.join("report.json"))?;
    cfg.save(&args.out.join("config.json"))?;
    for fold in &output.folds {
        let dir = args.out.join(format!("fold_{}", fold.fold));
        std::fs::create_dir_all(&dir)?;
        std::fs::write(
            dir.join("classifier.json"),
            serde_json::to_string(&fold.classifier).map_err(Error::from)?,
        )?;
        let encoder_ckpt = save_checkpoint(
            &fold.classifier.encoder_spec,
            &fold.classifier.encoder,
            &dir.join("encoder.ckpt"),
        )?;
        let head_ckpt = save_checkpoint(
            &fold.classifier.head_spec,
            &fold.classifier.head,
            &dir.join("head.ckpt"),
        )?;
        fold.classifier.codec.save(&dir.join("codec.json"))?;
        if let Some(ckpt) = &fold.encoder_checkpoint {
            save_checkpoint(&ckpt.spec, &ckpt.params, &dir.join("pretrained_encoder.ckpt"))?;
        }
        for generator in &fold.generators {
            save_checkpoint(
                &generator.generator.spec,
                &generator.generator.params,
                &dir.join(format!("generator_{}.ckpt", generator.category)),
            )?;
        }
        std::fs::write(
            dir.join("scalers.json"),
            serde_json::to_string_pretty(&fold.scalers).map_err(Error::from)?,
        )?;
        std::fs::write(
            dir.join("finetune_log.json"),
            serde_json::to_string_pretty(&fold.finetune_log).map_err(Error::from)?,
        )?;
        let manifest = serde_json::json!({
            "fold": fold.fold,
            "config_digest": cfg.digest(),
            "dataset_digest": cfg.dataset_digest(),
            "seed": cfg.seed,
            "encoder_digest": encoder_ckpt.content_digest,
            "head_digest": head_ckpt.content_digest,
            "pretrained_from": fold.classifier.pretrained_from,
            "classes": fold.classifier.codec.len(),
        });
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest).map_err(Error::from)?,
        )?;
    }
    let mean = output.report.mean;
    eprintln!(
        "{}: subsetacc={:.4} hloss={:.4} acc={:.4} p={:.4} r={:.4} f1={:.4} ({} fold(s))",
        output.report.method,
        mean.subsetacc,
        mean.hloss,
        mean.acc,
        mean.precision,
        mean.recall,
        mean.f1,
        output.report.folds.len()
    );
    Ok(())
}

fn cmd_baseline(args: BaselineArgs) -> Result<(), Error> {
    let cfg = load_config(&args.run.config, args.run.seed, args.run.folds)?;
    std::fs::create_dir_all(&args.run.out)?;
    let choice = if args.strategy == "ml-knn" {
        BaselineChoice::MlKnn {
            k: args.k,
            s: args.smoothing,
        }
    } else {
        let strategy = Strategy::from_str(&args.strategy)?;
        let kind = LearnerKind::from_str(&args.learner)?;
        let learner = BaseLearnerSpec::new(kind, cfg.seed);
        BaselineChoice::Transform { strategy, learner }
    };
    let (report, bundle) = run_baseline(&cfg, &choice)?;
    report.save(&args.run.out.join("report.json"))?;
    std::fs::write(
        args.run.out.join("baseline.json"),
        serde_json::to_string(&bundle).map_err(Error::from)?,
    )?;
    let mean = report.mean;
    eprintln!(
        "{}: subsetacc={:.4} hloss={:.4} acc={:.4} p={:.4} r={:.4} f1={:.4}",
        report.method, mean.subsetacc, mean.hloss, mean.acc, mean.precision, mean.recall, mean.f1
    );
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), Error> {
    if args.reports.len() < 2 {
        return Err(Error::Argument(
            "compare needs at least two report files".into(),
        ));
    }
    let reports: Vec<ExperimentReport> = args
        .reports
        .iter()
        .map(|p| ExperimentReport::load(p))
        .collect::<Result<_, _>>()?;
    let table = compare_reports(&reports)?;
    let text = table.render_text();
    print!("{text}");
    if let Some(out) = &args.out {
        std::fs::write(
            out.with_extension("json"),
            serde_json::to_string_pretty(&table).map_err(Error::from)?,
        )?;
        std::fs::write(out.with_extension("txt"), &text)?;
    }
    Ok(())
}
