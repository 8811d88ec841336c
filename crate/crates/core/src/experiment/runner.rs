//! End-to-end execution: corpus preparation, per-fold scaling and codec
//! fitting, optional augmentation and pre-training, fine-tuning, evaluation
//! and the ablation harness.

use super::config::{DatasetSpec, PretrainSource, RunConfig};
use super::report::{DatasetStats, ExperimentReport, FoldReport, PhaseTimings};
use crate::baselines::{
    fit_mlknn, fit_transform, predict_mlknn_batch, predict_transform_batch, BaseLearnerSpec,
    Strategy,
};
use crate::dataset::{
    self, apply_to_multilabel, cross_split_duplicates, encode_features, encode_features_with,
    fit_encodings, fit_scaler, load_csv_corpus, multilabelize, overlap_report, synth_generate,
    CorpusSchema, MultiLabelDataset, OverlapReport, ScalerKind, ScalerModel, SynthGroundTruth,
};
use crate::detector::{build_and_finetune, pretrain_ae, AeSpec, FinetuneLog, MldClassifier};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, lcard, ldiv, MetricsReport};
use crate::nn::{Checkpoint, MlpSpec, OutputActivation};
use crate::powerset::PowersetCodec;
use crate::wgan::{build_augmented, train_category_wgan, AugmentedDataset, CategoryGenerator};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// De-duplicated train/test corpora before any per-fold scaling.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: MultiLabelDataset,
    pub test: MultiLabelDataset,
    pub cross_split_duplicates: usize,
    pub ground_truth: Option<SynthGroundTruth>,
}

/// The official layout always carries these text columns; fall back to them
/// when a config names none, so de-duplication never sees unencoded cells.
fn effective_categoricals(schema: CorpusSchema, configured: &[String]) -> Vec<String> {
    if configured.is_empty() && schema == CorpusSchema::UnswNb15 {
        vec!["proto".into(), "service".into(), "state".into()]
    } else {
        configured.to_vec()
    }
}

/// Load or generate the corpus, encode categoricals, de-duplicate and
/// produce the train/test pair. Official test files are de-duplicated
/// independently; otherwise the de-duplicated corpus is split by fraction.
pub fn prepare(cfg: &RunConfig) -> Result<PreparedData> {
    match &cfg.dataset {
        DatasetSpec::Synth(spec) => {
            let (raw, ground_truth) = synth_generate(spec)?;
            let all = multilabelize(&raw)?;
            let (train, test) = dataset::split(&all, cfg.test_fraction, cfg.seed)?;
            Ok(PreparedData {
                cross_split_duplicates: cross_split_duplicates(&train, &test),
                train,
                test,
                ground_truth: Some(ground_truth),
            })
        }
        DatasetSpec::Csv {
            schema,
            train_paths,
            test_paths,
            categorical_columns,
        } => {
            let raw_train = load_csv_corpus(train_paths, *schema)?;
            let categoricals = effective_categoricals(*schema, categorical_columns);
            if test_paths.is_empty() {
                let raw_train = encode_features(&raw_train, &categoricals)?;
                let all = multilabelize(&raw_train)?;
                let (train, test) = dataset::split(&all, cfg.test_fraction, cfg.seed)?;
                Ok(PreparedData {
                    cross_split_duplicates: cross_split_duplicates(&train, &test),
                    train,
                    test,
                    ground_truth: None,
                })
            } else {
                // One vocabulary over both splits keeps the encoded feature
                // space consistent across the official boundary.
                let raw_test = load_csv_corpus(test_paths, *schema)?;
                let encodings = fit_encodings(&[&raw_train, &raw_test], &categoricals)?;
                let raw_train = encode_features_with(&raw_train, &encodings)?;
                let raw_test = encode_features_with(&raw_test, &encodings)?;
                let train = multilabelize(&raw_train)?;
                let test = multilabelize(&raw_test)?;
                Ok(PreparedData {
                    cross_split_duplicates: cross_split_duplicates(&train, &test),
                    train,
                    test,
                    ground_truth: None,
                })
            }
        }
    }
}

/// Fit the configured reduction and normalization on the fold's training
/// half only, then apply to both halves.
fn scale_fold(
    cfg: &RunConfig,
    train: &MultiLabelDataset,
    test: &MultiLabelDataset,
) -> Result<(MultiLabelDataset, MultiLabelDataset, Vec<ScalerModel>)> {
    let mut scalers = Vec::new();
    let mut train = train.clone();
    let mut test = test.clone();
    if let Some(k) = cfg.scaling.pca_dim {
        let pca = fit_scaler(&train.features_matrix(), ScalerKind::Pca, Some(k))?;
        train = apply_to_multilabel(&pca, &train)?;
        test = apply_to_multilabel(&pca, &test)?;
        scalers.push(pca);
    }
    let minmax = fit_scaler(&train.features_matrix(), ScalerKind::MinMax, None)?;
    train = apply_to_multilabel(&minmax, &train)?;
    test = apply_to_multilabel(&minmax, &test)?;
    scalers.push(minmax);
    Ok((train, test, scalers))
}

/// Prepare and scale the single train/test split (no folds); returns the
/// scaled halves and the fitted scalers, reduction first.
pub fn prepare_scaled(
    cfg: &RunConfig,
) -> Result<(MultiLabelDataset, MultiLabelDataset, Vec<ScalerModel>)> {
    let prepared = prepare(cfg)?;
    scale_fold(cfg, &prepared.train, &prepared.test)
}

/// Everything produced while running one fold.
pub struct FoldOutput {
    pub fold: usize,
    pub classifier: MldClassifier,
    pub finetune_log: FinetuneLog,
    pub encoder_checkpoint: Option<Checkpoint>,
    pub generators: Vec<CategoryGenerator>,
    pub scalers: Vec<ScalerModel>,
    pub metrics: MetricsReport,
    pub unseen_test_sets: usize,
}

pub struct RunOutput {
    pub report: ExperimentReport,
    pub folds: Vec<FoldOutput>,
}

fn encoder_spec_for(cfg: &RunConfig, dim: usize) -> Result<MlpSpec> {
    if cfg.encoder_widths.first().copied() != Some(dim) {
        return Err(Error::Argument(format!(
            "encoder widths {:?} do not start at the data dimension {dim}",
            cfg.encoder_widths
        )));
    }
    MlpSpec::new(cfg.encoder_widths.clone(), OutputActivation::Identity)
}

fn run_fold(
    cfg: &RunConfig,
    fold: usize,
    train: &MultiLabelDataset,
    test: &MultiLabelDataset,
    timings: &mut PhaseTimings,
) -> Result<FoldOutput> {
    let (train, test, scalers) = scale_fold(cfg, train, test)?;
    let codec = PowersetCodec::fit(&train)?;
    let fold_seed = cfg.seed.wrapping_add(17 * fold as u64);
    let encoder_spec = encoder_spec_for(cfg, train.dim())?;

    // Data enhancement: one generator per included category.
    let mut generators: Vec<CategoryGenerator> = Vec::new();
    if cfg.pretrain == PretrainSource::Augmented {
        let aug = cfg.augment.as_ref().ok_or_else(|| {
            Error::Argument("pretrain=augmented requires an augment section".into())
        })?;
        let start = Instant::now();
        let categories: Vec<String> = train
            .label_vocabulary
            .iter()
            .filter(|c| !aug.exclude.contains(c))
            .cloned()
            .collect();
        use rayon::prelude::*;
        generators = categories
            .par_iter()
            .enumerate()
            .map(|(i, category)| {
                let mut wgan_cfg = aug.wgan.clone();
                wgan_cfg.train.seed = fold_seed.wrapping_add(100 + i as u64);
                train_category_wgan(&train, category, &wgan_cfg).map(|(g, _)| g)
            })
            .collect::<Result<_>>()?;
        timings.augment_s += start.elapsed().as_secs_f64();
    }

    // Unsupervised pre-training on the selected pool.
    let encoder_checkpoint = match cfg.pretrain {
        PretrainSource::None => None,
        source => {
            let start = Instant::now();
            let pool: AugmentedDataset = match source {
                PretrainSource::Raw => build_augmented(&train, &[], 0, fold_seed)?,
                PretrainSource::Augmented => {
                    let aug = cfg.augment.as_ref().unwrap();
                    build_augmented(&train, &generators, aug.per_category, fold_seed)?
                }
                PretrainSource::None => unreachable!(),
            };
            let ae_spec = AeSpec::new(cfg.encoder_widths.clone())?;
            let mut ae_train = cfg.ae_train.clone();
            ae_train.seed = fold_seed.wrapping_add(500);
            let (ckpt, _) = pretrain_ae(&pool, &ae_spec, &ae_train)?;
            timings.pretrain_s += start.elapsed().as_secs_f64();
            Some(ckpt)
        }
    };

    // Fine-tune on the de-duplicated labeled training fold.
    let start = Instant::now();
    let mut finetune = cfg.finetune.clone();
    finetune.train.seed = fold_seed.wrapping_add(900);
    let (classifier, finetune_log) = build_and_finetune(
        encoder_checkpoint.as_ref(),
        &encoder_spec,
        &train,
        &codec,
        &finetune,
    )?;
    timings.finetune_s += start.elapsed().as_secs_f64();

    // Detection on the held-out fold.
    let start = Instant::now();
    let predictions = classifier.predict(&test.features_matrix())?;
    timings.detect_s += start.elapsed().as_secs_f64();
    let truths = test.label_sets();
    let metrics = evaluate(&predictions, &truths)?;
    Ok(FoldOutput {
        fold,
        unseen_test_sets: codec.unseen_sets(&test),
        classifier,
        finetune_log,
        encoder_checkpoint,
        generators,
        scalers,
        metrics,
    })
}

fn fold_partitions(
    data: &MultiLabelDataset,
    folds: usize,
    seed: u64,
) -> Result<Vec<(MultiLabelDataset, MultiLabelDataset)>> {
    let n = data.len();
    if folds < 2 || folds > n {
        return Err(Error::Argument(format!(
            "fold count must be in 2..={n}, got {folds}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    let mut assignment = vec![0usize; n];
    for (pos, &idx) in order.iter().enumerate() {
        assignment[idx] = pos % folds;
    }
    Ok((0..folds)
        .map(|f| {
            let mut train = MultiLabelDataset {
                samples: Vec::new(),
                label_vocabulary: data.label_vocabulary.clone(),
            };
            let mut test = train.clone();
            for (i, s) in data.samples.iter().enumerate() {
                if assignment[i] == f {
                    test.samples.push(s.clone());
                } else {
                    train.samples.push(s.clone());
                }
            }
            (train, test)
        })
        .collect())
}

fn dataset_stats(prepared: &PreparedData) -> Result<DatasetStats> {
    let mut all = prepared.train.clone();
    all.samples.extend(prepared.test.samples.iter().cloned());
    Ok(DatasetStats {
        n_unique: all.len(),
        train_size: prepared.train.len(),
        test_size: prepared.test.len(),
        lcard: lcard(&all)?,
        ldiv: ldiv(&all)?,
        label_vocabulary: all.label_vocabulary.clone(),
        cross_split_duplicates: prepared.cross_split_duplicates,
    })
}

/// The full pipeline under one configuration: prepare, then either a single
/// train/test run or a k-fold sweep over the training corpus.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutput> {
    let prepared = prepare(cfg)?;
    let stats = dataset_stats(&prepared)?;
    let mut timings = PhaseTimings::default();
    let mut folds = Vec::new();
    match cfg.folds {
        None => {
            folds.push(run_fold(cfg, 0, &prepared.train, &prepared.test, &mut timings)?);
        }
        Some(k) => {
            for (f, (train, test)) in fold_partitions(&prepared.train, k, cfg.seed.wrapping_add(1300))?
                .iter()
                .enumerate()
            {
                folds.push(run_fold(cfg, f, train, test, &mut timings)?);
            }
        }
    }
    let fold_reports: Vec<FoldReport> = folds
        .iter()
        .map(|f| FoldReport {
            fold: f.fold,
            metrics: f.metrics,
            unseen_test_sets: f.unseen_test_sets,
        })
        .collect();
    let method = match cfg.pretrain {
        PretrainSource::None => "mld(no-pretrain)",
        PretrainSource::Raw => "mld(pretrain-raw)",
        PretrainSource::Augmented => "mld(pretrain-augmented)",
    };
    let report = ExperimentReport::assemble(
        method.into(),
        cfg.digest(),
        cfg.dataset_digest(),
        cfg.seed,
        stats,
        fold_reports,
        timings,
    );
    Ok(RunOutput { report, folds })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum BaselineChoice {
    Transform {
        strategy: Strategy,
        learner: BaseLearnerSpec,
    },
    MlKnn {
        k: usize,
        s: f64,
    },
}

/// A fitted baseline for one fold, persistable with its strategy, resolved
/// learner settings and seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum BaselineFoldModel {
    Transform(crate::baselines::TransformModel),
    MlKnn(crate::baselines::MlknnModel),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineBundle {
    pub choice: BaselineChoice,
    pub seed: u64,
    /// Base-learner hyperparameters actually used (defaults filled in), for
    /// the run manifest.
    pub resolved_hyperparameters: std::collections::BTreeMap<String, f64>,
    pub folds: Vec<BaselineFoldModel>,
}

impl BaselineChoice {
    pub fn method_name(&self) -> String {
        match self {
            BaselineChoice::Transform { strategy, learner } => {
                let s = match strategy {
                    Strategy::Br => "br",
                    Strategy::Clr => "clr",
                    Strategy::Cc => "cc",
                };
                format!("{s}+{}", serde_json::to_value(learner.kind).unwrap().as_str().unwrap())
            }
            BaselineChoice::MlKnn { k, .. } => format!("ml-knn(k={k})"),
        }
    }
}

/// Replicate each unique sample by its duplicate count, for the optional
/// raw-frequency training variant of the baselines.
fn replicate_by_multiplicity(data: &MultiLabelDataset) -> MultiLabelDataset {
    let mut out = MultiLabelDataset {
        samples: Vec::new(),
        label_vocabulary: data.label_vocabulary.clone(),
    };
    for s in &data.samples {
        for _ in 0..s.total() {
            out.samples.push(s.clone());
        }
    }
    out
}

/// Fit and evaluate one baseline with the same preparation, folds, scaling
/// and metrics as [`run_experiment`]. Returns the report plus the fitted
/// per-fold models for persistence.
pub fn run_baseline(
    cfg: &RunConfig,
    choice: &BaselineChoice,
) -> Result<(ExperimentReport, BaselineBundle)> {
    let prepared = prepare(cfg)?;
    let stats = dataset_stats(&prepared)?;
    let mut timings = PhaseTimings::default();
    let pairs = match cfg.folds {
        None => vec![(prepared.train.clone(), prepared.test.clone())],
        Some(k) => fold_partitions(&prepared.train, k, cfg.seed.wrapping_add(1300))?,
    };
    let mut fold_reports = Vec::new();
    let mut fold_models = Vec::new();
    let mut resolved = std::collections::BTreeMap::new();
    for (f, (train, test)) in pairs.iter().enumerate() {
        let (train, test, _) = scale_fold(cfg, train, test)?;
        let fit_set = if cfg.baselines_weighted_by_multiplicity {
            replicate_by_multiplicity(&train)
        } else {
            train.clone()
        };
        let start = Instant::now();
        let predictions = match choice {
            BaselineChoice::Transform { strategy, learner } => {
                let mut learner = learner.clone();
                learner.seed = cfg.seed.wrapping_add(17 * f as u64);
                resolved = learner.resolved();
                let model = fit_transform(*strategy, &learner, &fit_set)?;
                timings.finetune_s += start.elapsed().as_secs_f64();
                let predictions = predict_transform_batch(&model, &test.features_matrix())?;
                fold_models.push(BaselineFoldModel::Transform(model));
                predictions
            }
            BaselineChoice::MlKnn { k, s } => {
                let model = fit_mlknn(&fit_set, *k, *s)?;
                timings.finetune_s += start.elapsed().as_secs_f64();
                let predictions = predict_mlknn_batch(&model, &test.features_matrix())?;
                fold_models.push(BaselineFoldModel::MlKnn(model));
                predictions
            }
        };
        let truths = test.label_sets();
        let codec = PowersetCodec::fit(&train)?;
        fold_reports.push(FoldReport {
            fold: f,
            metrics: evaluate(&predictions, &truths)?,
            unseen_test_sets: codec.unseen_sets(&test),
        });
    }
    let report = ExperimentReport::assemble(
        choice.method_name(),
        cfg.digest(),
        cfg.dataset_digest(),
        cfg.seed,
        stats,
        fold_reports,
        timings,
    );
    let bundle = BaselineBundle {
        choice: choice.clone(),
        seed: cfg.seed,
        resolved_hyperparameters: resolved,
        folds: fold_models,
    };
    Ok((report, bundle))
}

/// Wraps load -> encode -> multilabelize -> overlap report over the union of
/// all corpus files (train plus any official test files).
pub fn analyze(dataset: &DatasetSpec, top_k: usize) -> Result<OverlapReport> {
    let data = match dataset {
        DatasetSpec::Synth(spec) => {
            let (raw, _) = synth_generate(spec)?;
            multilabelize(&raw)?
        }
        DatasetSpec::Csv {
            schema,
            train_paths,
            test_paths,
            categorical_columns,
        } => {
            let mut paths = train_paths.clone();
            paths.extend(test_paths.iter().cloned());
            let raw = load_csv_corpus(&paths, *schema)?;
            let raw = encode_features(&raw, &effective_categoricals(*schema, categorical_columns))?;
            multilabelize(&raw)?
        }
    };
    overlap_report(&data, top_k)
}

/// One pre-training condition's outcome for one seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub source: PretrainSource,
    pub test_metrics: MetricsReport,
    pub final_train_subsetacc: f64,
    pub epochs_to_threshold: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedAblation {
    pub seed: u64,
    pub rows: Vec<AblationRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationOutcome {
    pub threshold: f64,
    pub per_seed: Vec<SeedAblation>,
}

impl AblationOutcome {
    fn collect(&self, source: PretrainSource, f: impl Fn(&AblationRow) -> f64) -> Vec<f64> {
        let mut values: Vec<f64> = self
            .per_seed
            .iter()
            .flat_map(|s| s.rows.iter().filter(|r| r.source == source).map(&f))
            .collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values
    }

    pub fn median(&self, source: PretrainSource, f: impl Fn(&AblationRow) -> f64) -> f64 {
        let values = self.collect(source, f);
        let n = values.len();
        if n == 0 {
            return f64::NAN;
        }
        if n % 2 == 1 {
            values[n / 2]
        } else {
            (values[n / 2 - 1] + values[n / 2]) / 2.0
        }
    }

    /// Seeds where every pre-trained condition reached the threshold at
    /// least as fast as training from scratch.
    pub fn seeds_where_pretraining_is_no_slower(&self) -> usize {
        self.per_seed
            .iter()
            .filter(|s| {
                let epochs = |src: PretrainSource| {
                    s.rows
                        .iter()
                        .find(|r| r.source == src)
                        .map(|r| r.epochs_to_threshold)
                        .unwrap_or(usize::MAX)
                };
                epochs(PretrainSource::Augmented).min(epochs(PretrainSource::Raw))
                    <= epochs(PretrainSource::None)
            })
            .count()
    }
}

/// Run the three pre-training conditions across the given seeds on one
/// corpus. `threshold` is the training subset accuracy used for the
/// epochs-to-threshold comparison.
pub fn run_ablation(base: &RunConfig, seeds: &[u64], threshold: f64) -> Result<AblationOutcome> {
    let mut per_seed = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut rows = Vec::new();
        for source in [
            PretrainSource::None,
            PretrainSource::Raw,
            PretrainSource::Augmented,
        ] {
            let mut cfg = base.clone();
            cfg.seed = seed;
            cfg.pretrain = source;
            let output = run_experiment(&cfg)?;
            let fold = &output.folds[0];
            rows.push(AblationRow {
                source,
                test_metrics: fold.metrics,
                final_train_subsetacc: fold.finetune_log.final_subsetacc(),
                epochs_to_threshold: fold.finetune_log.epochs_to_subsetacc(threshold),
            });
        }
        per_seed.push(SeedAblation { seed, rows });
    }
    Ok(AblationOutcome {
        threshold,
        per_seed,
    })
}
