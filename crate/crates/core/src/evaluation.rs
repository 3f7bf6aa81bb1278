//! Experiment runner: repeated runs over a list of subset sizes, classifier
//! evaluation of each subset, and export of the reduced datasets.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::classifiers::{accuracy, train, ClassifierSpec};
use crate::dataset::{
    discretize_equal_width, export_arff, export_csv, load_csv, reduce_to_features,
    split_train_test, Dataset, DEFAULT_BINS,
};
use crate::embedded::{EmbeddedMethod, RegularizedFitConfig};
use crate::error::{Error, Result};
use crate::filter::{
    fisher_score, gain_ratio, gini_index_score, info_gain, laplacian_score, mrmr_select,
    rank_top_k, relief_f, symmetrical_uncertainty, term_variance, FeatureScores,
    LAPLACIAN_DEFAULT_BANDWIDTH, LAPLACIAN_DEFAULT_NEIGHBORS, RELIEFF_DEFAULT_NEIGHBORS,
};
use crate::wrapper::{
    genetic_select, sequential_backward_select, sequential_forward_select, GaConfig, SearchConfig,
};

/// Wall-clock duration of a labelled section.
#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    pub label: String,
    pub seconds: f64,
}

/// Runs `f` and measures it with the monotonic clock.
pub fn time_section<T>(label: &str, f: impl FnOnce() -> T) -> (T, Timing) {
    let start = Instant::now();
    let value = f();
    let seconds = start.elapsed().as_secs_f64();
    (
        value,
        Timing {
            label: label.to_owned(),
            seconds,
        },
    )
}

/// Selected subset for one (method, k, run).
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub method: String,
    pub k: usize,
    pub run_index: usize,
    pub selected: Vec<usize>,
    pub feature_weights: FeatureScores,
    pub selection_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Approach {
    Filter,
    Wrapper,
    Embedded,
}

impl Approach {
    pub fn title(self) -> &'static str {
        match self {
            Approach::Filter => "Filter",
            Approach::Wrapper => "Wrapper",
            Approach::Embedded => "Embedded",
        }
    }
}

/// A selection method together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    InfoGain { bins: usize },
    GainRatio { bins: usize },
    SymmetricalUncertainty { bins: usize },
    Gini { bins: usize },
    Fisher,
    Variance,
    Laplacian { neighbors: usize, bandwidth: f64 },
    ReliefF { samples: Option<usize>, neighbors: usize },
    Mrmr { bins: usize },
    Sfs { folds: usize },
    Sbs { folds: usize },
    Ga { folds: usize, ga: GaConfig },
    L1Logistic(RegularizedFitConfig),
    TreeImportance { max_depth: Option<usize>, min_leaf: usize },
}

/// Identifier, approach and parameter summary of every method.
pub const METHOD_ROSTER: &[(&str, Approach, &str)] = &[
    ("info-gain", Approach::Filter, "information gain; --bins (default 10)"),
    ("gain-ratio", Approach::Filter, "gain ratio; --bins (default 10)"),
    ("su", Approach::Filter, "symmetrical uncertainty; --bins (default 10)"),
    ("gini", Approach::Filter, "Gini index decrease; --bins (default 10)"),
    ("fisher", Approach::Filter, "Fisher score on raw values"),
    ("variance", Approach::Filter, "term variance (unsupervised)"),
    (
        "laplacian",
        Approach::Filter,
        "Laplacian score; --laplacian-k (default 5), --bandwidth (default 1.0)",
    ),
    (
        "relieff",
        Approach::Filter,
        "ReliefF; --relieff-samples (default all rows), --relieff-k (default 5)",
    ),
    ("mrmr", Approach::Filter, "greedy mRMR, difference form; --bins (default 10)"),
    ("sfs", Approach::Wrapper, "sequential forward selection; --folds (default 5)"),
    ("sbs", Approach::Wrapper, "sequential backward selection; --folds (default 5)"),
    (
        "ga",
        Approach::Wrapper,
        "genetic algorithm; --folds, --ga-population 30, --ga-generations 50, \
         --ga-crossover 0.9, --ga-mutation 1/d, --ga-tournament 2, --ga-elitism 1",
    ),
    (
        "l1-logistic",
        Approach::Embedded,
        "L1 logistic regression (ISTA); --lambda 0.01, --max-iters 500, --step-size 0.1, --tolerance 1e-6",
    ),
    (
        "tree-importance",
        Approach::Embedded,
        "CART Gini importance; --max-depth (default unlimited), --min-leaf (default 2)",
    ),
];

impl Method {
    /// The method with default parameters, by CLI identifier.
    pub fn from_name(name: &str) -> Result<Method> {
        let bins = DEFAULT_BINS;
        Ok(match name {
            "info-gain" => Method::InfoGain { bins },
            "gain-ratio" => Method::GainRatio { bins },
            "su" => Method::SymmetricalUncertainty { bins },
            "gini" => Method::Gini { bins },
            "fisher" => Method::Fisher,
            "variance" => Method::Variance,
            "laplacian" => Method::Laplacian {
                neighbors: LAPLACIAN_DEFAULT_NEIGHBORS,
                bandwidth: LAPLACIAN_DEFAULT_BANDWIDTH,
            },
            "relieff" => Method::ReliefF {
                samples: None,
                neighbors: RELIEFF_DEFAULT_NEIGHBORS,
            },
            "mrmr" => Method::Mrmr { bins },
            "sfs" => Method::Sfs {
                folds: SearchConfig::DEFAULT_FOLDS,
            },
            "sbs" => Method::Sbs {
                folds: SearchConfig::DEFAULT_FOLDS,
            },
            "ga" => Method::Ga {
                folds: SearchConfig::DEFAULT_FOLDS,
                ga: GaConfig::default(),
            },
            "l1-logistic" => Method::L1Logistic(RegularizedFitConfig::default()),
            "tree-importance" => Method::TreeImportance {
                max_depth: None,
                min_leaf: ClassifierSpec::TREE_DEFAULT_MIN_LEAF,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown method `{other}` (see `list-methods`)"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::InfoGain { .. } => "info-gain",
            Method::GainRatio { .. } => "gain-ratio",
            Method::SymmetricalUncertainty { .. } => "su",
            Method::Gini { .. } => "gini",
            Method::Fisher => "fisher",
            Method::Variance => "variance",
            Method::Laplacian { .. } => "laplacian",
            Method::ReliefF { .. } => "relieff",
            Method::Mrmr { .. } => "mrmr",
            Method::Sfs { .. } => "sfs",
            Method::Sbs { .. } => "sbs",
            Method::Ga { .. } => "ga",
            Method::L1Logistic(_) => "l1-logistic",
            Method::TreeImportance { .. } => "tree-importance",
        }
    }

    pub fn approach(&self) -> Approach {
        match self {
            Method::Sfs { .. } | Method::Sbs { .. } | Method::Ga { .. } => Approach::Wrapper,
            Method::L1Logistic(_) | Method::TreeImportance { .. } => Approach::Embedded,
            _ => Approach::Filter,
        }
    }

    /// Scores every feature once, for methods that rank by a weight vector.
    /// Returns `None` for search-based methods and mRMR.
    pub fn score(&self, ds: &Dataset, seed: u64) -> Result<Option<FeatureScores>> {
        let discretized = |bins: usize| discretize_equal_width(ds, bins);
        let scores = match self {
            Method::InfoGain { bins } => info_gain(&discretized(*bins)?)?,
            Method::GainRatio { bins } => gain_ratio(&discretized(*bins)?)?,
            Method::SymmetricalUncertainty { bins } => symmetrical_uncertainty(&discretized(*bins)?)?,
            Method::Gini { bins } => gini_index_score(&discretized(*bins)?)?,
            Method::Fisher => fisher_score(ds)?,
            Method::Variance => term_variance(ds)?,
            Method::Laplacian {
                neighbors,
                bandwidth,
            } => laplacian_score(ds, *neighbors, *bandwidth)?.scores,
            Method::ReliefF { samples, neighbors } => {
                relief_f(ds, *samples, *neighbors, seed)?.scores
            }
            Method::L1Logistic(cfg) => EmbeddedMethod::L1Logistic(*cfg).scores(ds)?,
            Method::TreeImportance {
                max_depth,
                min_leaf,
            } => EmbeddedMethod::TreeImportance(ClassifierSpec::DecisionTree {
                max_depth: *max_depth,
                min_leaf: *min_leaf,
            })
            .scores(ds)?,
            Method::Mrmr { .. } | Method::Sfs { .. } | Method::Sbs { .. } | Method::Ga { .. } => {
                return Ok(None)
            }
        };
        Ok(Some(scores))
    }

    /// Selects subsets for every `k` in `k_list` on one training set.
    ///
    /// Score-based methods score once and reuse the ranking; mRMR runs once
    /// up to the largest `k` and is cut to each prefix; wrapper searches run
    /// once per `k`.
    pub fn select_all(
        &self,
        ds: &Dataset,
        k_list: &[usize],
        classifier: &ClassifierSpec,
        seed: u64,
    ) -> Result<Vec<SelectionOutcome>> {
        let name = self.name();
        let d = ds.n_features();
        let outcome = |k: usize, selected: Vec<usize>, weights: FeatureScores, seconds: f64| {
            SelectionOutcome {
                method: name.to_owned(),
                k,
                run_index: 0,
                selected,
                feature_weights: weights,
                selection_seconds: seconds,
            }
        };
        match self {
            Method::Mrmr { bins } => {
                let k_max = k_list.iter().copied().max().unwrap_or(1);
                let (result, timing) = time_section(name, || -> Result<_> {
                    mrmr_select(&discretize_equal_width(ds, *bins)?, k_max)
                });
                let order = result?.selected;
                let weights = FeatureScores::from_selection_order(name, d, &order);
                Ok(k_list
                    .iter()
                    .map(|&k| outcome(k, order[..k].to_vec(), weights.clone(), timing.seconds))
                    .collect())
            }
            Method::Sfs { folds } | Method::Sbs { folds } | Method::Ga { folds, .. } => {
                let mut cfg = SearchConfig::new(*classifier, seed);
                cfg.folds = *folds;
                if let Method::Ga { ga, .. } = self {
                    cfg.ga = ga.clone();
                }
                k_list
                    .iter()
                    .map(|&k| {
                        let result = match self {
                            Method::Sfs { .. } => sequential_forward_select(ds, &cfg, k),
                            Method::Sbs { .. } => sequential_backward_select(ds, &cfg, k),
                            _ => genetic_select(ds, &cfg, Some(k)),
                        };
                        result
                            .map(|r| r.outcome)
                            .map_err(|e| Error::Run {
                                run: 0,
                                k,
                                source: Box::new(e),
                            })
                    })
                    .collect()
            }
            _ => {
                let (scored, timing) = time_section(name, || self.score(ds, seed));
                let scores = scored?.expect("filter scorer yields scores");
                k_list
                    .iter()
                    .map(|&k| {
                        let (ranked, rank_timing) = time_section(name, || rank_top_k(&scores, k));
                        Ok(outcome(
                            k,
                            ranked?,
                            scores.clone(),
                            timing.seconds + rank_timing.seconds,
                        ))
                    })
                    .collect()
            }
        }
    }
}

/// Where experiment data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// One file, re-split per run with the run's seed.
    Whole { path: PathBuf, train_fraction: f64 },
    /// Fixed train and test files reused by every run.
    PreSplit { train: PathBuf, test: PathBuf },
}

pub const DEFAULT_TRAIN_FRACTION: f64 = 2.0 / 3.0;

/// Loaded experiment data.
#[derive(Debug, Clone)]
pub enum ExperimentInput {
    Whole { data: Dataset, train_fraction: f64 },
    PreSplit { train: Dataset, test: Dataset },
}

fn strip_split_suffix(stem: &str) -> &str {
    for suffix in ["_train", "-train", ".train", "_TRAIN", "-TRAIN"] {
        if let Some(base) = stem.strip_suffix(suffix) {
            if !base.is_empty() {
                return base;
            }
        }
    }
    stem
}

impl DataSource {
    pub fn load(&self) -> Result<ExperimentInput> {
        match self {
            DataSource::Whole {
                path,
                train_fraction,
            } => Ok(ExperimentInput::Whole {
                data: load_csv(path)?,
                train_fraction: *train_fraction,
            }),
            DataSource::PreSplit { train, test } => {
                let train_ds = load_csv(train)?;
                let name = strip_split_suffix(train_ds.source_name()).to_owned();
                let train_ds = train_ds.with_source_name(name.clone());
                let test_ds = load_csv(test)?;
                if test_ds.feature_names() != train_ds.feature_names() {
                    return Err(Error::Validation(format!(
                        "train and test feature names differ ({} vs {})",
                        train.display(),
                        test.display()
                    )));
                }
                let test_ds = test_ds
                    .align_labels(train_ds.label_set())
                    .with_source_name(name);
                Ok(ExperimentInput::PreSplit {
                    train: train_ds,
                    test: test_ds,
                })
            }
        }
    }
}

impl ExperimentInput {
    pub fn name(&self) -> &str {
        match self {
            ExperimentInput::Whole { data, .. } => data.source_name(),
            ExperimentInput::PreSplit { train, .. } => train.source_name(),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            ExperimentInput::Whole { data, .. } => data.n_features(),
            ExperimentInput::PreSplit { train, .. } => train.n_features(),
        }
    }

    /// Train/test pair for the run with the given seed.
    pub fn split_for(&self, seed: u64) -> Result<(Dataset, Dataset, Vec<String>)> {
        match self {
            ExperimentInput::Whole {
                data,
                train_fraction,
            } => {
                let split = split_train_test(data, *train_fraction, seed)?;
                Ok((split.train, split.test, split.warnings))
            }
            ExperimentInput::PreSplit { train, test } => {
                Ok((train.clone(), test.clone(), Vec::new()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub method: Method,
    pub k_list: Vec<usize>,
    pub classifier: ClassifierSpec,
    pub runs: usize,
    pub base_seed: u64,
}

impl ExperimentConfig {
    /// Checks everything that can be checked before running, including that
    /// every `k` fits the dataset's feature count.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.k_list.is_empty() {
            return Err(Error::Config("feature count list is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for &k in &self.k_list {
            if !seen.insert(k) {
                return Err(Error::Config(format!("duplicate feature count {k}")));
            }
            if k < 1 || k > n_features {
                return Err(Error::Config(format!(
                    "feature count {k} outside [1, {n_features}]"
                )));
            }
        }
        if self.runs < 1 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if let DataSource::Whole { train_fraction, .. } = self.source {
            if !(train_fraction > 0.0 && train_fraction < 1.0) {
                return Err(Error::Config(format!(
                    "train fraction must lie in (0, 1), got {train_fraction}"
                )));
            }
        }
        self.classifier
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetInfo {
    pub name: String,
    pub n_train: usize,
    pub n_test: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub feature_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub outcome: SelectionOutcome,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub error_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KAverage {
    pub k: usize,
    pub accuracy: f64,
    pub error_rate: f64,
    pub train_accuracy: f64,
    pub selection_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub dataset: DatasetInfo,
    pub method: String,
    pub classifier: String,
    pub k_list: Vec<usize>,
    pub runs: usize,
    pub base_seed: u64,
    /// Ordered by run index, then by position in `k_list`.
    pub records: Vec<RunRecord>,
    pub averages: Vec<KAverage>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn records_for_run(&self, run: usize) -> &[RunRecord] {
        let per_run = self.k_list.len();
        &self.records[run * per_run..(run + 1) * per_run]
    }

    /// Metric values per run, each of length `k_list.len()`.
    pub fn metric_by_run(&self, metric: impl Fn(&RunRecord) -> f64) -> Vec<Vec<f64>> {
        (0..self.runs)
            .map(|r| self.records_for_run(r).iter().map(&metric).collect())
            .collect()
    }
}

fn run_error(run: usize, k: usize, e: Error) -> Error {
    match e {
        Error::Run { source, .. } => Error::Run { run, k, source },
        other => Error::Run {
            run,
            k,
            source: Box::new(other),
        },
    }
}

fn mean_in_order(values: impl Iterator<Item = f64>, count: usize) -> f64 {
    let mut sum = 0.0;
    for v in values {
        sum += v;
    }
    sum / count as f64
}

/// Loads the data named by `cfg` and runs the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let input = cfg.source.load()?;
    run_experiment_on(cfg, &input)
}

/// Runs every (run, k) pair on already-loaded data. Runs execute in
/// parallel; records are ordered by run index regardless of completion.
pub fn run_experiment_on(cfg: &ExperimentConfig, input: &ExperimentInput) -> Result<ExperimentReport> {
    cfg.validate(input.n_features())?;
    let run_results: Vec<RunOutput> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| run_once(cfg, input, r))
        .collect::<Result<_>>()?;

    let (n_train, n_test) = run_results[0].2;
    let mut records = Vec::with_capacity(cfg.runs * cfg.k_list.len());
    let mut warnings = Vec::new();
    for (recs, warns, _) in run_results {
        records.extend(recs);
        for w in warns {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
    }
    let per_run = cfg.k_list.len();
    let averages = cfg
        .k_list
        .iter()
        .enumerate()
        .map(|(pos, &k)| {
            let column = || (0..cfg.runs).map(move |r| pos + r * per_run);
            KAverage {
                k,
                accuracy: mean_in_order(column().map(|i| records[i].test_accuracy), cfg.runs),
                error_rate: mean_in_order(column().map(|i| records[i].error_rate), cfg.runs),
                train_accuracy: mean_in_order(
                    column().map(|i| records[i].train_accuracy),
                    cfg.runs,
                ),
                selection_seconds: mean_in_order(
                    column().map(|i| records[i].outcome.selection_seconds),
                    cfg.runs,
                ),
            }
        })
        .collect();

    let (feature_names, n_classes) = match input {
        ExperimentInput::Whole { data, .. } => (data.feature_names().to_vec(), data.n_classes()),
        ExperimentInput::PreSplit { train, test } => {
            (train.feature_names().to_vec(), test.n_classes())
        }
    };
    Ok(ExperimentReport {
        dataset: DatasetInfo {
            name: input.name().to_owned(),
            n_train,
            n_test,
            n_features: input.n_features(),
            n_classes,
            feature_names,
        },
        method: cfg.method.name().to_owned(),
        classifier: cfg.classifier.to_string(),
        k_list: cfg.k_list.clone(),
        runs: cfg.runs,
        base_seed: cfg.base_seed,
        records,
        averages,
        warnings,
    })
}

/// Records, warnings and (train, test) sizes of one run.
type RunOutput = (Vec<RunRecord>, Vec<String>, (usize, usize));

fn run_once(
    cfg: &ExperimentConfig,
    input: &ExperimentInput,
    run: usize,
) -> Result<RunOutput> {
    let seed = cfg.base_seed.wrapping_add(run as u64);
    let first_k = cfg.k_list[0];
    let (train_ds, test_ds, warnings) =
        input.split_for(seed).map_err(|e| run_error(run, first_k, e))?;
    let outcomes = cfg
        .method
        .select_all(&train_ds, &cfg.k_list, &cfg.classifier, seed)
        .map_err(|e| match e {
            Error::Run { k, .. } => run_error(run, k, e),
            other => run_error(run, first_k, other),
        })?;
    let mut records = Vec::with_capacity(outcomes.len());
    for mut outcome in outcomes {
        outcome.run_index = run;
        let k = outcome.k;
        let evaluate = || -> Result<(f64, f64)> {
            let train_reduced = reduce_to_features(&train_ds, &outcome.selected)?;
            let test_reduced = reduce_to_features(&test_ds, &outcome.selected)?;
            let model = train(&cfg.classifier, &train_reduced)?;
            Ok((
                accuracy(&model, &train_reduced)?,
                accuracy(&model, &test_reduced)?,
            ))
        };
        let (train_accuracy, test_accuracy) = evaluate().map_err(|e| run_error(run, k, e))?;
        records.push(RunRecord {
            outcome,
            train_accuracy,
            test_accuracy,
            error_rate: 1.0 - test_accuracy,
        });
    }
    Ok((
        records,
        warnings,
        (train_ds.n_samples(), test_ds.n_samples()),
    ))
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// File stem `<dataset>_<method>_k<k>_run<r>_<train|test>`.
pub fn reduced_file_stem(dataset: &str, method: &str, k: usize, run: usize, part: &str) -> String {
    format!("{}_{method}_k{k}_run{run}_{part}", file_safe(dataset))
}

/// Writes the reduced train and test sets of every record as CSV and ARFF.
/// Columns follow the record's selection order.
pub fn export_reduced_datasets(
    report: &ExperimentReport,
    input: &ExperimentInput,
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(report.records.len() * 4);
    for run in 0..report.runs {
        let seed = report.base_seed.wrapping_add(run as u64);
        let (train_ds, test_ds, _) = input.split_for(seed)?;
        for record in report.records_for_run(run) {
            let o = &record.outcome;
            for (part, ds) in [("train", &train_ds), ("test", &test_ds)] {
                let reduced = reduce_to_features(ds, &o.selected)?;
                let stem = reduced_file_stem(&report.dataset.name, &o.method, o.k, run, part);
                let csv_path = dir.join(format!("{stem}.csv"));
                export_csv(&reduced, &csv_path)?;
                let arff_path = dir.join(format!("{stem}.arff"));
                export_arff(&reduced, &stem, &arff_path)?;
                written.push(csv_path);
                written.push(arff_path);
            }
        }
    }
    Ok(written)
}
