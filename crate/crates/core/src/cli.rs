//! Command-line interface: `convert`, `run`, `friedman`, `list-methods`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::ffi::OsString;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::classifiers::ClassifierSpec;
use crate::dataset::{export_arff, export_csv, parse_csv, DEFAULT_BINS};
use crate::embedded::RegularizedFitConfig;
use crate::error::{Error, Result};
use crate::evaluation::{
    export_reduced_datasets, run_experiment_on, Approach, DataSource, ExperimentConfig, Method,
    DEFAULT_TRAIN_FRACTION, METHOD_ROSTER,
};
use crate::report::{write_charts, write_text_report};
use crate::stats::{friedman_test, ResultMatrix, DEFAULT_ALPHAS};
use crate::wrapper::GaConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "featsel", version, about = "Filter, wrapper and embedded feature selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Move the class column of a raw CSV to the last position and validate it.
    Convert(ConvertArgs),
    /// Run a feature-selection experiment.
    Run(Box<RunCommand>),
    /// Friedman test with the Iman-Davenport correction on a result matrix.
    Friedman(FriedmanArgs),
    /// List the available methods grouped by approach.
    ListMethods,
}

#[derive(Debug, Args)]
struct ConvertArgs {
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Class column by header name, or by 0-based index when no header matches.
    #[arg(long, value_name = "NAME|INDEX")]
    class_column: String,
    /// Output file; a `.arff` extension writes ARFF, anything else CSV.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RunCommand {
    /// JSON file whose keys mirror the flags; excludes every other flag.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(flatten)]
    opts: RunOptions,
}

/// Comma-separated list of subset sizes, e.g. `5,10,15,20`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "KListRepr")]
pub struct KList(pub Vec<usize>);

#[derive(Deserialize)]
#[serde(untagged)]
enum KListRepr {
    Text(String),
    List(Vec<i64>),
}

impl TryFrom<KListRepr> for KList {
    type Error = Error;

    fn try_from(r: KListRepr) -> Result<KList> {
        match r {
            KListRepr::Text(s) => s.parse(),
            KListRepr::List(v) => {
                let ks = v
                    .into_iter()
                    .map(|k| {
                        usize::try_from(k)
                            .map_err(|_| Error::Argument(format!("invalid feature count {k}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                check_k_list(ks).map(KList)
            }
        }
    }
}

fn check_k_list(ks: Vec<usize>) -> Result<Vec<usize>> {
    if ks.is_empty() {
        return Err(Error::Argument("feature count list is empty".into()));
    }
    for (i, &k) in ks.iter().enumerate() {
        if k == 0 {
            return Err(Error::Argument("feature counts must be at least 1".into()));
        }
        if ks[..i].contains(&k) {
            return Err(Error::Argument(format!("duplicate feature count {k}")));
        }
    }
    Ok(ks)
}

impl FromStr for KList {
    type Err = Error;

    fn from_str(s: &str) -> Result<KList> {
        let ks = s
            .split(',')
            .map(|part| {
                let part = part.trim();
                part.parse::<usize>()
                    .map_err(|_| Error::Argument(format!("`{part}` is not a positive integer")))
            })
            .collect::<Result<Vec<_>>>()?;
        check_k_list(ks).map(KList)
    }
}

/// Flags of `run`, also the schema of the `--config` JSON file.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunOptions {
    /// Whole dataset, re-split into train/test for every run.
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    /// Training file of a fixed split (requires --test).
    #[arg(long, value_name = "FILE")]
    pub train: Option<PathBuf>,
    /// Test file of a fixed split (requires --train).
    #[arg(long, value_name = "FILE")]
    pub test: Option<PathBuf>,
    /// Training fraction in whole-dataset mode [default: 2/3].
    #[arg(long)]
    pub train_fraction: Option<f64>,

    /// Selection method (see `list-methods`).
    #[arg(long)]
    pub method: Option<String>,
    /// Subset sizes, e.g. 5,10,15,20.
    #[arg(long, value_name = "K,...")]
    pub num_features: Option<KList>,

    /// Discretization bins for entropy-based filters and mRMR [default: 10].
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub laplacian_k: Option<usize>,
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long)]
    pub relieff_samples: Option<usize>,
    #[arg(long)]
    pub relieff_k: Option<usize>,
    /// Cross-validation folds of wrapper fitness [default: 5].
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub ga_population: Option<usize>,
    #[arg(long)]
    pub ga_generations: Option<usize>,
    #[arg(long)]
    pub ga_crossover: Option<f64>,
    #[arg(long)]
    pub ga_mutation: Option<f64>,
    #[arg(long)]
    pub ga_tournament: Option<usize>,
    #[arg(long)]
    pub ga_elitism: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub step_size: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Depth limit of the tree-importance method.
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Minimum leaf size of the tree-importance method.
    #[arg(long)]
    pub min_leaf: Option<usize>,

    /// knn, naive-bayes or decision-tree [default: knn].
    #[arg(long)]
    pub classifier: Option<String>,
    #[arg(long)]
    pub knn_k: Option<usize>,
    #[arg(long)]
    pub nb_variance_floor: Option<f64>,
    #[arg(long)]
    pub tree_max_depth: Option<usize>,
    #[arg(long)]
    pub tree_min_leaf: Option<usize>,

    /// Number of runs [default: 1].
    #[arg(long)]
    pub runs: Option<usize>,
    /// Base seed; run r uses seed + r [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Maximum concurrent runs [default: number of processors].
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct FriedmanArgs {
    /// CSV with header `dataset,<method1>,...,<methodK>`.
    #[arg(long, value_name = "FILE")]
    matrix: PathBuf,
    /// Rank larger values first (default ranks smaller values first).
    #[arg(long)]
    higher_is_better: bool,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_ALPHAS.to_vec())]
    alphas: Vec<f64>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliFailure {
    pub code: i32,
    pub error: Error,
}

fn usage(error: Error) -> CliFailure {
    CliFailure {
        code: EXIT_USAGE,
        error,
    }
}

fn runtime(error: Error) -> CliFailure {
    let code = if error.is_usage() {
        EXIT_USAGE
    } else {
        EXIT_FAILURE
    };
    CliFailure { code, error }
}

/// Errors in user-supplied files are usage errors; I/O failures are not.
fn input_error(error: Error) -> CliFailure {
    match error {
        Error::Io { .. } => runtime(error),
        other => usage(other),
    }
}

struct Style {
    color: bool,
}

impl Style {
    fn detect() -> Style {
        Style {
            color: std::env::var_os("FEATSEL_NO_COLOR").is_none() && std::io::stdout().is_terminal(),
        }
    }

    fn heading(&self, s: &str) -> String {
        if self.color {
            format!("\x1b[1m{s}\x1b[0m")
        } else {
            s.to_owned()
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let style = Style::detect();
    let result = match cli.command {
        Command::Convert(a) => cmd_convert(&a),
        Command::Run(a) => cmd_run(*a, &style),
        Command::Friedman(a) => cmd_friedman(&a),
        Command::ListMethods => {
            print!("{}", list_methods_text(&style));
            Ok(())
        }
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.error);
            let mut source = std::error::Error::source(&f.error);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            f.code
        }
    }
}

fn list_methods_text(style: &Style) -> String {
    let mut out = String::new();
    for approach in [Approach::Filter, Approach::Wrapper, Approach::Embedded] {
        let group: Vec<_> = METHOD_ROSTER.iter().filter(|m| m.1 == approach).collect();
        out.push_str(&style.heading(&format!("{} ({})", approach.title(), group.len())));
        out.push('\n');
        for (name, _, summary) in group {
            out.push_str(&format!("  {name:<16} {summary}\n"));
        }
    }
    out
}

fn cmd_convert(a: &ConvertArgs) -> std::result::Result<(), CliFailure> {
    let file = std::fs::File::open(&a.input).map_err(|e| runtime(Error::io(&a.input, e)))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| usage(Error::Structure(format!("unreadable header: {e}"))))?
        .iter()
        .map(str::to_owned)
        .collect();
    let class_idx = match header.iter().position(|h| *h == a.class_column) {
        Some(i) => i,
        None => match a.class_column.parse::<usize>() {
            Ok(i) if i < header.len() => i,
            _ => {
                return Err(usage(Error::Argument(format!(
                    "unknown class column `{}` (columns: {})",
                    a.class_column,
                    header.join(", ")
                ))))
            }
        },
    };
    let reorder = |cells: Vec<String>| -> Vec<String> {
        let mut out: Vec<String> = cells
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != class_idx)
            .map(|(_, c)| c.clone())
            .collect();
        out.push(cells.get(class_idx).cloned().unwrap_or_default());
        out
    };
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| usage(Error::Structure(e.to_string()));
    wtr.write_record(reorder(header.clone())).map_err(io_err)?;
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| usage(Error::Structure(format!("row {}: {e}", r + 1))))?;
        if record.len() != header.len() {
            return Err(usage(Error::Structure(format!(
                "row {} has {} cells, header has {}",
                r + 1,
                record.len(),
                header.len()
            ))));
        }
        wtr.write_record(reorder(record.iter().map(str::to_owned).collect()))
            .map_err(io_err)?;
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| usage(Error::Structure(e.to_string())))?;
    let stem = a
        .out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_owned());
    let ds = parse_csv(bytes.as_slice(), &stem).map_err(input_error)?;
    let is_arff = a
        .out
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("arff"));
    if is_arff {
        export_arff(&ds, &stem, &a.out).map_err(runtime)?;
    } else {
        export_csv(&ds, &a.out).map_err(runtime)?;
    }
    println!(
        "wrote {} ({} samples, {} features, {} classes)",
        a.out.display(),
        ds.n_samples(),
        ds.n_features(),
        ds.n_classes()
    );
    Ok(())
}

fn load_config_file(path: &Path) -> Result<RunOptions> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Builds the method from its name and the parameter options, rejecting
/// parameters that do not apply to it.
pub fn build_method(o: &RunOptions) -> Result<Method> {
    let name = o
        .method
        .as_deref()
        .ok_or_else(|| Error::Argument("--method is required".into()))?;
    let mut method = Method::from_name(name)?;
    let mut used: Vec<&str> = Vec::new();
    match &mut method {
        Method::InfoGain { bins }
        | Method::GainRatio { bins }
        | Method::SymmetricalUncertainty { bins }
        | Method::Gini { bins }
        | Method::Mrmr { bins } => {
            *bins = o.bins.unwrap_or(DEFAULT_BINS);
            used.push("bins");
        }
        Method::Fisher | Method::Variance => {}
        Method::Laplacian {
            neighbors,
            bandwidth,
        } => {
            if let Some(k) = o.laplacian_k {
                *neighbors = k;
            }
            if let Some(b) = o.bandwidth {
                *bandwidth = b;
            }
            used.extend(["laplacian-k", "bandwidth"]);
        }
        Method::ReliefF { samples, neighbors } => {
            *samples = o.relieff_samples;
            if let Some(k) = o.relieff_k {
                *neighbors = k;
            }
            used.extend(["relieff-samples", "relieff-k"]);
        }
        Method::Sfs { folds } | Method::Sbs { folds } => {
            if let Some(f) = o.folds {
                *folds = f;
            }
            used.push("folds");
        }
        Method::Ga { folds, ga } => {
            if let Some(f) = o.folds {
                *folds = f;
            }
            let d = GaConfig::default();
            *ga = GaConfig {
                population: o.ga_population.unwrap_or(d.population),
                generations: o.ga_generations.unwrap_or(d.generations),
                crossover_rate: o.ga_crossover.unwrap_or(d.crossover_rate),
                mutation_rate: o.ga_mutation.or(d.mutation_rate),
                tournament_size: o.ga_tournament.unwrap_or(d.tournament_size),
                elitism: o.ga_elitism.unwrap_or(d.elitism),
            };
            used.extend([
                "folds",
                "ga-population",
                "ga-generations",
                "ga-crossover",
                "ga-mutation",
                "ga-tournament",
                "ga-elitism",
            ]);
        }
        Method::L1Logistic(cfg) => {
            let d = RegularizedFitConfig::default();
            *cfg = RegularizedFitConfig {
                lambda: o.lambda.unwrap_or(d.lambda),
                max_iters: o.max_iters.unwrap_or(d.max_iters),
                step_size: o.step_size.unwrap_or(d.step_size),
                tolerance: o.tolerance.unwrap_or(d.tolerance),
            };
            used.extend(["lambda", "max-iters", "step-size", "tolerance"]);
        }
        Method::TreeImportance {
            max_depth,
            min_leaf,
        } => {
            *max_depth = o.max_depth;
            if let Some(m) = o.min_leaf {
                *min_leaf = m;
            }
            used.extend(["max-depth", "min-leaf"]);
        }
    }
    let given = [
        ("bins", o.bins.is_some()),
        ("laplacian-k", o.laplacian_k.is_some()),
        ("bandwidth", o.bandwidth.is_some()),
        ("relieff-samples", o.relieff_samples.is_some()),
        ("relieff-k", o.relieff_k.is_some()),
        ("folds", o.folds.is_some()),
        ("ga-population", o.ga_population.is_some()),
        ("ga-generations", o.ga_generations.is_some()),
        ("ga-crossover", o.ga_crossover.is_some()),
        ("ga-mutation", o.ga_mutation.is_some()),
        ("ga-tournament", o.ga_tournament.is_some()),
        ("ga-elitism", o.ga_elitism.is_some()),
        ("lambda", o.lambda.is_some()),
        ("max-iters", o.max_iters.is_some()),
        ("step-size", o.step_size.is_some()),
        ("tolerance", o.tolerance.is_some()),
        ("max-depth", o.max_depth.is_some()),
        ("min-leaf", o.min_leaf.is_some()),
    ];
    for (flag, set) in given {
        if set && !used.contains(&flag) {
            return Err(Error::Argument(format!(
                "--{flag} does not apply to method `{name}`"
            )));
        }
    }
    Ok(method)
}

pub fn build_classifier(o: &RunOptions) -> Result<ClassifierSpec> {
    let name = o.classifier.as_deref().unwrap_or("knn");
    let (spec, used): (ClassifierSpec, &[&str]) = match name {
        "knn" => (
            ClassifierSpec::Knn {
                k: o.knn_k.unwrap_or(ClassifierSpec::KNN_DEFAULT_K),
            },
            &["knn-k"],
        ),
        "naive-bayes" | "nb" => (
            ClassifierSpec::NaiveBayes {
                variance_floor: o
                    .nb_variance_floor
                    .unwrap_or(ClassifierSpec::NB_DEFAULT_VARIANCE_FLOOR),
            },
            &["nb-variance-floor"],
        ),
        "decision-tree" | "tree" => (
            ClassifierSpec::DecisionTree {
                max_depth: o.tree_max_depth,
                min_leaf: o.tree_min_leaf.unwrap_or(ClassifierSpec::TREE_DEFAULT_MIN_LEAF),
            },
            &["tree-max-depth", "tree-min-leaf"],
        ),
        other => {
            return Err(Error::Argument(format!(
                "unknown classifier `{other}` (expected knn, naive-bayes or decision-tree)"
            )))
        }
    };
    let given = [
        ("knn-k", o.knn_k.is_some()),
        ("nb-variance-floor", o.nb_variance_floor.is_some()),
        ("tree-max-depth", o.tree_max_depth.is_some()),
        ("tree-min-leaf", o.tree_min_leaf.is_some()),
    ];
    for (flag, set) in given {
        if set && !used.contains(&flag) {
            return Err(Error::Argument(format!(
                "--{flag} does not apply to classifier `{name}`"
            )));
        }
    }
    spec.validate()?;
    Ok(spec)
}

pub fn build_source(o: &RunOptions) -> Result<DataSource> {
    match (&o.data, &o.train, &o.test) {
        (Some(path), None, None) => Ok(DataSource::Whole {
            path: path.clone(),
            train_fraction: o.train_fraction.unwrap_or(DEFAULT_TRAIN_FRACTION),
        }),
        (None, Some(train), Some(test)) => {
            if o.train_fraction.is_some() {
                return Err(Error::Argument(
                    "--train-fraction only applies with --data".into(),
                ));
            }
            Ok(DataSource::PreSplit {
                train: train.clone(),
                test: test.clone(),
            })
        }
        (None, None, None) => Err(Error::Argument(
            "either --data or both --train and --test are required".into(),
        )),
        (Some(_), _, _) => Err(Error::Argument(
            "--data cannot be combined with --train/--test".into(),
        )),
        _ => Err(Error::Argument("--train and --test must be given together".into())),
    }
}

/// Validated experiment configuration plus the output directory and job cap.
pub fn build_experiment(o: &RunOptions) -> Result<(ExperimentConfig, PathBuf, Option<usize>)> {
    let source = build_source(o)?;
    let method = build_method(o)?;
    let k_list = o
        .num_features
        .clone()
        .ok_or_else(|| Error::Argument("--num-features is required".into()))?
        .0;
    let classifier = build_classifier(o)?;
    let out = o
        .out
        .clone()
        .ok_or_else(|| Error::Argument("--out is required".into()))?;
    if o.jobs == Some(0) {
        return Err(Error::Argument("--jobs must be at least 1".into()));
    }
    let runs = o.runs.unwrap_or(1);
    if runs == 0 {
        return Err(Error::Argument("--runs must be at least 1".into()));
    }
    Ok((
        ExperimentConfig {
            source,
            method,
            k_list,
            classifier,
            runs,
            base_seed: o.seed.unwrap_or(0),
        },
        out,
        o.jobs,
    ))
}

fn cmd_run(cmd: RunCommand, style: &Style) -> std::result::Result<(), CliFailure> {
    let opts = match &cmd.config {
        Some(path) => {
            if cmd.opts != RunOptions::default() {
                return Err(usage(Error::Argument(
                    "--config cannot be combined with other run flags".into(),
                )));
            }
            load_config_file(path).map_err(usage)?
        }
        None => cmd.opts,
    };
    let (cfg, out, jobs) = build_experiment(&opts).map_err(usage)?;
    let input = cfg.source.load().map_err(runtime)?;
    cfg.validate(input.n_features()).map_err(usage)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool
        .build()
        .map_err(|e| runtime(Error::Argument(format!("thread pool: {e}"))))?;
    let report = pool
        .install(|| run_experiment_on(&cfg, &input))
        .map_err(runtime)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }

    std::fs::create_dir_all(&out).map_err(|e| runtime(Error::io(&out, e)))?;
    let report_path = out.join("report.txt");
    write_text_report(&report, &report_path).map_err(runtime)?;
    let charts = pool
        .install(|| write_charts(&report, out.join("charts")))
        .map_err(runtime)?;
    let reduced = export_reduced_datasets(&report, &input, out.join("reduced")).map_err(runtime)?;

    println!("{}", style.heading("AVERAGES"));
    for a in &report.averages {
        println!(
            "k={}: accuracy={:.4} error={:.4} time={:.3}s",
            a.k, a.accuracy, a.error_rate, a.selection_seconds
        );
    }
    println!(
        "wrote {}, {} charts, {} reduced datasets",
        report_path.display(),
        charts.len(),
        reduced.len()
    );
    Ok(())
}

fn cmd_friedman(a: &FriedmanArgs) -> std::result::Result<(), CliFailure> {
    let matrix = ResultMatrix::load(&a.matrix, !a.higher_is_better).map_err(input_error)?;
    let report = friedman_test(&matrix, &a.alphas).map_err(runtime)?;
    let text = report.render();
    print!("{text}");
    if let Some(out) = &a.out {
        std::fs::write(out, &text).map_err(|e| runtime(Error::io(out, e)))?;
    }
    Ok(())
}
