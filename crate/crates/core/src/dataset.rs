//! Dataset abstraction, CSV/ARFF I/O, splitting and discretization.
//!
//! On-disk CSV convention: a header row, numeric feature columns, and the
//! class column last. Whatever the header calls the last column, it is the
//! class. Missing cells are rejected rather than imputed.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure_arg, Error, Result};

/// Default number of equal-width bins used before entropy-based scoring.
pub const DEFAULT_BINS: usize = 10;

/// Immutable table of real-valued features plus a nominal class column.
///
/// Class labels are stored as indices into `label_set`, which keeps the
/// distinct labels in first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    values: Vec<f64>,
    n_samples: usize,
    labels: Vec<usize>,
    label_set: Vec<String>,
    source_name: String,
}

impl Dataset {
    /// Builds a dataset from rows and text class labels. The label set is
    /// derived in first-appearance order.
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        class_labels: Vec<String>,
        source_name: impl Into<String>,
    ) -> Result<Self> {
        let mut label_set: Vec<String> = Vec::new();
        let mut labels = Vec::with_capacity(class_labels.len());
        for label in &class_labels {
            let idx = match label_set.iter().position(|l| l == label) {
                Some(i) => i,
                None => {
                    label_set.push(label.clone());
                    label_set.len() - 1
                }
            };
            labels.push(idx);
        }
        let d = feature_names.len();
        let mut values = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Structure(format!(
                    "row {} has {} values, expected {d}",
                    i + 1,
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::from_raw(
            feature_names,
            values,
            rows.len(),
            labels,
            label_set,
            source_name.into(),
        )
    }

    /// Builds a dataset from a row-major value buffer and label codes.
    pub fn from_raw(
        feature_names: Vec<String>,
        values: Vec<f64>,
        n_samples: usize,
        labels: Vec<usize>,
        label_set: Vec<String>,
        source_name: String,
    ) -> Result<Self> {
        let d = feature_names.len();
        if values.len() != n_samples * d {
            return Err(Error::Structure(format!(
                "value buffer has {} entries, expected {n_samples}x{d}",
                values.len()
            )));
        }
        if labels.len() != n_samples {
            return Err(Error::Structure(format!(
                "{} class labels for {n_samples} samples",
                labels.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Structure(format!("duplicate feature name `{name}`")));
            }
        }
        let mut seen_labels = HashSet::new();
        for l in &label_set {
            if !seen_labels.insert(l.as_str()) {
                return Err(Error::Structure(format!("duplicate class label `{l}`")));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= label_set.len()) {
            return Err(Error::Structure(format!(
                "label code {bad} outside label set of size {}",
                label_set.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value at row {}, column `{}`",
                pos / d.max(1) + 1,
                feature_names[pos % d.max(1)]
            )));
        }
        Ok(Dataset {
            feature_names,
            values,
            n_samples,
            labels,
            label_set,
            source_name,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.label_set.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_set(&self) -> &[String] {
        &self.label_set
    }

    /// Class codes, one per sample, indexing into [`Dataset::label_set`].
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_label(&self, row: usize) -> &str {
        &self.label_set[self.labels[row]]
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    pub fn with_source_name(mut self, name: impl Into<String>) -> Self {
        self.source_name = name.into();
        self
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_samples).map(move |i| self.row(i))
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.values[row * self.n_features() + feature]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_samples).map(|i| self.value(i, j)).collect()
    }

    /// Per-class sample counts in label-set order.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Errors unless at least two labels are present among the samples.
    pub fn require_supervised(&self) -> Result<()> {
        let present = self.class_counts().iter().filter(|&&c| c > 0).count();
        ensure_arg!(
            present >= 2,
            "supervised operation needs at least 2 classes, dataset `{}` has {present}",
            self.source_name
        );
        Ok(())
    }

    /// Subset of rows in the given order; label set and names are kept.
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        let d = self.n_features();
        let mut values = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            feature_names: self.feature_names.clone(),
            values,
            n_samples: indices.len(),
            labels,
            label_set: self.label_set.clone(),
            source_name: self.source_name.clone(),
        }
    }

    /// Re-expresses class codes against `base`, appending any labels of this
    /// dataset that `base` lacks. Used to give a test file the train labels.
    pub fn align_labels(&self, base: &[String]) -> Dataset {
        let mut label_set: Vec<String> = base.to_vec();
        let mut remap = Vec::with_capacity(self.label_set.len());
        for l in &self.label_set {
            let idx = match label_set.iter().position(|b| b == l) {
                Some(i) => i,
                None => {
                    label_set.push(l.clone());
                    label_set.len() - 1
                }
            };
            remap.push(idx);
        }
        Dataset {
            feature_names: self.feature_names.clone(),
            values: self.values.clone(),
            n_samples: self.n_samples,
            labels: self.labels.iter().map(|&l| remap[l]).collect(),
            label_set,
            source_name: self.source_name.clone(),
        }
    }

    /// True when every value is a non-negative integer code.
    pub fn is_integer_coded(&self) -> bool {
        self.values
            .iter()
            .all(|&v| v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64)
    }

    /// Reads a column of integer codes. Callers must check
    /// [`Dataset::is_integer_coded`] first.
    pub(crate) fn codes(&self, j: usize) -> Vec<usize> {
        (0..self.n_samples).map(|i| self.value(i, j) as usize).collect()
    }
}

/// A train/test pair sharing feature names and label set.
#[derive(Debug, Clone)]
pub struct DataSplit {
    pub train: Dataset,
    pub test: Dataset,
    /// Original row indices that went to each side, ascending.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub warnings: Vec<String>,
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "?"
}

/// Loads a dataset from a CSV file in the toolkit convention.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(file, &name)
}

/// Parses CSV text (header row, features, class last).
pub fn parse_csv<R: Read>(reader: R, source_name: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Structure(format!("unreadable header: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.len() < 2 {
        return Err(Error::Structure(format!(
            "need at least 2 columns (features + class), found {}",
            header.len()
        )));
    }
    let d = header.len() - 1;
    let feature_names = header[..d].to_vec();
    if let Some(i) = feature_names.iter().position(|n| n.is_empty()) {
        return Err(Error::Structure(format!("empty name for column {}", i + 1)));
    }

    let mut rows = Vec::new();
    let mut class_labels = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row_no = r + 1;
        let record = record.map_err(|e| Error::Structure(format!("row {row_no}: {e}")))?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() > header.len() {
            return Err(Error::Structure(format!(
                "row {row_no} has {} cells, header has {}",
                record.len(),
                header.len()
            )));
        }
        let mut row = Vec::with_capacity(d);
        for (j, name) in header.iter().enumerate() {
            let cell = record.get(j).unwrap_or("");
            if is_missing(cell) {
                return Err(Error::Validation(format!(
                    "missing value at row {row_no}, column `{name}`"
                )));
            }
            if j == d {
                class_labels.push(cell.to_owned());
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row: row_no,
                    column: name.clone(),
                    message: format!("`{cell}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row: row_no,
                        column: name.clone(),
                        message: format!("`{cell}` is not finite"),
                    });
                }
                row.push(v);
            }
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(Error::Structure(format!(
            "need at least 2 data rows, found {}",
            rows.len()
        )));
    }
    Dataset::new(feature_names, rows, class_labels, source_name)
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(w)
}

/// Renders the dataset as toolkit CSV text.
pub fn to_csv_string(ds: &Dataset) -> String {
    let mut buf = Vec::new();
    write_csv(ds, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

fn write_csv<W: Write>(ds: &Dataset, w: W) -> std::io::Result<()> {
    let mut wtr = csv_writer(w);
    let mut header: Vec<&str> = ds.feature_names.iter().map(String::as_str).collect();
    header.push("class");
    wtr.write_record(&header)?;
    let mut cells: Vec<String> = Vec::with_capacity(ds.n_features() + 1);
    for i in 0..ds.n_samples() {
        cells.clear();
        // `Display` for f64 is the shortest representation that round-trips.
        cells.extend(ds.row(i).iter().map(|v| v.to_string()));
        cells.push(ds.class_label(i).to_owned());
        wtr.write_record(&cells)?;
    }
    wtr.flush()
}

pub fn export_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_csv(ds, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Quotes an ARFF identifier or nominal value when it contains whitespace or
/// characters the ARFF grammar treats specially.
pub fn arff_quote(name: &str) -> String {
    let needs = name.is_empty()
        || name.starts_with('%')
        || name
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, ',' | '{' | '}' | '\'' | '"' | '\\'));
    if needs {
        let escaped = name.replace('\\', "\\\\").replace('\'', "\\'");
        format!("'{escaped}'")
    } else {
        name.to_owned()
    }
}

pub fn to_arff_string(ds: &Dataset, relation_name: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!("@relation {}\n", arff_quote(relation_name)));
    for name in &ds.feature_names {
        out.push_str(&format!("@attribute {} numeric\n", arff_quote(name)));
    }
    let labels: Vec<String> = ds.label_set.iter().map(|l| arff_quote(l)).collect();
    out.push_str(&format!("@attribute class {{{}}}\n", labels.join(",")));
    out.push_str("@data\n");
    for i in 0..ds.n_samples() {
        for v in ds.row(i) {
            out.push_str(&v.to_string());
            out.push(',');
        }
        out.push_str(&arff_quote(ds.class_label(i)));
        out.push('\n');
    }
    out
}

pub fn export_arff(ds: &Dataset, relation_name: &str, path: impl AsRef<Path>) -> Result<()> {
    ensure_arg!(!relation_name.is_empty(), "ARFF relation name must be nonempty");
    let path = path.as_ref();
    std::fs::write(path, to_arff_string(ds, relation_name)).map_err(|e| Error::io(path, e))
}

/// Number of training rows for `n` samples; the epsilon absorbs products such
/// as `0.29 * 100` that land just below an integer.
fn train_quota(n: usize, fraction: f64) -> usize {
    (n as f64 * fraction + 1e-9).floor() as usize
}

/// Stratified random train/test split. Per-class quotas use the largest
/// remainder method so totals match `floor(n * fraction)`.
pub fn split_train_test(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<DataSplit> {
    ensure_arg!(
        train_fraction > 0.0 && train_fraction < 1.0,
        "train fraction must lie in (0, 1), got {train_fraction}"
    );
    let n = ds.n_samples();
    let total_train = train_quota(n, train_fraction);
    ensure_arg!(
        total_train >= 1 && total_train < n,
        "fraction {train_fraction} of {n} samples leaves an empty side"
    );

    let counts = ds.class_counts();
    let mut quotas: Vec<usize> = counts
        .iter()
        .map(|&c| (c as f64 * train_fraction).floor() as usize)
        .collect();
    let mut remainders: Vec<(usize, f64)> = counts
        .iter()
        .enumerate()
        .map(|(c, &nc)| (c, nc as f64 * train_fraction - quotas[c] as f64))
        .collect();
    remainders.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let assigned: usize = quotas.iter().sum();
    let mut extra = total_train.saturating_sub(assigned);
    for &(c, _) in &remainders {
        if extra == 0 {
            break;
        }
        if quotas[c] < counts[c] {
            quotas[c] += 1;
            extra -= 1;
        }
    }

    let mut warnings = Vec::new();
    for (c, &nc) in counts.iter().enumerate() {
        if nc == 1 {
            quotas[c] = 1;
            let msg = format!(
                "class `{}` has a single sample; placed in train",
                ds.label_set[c]
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_rows = Vec::with_capacity(total_train);
    let mut test_rows = Vec::with_capacity(n - total_train);
    for (c, members) in class_members(ds).into_iter().enumerate() {
        let mut members = members;
        members.shuffle(&mut rng);
        train_rows.extend_from_slice(&members[..quotas[c]]);
        test_rows.extend_from_slice(&members[quotas[c]..]);
    }
    ensure_arg!(
        !test_rows.is_empty(),
        "split leaves no test rows after placing singleton classes in train"
    );
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    Ok(DataSplit {
        train: ds.select_rows(&train_rows),
        test: ds.select_rows(&test_rows),
        train_rows,
        test_rows,
        warnings,
    })
}

fn class_members(ds: &Dataset) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); ds.n_classes()];
    for (i, &l) in ds.labels.iter().enumerate() {
        members[l].push(i);
    }
    members
}

/// Stratified k-fold partition: rows of each class are shuffled, classes are
/// concatenated in label-set order and dealt round-robin across folds.
pub fn k_fold_partition(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    ensure_arg!(k >= 2, "fold count must be at least 2, got {k}");
    ensure_arg!(
        k <= ds.n_samples(),
        "fold count {k} exceeds sample count {}",
        ds.n_samples()
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut position = 0usize;
    for mut members in class_members(ds) {
        members.shuffle(&mut rng);
        for i in members {
            folds[position % k].push(i);
            position += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Projects the dataset onto the listed feature columns, in the listed order.
pub fn reduce_to_features(ds: &Dataset, indices: &[usize]) -> Result<Dataset> {
    ensure_arg!(!indices.is_empty(), "feature index list is empty");
    let d = ds.n_features();
    let mut seen = vec![false; d];
    for &j in indices {
        ensure_arg!(j < d, "feature index {j} out of range for {d} features");
        ensure_arg!(!seen[j], "duplicate feature index {j}");
        seen[j] = true;
    }
    let mut values = Vec::with_capacity(ds.n_samples() * indices.len());
    for i in 0..ds.n_samples() {
        let row = ds.row(i);
        values.extend(indices.iter().map(|&j| row[j]));
    }
    Ok(Dataset {
        feature_names: indices.iter().map(|&j| ds.feature_names[j].clone()).collect(),
        values,
        n_samples: ds.n_samples(),
        labels: ds.labels.clone(),
        label_set: ds.label_set.clone(),
        source_name: ds.source_name.clone(),
    })
}

/// Integer codes for one column under equal-width binning.
pub fn equal_width_codes(column: &[f64], bins: usize) -> Vec<usize> {
    let mut distinct: Vec<f64> = column.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < bins {
        return column
            .iter()
            .map(|v| distinct.partition_point(|d| d < v))
            .collect();
    }
    let min = distinct[0];
    let max = distinct[distinct.len() - 1];
    let span = max - min;
    column
        .iter()
        .map(|&v| {
            let code = ((v - min) * bins as f64 / span).floor() as usize;
            code.min(bins - 1)
        })
        .collect()
}

/// Equal-width discretization of every feature into integer codes.
///
/// A feature with fewer distinct values than `bins` keeps one code per
/// distinct value (ascending). Otherwise edges sit at `min + i*(max-min)/bins`
/// and the maximum lands in the top bin.
pub fn discretize_equal_width(ds: &Dataset, bins: usize) -> Result<Dataset> {
    ensure_arg!(bins >= 2, "bin count must be at least 2, got {bins}");
    let d = ds.n_features();
    let mut values = vec![0.0; ds.values.len()];
    for j in 0..d {
        for (i, code) in equal_width_codes(&ds.column(j), bins).into_iter().enumerate() {
            values[i * d + j] = code as f64;
        }
    }
    Ok(Dataset {
        values,
        ..ds.clone()
    })
}
