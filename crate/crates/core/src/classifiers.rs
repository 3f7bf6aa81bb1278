//! Native classifiers used for wrapper fitness and subset evaluation.
//!
//! Every tie is broken toward the lowest index (training row, feature,
//! threshold) or the earliest label in the label set, so training and
//! prediction are fully deterministic.

use std::fmt;

use crate::dataset::{k_fold_partition, Dataset};
use crate::error::{ensure_arg, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassifierSpec {
    Knn {
        k: usize,
    },
    NaiveBayes {
        variance_floor: f64,
    },
    DecisionTree {
        /// `None` means unlimited depth.
        max_depth: Option<usize>,
        min_leaf: usize,
    },
}

impl ClassifierSpec {
    pub const KNN_DEFAULT_K: usize = 5;
    pub const TREE_DEFAULT_MIN_LEAF: usize = 2;
    pub const NB_DEFAULT_VARIANCE_FLOOR: f64 = 1e-9;

    pub fn knn() -> Self {
        ClassifierSpec::Knn {
            k: Self::KNN_DEFAULT_K,
        }
    }

    pub fn naive_bayes() -> Self {
        ClassifierSpec::NaiveBayes {
            variance_floor: Self::NB_DEFAULT_VARIANCE_FLOOR,
        }
    }

    pub fn decision_tree() -> Self {
        ClassifierSpec::DecisionTree {
            max_depth: None,
            min_leaf: Self::TREE_DEFAULT_MIN_LEAF,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Knn { .. } => "knn",
            ClassifierSpec::NaiveBayes { .. } => "naive-bayes",
            ClassifierSpec::DecisionTree { .. } => "decision-tree",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ClassifierSpec::Knn { k } => ensure_arg!(k >= 1, "knn k must be at least 1"),
            ClassifierSpec::NaiveBayes { variance_floor } => ensure_arg!(
                variance_floor > 0.0 && variance_floor.is_finite(),
                "naive-bayes variance floor must be positive, got {variance_floor}"
            ),
            ClassifierSpec::DecisionTree { max_depth, min_leaf } => {
                ensure_arg!(min_leaf >= 1, "tree min-leaf must be at least 1");
                ensure_arg!(max_depth != Some(0), "tree max-depth must be at least 1");
            }
        }
        Ok(())
    }
}

impl fmt::Display for ClassifierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifierSpec::Knn { k } => write!(f, "knn (k={k})"),
            ClassifierSpec::NaiveBayes { variance_floor } => {
                write!(f, "naive-bayes (variance floor={variance_floor:e})")
            }
            ClassifierSpec::DecisionTree { max_depth, min_leaf } => match max_depth {
                Some(depth) => write!(f, "decision-tree (max depth={depth}, min leaf={min_leaf})"),
                None => write!(f, "decision-tree (max depth=unlimited, min leaf={min_leaf})"),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    spec: ClassifierSpec,
    feature_count: usize,
    label_set: Vec<String>,
    state: ModelState,
}

#[derive(Debug, Clone)]
enum ModelState {
    Knn(KnnState),
    NaiveBayes(NaiveBayesState),
    Tree(TreeNode),
}

#[derive(Debug, Clone)]
struct KnnState {
    k: usize,
    mins: Vec<f64>,
    ranges: Vec<f64>,
    /// Normalized training rows, row-major.
    points: Vec<f64>,
    labels: Vec<usize>,
}

#[derive(Debug, Clone)]
struct NaiveBayesState {
    /// `ln(n_c / n)`, `-inf` for labels absent from training.
    log_priors: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub(crate) enum TreeNode {
    Leaf {
        label: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Weighted Gini decrease contributed by this split (relative to the
        /// full training set size).
        gain: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

/// Scaled min-max normalization used by knn and the instance-based scorers.
/// Constant columns get range 0 and map to 0.
pub(crate) fn min_max(ds: &Dataset) -> (Vec<f64>, Vec<f64>) {
    let d = ds.n_features();
    let mut mins = vec![f64::INFINITY; d];
    let mut maxs = vec![f64::NEG_INFINITY; d];
    for row in ds.rows() {
        for j in 0..d {
            mins[j] = mins[j].min(row[j]);
            maxs[j] = maxs[j].max(row[j]);
        }
    }
    let ranges = mins.iter().zip(&maxs).map(|(lo, hi)| hi - lo).collect();
    (mins, ranges)
}

pub(crate) fn normalize_value(v: f64, min: f64, range: f64) -> f64 {
    if range > 0.0 {
        (v - min) / range
    } else {
        0.0
    }
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

pub(crate) fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

/// Fits a classifier. Deterministic for a given spec and dataset.
pub fn train(spec: &ClassifierSpec, ds: &Dataset) -> Result<TrainedModel> {
    spec.validate()?;
    ensure_arg!(ds.n_samples() > 0, "cannot train on an empty dataset");
    let state = match *spec {
        ClassifierSpec::Knn { k } => {
            ensure_arg!(
                k <= ds.n_samples(),
                "knn k={k} exceeds training sample count {}",
                ds.n_samples()
            );
            let (mins, ranges) = min_max(ds);
            let d = ds.n_features();
            let mut points = Vec::with_capacity(ds.n_samples() * d);
            for row in ds.rows() {
                points.extend((0..d).map(|j| normalize_value(row[j], mins[j], ranges[j])));
            }
            ModelState::Knn(KnnState {
                k,
                mins,
                ranges,
                points,
                labels: ds.labels().to_vec(),
            })
        }
        ClassifierSpec::NaiveBayes { variance_floor } => {
            ModelState::NaiveBayes(fit_naive_bayes(ds, variance_floor))
        }
        ClassifierSpec::DecisionTree { max_depth, min_leaf } => {
            let rows: Vec<usize> = (0..ds.n_samples()).collect();
            let builder = TreeBuilder {
                ds,
                max_depth,
                min_leaf,
                total: ds.n_samples() as f64,
            };
            ModelState::Tree(builder.build(rows, 0))
        }
    };
    Ok(TrainedModel {
        spec: *spec,
        feature_count: ds.n_features(),
        label_set: ds.label_set().to_vec(),
        state,
    })
}

fn fit_naive_bayes(ds: &Dataset, floor: f64) -> NaiveBayesState {
    let c = ds.n_classes();
    let d = ds.n_features();
    let counts = ds.class_counts();
    let n = ds.n_samples() as f64;
    let mut means = vec![vec![0.0; d]; c];
    for (i, row) in ds.rows().enumerate() {
        let l = ds.labels()[i];
        for j in 0..d {
            means[l][j] += row[j];
        }
    }
    for (l, m) in means.iter_mut().enumerate() {
        if counts[l] > 0 {
            m.iter_mut().for_each(|v| *v /= counts[l] as f64);
        }
    }
    let mut variances = vec![vec![0.0; d]; c];
    for (i, row) in ds.rows().enumerate() {
        let l = ds.labels()[i];
        for j in 0..d {
            variances[l][j] += (row[j] - means[l][j]).powi(2);
        }
    }
    for (l, v) in variances.iter_mut().enumerate() {
        let nc = counts[l].max(1) as f64;
        v.iter_mut().for_each(|x| *x = (*x / nc).max(floor));
    }
    let log_priors = counts
        .iter()
        .map(|&nc| {
            if nc == 0 {
                f64::NEG_INFINITY
            } else {
                (nc as f64 / n).ln()
            }
        })
        .collect();
    NaiveBayesState {
        log_priors,
        means,
        variances,
    }
}

struct TreeBuilder<'a> {
    ds: &'a Dataset,
    max_depth: Option<usize>,
    min_leaf: usize,
    total: f64,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    child_impurity: f64,
}

impl TreeBuilder<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.ds.n_classes()];
        for &i in rows {
            counts[self.ds.labels()[i]] += 1;
        }
        counts
    }

    fn build(&self, rows: Vec<usize>, depth: usize) -> TreeNode {
        let counts = self.counts(&rows);
        let label = majority(&counts);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_reached = self.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_reached || rows.len() < self.min_leaf {
            return TreeNode::Leaf { label };
        }
        let parent_impurity = gini(&counts, rows.len());
        let Some(best) = self.best_split(&rows) else {
            return TreeNode::Leaf { label };
        };
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.ds.value(i, best.feature) <= best.threshold);
        let gain = (rows.len() as f64 / self.total)
            * (parent_impurity - best.child_impurity).max(0.0);
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            gain,
            left: Box::new(self.build(left, depth + 1)),
            right: Box::new(self.build(right, depth + 1)),
        }
    }

    /// Lowest weighted child Gini over all features and midpoint thresholds.
    /// Only strict improvements replace the incumbent, so ties resolve to the
    /// lowest feature and then the lowest threshold.
    fn best_split(&self, rows: &[usize]) -> Option<BestSplit> {
        let n_classes = self.ds.n_classes();
        let n = rows.len();
        let mut best: Option<BestSplit> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(n);
        for j in 0..self.ds.n_features() {
            sorted.clear();
            sorted.extend(rows.iter().map(|&i| (self.ds.value(i, j), self.ds.labels()[i])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = vec![0usize; n_classes];
            let mut right = vec![0usize; n_classes];
            for &(_, l) in &sorted {
                right[l] += 1;
            }
            for pos in 0..n - 1 {
                let (v, l) = sorted[pos];
                left[l] += 1;
                right[l] -= 1;
                let next = sorted[pos + 1].0;
                if next == v {
                    continue;
                }
                let n_left = pos + 1;
                let n_right = n - n_left;
                let impurity = (n_left as f64 * gini(&left, n_left)
                    + n_right as f64 * gini(&right, n_right))
                    / n as f64;
                if best.as_ref().map_or(true, |b| impurity < b.child_impurity) {
                    best = Some(BestSplit {
                        feature: j,
                        threshold: v + (next - v) / 2.0,
                        child_impurity: impurity,
                    });
                }
            }
        }
        best
    }
}

impl TreeNode {
    fn predict(&self, x: &[f64]) -> usize {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { label } => return *label,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub(crate) fn accumulate_gains(&self, out: &mut [f64]) {
        if let TreeNode::Split {
            feature,
            gain,
            left,
            right,
            ..
        } = self
        {
            out[*feature] += gain;
            left.accumulate_gains(out);
            right.accumulate_gains(out);
        }
    }

    #[cfg(test)]
    pub(crate) fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }
}

impl TrainedModel {
    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn label_set(&self) -> &[String] {
        &self.label_set
    }

    pub(crate) fn tree(&self) -> Option<&TreeNode> {
        match &self.state {
            ModelState::Tree(t) => Some(t),
            _ => None,
        }
    }

    fn check_instance(&self, x: &[f64]) -> Result<()> {
        ensure_arg!(
            x.len() == self.feature_count,
            "instance has {} values, model expects {}",
            x.len(),
            self.feature_count
        );
        ensure_arg!(
            x.iter().all(|v| v.is_finite()),
            "instance contains non-finite values"
        );
        Ok(())
    }

    /// Predicted label code (index into [`TrainedModel::label_set`]).
    pub fn predict_code(&self, x: &[f64]) -> Result<usize> {
        self.check_instance(x)?;
        Ok(match &self.state {
            ModelState::Knn(s) => s.predict(x, self.label_set.len()),
            ModelState::NaiveBayes(s) => argmax_first(&s.log_joint(x)),
            ModelState::Tree(t) => t.predict(x),
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<&str> {
        let code = self.predict_code(x)?;
        Ok(&self.label_set[code])
    }

    /// Naive-Bayes class posteriors in label-set order.
    pub fn posteriors(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_instance(x)?;
        let ModelState::NaiveBayes(s) = &self.state else {
            return Err(Error::Argument(format!(
                "posteriors are only available for naive-bayes, model is {}",
                self.spec.name()
            )));
        };
        let joint = s.log_joint(x);
        let max = joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = joint.iter().map(|&v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        Ok(exps.into_iter().map(|e| e / total).collect())
    }
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl KnnState {
    fn predict(&self, x: &[f64], n_labels: usize) -> usize {
        let d = self.mins.len();
        let q: Vec<f64> = (0..d)
            .map(|j| normalize_value(x[j], self.mins[j], self.ranges[j]))
            .collect();
        let mut dists: Vec<(f64, usize)> = self
            .points
            .chunks_exact(d.max(1))
            .take(self.labels.len())
            .enumerate()
            .map(|(i, p)| {
                let dist: f64 = if d == 0 {
                    0.0
                } else {
                    p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum()
                };
                (dist, i)
            })
            .collect();
        let k = self.k.min(dists.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dists.len() {
            dists.select_nth_unstable_by(k - 1, cmp);
        }
        let mut votes = vec![0usize; n_labels];
        for &(_, i) in &dists[..k] {
            votes[self.labels[i]] += 1;
        }
        majority(&votes)
    }
}

impl NaiveBayesState {
    fn log_joint(&self, x: &[f64]) -> Vec<f64> {
        self.log_priors
            .iter()
            .enumerate()
            .map(|(c, &prior)| {
                if prior == f64::NEG_INFINITY {
                    return prior;
                }
                let ll: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let var = self.variances[c][j];
                        let diff = v - self.means[c][j];
                        -0.5 * (2.0 * std::f64::consts::PI * var).ln() - diff * diff / (2.0 * var)
                    })
                    .sum();
                prior + ll
            })
            .collect()
    }
}

/// Fraction of rows whose predicted label equals the true label. Labels are
/// compared as text, so `ds` may use a different label ordering.
pub fn accuracy(model: &TrainedModel, ds: &Dataset) -> Result<f64> {
    ensure_arg!(
        ds.n_features() == model.feature_count,
        "dataset has {} features, model expects {}",
        ds.n_features(),
        model.feature_count
    );
    ensure_arg!(ds.n_samples() > 0, "cannot evaluate on an empty dataset");
    let mut correct = 0usize;
    for i in 0..ds.n_samples() {
        if model.predict(ds.row(i))? == ds.class_label(i) {
            correct += 1;
        }
    }
    Ok(correct as f64 / ds.n_samples() as f64)
}

/// Mean test-fold accuracy over a stratified k-fold partition.
pub fn cross_val_accuracy(
    spec: &ClassifierSpec,
    ds: &Dataset,
    folds: usize,
    seed: u64,
) -> Result<f64> {
    let partition = k_fold_partition(ds, folds, seed)?;
    let mut in_fold = vec![usize::MAX; ds.n_samples()];
    for (f, rows) in partition.iter().enumerate() {
        for &i in rows {
            in_fold[i] = f;
        }
    }
    let mut total = 0.0;
    for (f, test_rows) in partition.iter().enumerate() {
        let train_rows: Vec<usize> = (0..ds.n_samples()).filter(|&i| in_fold[i] != f).collect();
        let model = train(spec, &ds.select_rows(&train_rows))?;
        total += accuracy(&model, &ds.select_rows(test_rows))?;
    }
    Ok(total / folds as f64)
}
