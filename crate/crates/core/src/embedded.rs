//! Embedded selectors: feature weights read off a fitted model.

use rayon::prelude::*;

use crate::classifiers::{train, ClassifierSpec};
use crate::dataset::Dataset;
use crate::error::{ensure_arg, Result};
use crate::evaluation::{time_section, SelectionOutcome};
use crate::filter::{rank_top_k, FeatureScores};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedFitConfig {
    pub lambda: f64,
    pub max_iters: usize,
    pub step_size: f64,
    pub tolerance: f64,
}

impl Default for RegularizedFitConfig {
    fn default() -> Self {
        RegularizedFitConfig {
            lambda: 0.01,
            max_iters: 500,
            step_size: 0.1,
            tolerance: 1e-6,
        }
    }
}

impl RegularizedFitConfig {
    fn validate(&self) -> Result<()> {
        ensure_arg!(
            self.lambda >= 0.0 && self.lambda.is_finite(),
            "lambda must be a finite non-negative number"
        );
        ensure_arg!(self.max_iters >= 1, "max-iters must be at least 1");
        ensure_arg!(self.step_size > 0.0, "step size must be positive");
        ensure_arg!(self.tolerance > 0.0, "tolerance must be positive");
        Ok(())
    }
}

/// Standardized design matrix; constant columns are all zero.
struct Standardized {
    rows: Vec<Vec<f64>>,
    active: Vec<bool>,
}

fn standardize(ds: &Dataset) -> Standardized {
    let n = ds.n_samples() as f64;
    let d = ds.n_features();
    let mut means = vec![0.0; d];
    let mut stds = vec![0.0; d];
    let mut active = vec![false; d];
    for j in 0..d {
        let col = ds.column(j);
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        means[j] = mean;
        stds[j] = var.sqrt();
        let first = col[0];
        active[j] = col.iter().any(|&v| v != first) && stds[j] > 0.0;
    }
    let rows = ds
        .rows()
        .map(|row| {
            (0..d)
                .map(|j| {
                    if active[j] {
                        (row[j] - means[j]) / stds[j]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    Standardized { rows, active }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// One binary L1-penalized logistic fit on standardized features.
#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Penalized objective before the first step and after each step.
    pub objective_trace: Vec<f64>,
}

/// Mean logistic loss plus `lambda * ||w||_1`; the intercept is unpenalized.
pub fn l1_logistic_objective(
    rows: &[Vec<f64>],
    targets: &[f64],
    weights: &[f64],
    intercept: f64,
    lambda: f64,
) -> f64 {
    let n = rows.len() as f64;
    let loss: f64 = rows
        .iter()
        .zip(targets)
        .map(|(x, &y)| {
            let z = intercept + x.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>();
            softplus(z) - y * z
        })
        .sum::<f64>()
        / n;
    loss + lambda * weights.iter().map(|w| w.abs()).sum::<f64>()
}

/// Largest step that keeps ISTA monotone: the logistic Hessian is bounded
/// by `X^T X / (4n)`, whose top eigenvalue is at most `(p + 1) / 4` for
/// unit-variance columns plus the intercept.
fn safe_step(requested: f64, active_columns: usize) -> f64 {
    requested.min(4.0 / (active_columns as f64 + 1.0))
}

fn fit_binary(rows: &[Vec<f64>], targets: &[f64], active: usize, cfg: &RegularizedFitConfig) -> LogisticFit {
    let n = rows.len() as f64;
    let p = rows.first().map_or(0, Vec::len);
    let step = safe_step(cfg.step_size, active);
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let mut trace = vec![l1_logistic_objective(rows, targets, &w, b, cfg.lambda)];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..cfg.max_iters {
        iterations += 1;
        let mut grad_w = vec![0.0; p];
        let mut grad_b = 0.0;
        for (x, &y) in rows.iter().zip(targets) {
            let z = b + x.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let r = sigmoid(z) - y;
            grad_b += r;
            for (g, a) in grad_w.iter_mut().zip(x) {
                *g += r * a;
            }
        }
        let mut change: f64 = 0.0;
        for j in 0..p {
            let next = soft_threshold(w[j] - step * grad_w[j] / n, step * cfg.lambda);
            change = change.max((next - w[j]).abs());
            w[j] = next;
        }
        let next_b = b - step * grad_b / n;
        change = change.max((next_b - b).abs());
        b = next_b;
        trace.push(l1_logistic_objective(rows, targets, &w, b, cfg.lambda));
        if change < cfg.tolerance {
            converged = true;
            break;
        }
    }
    LogisticFit {
        weights: w,
        intercept: b,
        converged,
        iterations,
        objective_trace: trace,
    }
}

/// Weights from L1-regularized logistic regression.
#[derive(Debug, Clone)]
pub struct L1Weights {
    pub scores: FeatureScores,
    /// One fit per positive class (a single fit for binary problems).
    pub fits: Vec<LogisticFit>,
}

impl L1Weights {
    pub fn converged(&self) -> bool {
        self.fits.iter().all(|f| f.converged)
    }
}

/// Fits `label_code` vs rest on standardized features.
pub fn fit_one_vs_rest(ds: &Dataset, label_code: usize, cfg: &RegularizedFitConfig) -> Result<LogisticFit> {
    cfg.validate()?;
    ds.require_supervised()?;
    ensure_arg!(label_code < ds.n_classes(), "label code {label_code} out of range");
    let std = standardize(ds);
    let targets: Vec<f64> = ds
        .labels()
        .iter()
        .map(|&l| if l == label_code { 1.0 } else { 0.0 })
        .collect();
    let active = std.active.iter().filter(|&&a| a).count();
    Ok(fit_binary(&std.rows, &targets, active, cfg))
}

/// Scores are `|w_j|`. Binary problems use one fit with the second present
/// label as the positive class; more classes use one-vs-rest with the
/// maximum magnitude across fits.
pub fn l1_logistic_weights(ds: &Dataset, cfg: &RegularizedFitConfig) -> Result<L1Weights> {
    cfg.validate()?;
    ds.require_supervised()?;
    let present: Vec<usize> = ds
        .class_counts()
        .iter()
        .enumerate()
        .filter_map(|(c, &n)| (n > 0).then_some(c))
        .collect();
    let positives: Vec<usize> = if present.len() == 2 {
        vec![present[1]]
    } else {
        present
    };
    let std = standardize(ds);
    let active = std.active.iter().filter(|&&a| a).count();
    let fits: Vec<LogisticFit> = positives
        .par_iter()
        .map(|&c| {
            let targets: Vec<f64> = ds
                .labels()
                .iter()
                .map(|&l| if l == c { 1.0 } else { 0.0 })
                .collect();
            fit_binary(&std.rows, &targets, active, cfg)
        })
        .collect();
    let mut scores = vec![0.0; ds.n_features()];
    for fit in &fits {
        for (s, w) in scores.iter_mut().zip(&fit.weights) {
            *s = f64::max(*s, w.abs());
        }
    }
    for (s, &a) in scores.iter_mut().zip(&std.active) {
        if !a {
            *s = 0.0;
        }
    }
    Ok(L1Weights {
        scores: FeatureScores::new("l1-logistic", scores),
        fits,
    })
}

/// Total weighted Gini decrease per feature of a fitted CART tree,
/// normalized to sum to 1 (all zeros when the tree never splits usefully).
pub fn tree_importance(ds: &Dataset, tree: &ClassifierSpec) -> Result<FeatureScores> {
    ensure_arg!(
        matches!(tree, ClassifierSpec::DecisionTree { .. }),
        "tree importance needs a decision-tree spec, got {}",
        tree.name()
    );
    let model = train(tree, ds)?;
    let mut gains = vec![0.0; ds.n_features()];
    model
        .tree()
        .expect("decision-tree spec yields a tree")
        .accumulate_gains(&mut gains);
    let total: f64 = gains.iter().sum();
    if total > 0.0 {
        gains.iter_mut().for_each(|g| *g /= total);
    }
    Ok(FeatureScores::new("tree-importance", gains))
}

#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddedMethod {
    L1Logistic(RegularizedFitConfig),
    TreeImportance(ClassifierSpec),
}

impl EmbeddedMethod {
    pub fn name(&self) -> &'static str {
        match self {
            EmbeddedMethod::L1Logistic(_) => "l1-logistic",
            EmbeddedMethod::TreeImportance(_) => "tree-importance",
        }
    }

    pub fn scores(&self, ds: &Dataset) -> Result<FeatureScores> {
        match self {
            EmbeddedMethod::L1Logistic(cfg) => Ok(l1_logistic_weights(ds, cfg)?.scores),
            EmbeddedMethod::TreeImportance(spec) => tree_importance(ds, spec),
        }
    }
}

/// Scores with the embedded method and keeps the top `k` features.
pub fn embedded_select(method: &EmbeddedMethod, ds: &Dataset, k: usize) -> Result<SelectionOutcome> {
    let d = ds.n_features();
    ensure_arg!(k >= 1 && k <= d, "k={k} outside [1, {d}]");
    let (result, timing) = time_section(method.name(), || -> Result<_> {
        let scores = method.scores(ds)?;
        let selected = rank_top_k(&scores, k)?;
        Ok((scores, selected))
    });
    let (feature_weights, selected) = result?;
    Ok(SelectionOutcome {
        method: method.name().to_owned(),
        k,
        run_index: 0,
        selected,
        feature_weights,
        selection_seconds: timing.seconds,
    })
}
