//! Filter scorers and rankers.
//!
//! Entropy-based scorers (`info-gain`, `gain-ratio`, `su`, `gini`, `mrmr`)
//! expect an integer-coded dataset, normally produced by
//! [`crate::dataset::discretize_equal_width`]. Entropies are in bits with
//! `0 * log 0 = 0`. Every scorer returns larger-is-better scores.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classifiers::{min_max, normalize_value};
use crate::dataset::Dataset;
use crate::error::{ensure_arg, Result};

/// Per-feature weights produced by a scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScores {
    pub method: String,
    pub scores: Vec<f64>,
    pub higher_is_better: bool,
}

impl FeatureScores {
    pub fn new(method: impl Into<String>, scores: Vec<f64>) -> Self {
        FeatureScores {
            method: method.into(),
            scores,
            higher_is_better: true,
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Weights derived from a selection order: first pick gets `d`, the next
    /// `d - 1`, and unselected features 0.
    pub fn from_selection_order(method: impl Into<String>, d: usize, order: &[usize]) -> Self {
        let mut scores = vec![0.0; d];
        for (rank, &j) in order.iter().enumerate() {
            scores[j] = (d - rank) as f64;
        }
        FeatureScores::new(method, scores)
    }
}

pub(crate) fn entropy_from_counts(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.log2()
        })
        .sum()
}

/// Contingency table between two code vectors.
struct Joint {
    nx: usize,
    ny: usize,
    counts: Vec<usize>,
    total: usize,
}

impl Joint {
    fn new(x: &[usize], y: &[usize]) -> Self {
        let nx = x.iter().max().map_or(0, |m| m + 1);
        let ny = y.iter().max().map_or(0, |m| m + 1);
        let mut counts = vec![0; nx * ny];
        for (&a, &b) in x.iter().zip(y) {
            counts[a * ny + b] += 1;
        }
        Joint {
            nx,
            ny,
            counts,
            total: x.len(),
        }
    }

    fn x_marginal(&self) -> Vec<usize> {
        (0..self.nx)
            .map(|a| self.counts[a * self.ny..(a + 1) * self.ny].iter().sum())
            .collect()
    }

    fn y_marginal(&self) -> Vec<usize> {
        let mut m = vec![0; self.ny];
        for row in self.counts.chunks(self.ny) {
            for (mb, c) in m.iter_mut().zip(row) {
                *mb += c;
            }
        }
        m
    }

    /// H(Y | X).
    fn conditional_entropy_y(&self) -> f64 {
        let t = self.total as f64;
        (0..self.nx)
            .map(|a| {
                let row = &self.counts[a * self.ny..(a + 1) * self.ny];
                let na: usize = row.iter().sum();
                if na == 0 {
                    0.0
                } else {
                    na as f64 / t * entropy_from_counts(row, na)
                }
            })
            .sum()
    }

    /// Gini(Y | X) = sum_x p(x) Gini(Y | X = x).
    fn conditional_gini_y(&self) -> f64 {
        let t = self.total as f64;
        (0..self.nx)
            .map(|a| {
                let row = &self.counts[a * self.ny..(a + 1) * self.ny];
                let na: usize = row.iter().sum();
                if na == 0 {
                    0.0
                } else {
                    na as f64 / t * crate::classifiers::gini(row, na)
                }
            })
            .sum()
    }
}

/// Mutual information I(X; Y) in bits.
pub fn mutual_information(x: &[usize], y: &[usize]) -> f64 {
    let joint = Joint::new(x, y);
    let hy = entropy_from_counts(&joint.y_marginal(), joint.total);
    hy - joint.conditional_entropy_y()
}

fn require_discrete(ds: &Dataset) -> Result<()> {
    ensure_arg!(
        ds.is_integer_coded(),
        "entropy-based scorers need integer-coded features; discretize first"
    );
    ds.require_supervised()
}

/// Entropy quantities shared by the information-theoretic scorers.
struct EntropyTerms {
    class_entropy: f64,
    feature_entropy: f64,
    conditional: f64,
}

fn entropy_terms(ds: &Dataset) -> Vec<EntropyTerms> {
    let class = ds.labels();
    (0..ds.n_features())
        .into_par_iter()
        .map(|j| {
            let joint = Joint::new(&ds.codes(j), class);
            EntropyTerms {
                class_entropy: entropy_from_counts(&joint.y_marginal(), joint.total),
                feature_entropy: entropy_from_counts(&joint.x_marginal(), joint.total),
                conditional: joint.conditional_entropy_y(),
            }
        })
        .collect()
}

/// IG_j = H(C) - H(C | X_j).
pub fn info_gain(ds: &Dataset) -> Result<FeatureScores> {
    require_discrete(ds)?;
    let scores = entropy_terms(ds)
        .iter()
        .map(|t| (t.class_entropy - t.conditional).max(0.0))
        .collect();
    Ok(FeatureScores::new("info-gain", scores))
}

/// IG_j / H(X_j), 0 when H(X_j) = 0.
pub fn gain_ratio(ds: &Dataset) -> Result<FeatureScores> {
    require_discrete(ds)?;
    let scores = entropy_terms(ds)
        .iter()
        .map(|t| {
            if t.feature_entropy > 0.0 {
                (t.class_entropy - t.conditional).max(0.0) / t.feature_entropy
            } else {
                0.0
            }
        })
        .collect();
    Ok(FeatureScores::new("gain-ratio", scores))
}

/// 2 IG_j / (H(X_j) + H(C)), in [0, 1].
pub fn symmetrical_uncertainty(ds: &Dataset) -> Result<FeatureScores> {
    require_discrete(ds)?;
    let scores = entropy_terms(ds)
        .iter()
        .map(|t| {
            let denom = t.feature_entropy + t.class_entropy;
            if denom > 0.0 {
                (2.0 * (t.class_entropy - t.conditional).max(0.0) / denom).min(1.0)
            } else {
                0.0
            }
        })
        .collect();
    Ok(FeatureScores::new("su", scores))
}

/// Gini(C) - sum_v p(v) Gini(C | X_j = v).
pub fn gini_index_score(ds: &Dataset) -> Result<FeatureScores> {
    require_discrete(ds)?;
    let class = ds.labels();
    let class_gini = crate::classifiers::gini(&ds.class_counts(), ds.n_samples());
    let scores = (0..ds.n_features())
        .into_par_iter()
        .map(|j| {
            let joint = Joint::new(&ds.codes(j), class);
            (class_gini - joint.conditional_gini_y()).max(0.0)
        })
        .collect();
    Ok(FeatureScores::new("gini", scores))
}

const FISHER_EPSILON: f64 = 1e-12;

/// Between-class scatter over within-class scatter, population variances.
pub fn fisher_score(ds: &Dataset) -> Result<FeatureScores> {
    ds.require_supervised()?;
    let counts = ds.class_counts();
    let labels = ds.labels();
    let n = ds.n_samples() as f64;
    let scores = (0..ds.n_features())
        .into_par_iter()
        .map(|j| {
            let col = ds.column(j);
            let overall = col.iter().sum::<f64>() / n;
            let mut sums = vec![0.0; counts.len()];
            for (v, &l) in col.iter().zip(labels) {
                sums[l] += v;
            }
            let means: Vec<f64> = sums
                .iter()
                .zip(&counts)
                .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
                .collect();
            let mut within = 0.0;
            for (v, &l) in col.iter().zip(labels) {
                within += (v - means[l]).powi(2);
            }
            let between: f64 = counts
                .iter()
                .zip(&means)
                .map(|(&c, m)| c as f64 * (m - overall).powi(2))
                .sum();
            // sum_c n_c * var_c equals the pooled within-class sum of squares.
            between / (within + FISHER_EPSILON)
        })
        .collect();
    Ok(FeatureScores::new("fisher", scores))
}

/// Population variance of each column.
pub fn term_variance(ds: &Dataset) -> Result<FeatureScores> {
    ensure_arg!(ds.n_samples() > 0, "variance of an empty dataset");
    let n = ds.n_samples() as f64;
    let scores = (0..ds.n_features())
        .map(|j| {
            let col = ds.column(j);
            let mean = col.iter().sum::<f64>() / n;
            col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
        })
        .collect();
    Ok(FeatureScores::new("variance", scores))
}

fn normalized_rows(ds: &Dataset) -> Vec<Vec<f64>> {
    let (mins, ranges) = min_max(ds);
    ds.rows()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, &v)| normalize_value(v, mins[j], ranges[j]))
                .collect()
        })
        .collect()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Result of a scorer that may emit warnings.
#[derive(Debug, Clone)]
pub struct ScoredWithWarnings {
    pub scores: FeatureScores,
    pub warnings: Vec<String>,
}

pub const LAPLACIAN_DEFAULT_NEIGHBORS: usize = 5;
pub const LAPLACIAN_DEFAULT_BANDWIDTH: f64 = 1.0;

/// Laplacian score on a symmetrized kNN heat-kernel graph over min-max
/// normalized rows. Reported negated so that larger is better; a feature
/// whose weighted variance is zero scores 0.
pub fn laplacian_score(
    ds: &Dataset,
    k_neighbors: usize,
    bandwidth: f64,
) -> Result<ScoredWithWarnings> {
    let n = ds.n_samples();
    let d = ds.n_features();
    ensure_arg!(k_neighbors >= 1, "laplacian neighbor count must be at least 1");
    ensure_arg!(
        k_neighbors < n,
        "laplacian neighbor count {k_neighbors} must be below sample count {n}"
    );
    ensure_arg!(
        bandwidth > 0.0 && bandwidth.is_finite(),
        "laplacian bandwidth must be positive, got {bandwidth}"
    );
    let x = normalized_rows(ds);

    let mut adjacency = vec![vec![false; n]; n];
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&o| o != i)
            .map(|o| (squared_distance(&x[i], &x[o]), o))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, o) in &others[..k_neighbors] {
            adjacency[i][o] = true;
            adjacency[o][i] = true;
        }
    }
    let mut weights = vec![vec![0.0; n]; n];
    let mut degree = vec![0.0; n];
    for i in 0..n {
        for o in 0..n {
            if adjacency[i][o] {
                weights[i][o] = (-squared_distance(&x[i], &x[o]) / bandwidth).exp();
                degree[i] += weights[i][o];
            }
        }
    }
    let degree_total: f64 = degree.iter().sum();

    let mut warnings = Vec::new();
    let all_identical = (1..n).all(|i| ds.row(i) == ds.row(0));
    if all_identical {
        let msg = "all rows identical; laplacian scores set to 0".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
        return Ok(ScoredWithWarnings {
            scores: FeatureScores::new("laplacian", vec![0.0; d]),
            warnings,
        });
    }

    let scores = (0..d)
        .into_par_iter()
        .map(|j| {
            let f: Vec<f64> = x.iter().map(|r| r[j]).collect();
            let mean = f.iter().zip(&degree).map(|(v, w)| v * w).sum::<f64>() / degree_total;
            let centered: Vec<f64> = f.iter().map(|v| v - mean).collect();
            let denom: f64 = centered
                .iter()
                .zip(&degree)
                .map(|(v, w)| v * v * w)
                .sum();
            // f^T L f = 1/2 sum_ij S_ij (f_i - f_j)^2, invariant to centering.
            let mut numer = 0.0;
            for i in 0..n {
                for o in 0..n {
                    let w = weights[i][o];
                    if w > 0.0 {
                        numer += w * (centered[i] - centered[o]).powi(2);
                    }
                }
            }
            numer *= 0.5;
            if denom <= 1e-12 * degree_total {
                0.0
            } else {
                -(numer / denom)
            }
        })
        .collect();
    Ok(ScoredWithWarnings {
        scores: FeatureScores::new("laplacian", scores),
        warnings,
    })
}

pub const RELIEFF_DEFAULT_NEIGHBORS: usize = 5;

/// ReliefF weights on min-max normalized features.
///
/// `sample_count = None` (or `Some(n)`) performs a deterministic full pass in
/// row order; smaller counts draw rows without replacement from `seed`.
/// Neighbors use the Manhattan distance of normalized differences with ties
/// resolved to the lowest row index. Misses of each other class are weighted
/// by `P(C) / (1 - P(class(R)))`.
pub fn relief_f(
    ds: &Dataset,
    sample_count: Option<usize>,
    k_neighbors: usize,
    seed: u64,
) -> Result<ScoredWithWarnings> {
    ds.require_supervised()?;
    let n = ds.n_samples();
    let d = ds.n_features();
    let m = sample_count.unwrap_or(n);
    ensure_arg!(m >= 1 && m <= n, "relieff sample count {m} outside [1, {n}]");
    ensure_arg!(k_neighbors >= 1, "relieff neighbor count must be at least 1");

    let x = normalized_rows(ds);
    let labels = ds.labels();
    let counts = ds.class_counts();
    let priors: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();

    let sampled: Vec<usize> = if m == n {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample(&mut rng, n, m).into_vec()
    };

    let mut warnings = Vec::new();
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 && count <= k_neighbors {
            let msg = format!(
                "class `{}` has {count} members, relieff k={k_neighbors} reduced for it",
                ds.label_set()[c]
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }

    let mut weights = vec![0.0; d];
    for &r in &sampled {
        let own = labels[r];
        let mut by_class: Vec<Vec<(f64, usize)>> = vec![Vec::new(); counts.len()];
        for o in 0..n {
            if o == r {
                continue;
            }
            let dist: f64 = x[r].iter().zip(&x[o]).map(|(a, b)| (a - b).abs()).sum();
            by_class[labels[o]].push((dist, o));
        }
        for (c, candidates) in by_class.iter_mut().enumerate() {
            if candidates.is_empty() {
                continue;
            }
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let k_eff = k_neighbors.min(candidates.len());
            let scale = if c == own {
                -1.0
            } else {
                priors[c] / (1.0 - priors[own])
            } / (m as f64 * k_eff as f64);
            for &(_, o) in &candidates[..k_eff] {
                for j in 0..d {
                    weights[j] += scale * (x[r][j] - x[o][j]).abs();
                }
            }
        }
    }
    Ok(ScoredWithWarnings {
        scores: FeatureScores::new("relieff", weights),
        warnings,
    })
}

/// Greedy mRMR selection result.
#[derive(Debug, Clone, PartialEq)]
pub struct MrmrOutcome {
    pub selected: Vec<usize>,
    /// Criterion value of each pick, in selection order.
    pub trace: Vec<f64>,
}

/// Criterion values closer than this count as ties.
const MRMR_TIE_TOLERANCE: f64 = 1e-12;

/// Greedy mRMR in difference (MID) form: relevance `I(X_j; C)` minus mean
/// redundancy with already selected features. Ties go to the lowest index.
pub fn mrmr_select(ds: &Dataset, k: usize) -> Result<MrmrOutcome> {
    require_discrete(ds)?;
    let d = ds.n_features();
    ensure_arg!(k >= 1 && k <= d, "mrmr k={k} outside [1, {d}]");
    let columns: Vec<Vec<usize>> = (0..d).map(|j| ds.codes(j)).collect();
    let relevance: Vec<f64> = columns
        .par_iter()
        .map(|c| mutual_information(c, ds.labels()))
        .collect();
    let mut redundancy_sum = vec![0.0; d];
    let mut chosen = vec![false; d];
    let mut selected = Vec::with_capacity(k);
    let mut trace = Vec::with_capacity(k);
    while selected.len() < k {
        let s = selected.len() as f64;
        let mut best: Option<(usize, f64)> = None;
        for j in (0..d).filter(|&j| !chosen[j]) {
            let score = if selected.is_empty() {
                relevance[j]
            } else {
                relevance[j] - redundancy_sum[j] / s
            };
            if best.map_or(true, |(_, b)| score > b + MRMR_TIE_TOLERANCE) {
                best = Some((j, score));
            }
        }
        let (pick, score) = best.expect("at least one unselected feature remains");
        chosen[pick] = true;
        selected.push(pick);
        trace.push(score);
        let picked = &columns[pick];
        let updates: Vec<(usize, f64)> = (0..d)
            .into_par_iter()
            .filter(|&j| !chosen[j])
            .map(|j| (j, mutual_information(&columns[j], picked)))
            .collect();
        for (j, mi) in updates {
            redundancy_sum[j] += mi;
        }
    }
    Ok(MrmrOutcome { selected, trace })
}

/// Indices of the `k` largest scores, descending, ties to the lowest index.
pub fn rank_top_k(scores: &FeatureScores, k: usize) -> Result<Vec<usize>> {
    let d = scores.len();
    ensure_arg!(k >= 1 && k <= d, "k={k} outside [1, {d}]");
    let mut order: Vec<usize> = (0..d).collect();
    let key = |j: usize| {
        if scores.higher_is_better {
            scores.scores[j]
        } else {
            -scores.scores[j]
        }
    };
    order.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}
