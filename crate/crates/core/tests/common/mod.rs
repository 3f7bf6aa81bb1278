//! Brute-force oracles and fixture builders shared by the integration tests.
//! Oracles follow the textbook formulas directly and share no code with the
//! library. `all_scores` is the exception: it collects the library's own
//! filter scores for the property checks.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::HashMap;
use std::path::Path;

use featsel::dataset::{discretize_equal_width, Dataset};
use featsel::filter;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const LABELS: [&str; 4] = ["a", "b", "c", "d"];

pub fn names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("f{j}")).collect()
}

pub fn dataset(rows: Vec<Vec<f64>>, classes: &[usize]) -> Dataset {
    let d = rows[0].len();
    let labels = classes.iter().map(|&c| LABELS[c].to_owned()).collect();
    Dataset::new(names(d), rows, labels, "fixture").unwrap()
}

/// Class codes with every one of `n_classes` classes present.
pub fn random_classes(rng: &mut ChaCha8Rng, n: usize, n_classes: usize) -> Vec<usize> {
    let mut classes: Vec<usize> = (0..n).map(|i| if i < n_classes { i } else { rng.gen_range(0..n_classes) }).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        classes.swap(i, j);
    }
    classes
}

/// Integer-coded dataset (codes below `max_code`), already discretized.
pub fn random_coded(rng: &mut ChaCha8Rng, n: usize, d: usize, n_classes: usize, max_code: u32) -> Dataset {
    let rows = (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(0..max_code) as f64).collect())
        .collect();
    dataset(rows, &random_classes(rng, n, n_classes))
}

/// Real-valued dataset; about one column in four is constant.
pub fn random_continuous(rng: &mut ChaCha8Rng, n: usize, d: usize, n_classes: usize) -> Dataset {
    let constant: Vec<bool> = (0..d).map(|_| rng.gen_bool(0.25)).collect();
    let rows = (0..n)
        .map(|_| {
            (0..d)
                .map(|j| if constant[j] { 3.5 } else { rng.gen_range(-10.0..10.0) })
                .collect()
        })
        .collect();
    dataset(rows, &random_classes(rng, n, n_classes))
}

pub fn column(ds: &Dataset, j: usize) -> Vec<f64> {
    (0..ds.n_samples()).map(|i| ds.value(i, j)).collect()
}

fn counts<K: std::hash::Hash + Eq>(items: impl Iterator<Item = K>) -> HashMap<K, usize> {
    let mut m = HashMap::new();
    for k in items {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

/// Entropy in bits via natural logarithms.
fn entropy_of<K: std::hash::Hash + Eq>(items: impl Iterator<Item = K>) -> f64 {
    let c = counts(items);
    let n: usize = c.values().sum();
    let mut h = 0.0;
    for &k in c.values() {
        let p = k as f64 / n as f64;
        h -= p * p.ln();
    }
    h / std::f64::consts::LN_2
}

fn codes(ds: &Dataset, j: usize) -> Vec<i64> {
    column(ds, j).iter().map(|&v| v as i64).collect()
}

pub fn h_class(ds: &Dataset) -> f64 {
    entropy_of(ds.labels().iter().copied())
}

pub fn h_feature(ds: &Dataset, j: usize) -> f64 {
    entropy_of(codes(ds, j).into_iter())
}

/// I(X;C) = H(X) + H(C) - H(X,C).
pub fn info_gain(ds: &Dataset, j: usize) -> f64 {
    let x = codes(ds, j);
    let joint = entropy_of(x.iter().zip(ds.labels()).map(|(&a, &b)| (a, b)));
    h_feature(ds, j) + h_class(ds) - joint
}

pub fn mutual_information(x: &[i64], y: &[i64]) -> f64 {
    entropy_of(x.iter().copied()) + entropy_of(y.iter().copied())
        - entropy_of(x.iter().zip(y).map(|(&a, &b)| (a, b)))
}

pub fn gain_ratio(ds: &Dataset, j: usize) -> f64 {
    let h = h_feature(ds, j);
    if h == 0.0 {
        0.0
    } else {
        info_gain(ds, j) / h
    }
}

pub fn symmetrical_uncertainty(ds: &Dataset, j: usize) -> f64 {
    let denom = h_feature(ds, j) + h_class(ds);
    if denom == 0.0 {
        0.0
    } else {
        2.0 * info_gain(ds, j) / denom
    }
}

fn gini_of(labels: &[usize]) -> f64 {
    let c = counts(labels.iter().copied());
    let n = labels.len() as f64;
    1.0 - c.values().map(|&k| (k as f64 / n).powi(2)).sum::<f64>()
}

pub fn gini_score(ds: &Dataset, j: usize) -> f64 {
    let x = codes(ds, j);
    let n = x.len() as f64;
    let mut groups: HashMap<i64, Vec<usize>> = HashMap::new();
    for (v, &l) in x.iter().zip(ds.labels()) {
        groups.entry(*v).or_default().push(l);
    }
    let conditional: f64 = groups
        .values()
        .map(|g| g.len() as f64 / n * gini_of(g))
        .sum();
    gini_of(ds.labels()) - conditional
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn population_variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

pub fn fisher(ds: &Dataset, j: usize) -> f64 {
    let x = column(ds, j);
    let overall = mean(&x);
    let mut by_class: HashMap<usize, Vec<f64>> = HashMap::new();
    for (v, &l) in x.iter().zip(ds.labels()) {
        by_class.entry(l).or_default().push(*v);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for g in by_class.values() {
        let nc = g.len() as f64;
        num += nc * (mean(g) - overall).powi(2);
        den += nc * population_variance(g);
    }
    num / (den + 1e-12)
}

pub fn variance(ds: &Dataset, j: usize) -> f64 {
    population_variance(&column(ds, j))
}

fn normalized(ds: &Dataset) -> Vec<Vec<f64>> {
    let d = ds.n_features();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| column(ds, j)).collect();
    (0..ds.n_samples())
        .map(|i| {
            (0..d)
                .map(|j| {
                    let lo = cols[j].iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = cols[j].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    if hi > lo {
                        (cols[j][i] - lo) / (hi - lo)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// ReliefF full pass (m = n): k nearest hits and misses per class by
/// Manhattan distance, misses weighted by P(c) / (1 - P(class(R))).
pub fn relief_f(ds: &Dataset, k: usize) -> Vec<f64> {
    let x = normalized(ds);
    let n = ds.n_samples();
    let d = ds.n_features();
    let labels = ds.labels();
    let class_count = counts(labels.iter().copied());
    let prior = |c: usize| class_count[&c] as f64 / n as f64;
    let mut w = vec![0.0; d];
    for r in 0..n {
        for &c in class_count.keys() {
            let mut cands: Vec<usize> = (0..n).filter(|&o| o != r && labels[o] == c).collect();
            if cands.is_empty() {
                continue;
            }
            let dist = |o: usize| -> f64 { (0..d).map(|j| (x[r][j] - x[o][j]).abs()).sum() };
            cands.sort_by(|&a, &b| dist(a).partial_cmp(&dist(b)).unwrap().then(a.cmp(&b)));
            let kk = k.min(cands.len());
            let factor = if c == labels[r] {
                -1.0
            } else {
                prior(c) / (1.0 - prior(labels[r]))
            };
            for &o in &cands[..kk] {
                for j in 0..d {
                    w[j] += factor * (x[r][j] - x[o][j]).abs() / (n as f64 * kk as f64);
                }
            }
        }
    }
    w
}

/// Negated Laplacian score with explicit L = D - S matrices.
pub fn laplacian(ds: &Dataset, k: usize, bandwidth: f64) -> Vec<f64> {
    let x = normalized(ds);
    let n = ds.n_samples();
    let d = ds.n_features();
    let sq = |a: usize, b: usize| -> f64 { (0..d).map(|j| (x[a][j] - x[b][j]).powi(2)).sum() };
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&o| o != i).collect();
        others.sort_by(|&a, &b| sq(i, a).partial_cmp(&sq(i, b)).unwrap().then(a.cmp(&b)));
        for &o in &others[..k] {
            let v = (-sq(i, o) / bandwidth).exp();
            s[i][o] = v;
            s[o][i] = v;
        }
    }
    let deg: Vec<f64> = s.iter().map(|r| r.iter().sum()).collect();
    let total: f64 = deg.iter().sum();
    (0..d)
        .map(|j| {
            let f: Vec<f64> = x.iter().map(|r| r[j]).collect();
            let mu = f.iter().zip(&deg).map(|(a, b)| a * b).sum::<f64>() / total;
            let ft: Vec<f64> = f.iter().map(|v| v - mu).collect();
            let mut lf = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let l_ab = if a == b { deg[a] - s[a][a] } else { -s[a][b] };
                    lf += ft[a] * l_ab * ft[b];
                }
            }
            let df: f64 = ft.iter().zip(&deg).map(|(v, w)| v * v * w).sum();
            if df <= 1e-12 * total {
                0.0
            } else {
                -lf / df
            }
        })
        .collect()
}

/// Greedy mRMR (difference form), ties to the lowest index.
pub fn mrmr(ds: &Dataset, k: usize) -> Vec<usize> {
    let d = ds.n_features();
    let cols: Vec<Vec<i64>> = (0..d).map(|j| codes(ds, j)).collect();
    let y: Vec<i64> = ds.labels().iter().map(|&l| l as i64).collect();
    let mut selected: Vec<usize> = Vec::new();
    while selected.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..d {
            if selected.contains(&j) {
                continue;
            }
            let rel = mutual_information(&cols[j], &y);
            let red = if selected.is_empty() {
                0.0
            } else {
                selected.iter().map(|&s| mutual_information(&cols[j], &cols[s])).sum::<f64>()
                    / selected.len() as f64
            };
            let score = rel - red;
            if best.map_or(true, |(_, b)| score > b + 1e-12) {
                best = Some((j, score));
            }
        }
        selected.push(best.unwrap().0);
    }
    selected
}

/// Planted wrapper construction: 10 features, informative binary features
/// at indices 3 and 7 with jitter, class = 2*x3 + x7 (four classes), the
/// other eight columns uniform noise. Each (x3, x7) cell gets `per_cell` rows.
pub const PLANTED: [usize; 2] = [3, 7];

pub fn planted_dataset(rng: &mut ChaCha8Rng, per_cell: usize) -> Dataset {
    let mut rows = Vec::new();
    let mut classes = Vec::new();
    for a in 0..2 {
        for b in 0..2 {
            for _ in 0..per_cell {
                let mut row: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..1.0)).collect();
                row[PLANTED[0]] = a as f64 + rng.gen_range(-0.15..0.15);
                row[PLANTED[1]] = b as f64 + rng.gen_range(-0.15..0.15);
                rows.push(row);
                classes.push(2 * a + b);
            }
        }
    }
    dataset(rows, &classes)
}

/// Writes a CSV dataset with `n` rows and `d` features where features 0 and
/// 1 carry the binary class and the rest is noise.
pub fn write_csv_fixture(path: &Path, rng: &mut ChaCha8Rng, n: usize, d: usize) {
    let mut text = names(d).join(",");
    text.push_str(",class\n");
    for i in 0..n {
        let c = i % 2;
        let cells: Vec<String> = (0..d)
            .map(|j| {
                let v = if j < 2 {
                    c as f64 + rng.gen_range(-0.3..0.3)
                } else {
                    rng.gen_range(0.0..1.0)
                };
                format!("{v:.4}")
            })
            .collect();
        text.push_str(&cells.join(","));
        text.push_str(if c == 1 { ",pos\n" } else { ",neg\n" });
    }
    std::fs::write(path, text).unwrap();
}

/// Every univariate filter score; entropy scorers see 5-bin codes.
pub fn all_scores(ds: &Dataset) -> Vec<(&'static str, Vec<f64>)> {
    let coded = discretize_equal_width(ds, 5).unwrap();
    let k = 2.min(ds.n_samples() - 1);
    vec![
        ("info-gain", filter::info_gain(&coded).unwrap().scores),
        ("gain-ratio", filter::gain_ratio(&coded).unwrap().scores),
        ("su", filter::symmetrical_uncertainty(&coded).unwrap().scores),
        ("gini", filter::gini_index_score(&coded).unwrap().scores),
        ("fisher", filter::fisher_score(ds).unwrap().scores),
        ("variance", filter::term_variance(ds).unwrap().scores),
        ("relieff", filter::relief_f(ds, None, 2, 0).unwrap().scores.scores),
        ("laplacian", filter::laplacian_score(ds, k, 1.0).unwrap().scores.scores),
    ]
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

pub fn with_columns(ds: &Dataset, f: impl Fn(usize, f64) -> f64, extra_copy_of: Option<usize>) -> Dataset {
    let d = ds.n_features();
    let rows: Vec<Vec<f64>> = (0..ds.n_samples())
        .map(|i| {
            let mut r: Vec<f64> = (0..d).map(|j| f(j, ds.value(i, j))).collect();
            if let Some(src) = extra_copy_of {
                r.push(r[src]);
            }
            r
        })
        .collect();
    let width = rows[0].len();
    let labels = (0..ds.n_samples()).map(|i| ds.class_label(i).to_owned()).collect();
    Dataset::new(names(width), rows, labels, "t").unwrap()
}
