//! Friedman test with the Iman-Davenport correction.
//!
//! Critical values are computed by inverting the F and chi-square CDFs,
//! which are expressed through the regularized incomplete beta and gamma
//! functions implemented here.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::error::{ensure_arg, Error, Result};

pub const DEFAULT_ALPHAS: [f64; 3] = [0.01, 0.05, 0.1];

/// Results of `k` methods (columns) over `N` datasets (rows).
#[derive(Debug, Clone, PartialEq)]
pub struct ResultMatrix {
    pub method_names: Vec<String>,
    pub dataset_names: Vec<String>,
    /// Row-major, one row per dataset.
    pub values: Vec<Vec<f64>>,
    pub lower_is_better: bool,
}

impl ResultMatrix {
    pub fn new(
        method_names: Vec<String>,
        dataset_names: Vec<String>,
        values: Vec<Vec<f64>>,
        lower_is_better: bool,
    ) -> Result<Self> {
        let m = ResultMatrix {
            method_names,
            dataset_names,
            values,
            lower_is_better,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn n_methods(&self) -> usize {
        self.method_names.len()
    }

    pub fn n_datasets(&self) -> usize {
        self.dataset_names.len()
    }

    fn validate(&self) -> Result<()> {
        let k = self.n_methods();
        let n = self.n_datasets();
        ensure_arg!(k >= 2, "Friedman test needs at least 2 methods, got {k}");
        ensure_arg!(n >= 2, "Friedman test needs at least 2 datasets, got {n}");
        ensure_arg!(
            self.values.len() == n,
            "{} value rows for {n} datasets",
            self.values.len()
        );
        for (i, row) in self.values.iter().enumerate() {
            ensure_arg!(
                row.len() == k,
                "row `{}` has {} values, expected {k}",
                self.dataset_names[i],
                row.len()
            );
            ensure_arg!(
                row.iter().all(|v| v.is_finite()),
                "row `{}` contains non-finite values",
                self.dataset_names[i]
            );
        }
        Ok(())
    }

    /// Reads `dataset,<method1>,...,<methodK>` CSV, one row per dataset.
    pub fn from_csv<R: Read>(reader: R, lower_is_better: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::Structure(format!("unreadable matrix header: {e}")))?
            .clone();
        if header.len() < 3 {
            return Err(Error::Structure(format!(
                "matrix header needs `dataset` plus at least 2 methods, found {} columns",
                header.len()
            )));
        }
        let method_names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let mut dataset_names = Vec::new();
        let mut values = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Structure(format!("matrix row {}: {e}", r + 1)))?;
            dataset_names.push(record.get(0).unwrap_or("").to_owned());
            let mut row = Vec::with_capacity(method_names.len());
            for (j, cell) in record.iter().skip(1).enumerate() {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row: r + 1,
                    column: method_names[j].clone(),
                    message: format!("`{cell}` is not a number"),
                })?;
                row.push(v);
            }
            values.push(row);
        }
        ResultMatrix::new(method_names, dataset_names, values, lower_is_better)
    }

    pub fn load(path: impl AsRef<Path>, lower_is_better: bool) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(file, lower_is_better)
    }
}

/// Ranks within one row: the best value gets rank 1 and tied values share
/// the mean of the ranks they span.
pub fn rank_row(values: &[f64], lower_is_better: bool) -> Result<Vec<f64>> {
    ensure_arg!(
        values.iter().all(|v| v.is_finite()),
        "cannot rank non-finite values"
    );
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let c = values[a].total_cmp(&values[b]);
        if lower_is_better {
            c
        } else {
            c.reverse()
        }
    });
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let shared = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = shared;
        }
        start = end;
    }
    Ok(ranks)
}

/// Friedman chi-square and the per-method average ranks.
pub fn friedman_chi_square(m: &ResultMatrix) -> Result<(f64, Vec<f64>)> {
    m.validate()?;
    let k = m.n_methods();
    let n = m.n_datasets();
    let mut sums = vec![0.0; k];
    for row in &m.values {
        for (s, r) in sums.iter_mut().zip(rank_row(row, m.lower_is_better)?) {
            *s += r;
        }
    }
    let average: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    let (kf, nf) = (k as f64, n as f64);
    let sum_sq: f64 = average.iter().map(|r| r * r).sum();
    let chi = 12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0);
    Ok((chi.max(0.0), average))
}

/// Iman-Davenport statistic `(N-1) chi2 / (N(k-1) - chi2)`. Returns
/// `f64::INFINITY` when the denominator vanishes (perfect separation).
pub fn iman_davenport_f(chi_square: f64, n: usize, k: usize) -> Result<f64> {
    ensure_arg!(n >= 2 && k >= 2, "need N >= 2 and k >= 2");
    let bound = n as f64 * (k as f64 - 1.0);
    let slack = 1e-9 * bound;
    if chi_square.is_nan() || chi_square < 0.0 || chi_square > bound + slack {
        return Err(Error::Domain(format!(
            "chi-square {chi_square} outside [0, {bound}]"
        )));
    }
    let denom = bound - chi_square;
    if denom <= slack {
        return Ok(f64::INFINITY);
    }
    Ok((n as f64 - 1.0) * chi_square / denom)
}

/// Natural log of the gamma function (Lanczos, g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    #[allow(clippy::excessive_precision)]
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 10_000;

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn reg_incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    ensure_arg!(a > 0.0 && a.is_finite(), "incomplete beta needs a > 0, got {a}");
    ensure_arg!(b > 0.0 && b.is_finite(), "incomplete beta needs b > 0, got {b}");
    ensure_arg!((0.0..=1.0).contains(&x), "incomplete beta needs x in [0, 1], got {x}");
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    let value = if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Regularized lower incomplete gamma `P(s, x)`.
pub fn reg_incomplete_gamma_p(s: f64, x: f64) -> Result<f64> {
    ensure_arg!(s > 0.0 && s.is_finite(), "incomplete gamma needs s > 0, got {s}");
    ensure_arg!(x >= 0.0 && !x.is_nan(), "incomplete gamma needs x >= 0, got {x}");
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let ln_front = -x + s * x.ln() - ln_gamma(s);
    let value = if x < s + 1.0 {
        // Series: P = e^-x x^s / Gamma(s+1) * sum x^n / ((s+1)...(s+n)).
        let mut term = 1.0 / s;
        let mut sum = term;
        let mut ap = s;
        for _ in 0..CF_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * CF_EPS {
                break;
            }
        }
        sum * ln_front.exp()
    } else {
        // Continued fraction for Q, modified Lentz.
        let mut b = x + 1.0 - s;
        let mut c = 1.0 / CF_TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=CF_MAX_ITER {
            let an = -(i as f64) * (i as f64 - s);
            b += 2.0;
            d = an * d + b;
            if d.abs() < CF_TINY {
                d = CF_TINY;
            }
            c = b + an / c;
            if c.abs() < CF_TINY {
                c = CF_TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < CF_EPS {
                break;
            }
        }
        1.0 - ln_front.exp() * h
    };
    Ok(value.clamp(0.0, 1.0))
}

/// CDF of the F(d1, d2) distribution.
pub fn f_cdf(x: f64, d1: f64, d2: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    reg_incomplete_beta(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2))
}

/// CDF of the chi-square distribution with `df` degrees of freedom.
pub fn chi_square_cdf(x: f64, df: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    reg_incomplete_gamma_p(df / 2.0, x / 2.0)
}

const CRITICAL_TOLERANCE: f64 = 1e-8;

/// Smallest x (to within the tolerance) whose upper tail is at most alpha.
fn upper_critical(alpha: f64, cdf: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    ensure_arg!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1), got {alpha}");
    let target = 1.0 - alpha;
    let mut lo = 0.0;
    let mut hi = 1.0;
    while cdf(hi)? < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Domain(format!(
                "critical value for alpha={alpha} beyond search range"
            )));
        }
    }
    while hi - lo > CRITICAL_TOLERANCE {
        let mid = lo + (hi - lo) / 2.0;
        if cdf(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + (hi - lo) / 2.0)
}

/// Upper-tail critical value of F(d1, d2) at level alpha.
pub fn f_critical_value(d1: usize, d2: usize, alpha: f64) -> Result<f64> {
    ensure_arg!(d1 >= 1 && d2 >= 1, "F degrees of freedom must be at least 1");
    upper_critical(alpha, |x| f_cdf(x, d1 as f64, d2 as f64))
}

/// Upper-tail critical value of chi-square(df) at level alpha.
pub fn chi_square_critical_value(df: usize, alpha: f64) -> Result<f64> {
    ensure_arg!(df >= 1, "chi-square degrees of freedom must be at least 1");
    upper_critical(alpha, |x| chi_square_cdf(x, df as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceEntry {
    pub alpha: f64,
    pub f_critical: f64,
    pub chi_critical: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FriedmanReport {
    pub method_names: Vec<String>,
    pub n_datasets: usize,
    pub average_ranks: Vec<f64>,
    pub chi_square: f64,
    /// `f64::INFINITY` under perfect separation; see `f_is_infinite`.
    pub iman_davenport_f: f64,
    pub f_is_infinite: bool,
    pub dof1: usize,
    pub dof2: usize,
    pub entries: Vec<SignificanceEntry>,
    pub best_method: usize,
}

/// Critical values and verdicts for an Iman-Davenport statistic. An
/// infinite statistic is significant at every level.
pub fn significance_entries(
    f_statistic: f64,
    dof1: usize,
    dof2: usize,
    alphas: &[f64],
) -> Result<Vec<SignificanceEntry>> {
    alphas
        .iter()
        .map(|&alpha| {
            let f_critical = f_critical_value(dof1, dof2, alpha)?;
            Ok(SignificanceEntry {
                alpha,
                f_critical,
                chi_critical: chi_square_critical_value(dof1, alpha)?,
                significant: f_statistic > f_critical,
            })
        })
        .collect()
}

/// Full Friedman analysis of a result matrix.
pub fn friedman_test(m: &ResultMatrix, alphas: &[f64]) -> Result<FriedmanReport> {
    ensure_arg!(!alphas.is_empty(), "at least one significance level is required");
    let (chi_square, average_ranks) = friedman_chi_square(m)?;
    let k = m.n_methods();
    let n = m.n_datasets();
    let f = iman_davenport_f(chi_square, n, k)?;
    let dof1 = k - 1;
    let dof2 = (k - 1) * (n - 1);
    let mut best_method = 0;
    for (j, &r) in average_ranks.iter().enumerate() {
        if r < average_ranks[best_method] {
            best_method = j;
        }
    }
    Ok(FriedmanReport {
        method_names: m.method_names.clone(),
        n_datasets: n,
        entries: significance_entries(f, dof1, dof2, alphas)?,
        average_ranks,
        chi_square,
        iman_davenport_f: f,
        f_is_infinite: f.is_infinite(),
        dof1,
        dof2,
        best_method,
    })
}

impl FriedmanReport {
    /// Plain-text rendering used by the CLI.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("FRIEDMAN TEST\n");
        out.push_str(&format!(
            "methods: {}, datasets: {}\n",
            self.method_names.len(),
            self.n_datasets
        ));
        out.push_str("AVERAGE RANKS\n");
        for (name, r) in self.method_names.iter().zip(&self.average_ranks) {
            out.push_str(&format!("{name}: {r:.4}\n"));
        }
        out.push_str(&format!("chi-square: {:.4}\n", self.chi_square));
        if self.f_is_infinite {
            out.push_str("F (Iman-Davenport): infinity (perfect separation)\n");
        } else {
            out.push_str(&format!("F (Iman-Davenport): {:.4}\n", self.iman_davenport_f));
        }
        out.push_str(&format!("degrees of freedom: ({}, {})\n", self.dof1, self.dof2));
        out.push_str("CRITICAL VALUES\n");
        for e in &self.entries {
            out.push_str(&format!(
                "alpha={}: F critical={:.4} chi-square critical={:.4} -> {}\n",
                e.alpha,
                e.f_critical,
                e.chi_critical,
                if e.significant {
                    "significant"
                } else {
                    "not significant"
                }
            ));
        }
        out.push_str(&format!(
            "best method: {} (average rank {:.4})\n",
            self.method_names[self.best_method], self.average_ranks[self.best_method]
        ));
        out
    }
}
