//! Acceptance run: one PASS/FAIL line per criterion. Built with
//! `harness = false`; exits nonzero when any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use featsel::classifiers::ClassifierSpec;
use featsel::cli::{build_experiment, KList, RunOptions};
use featsel::dataset::{discretize_equal_width, load_csv, Dataset};
use featsel::embedded::{l1_logistic_weights, tree_importance, RegularizedFitConfig};
use featsel::evaluation::run_experiment;
use featsel::filter::{
    fisher_score, gain_ratio, gini_index_score, info_gain, mrmr_select, relief_f, symmetrical_uncertainty,
    term_variance,
};
use featsel::stats::{
    chi_square_cdf, chi_square_critical_value, f_critical_value, friedman_test, reg_incomplete_beta,
    reg_incomplete_gamma_p, significance_entries, ResultMatrix, DEFAULT_ALPHAS,
};
use featsel::wrapper::{genetic_select, sequential_forward_select, SearchConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXACT_TOL: f64 = 1e-9;
const F_CRIT_6_24: [(f64, f64, f64); 3] = [(0.01, 3.667, 0.01), (0.05, 2.508, 0.005), (0.1, 2.04, 0.01)];
const CHI_CRIT_6: [(f64, f64); 3] = [(0.1, 10.645), (0.05, 12.592), (0.01, 16.812)];
const CHI_CRIT_TOL: f64 = 0.01;
const PUBLISHED_F: f64 = 3.359;
const ORACLE_DATASETS: u64 = 200;
const PROPERTY_TRIALS: u64 = 1_000;
const PROPERTY_TOL: f64 = 1e-6;
const WRAPPER_SEEDS: u64 = 20;
const RECOVERY_RATE: f64 = 0.95;
const RELIEFF_WEIGHT: f64 = 0.75;
const K_LIST: [usize; 4] = [5, 10, 15, 20];
const RUNS: usize = 2;

type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {{
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    }};
}

fn close(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol
}

fn matrix(values: Vec<Vec<f64>>, lower_is_better: bool) -> ResultMatrix {
    let k = values[0].len();
    let n = values.len();
    ResultMatrix::new(
        (1..=k).map(|j| format!("m{j}")).collect(),
        (1..=n).map(|i| format!("d{i}")).collect(),
        values,
        lower_is_better,
    )
    .unwrap()
}

fn criterion_1() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let values = (0..5).map(|_| (0..7).map(|_| rng.gen_range(0.5..1.0)).collect()).collect();
    let mut report = friedman_test(&matrix(values, false), &DEFAULT_ALPHAS).map_err(|e| e.to_string())?;
    ensure!((report.dof1, report.dof2) == (6, 24), "dof ({}, {})", report.dof1, report.dof2);

    report.iman_davenport_f = PUBLISHED_F;
    report.f_is_infinite = false;
    report.entries = significance_entries(PUBLISHED_F, 6, 24, &DEFAULT_ALPHAS).map_err(|e| e.to_string())?;
    let mut crits = Vec::new();
    for (alpha, want, tol) in F_CRIT_6_24 {
        let got = f_critical_value(6, 24, alpha).map_err(|e| e.to_string())?;
        ensure!(close(got, want, tol), "F*(6,24) at alpha={alpha}: {got} vs {want}");
        crits.push(format!("{got:.3}"));
    }
    let text = report.render();
    for (alpha, verdict) in [(0.01, "not significant"), (0.05, "significant"), (0.1, "significant")] {
        let line = text
            .lines()
            .find(|l| l.starts_with(&format!("alpha={alpha}:")))
            .ok_or(format!("no line for alpha={alpha}"))?;
        ensure!(line.ends_with(&format!("-> {verdict}")), "alpha={alpha}: {line}");
    }
    ensure!(text.contains("F (Iman-Davenport): 3.3590"), "statistic not rendered");
    Ok(format!("F*(6,24) = {} at alpha 0.01/0.05/0.10", crits.join("/")))
}

/// Exact Friedman statistics in integer arithmetic: ranks are doubled so
/// tied averages stay integral.
fn friedman_rational(values: &[Vec<i64>]) -> (f64, f64) {
    let n = values.len() as i128;
    let k = values[0].len() as i128;
    let mut doubled = vec![0i128; k as usize];
    for row in values {
        for (j, &v) in row.iter().enumerate() {
            let below = row.iter().filter(|&&w| w < v).count() as i128;
            let equal = row.iter().filter(|&&w| w == v).count() as i128;
            doubled[j] += 2 * below + equal + 1;
        }
    }
    let sum_sq: i128 = doubled.iter().map(|d| d * d).sum();
    let num = 3 * sum_sq - 3 * n * n * k * (k + 1) * (k + 1);
    let den = n * k * (k + 1);
    let chi = num as f64 / den as f64;
    let f = ((n - 1) * num) as f64 / (n * (k - 1) * den - num) as f64;
    (chi, f)
}

fn criterion_2() -> Check {
    let fixture = vec![vec![1, 2, 3], vec![1, 2, 3], vec![1, 2, 3], vec![2, 1, 3]];
    let (want_chi, want_f) = friedman_rational(&fixture);
    ensure!(want_chi == 6.5 && want_f == 13.0, "rational oracle gave {want_chi}, {want_f}");
    let floats = fixture.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
    let r = friedman_test(&matrix(floats, true), &DEFAULT_ALPHAS).map_err(|e| e.to_string())?;
    ensure!(close(r.chi_square, want_chi, EXACT_TOL), "chi-square {}", r.chi_square);
    ensure!(close(r.iman_davenport_f, want_f, EXACT_TOL), "F {}", r.iman_davenport_f);

    let flat = friedman_test(&matrix(vec![vec![0.7; 4]; 5], true), &DEFAULT_ALPHAS).map_err(|e| e.to_string())?;
    ensure!(flat.chi_square == 0.0, "all-equal chi-square {}", flat.chi_square);
    ensure!(flat.entries.iter().all(|e| !e.significant), "all-equal flagged significant");

    let separated = vec![vec![0.1, 0.9]; 5];
    let sep = friedman_test(&matrix(separated, true), &DEFAULT_ALPHAS).map_err(|e| e.to_string())?;
    ensure!(sep.f_is_infinite && sep.iman_davenport_f == f64::INFINITY, "F = {}", sep.iman_davenport_f);
    ensure!(sep.entries.iter().all(|e| e.significant), "infinite F not significant");
    ensure!(sep.render().contains("infinity"), "infinite F not rendered");
    Ok(format!("chi-square={} F={} (exact {want_chi}, {want_f})", r.chi_square, r.iman_davenport_f))
}

fn criterion_3() -> Check {
    let mut worst: f64 = 0.0;
    for i in 0..=100 {
        let x = i as f64 / 100.0;
        let checks = [
            (reg_incomplete_beta(1.0, 1.0, x), x),
            (reg_incomplete_beta(1.0, 2.0, x), 1.0 - (1.0 - x).powi(2)),
        ];
        for (got, want) in checks {
            let got = got.map_err(|e| e.to_string())?;
            ensure!(close(got, want, EXACT_TOL), "incomplete beta at x={x}: {got} vs {want}");
            worst = worst.max((got - want).abs());
        }
        let chi_x = 20.0 * x;
        let want = 1.0 - (-chi_x / 2.0).exp();
        for got in [chi_square_cdf(chi_x, 2.0), reg_incomplete_gamma_p(1.0, chi_x / 2.0)] {
            let got = got.map_err(|e| e.to_string())?;
            ensure!(close(got, want, EXACT_TOL), "chi-square(2) CDF at {chi_x}: {got} vs {want}");
            worst = worst.max((got - want).abs());
        }
    }
    let mut crits = Vec::new();
    for (alpha, want) in CHI_CRIT_6 {
        let got = chi_square_critical_value(6, alpha).map_err(|e| e.to_string())?;
        ensure!(close(got, want, CHI_CRIT_TOL), "chi2*(6) at alpha={alpha}: {got} vs {want}");
        crits.push(format!("{got:.3}"));
    }
    Ok(format!("max closed-form error {worst:.1e}; chi2*(6) = {}", crits.join("/")))
}

fn scorer_oracle_pass(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(4..=30);
    let d = rng.gen_range(1..=8);
    let classes = rng.gen_range(2..=3);
    let raw = common::random_continuous(&mut rng, n, d, classes);
    let coded = discretize_equal_width(&raw, rng.gen_range(2..=6)).map_err(|e| e.to_string())?;
    type Oracle = fn(&Dataset, usize) -> f64;
    let entropy: [(&str, Vec<f64>, Oracle); 4] = [
        ("info-gain", info_gain(&coded).unwrap().scores, common::info_gain),
        ("gain-ratio", gain_ratio(&coded).unwrap().scores, common::gain_ratio),
        ("su", symmetrical_uncertainty(&coded).unwrap().scores, common::symmetrical_uncertainty),
        ("gini", gini_index_score(&coded).unwrap().scores, common::gini_score),
    ];
    let continuous: [(&str, Vec<f64>, Oracle); 2] = [
        ("fisher", fisher_score(&raw).unwrap().scores, common::fisher),
        ("variance", term_variance(&raw).unwrap().scores, common::variance),
    ];
    for (ds, group) in [(&coded, &entropy[..]), (&raw, &continuous[..])] {
        for (name, got, oracle) in group {
            for (j, g) in got.iter().enumerate() {
                let w = oracle(ds, j);
                ensure!(
                    (g - w).abs() <= EXACT_TOL * w.abs().max(1.0),
                    "{name} dataset {seed} feature {j}: {g} vs {w}"
                );
            }
        }
    }
    Ok(String::new())
}

fn property_trial(trial: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(50_000 + trial);
    let n = rng.gen_range(4..=20);
    let d = rng.gen_range(1..=5);
    let classes = rng.gen_range(2..=3);
    let ds = common::random_continuous(&mut rng, n, d, classes);
    let base = common::all_scores(&ds);

    let src = rng.gen_range(0..d);
    let dup = common::all_scores(&common::with_columns(&ds, |_, v| v, Some(src)));
    for (name, s) in &dup {
        ensure!(common::close(s[src], s[d]), "trial {trial} {name}: duplicate {} vs {}", s[src], s[d]);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let permuted = common::all_scores(&ds.select_rows(&order));
    for ((name, a), (_, b)) in base.iter().zip(&permuted) {
        for (x, y) in a.iter().zip(b) {
            ensure!(common::close(*x, *y), "trial {trial} {name}: permuted {x} vs {y}");
        }
    }

    let a = rng.gen_range(0.1..10.0);
    let b = rng.gen_range(-50.0..50.0);
    let moved = common::all_scores(&common::with_columns(&ds, |_, v| a * v + b, None));
    for ((name, x), (_, y)) in base.iter().zip(&moved) {
        // Variance is the one scorer that is only scale-equivariant.
        let factor = if *name == "variance" { a * a } else { 1.0 };
        for (p, q) in x.iter().zip(y) {
            ensure!(
                (p * factor - q).abs() <= PROPERTY_TOL * q.abs().max(1.0),
                "trial {trial} {name}: affine {p} vs {q}"
            );
        }
    }

    let coded = discretize_equal_width(&ds, 5).unwrap();
    let hc = common::h_class(&coded);
    let counts = coded.class_counts();
    let gini_class = 1.0 - counts.iter().map(|&c| (c as f64 / n as f64).powi(2)).sum::<f64>();
    let score = |name: &str| &base.iter().find(|(m, _)| *m == name).unwrap().1;
    for j in 0..d {
        let hx = common::h_feature(&coded, j);
        let ig = score("info-gain")[j];
        let su = score("su")[j];
        let gr = score("gain-ratio")[j];
        let gini = score("gini")[j];
        let fisher = score("fisher")[j];
        let var = score("variance")[j];
        ensure!(ig >= -1e-12 && ig <= hc.min(hx) + 1e-12, "trial {trial} info-gain {ig}");
        ensure!((-1e-12..=1.0 + 1e-12).contains(&su), "trial {trial} su {su}");
        ensure!((-1e-12..=1.0 + 1e-12).contains(&gr), "trial {trial} gain-ratio {gr}");
        ensure!(gini >= -1e-12 && gini <= gini_class + 1e-12, "trial {trial} gini {gini}");
        ensure!(fisher >= 0.0 && fisher.is_finite(), "trial {trial} fisher {fisher}");
        ensure!(var >= 0.0, "trial {trial} variance {var}");
    }
    Ok(String::new())
}

fn criterion_4() -> Check {
    for seed in 0..ORACLE_DATASETS {
        scorer_oracle_pass(seed)?;
    }
    for trial in 0..PROPERTY_TRIALS {
        property_trial(trial)?;
    }
    Ok(format!("{ORACLE_DATASETS} oracle datasets, {PROPERTY_TRIALS} property trials"))
}

fn criterion_5() -> Check {
    let relief = common::dataset(vec![vec![0.0], vec![0.1], vec![0.9], vec![1.0]], &[0, 0, 1, 1]);
    let w = relief_f(&relief, None, 1, 0).map_err(|e| e.to_string())?.scores.scores[0];
    ensure!(close(w, RELIEFF_WEIGHT, EXACT_TOL), "ReliefF weight {w}");

    let class = [0usize, 0, 0, 0, 1, 1, 1, 1];
    let f3 = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0];
    let rows = (0..8).map(|i| vec![class[i] as f64, class[i] as f64, f3[i]]).collect();
    let picked = mrmr_select(&common::dataset(rows, &class), 2).map_err(|e| e.to_string())?.selected;
    ensure!(picked == vec![0, 1], "mRMR picked {picked:?}");
    Ok(format!("ReliefF weight {w}; mRMR picked [f1, f2]"))
}

fn planted_pair(selected: &[usize]) -> bool {
    let mut s = selected.to_vec();
    s.sort_unstable();
    s == common::PLANTED
}

fn criterion_6() -> Check {
    let mut sfs_hits = 0;
    let mut ga_hits = 0;
    for seed in 0..WRAPPER_SEEDS {
        let ds = common::planted_dataset(&mut ChaCha8Rng::seed_from_u64(seed), 10);
        let cfg = SearchConfig::new(ClassifierSpec::knn(), seed);
        let sfs2 = sequential_forward_select(&ds, &cfg, 2).map_err(|e| e.to_string())?;
        let sfs4 = sequential_forward_select(&ds, &cfg, 4).map_err(|e| e.to_string())?;
        ensure!(
            sfs4.outcome.selected[..2] == sfs2.outcome.selected[..],
            "seed {seed}: SFS k=4 {:?} does not extend k=2 {:?}",
            sfs4.outcome.selected,
            sfs2.outcome.selected
        );
        let ga = genetic_select(&ds, &cfg, Some(2)).map_err(|e| e.to_string())?;
        sfs_hits += planted_pair(&sfs2.outcome.selected) as u64;
        ga_hits += planted_pair(&ga.outcome.selected) as u64;
        if seed < 3 {
            let again_sfs = sequential_forward_select(&ds, &cfg, 2).map_err(|e| e.to_string())?;
            let again_ga = genetic_select(&ds, &cfg, Some(2)).map_err(|e| e.to_string())?;
            ensure!(again_sfs.outcome.selected == sfs2.outcome.selected, "seed {seed}: SFS not reproducible");
            ensure!(again_ga.outcome.selected == ga.outcome.selected, "seed {seed}: GA not reproducible");
        }
    }
    let need = (RECOVERY_RATE * WRAPPER_SEEDS as f64).ceil() as u64;
    let summary = format!("SFS {sfs_hits}/{WRAPPER_SEEDS}, GA {ga_hits}/{WRAPPER_SEEDS}");
    ensure!(sfs_hits >= need && ga_hits >= need, "{summary}, need {need}");
    Ok(summary)
}

/// Largest |gradient| of the mean logistic loss at w = 0 with the intercept
/// at its optimum, on population-standardized columns.
fn l1_gradient_bound(ds: &Dataset, positive: usize) -> f64 {
    let n = ds.n_samples() as f64;
    let y: Vec<f64> = ds.labels().iter().map(|&l| (l == positive) as u8 as f64).collect();
    let y_mean = y.iter().sum::<f64>() / n;
    (0..ds.n_features())
        .map(|j| {
            let col = ds.column(j);
            let mean = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            if sd == 0.0 {
                return 0.0;
            }
            let g: f64 = col.iter().zip(&y).map(|(v, t)| (v - mean) / sd * (y_mean - t)).sum();
            (g / n).abs()
        })
        .fold(0.0, f64::max)
}

fn criterion_7() -> Check {
    let pm = common::dataset(
        vec![vec![-1.0, 3.0], vec![-1.0, 3.0], vec![1.0, 3.0], vec![1.0, 3.0]],
        &[0, 0, 1, 1],
    );
    let fit = l1_logistic_weights(&pm, &RegularizedFitConfig::default()).map_err(|e| e.to_string())?;
    ensure!(fit.scores.scores[1] == 0.0, "constant feature weight {}", fit.scores.scores[1]);
    ensure!(fit.fits[0].weights[1] == 0.0, "constant feature raw weight {}", fit.fits[0].weights[1]);
    ensure!(fit.fits[0].weights[0] > 0.0, "±1 feature weight {}", fit.fits[0].weights[0]);

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let noisy = common::random_continuous(&mut rng, 30, 6, 2);
    let bound = l1_gradient_bound(&noisy, 1);
    let above = RegularizedFitConfig { lambda: bound * 1.01, ..Default::default() };
    let zeroed = l1_logistic_weights(&noisy, &above).map_err(|e| e.to_string())?;
    ensure!(zeroed.scores.scores.iter().all(|&s| s == 0.0), "lambda above bound: {:?}", zeroed.scores.scores);
    let below = RegularizedFitConfig { lambda: bound * 0.9, ..Default::default() };
    let active = l1_logistic_weights(&noisy, &below).map_err(|e| e.to_string())?;
    ensure!(active.scores.scores.iter().any(|&s| s > 0.0), "lambda below bound left all weights at 0");

    let tree = ClassifierSpec::decision_tree();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let planted = rng.gen_range(0..6);
        let mut classes = Vec::new();
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let c = i % 2;
                classes.push(c);
                let mut r: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
                r[planted] = c as f64 + rng.gen_range(-0.2..0.2);
                r
            })
            .collect();
        let imp = tree_importance(&common::dataset(rows, &classes), &tree).map_err(|e| e.to_string())?.scores;
        let top = (0..6).fold(0, |best, j| if imp[j] > imp[best] { j } else { best });
        ensure!(top == planted, "seed {seed}: top feature {top}, planted {planted} ({imp:?})");
        let total: f64 = imp.iter().sum();
        ensure!(close(total, 1.0, 1e-12), "seed {seed}: importances sum to {total}");
    }
    Ok(format!("gradient bound {bound:.4}; tree importance recovered 20/20"))
}

fn write_split_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let train = dir.join("demo_train.csv");
    let test = dir.join("demo_test.csv");
    common::write_csv_fixture(&train, &mut rng, 70, 20);
    common::write_csv_fixture(&test, &mut rng, 30, 20);
    (train, test)
}

fn run_cli(train: &Path, test: &Path, out: &Path) -> Check {
    let list = K_LIST.map(|k| k.to_string()).join(",");
    let output = Command::new(env!("CARGO_BIN_EXE_featsel"))
        .args(["run", "--train"])
        .arg(train)
        .arg("--test")
        .arg(test)
        .args(["--method", "sfs", "--num-features", &list, "--runs", &RUNS.to_string(), "--seed", "3"])
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        output.status.success(),
        "exit {:?}: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
    Ok(String::new())
}

fn section_lines<'a>(report: &'a str, header: &str) -> Vec<&'a str> {
    report
        .split(&format!("\n{header}\n"))
        .skip(1)
        .flat_map(|rest| rest.lines().take(K_LIST.len()))
        .collect()
}

fn criterion_8(work: &Path) -> Check {
    let (train, test) = write_split_fixture(work);
    let out = work.join("out1");
    run_cli(&train, &test, &out)?;

    let report = std::fs::read_to_string(out.join("report.txt")).map_err(|e| e.to_string())?;
    let mut headers = vec![
        "FEATURE SELECTION REPORT".to_owned(),
        "DATASET INFO".to_owned(),
        "AVERAGES".to_owned(),
    ];
    for r in 0..RUNS {
        headers.push(format!("RUN {r} (seed {})", 3 + r));
    }
    for h in &headers {
        ensure!(report.lines().any(|l| l == h), "report lacks {h}");
    }
    for h in ["FEATURE WEIGHTS", "SELECTED SUBSET", "ACCURACY/ERROR/TIME"] {
        let count = report.lines().filter(|l| l.starts_with(h)).count();
        ensure!(count >= RUNS, "report has {count} {h} sections");
    }

    for metric in ["accuracy", "error", "time"] {
        let svg = std::fs::read_to_string(out.join("charts").join(format!("{metric}.svg")))
            .map_err(|e| format!("{metric}.svg: {e}"))?;
        let runs = svg.matches("<polyline class=\"run\"").count();
        let average = svg.matches("<polyline class=\"average\"").count();
        ensure!(
            runs == RUNS && average == 1 && svg.matches("<polyline").count() == RUNS + 1,
            "{metric}.svg has {runs} run and {average} average polylines"
        );
    }

    let mut expected = BTreeSet::new();
    for r in 0..RUNS {
        for k in K_LIST {
            for part in ["train", "test"] {
                for ext in ["csv", "arff"] {
                    expected.insert(format!("demo_sfs_k{k}_run{r}_{part}.{ext}"));
                }
            }
        }
    }
    let reduced = out.join("reduced");
    let found: BTreeSet<String> = std::fs::read_dir(&reduced)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    ensure!(found == expected, "reduced files differ: {:?}", found.symmetric_difference(&expected).collect::<Vec<_>>());

    let subsets = section_lines(&report, "SELECTED SUBSET");
    ensure!(subsets.len() == RUNS * K_LIST.len(), "{} subset lines", subsets.len());
    for (i, line) in subsets.iter().enumerate() {
        let (r, k) = (i / K_LIST.len(), K_LIST[i % K_LIST.len()]);
        let names: Vec<&str> = line
            .strip_prefix(&format!("k={k}: "))
            .ok_or(format!("subset line {line}"))?
            .split(", ")
            .collect();
        for (part, rows) in [("train", 70), ("test", 30)] {
            let ds = load_csv(reduced.join(format!("demo_sfs_k{k}_run{r}_{part}.csv"))).map_err(|e| e.to_string())?;
            ensure!(ds.n_samples() == rows && ds.n_features() == k, "run {r} k={k} {part} shape");
            ensure!(ds.feature_names() == names.as_slice(), "run {r} k={k} {part} columns {:?}", ds.feature_names());
        }
    }

    let options = RunOptions {
        train: Some(train),
        test: Some(test),
        method: Some("sfs".into()),
        num_features: Some(KList(K_LIST.to_vec())),
        runs: Some(RUNS),
        seed: Some(3),
        out: Some(work.join("unused")),
        ..Default::default()
    };
    let (cfg, _, _) = build_experiment(&options).map_err(|e| e.to_string())?;
    let lib = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let averages = section_lines(&report, "AVERAGES");
    for (pos, avg) in lib.averages.iter().enumerate() {
        let runs: Vec<_> = (0..RUNS).map(|r| &lib.records_for_run(r)[pos]).collect();
        let mean = |f: fn(&featsel::evaluation::RunRecord) -> f64| runs.iter().map(|r| f(r)).sum::<f64>() / RUNS as f64;
        ensure!(avg.accuracy == mean(|r| r.test_accuracy), "k={} mean accuracy", avg.k);
        ensure!(avg.error_rate == mean(|r| r.error_rate), "k={} mean error", avg.k);
        ensure!(avg.train_accuracy == mean(|r| r.train_accuracy), "k={} mean train accuracy", avg.k);
        let want = format!(
            "k={}: accuracy={:.4} error={:.4} train_accuracy={:.4} time=",
            avg.k, avg.accuracy, avg.error_rate, avg.train_accuracy
        );
        ensure!(averages.get(pos).is_some_and(|l| l.starts_with(&want)), "report average line for k={}", avg.k);
    }
    Ok(format!("report, 3 charts, {} reduced files", found.len()))
}

fn mask_times(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("time=") {
        out.push_str(&rest[..start + 5]);
        let after = &rest[start + 5..];
        let end = after.find('s').unwrap_or(after.len());
        out.push('#');
        rest = &after[end..];
    }
    out.push_str(rest);
    out
}

/// Collapses every run of digits, dots and minus signs to one `#`.
fn mask_numbers(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_number = false;
    for c in text.chars() {
        let numeric = c.is_ascii_digit() || c == '.' || c == '-';
        if !numeric {
            out.push(c);
        } else if !in_number {
            out.push('#');
        }
        in_number = numeric;
    }
    out
}

fn timing_values(report: &str) -> Vec<f64> {
    report
        .split("time=")
        .skip(1)
        .map(|s| s[..s.find('s').unwrap()].parse::<f64>().unwrap())
        .collect()
}

fn criterion_9(work: &Path) -> Check {
    let first = work.join("out1");
    ensure!(first.join("report.txt").exists(), "criterion 8 output missing");
    let second = work.join("out2");
    run_cli(&work.join("demo_train.csv"), &work.join("demo_test.csv"), &second)?;
    let read = |p: PathBuf| std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()));

    let a = read(first.join("report.txt"))?;
    let b = read(second.join("report.txt"))?;
    ensure!(mask_times(&a) == mask_times(&b), "reports differ outside timing fields");
    for metric in ["accuracy", "error"] {
        let file = format!("charts/{metric}.svg");
        ensure!(read(first.join(&file))? == read(second.join(&file))?, "{metric}.svg differs");
    }
    let time_a = read(first.join("charts/time.svg"))?;
    let time_b = read(second.join("charts/time.svg"))?;
    ensure!(mask_numbers(&time_a) == mask_numbers(&time_b), "time.svg differs beyond timing values");
    for entry in std::fs::read_dir(first.join("reduced")).map_err(|e| e.to_string())? {
        let name = entry.unwrap().file_name();
        let x = std::fs::read(first.join("reduced").join(&name)).unwrap();
        let y = std::fs::read(second.join("reduced").join(&name)).map_err(|e| e.to_string())?;
        ensure!(x == y, "{} differs", name.to_string_lossy());
    }

    let times: Vec<f64> = timing_values(&a).into_iter().chain(timing_values(&b)).collect();
    ensure!(times.len() == 2 * (RUNS + 1) * K_LIST.len(), "{} timing fields", times.len());
    ensure!(times.iter().all(|t| t.is_finite() && *t >= 0.0), "negative timing in {times:?}");
    Ok(format!("byte-identical modulo {} timing fields", times.len()))
}

struct Criterion {
    id: u32,
    limit: Option<Duration>,
    check: Box<dyn Fn() -> Check>,
}

fn main() {
    let work = tempfile::tempdir().expect("temp dir");
    let w1 = work.path().to_path_buf();
    let w2 = w1.clone();
    let criteria = vec![
        Criterion { id: 1, limit: Some(Duration::from_secs(1)), check: Box::new(criterion_1) },
        Criterion { id: 2, limit: None, check: Box::new(criterion_2) },
        Criterion { id: 3, limit: None, check: Box::new(criterion_3) },
        Criterion { id: 4, limit: Some(Duration::from_secs(30)), check: Box::new(criterion_4) },
        Criterion { id: 5, limit: None, check: Box::new(criterion_5) },
        Criterion { id: 6, limit: Some(Duration::from_secs(60)), check: Box::new(criterion_6) },
        Criterion { id: 7, limit: None, check: Box::new(criterion_7) },
        Criterion { id: 8, limit: Some(Duration::from_secs(60)), check: Box::new(move || criterion_8(&w1)) },
        Criterion { id: 9, limit: None, check: Box::new(move || criterion_9(&w2)) },
    ];

    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| (c.check)()))
            .unwrap_or_else(|p| Err(format!("panic: {}", panic_text(&p))));
        let elapsed = start.elapsed();
        let result = match (result, c.limit) {
            (Ok(_), Some(limit)) if elapsed > limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("criterion {}: PASS ({detail}; {:.3}s)", c.id, elapsed.as_secs_f64()),
            Err(reason) => {
                failed += 1;
                println!("criterion {}: FAIL ({reason}; {:.3}s)", c.id, elapsed.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn panic_text(payload: &Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<String>()
        .cloned()
        .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown".into())
}
