//! Wrapper subset search driven by cross-validated classifier accuracy.
//!
//! Candidate evaluations inside one search step run in parallel; the step
//! winner is chosen afterwards by a sequential scan so the outcome matches a
//! sequential run exactly. The GA's random numbers are drawn only on the
//! calling thread.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classifiers::{cross_val_accuracy, ClassifierSpec};
use crate::dataset::{reduce_to_features, Dataset};
use crate::error::{ensure_arg, Result};
use crate::evaluation::{time_section, SelectionOutcome};
use crate::filter::FeatureScores;

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-bit flip probability; `None` means `1 / d`.
    pub mutation_rate: Option<f64>,
    pub tournament_size: usize,
    pub elitism: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 30,
            generations: 50,
            crossover_rate: 0.9,
            mutation_rate: None,
            tournament_size: 2,
            elitism: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub classifier: ClassifierSpec,
    pub folds: usize,
    pub seed: u64,
    pub ga: GaConfig,
}

impl SearchConfig {
    pub const DEFAULT_FOLDS: usize = 5;

    pub fn new(classifier: ClassifierSpec, seed: u64) -> Self {
        SearchConfig {
            classifier,
            folds: Self::DEFAULT_FOLDS,
            seed,
            ga: GaConfig::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        self.classifier.validate()?;
        ensure_arg!(self.folds >= 2, "wrapper folds must be at least 2");
        let ga = &self.ga;
        ensure_arg!(ga.population >= 2, "GA population must be at least 2");
        ensure_arg!(ga.generations >= 1, "GA generations must be at least 1");
        ensure_arg!(ga.tournament_size >= 1, "GA tournament size must be at least 1");
        ensure_arg!(
            ga.elitism <= ga.population,
            "GA elitism {} exceeds population {}",
            ga.elitism,
            ga.population
        );
        ensure_arg!(
            (0.0..=1.0).contains(&ga.crossover_rate),
            "GA crossover rate must lie in [0, 1]"
        );
        if let Some(m) = ga.mutation_rate {
            ensure_arg!((0.0..=1.0).contains(&m), "GA mutation rate must lie in [0, 1]");
        }
        Ok(())
    }
}

/// A finished search: the outcome plus the fitness of the returned subset
/// and the best fitness after each step (SFS/SBS) or generation (GA).
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub outcome: SelectionOutcome,
    pub fitness: f64,
    pub trace: Vec<f64>,
}

/// Cross-validated accuracy of the classifier on the listed features.
pub fn subset_fitness(ds: &Dataset, cfg: &SearchConfig, subset: &[usize]) -> Result<f64> {
    let reduced = reduce_to_features(ds, subset)?;
    cross_val_accuracy(&cfg.classifier, &reduced, cfg.folds, cfg.seed)
}

fn check_k(ds: &Dataset, k: usize) -> Result<()> {
    let d = ds.n_features();
    ensure_arg!(k >= 1 && k <= d, "k={k} outside [1, {d}]");
    Ok(())
}

fn finish(
    method: &str,
    ds: &Dataset,
    selected: Vec<usize>,
    seconds: f64,
    fitness: f64,
    trace: Vec<f64>,
) -> SearchResult {
    let k = selected.len();
    SearchResult {
        outcome: SelectionOutcome {
            method: method.to_owned(),
            k,
            run_index: 0,
            feature_weights: FeatureScores::from_selection_order(method, ds.n_features(), &selected),
            selected,
            selection_seconds: seconds,
        },
        fitness,
        trace,
    }
}

/// Sequential forward selection. Fitness ties go to the smaller index.
pub fn sequential_forward_select(
    ds: &Dataset,
    cfg: &SearchConfig,
    k: usize,
) -> Result<SearchResult> {
    check_k(ds, k)?;
    cfg.validate()?;
    let (result, timing) = time_section("sfs", || -> Result<_> {
        let d = ds.n_features();
        let mut selected: Vec<usize> = Vec::with_capacity(k);
        let mut trace = Vec::with_capacity(k);
        let mut fitness = 0.0;
        while selected.len() < k {
            let candidates: Vec<usize> = (0..d).filter(|j| !selected.contains(j)).collect();
            let scores: Vec<f64> = candidates
                .par_iter()
                .map(|&j| {
                    let mut subset = selected.clone();
                    subset.push(j);
                    subset_fitness(ds, cfg, &subset)
                })
                .collect::<Result<_>>()?;
            let mut best = 0;
            for (i, &s) in scores.iter().enumerate() {
                if s > scores[best] {
                    best = i;
                }
            }
            selected.push(candidates[best]);
            fitness = scores[best];
            trace.push(fitness);
        }
        Ok((selected, fitness, trace))
    });
    let (selected, fitness, trace) = result?;
    Ok(finish("sfs", ds, selected, timing.seconds, fitness, trace))
}

/// Sequential backward selection. Removal ties remove the highest index;
/// the survivors are returned in ascending order.
pub fn sequential_backward_select(
    ds: &Dataset,
    cfg: &SearchConfig,
    k: usize,
) -> Result<SearchResult> {
    check_k(ds, k)?;
    cfg.validate()?;
    let (result, timing) = time_section("sbs", || -> Result<_> {
        let mut current: Vec<usize> = (0..ds.n_features()).collect();
        let mut trace = Vec::new();
        let mut fitness = f64::NAN;
        while current.len() > k {
            let scores: Vec<f64> = (0..current.len())
                .into_par_iter()
                .map(|pos| {
                    let mut subset = current.clone();
                    subset.remove(pos);
                    subset_fitness(ds, cfg, &subset)
                })
                .collect::<Result<_>>()?;
            let mut best = 0;
            for (pos, &s) in scores.iter().enumerate() {
                if s >= scores[best] {
                    best = pos;
                }
            }
            current.remove(best);
            fitness = scores[best];
            trace.push(fitness);
        }
        if fitness.is_nan() {
            fitness = subset_fitness(ds, cfg, &current)?;
        }
        Ok((current, fitness, trace))
    });
    let (selected, fitness, trace) = result?;
    Ok(finish("sbs", ds, selected, timing.seconds, fitness, trace))
}

#[derive(Debug, Clone)]
struct Scored {
    mask: Vec<bool>,
    fitness: f64,
}

impl Scored {
    fn size(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Higher fitness, then fewer features, then the lexicographically
    /// smaller mask.
    fn beats(&self, other: &Scored) -> bool {
        match self.fitness.total_cmp(&other.fitness) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => match self.size().cmp(&other.size()) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Greater => false,
                std::cmp::Ordering::Equal => self.mask < other.mask,
            },
        }
    }
}

fn mask_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(j, &b)| b.then_some(j))
        .collect()
}

/// Forces a mask to exactly `k` bits (or at least one bit when `k` is free)
/// by switching randomly chosen bits.
fn repair(mask: &mut [bool], k: Option<usize>, rng: &mut ChaCha8Rng) {
    let target_min = k.unwrap_or(1);
    let target_max = k.unwrap_or(mask.len());
    loop {
        let on: Vec<usize> = mask_indices(mask);
        if on.len() > target_max {
            let j = on[rng.gen_range(0..on.len())];
            mask[j] = false;
        } else if on.len() < target_min {
            let off: Vec<usize> = (0..mask.len()).filter(|&j| !mask[j]).collect();
            let j = off[rng.gen_range(0..off.len())];
            mask[j] = true;
        } else {
            return;
        }
    }
}

struct FitnessCache<'a> {
    ds: &'a Dataset,
    cfg: &'a SearchConfig,
    known: HashMap<Vec<bool>, f64>,
}

impl FitnessCache<'_> {
    fn score(&mut self, masks: Vec<Vec<bool>>) -> Result<Vec<Scored>> {
        let mut pending: Vec<Vec<bool>> = Vec::new();
        for m in &masks {
            if !self.known.contains_key(m) && !pending.contains(m) {
                pending.push(m.clone());
            }
        }
        let fresh: Vec<f64> = pending
            .par_iter()
            .map(|m| subset_fitness(self.ds, self.cfg, &mask_indices(m)))
            .collect::<Result<_>>()?;
        self.known.extend(pending.into_iter().zip(fresh));
        Ok(masks
            .into_iter()
            .map(|mask| {
                let fitness = self.known[&mask];
                Scored { mask, fitness }
            })
            .collect())
    }
}

fn tournament<'p>(pop: &'p [Scored], size: usize, rng: &mut ChaCha8Rng) -> &'p Scored {
    let mut best = &pop[rng.gen_range(0..pop.len())];
    for _ in 1..size {
        let challenger = &pop[rng.gen_range(0..pop.len())];
        if challenger.beats(best) {
            best = challenger;
        }
    }
    best
}

/// Binary-mask genetic search. With `k = Some(_)` every mask is repaired to
/// exactly `k` bits; with `None` the subset size is free. Returns the
/// best-ever mask.
pub fn genetic_select(ds: &Dataset, cfg: &SearchConfig, k: Option<usize>) -> Result<SearchResult> {
    let d = ds.n_features();
    ensure_arg!(d >= 2, "GA needs at least 2 features, dataset has {d}");
    if let Some(k) = k {
        check_k(ds, k)?;
    }
    cfg.validate()?;
    let ga = &cfg.ga;
    let mutation = ga.mutation_rate.unwrap_or(1.0 / d as f64);

    let (result, timing) = time_section("ga", || -> Result<_> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut cache = FitnessCache {
            ds,
            cfg,
            known: HashMap::new(),
        };
        let initial: Vec<Vec<bool>> = (0..ga.population)
            .map(|_| {
                let mut mask: Vec<bool> = (0..d).map(|_| rng.gen_bool(0.5)).collect();
                repair(&mut mask, k, &mut rng);
                mask
            })
            .collect();
        let mut population = cache.score(initial)?;
        let mut best = population[0].clone();
        for s in &population[1..] {
            if s.beats(&best) {
                best = s.clone();
            }
        }
        let mut trace = vec![best.fitness];

        for _ in 0..ga.generations {
            let mut ranked: Vec<&Scored> = population.iter().collect();
            ranked.sort_by(|a, b| {
                if a.beats(b) {
                    std::cmp::Ordering::Less
                } else if b.beats(a) {
                    std::cmp::Ordering::Greater
                } else {
                    std::cmp::Ordering::Equal
                }
            });
            let mut next: Vec<Vec<bool>> = ranked[..ga.elitism]
                .iter()
                .map(|s| s.mask.clone())
                .collect();
            while next.len() < ga.population {
                let a = tournament(&population, ga.tournament_size, &mut rng);
                let b = tournament(&population, ga.tournament_size, &mut rng);
                let mut c1 = a.mask.clone();
                let mut c2 = b.mask.clone();
                if rng.gen::<f64>() < ga.crossover_rate {
                    for j in 0..d {
                        if rng.gen_bool(0.5) {
                            std::mem::swap(&mut c1[j], &mut c2[j]);
                        }
                    }
                }
                for child in [&mut c1, &mut c2] {
                    for bit in child.iter_mut() {
                        if rng.gen::<f64>() < mutation {
                            *bit = !*bit;
                        }
                    }
                    repair(child, k, &mut rng);
                }
                next.push(c1);
                if next.len() < ga.population {
                    next.push(c2);
                }
            }
            population = cache.score(next)?;
            for s in &population {
                if s.beats(&best) {
                    best = s.clone();
                }
            }
            trace.push(best.fitness);
        }
        Ok((best, trace))
    });
    let (best, trace) = result?;
    Ok(finish(
        "ga",
        ds,
        mask_indices(&best.mask),
        timing.seconds,
        best.fitness,
        trace,
    ))
}
