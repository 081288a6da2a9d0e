//! The supervised training loop: match and correct sets, covering, the
//! genetic algorithm, population bounding, subsumption and voting.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand::Rng;

use crate::bits::BitString;
use crate::config::{CoverTrigger, UcsConfig};
use crate::error::{invalid, Error, Result};
use crate::model::{self, Classifier, Sample, TernaryCondition, TernarySymbol};
use crate::selection::{CandidateView, SelectionStrategy};
use crate::TrialRng;

/// The rule population. `classifiers` holds macroclassifiers; no two share
/// both condition and class.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Population {
    pub classifiers: Vec<Classifier>,
    /// Training steps completed so far.
    pub step: u64,
}

impl Population {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn macro_count(&self) -> usize {
        self.classifiers.len()
    }

    /// Total numerosity.
    pub fn micro_count(&self) -> u64 {
        self.classifiers.iter().map(|c| c.numerosity).sum()
    }

    /// One line per macroclassifier: condition, class, matches, corrects,
    /// fitness and numerosity separated by tabs.
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        for c in &self.classifiers {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                c.condition, c.class_label, c.matches, c.corrects, c.fitness, c.numerosity
            );
        }
        out
    }

    /// Reads the text produced by [`Population::snapshot`]. Fields that the
    /// snapshot does not carry take covering defaults.
    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut pop = Population::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Parse(format!("snapshot line {}: {what}", n + 1));
            let fields: Vec<&str> = line.split('\t').collect();
            let [cond, class, matches, corrects, fitness, numerosity] = fields.as_slice() else {
                return Err(bad("expected 6 tab-separated fields"));
            };
            let mut c = Classifier::new(
                cond.parse().map_err(|_| bad("invalid condition"))?,
                class.parse().map_err(|_| bad("invalid class"))?,
            );
            c.matches = matches.parse().map_err(|_| bad("invalid matches"))?;
            c.corrects = corrects.parse().map_err(|_| bad("invalid corrects"))?;
            c.fitness = fitness.parse().map_err(|_| bad("invalid fitness"))?;
            c.numerosity = numerosity.parse().map_err(|_| bad("invalid numerosity"))?;
            if c.corrects > c.matches || c.numerosity == 0 {
                return Err(bad("inconsistent counters"));
            }
            if let Some(first) = pop.classifiers.first() {
                if first.condition.len() != c.condition.len() {
                    return Err(bad("condition length differs from earlier lines"));
                }
            }
            pop.classifiers.push(c);
        }
        Ok(pop)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchResult {
    pub match_set: Vec<usize>,
    /// Subset of `match_set` advocating the sample's class.
    pub correct_set: Vec<usize>,
}

pub fn form_match_and_correct_sets(population: &Population, sample: &Sample) -> MatchResult {
    let mut result = MatchResult::default();
    for (i, c) in population.classifiers.iter().enumerate() {
        if c.matches(&sample.features) {
            result.match_set.push(i);
            if c.class_label == sample.class_label {
                result.correct_set.push(i);
            }
        }
    }
    result
}

/// A new rule copying the sample, with each position generalized to `#`
/// with probability `p_hash`.
pub fn cover<R: Rng + ?Sized>(sample: &Sample, config: &UcsConfig, step: u64, rng: &mut R) -> Classifier {
    let mut condition = TernaryCondition::general(sample.features.len());
    for (i, bit) in sample.features.iter().enumerate() {
        if !rng.gen_bool(config.p_hash) {
            condition.set(i, TernarySymbol::from_bit(bit));
        }
    }
    let mut c = Classifier::new(condition, sample.class_label);
    c.ga_timestamp = step;
    c
}

/// True when the numerosity-weighted mean GA timestamp of the correct set
/// lags the current step by more than `theta_ga`.
pub fn ga_should_trigger(population: &Population, correct_set: &[usize], config: &UcsConfig) -> bool {
    let (mut weighted, mut total) = (0.0, 0.0);
    for &i in correct_set {
        let c = &population.classifiers[i];
        weighted += c.ga_timestamp as f64 * c.numerosity as f64;
        total += c.numerosity as f64;
    }
    if total == 0.0 {
        return false;
    }
    population.step as f64 - weighted / total > config.theta_ga as f64
}

/// Swaps the symbols in `[start, end)` between the two parents.
pub fn crossover_at(
    parent_a: &TernaryCondition,
    parent_b: &TernaryCondition,
    start: usize,
    end: usize,
) -> Result<(TernaryCondition, TernaryCondition)> {
    if parent_a.len() != parent_b.len() {
        return Err(Error::LengthMismatch { expected: parent_a.len(), found: parent_b.len() });
    }
    if start > end || end > parent_a.len() {
        return Err(invalid("crossover span", format!("[{start}, {end}) for length {}", parent_a.len())));
    }
    let (mut a, mut b) = (parent_a.clone(), parent_b.clone());
    for i in start..end {
        a.set(i, parent_b.get(i));
        b.set(i, parent_a.get(i));
    }
    Ok((a, b))
}

/// Two-point crossover with both cut points uniform on `[0, len]`.
pub fn crossover_two_point<R: Rng + ?Sized>(
    parent_a: &TernaryCondition,
    parent_b: &TernaryCondition,
    rng: &mut R,
) -> Result<(TernaryCondition, TernaryCondition)> {
    if parent_a.len() != parent_b.len() {
        return Err(Error::LengthMismatch { expected: parent_a.len(), found: parent_b.len() });
    }
    let x = rng.gen_range(0..=parent_a.len());
    let y = rng.gen_range(0..=parent_a.len());
    crossover_at(parent_a, parent_b, x.min(y), x.max(y))
}

/// Niche mutation: each position flips, with probability `mu`, between `#`
/// and the sample's bit. The result still matches the sample.
pub fn mutate_condition<R: Rng + ?Sized>(
    condition: &TernaryCondition,
    sample: &Sample,
    config: &UcsConfig,
    rng: &mut R,
) -> Result<TernaryCondition> {
    if condition.len() != sample.features.len() {
        return Err(Error::LengthMismatch { expected: condition.len(), found: sample.features.len() });
    }
    let mut out = condition.clone();
    if config.mu == 0.0 {
        return Ok(out);
    }
    for i in 0..out.len() {
        if rng.gen_bool(config.mu) {
            let next = match out.get(i) {
                TernarySymbol::Hash => TernarySymbol::from_bit(sample.features.get(i)),
                _ => TernarySymbol::Hash,
            };
            out.set(i, next);
        }
    }
    Ok(out)
}

/// Builds the two children of a GA cycle: optional crossover, mutation,
/// fresh counters, and a fitness of one tenth of the parents' mean.
pub fn make_offspring<R: Rng + ?Sized>(
    parent_a: &Classifier,
    parent_b: &Classifier,
    sample: &Sample,
    config: &UcsConfig,
    step: u64,
    rng: &mut R,
) -> Result<[Classifier; 2]> {
    let (cond_a, cond_b) = if rng.gen_bool(config.chi) {
        crossover_two_point(&parent_a.condition, &parent_b.condition, rng)?
    } else {
        (parent_a.condition.clone(), parent_b.condition.clone())
    };
    let fitness = 0.1 * (parent_a.fitness + parent_b.fitness) / 2.0;
    let estimate = (parent_a.cs_size_estimate + parent_b.cs_size_estimate) / 2.0;
    let child = |cond: &TernaryCondition, rng: &mut R| -> Result<Classifier> {
        let mut c = Classifier::new(mutate_condition(cond, sample, config, rng)?, sample.class_label);
        c.fitness = fitness;
        c.cs_size_estimate = estimate;
        c.ga_timestamp = step;
        Ok(c)
    };
    Ok([child(&cond_a, rng)?, child(&cond_b, rng)?])
}

/// One GA cycle on the correct set: two parents chosen by `strategy`,
/// offspring inserted, population bound enforced. No GA subsumption.
#[allow(clippy::too_many_arguments)]
pub fn run_ga_cycle<R: Rng + ?Sized>(
    population: &mut Population,
    correct_set: &[usize],
    sample: &Sample,
    cases: &[Sample],
    strategy: &SelectionStrategy,
    config: &UcsConfig,
    rng: &mut R,
) -> Result<()> {
    let (a, b) = {
        let view = CandidateView::subset(&population.classifiers, correct_set);
        let a = view.pool_index(strategy.select(&view, cases, config, rng)?);
        let b = view.pool_index(strategy.select(&view, cases, config, rng)?);
        (a, b)
    };
    let children =
        make_offspring(&population.classifiers[a], &population.classifiers[b], sample, config, population.step, rng)?;
    for child in children {
        insert_classifier(population, child);
    }
    delete_excess_guarded(population, config, rng, Some(sample));
    Ok(())
}

/// Adds `newcomer`, merging it into an identical rule if one exists.
pub fn insert_classifier(population: &mut Population, newcomer: Classifier) {
    if let Some(existing) = population
        .classifiers
        .iter_mut()
        .find(|c| c.class_label == newcomer.class_label && c.condition == newcomer.condition)
    {
        existing.numerosity += newcomer.numerosity;
    } else {
        population.classifiers.push(newcomer);
    }
}

/// Removes microclassifiers by roulette over deletion votes until the total
/// numerosity fits `max_population`.
pub fn delete_excess<R: Rng + ?Sized>(population: &mut Population, config: &UcsConfig, rng: &mut R) {
    delete_excess_guarded(population, config, rng, None);
}

/// Deletion vote of one macroclassifier given the population's mean
/// micro-fitness.
pub fn deletion_vote(c: &Classifier, mean_micro_fitness: f64, config: &UcsConfig) -> f64 {
    let mut vote = c.numerosity as f64 * c.cs_size_estimate;
    let micro_fitness = c.fitness / c.numerosity as f64;
    if c.matches > config.theta_del && micro_fitness < config.delta * mean_micro_fitness {
        // Zero-fitness rules would get an infinite vote; cap the multiplier.
        vote *= mean_micro_fitness / micro_fitness.max(mean_micro_fitness * 1e-6);
    }
    vote
}

/// Like [`delete_excess`], but never removes the last microclassifier that
/// correctly covers `guard`, so covering done in this step survives.
fn delete_excess_guarded<R: Rng + ?Sized>(
    population: &mut Population,
    config: &UcsConfig,
    rng: &mut R,
    guard: Option<&Sample>,
) {
    let mut total = population.micro_count();
    let mut guard_cover: u64 =
        guard.map_or(0, |s| population.classifiers.iter().filter(|c| c.is_correct_on(s)).map(|c| c.numerosity).sum());
    let mut votes = Vec::new();
    while total > config.max_population {
        let fitness_sum: f64 = population.classifiers.iter().map(|c| c.fitness).sum();
        let mean = fitness_sum / total as f64;
        votes.clear();
        votes.extend(population.classifiers.iter().map(|c| {
            let protected = guard_cover == 1 && guard.is_some_and(|s| c.is_correct_on(s));
            if protected {
                0.0
            } else {
                deletion_vote(c, mean, config)
            }
        }));
        let victim = roulette_index(&votes, rng);
        let c = &mut population.classifiers[victim];
        if guard.is_some_and(|s| c.is_correct_on(s)) {
            guard_cover -= 1;
        }
        c.numerosity -= 1;
        total -= 1;
        if c.numerosity == 0 {
            population.classifiers.remove(victim);
        }
    }
}

fn roulette_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        let candidates: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] >= 0.0).collect();
        return candidates[rng.gen_range(0..candidates.len())];
    }
    let mut target = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last = i;
            if target < w {
                return i;
            }
            target -= w;
        }
    }
    last
}

/// Merges every rule into its most general subsumer until no subsuming pair
/// remains. Total numerosity is unchanged.
pub fn subsumption_pass(population: &mut Population, config: &UcsConfig) {
    loop {
        let pool = &population.classifiers;
        // For each rule, the most general qualifying subsumer (lowest index
        // on ties). That subsumer cannot itself be subsumed: anything more
        // general than it would also be a more general subsumer.
        let targets: Vec<Option<usize>> = (0..pool.len())
            .map(|s| {
                let mut best: Option<usize> = None;
                for (g, general) in pool.iter().enumerate() {
                    if g != s
                        && model::subsumes(general, &pool[s], config)
                        && best.is_none_or(|b| general.condition.hash_count() > pool[b].condition.hash_count())
                    {
                        best = Some(g);
                    }
                }
                best
            })
            .collect();
        if targets.iter().all(Option::is_none) {
            return;
        }
        for (s, target) in targets.iter().enumerate() {
            if let Some(g) = *target {
                let moved = population.classifiers[s].numerosity;
                population.classifiers[g].numerosity += moved;
                population.classifiers[s].numerosity = 0;
            }
        }
        population.classifiers.retain(|c| c.numerosity > 0);
    }
}

/// One supervised learning step on `sample`. `cases` are the training
/// samples available to lexicase-style selection.
pub fn train_step<R: Rng + ?Sized>(
    population: &mut Population,
    sample: &Sample,
    cases: &[Sample],
    strategy: &SelectionStrategy,
    config: &UcsConfig,
    rng: &mut R,
) -> Result<()> {
    if let Some(c) = population.classifiers.first() {
        if c.condition.len() != sample.features.len() {
            return Err(Error::LengthMismatch { expected: c.condition.len(), found: sample.features.len() });
        }
    }
    let mut sets = form_match_and_correct_sets(population, sample);
    let needs_cover = match config.cover_trigger {
        CoverTrigger::EmptyCorrectSet => sets.correct_set.is_empty(),
        CoverTrigger::EmptyMatchSet => sets.match_set.is_empty(),
    };
    if needs_cover {
        let rule = cover(sample, config, population.step, rng);
        insert_classifier(population, rule);
        sets = form_match_and_correct_sets(population, sample);
    }

    let correct_size: u64 = sets.correct_set.iter().map(|&i| population.classifiers[i].numerosity).sum();
    for &i in &sets.match_set {
        let c = &mut population.classifiers[i];
        let in_correct = c.class_label == sample.class_label;
        model::update_on_outcome(c, in_correct, correct_size, config);
    }

    if !sets.correct_set.is_empty() && ga_should_trigger(population, &sets.correct_set, config) {
        for &i in &sets.correct_set {
            population.classifiers[i].ga_timestamp = population.step;
        }
        run_ga_cycle(population, &sets.correct_set, sample, cases, strategy, config, rng)?;
    }

    population.step += 1;
    if population.step.is_multiple_of(config.subsumption_interval) {
        subsumption_pass(population, config);
    }
    delete_excess_guarded(population, config, rng, Some(sample));
    Ok(())
}

/// Fitness times numerosity vote per class over the matching rules.
/// `None` when nothing matches.
pub fn class_votes(population: &Population, features: &BitString, n_classes: usize) -> Option<Vec<f64>> {
    let mut votes = vec![0.0; n_classes];
    let mut any = false;
    for c in &population.classifiers {
        if c.matches(features) {
            any = true;
            votes[c.class_label] += c.fitness * c.numerosity as f64;
        }
    }
    any.then_some(votes)
}

/// Predicted class: the vote argmax with exact ties broken uniformly, or
/// `fallback` when no rule matches.
pub fn predict<R: Rng + ?Sized>(
    population: &Population,
    features: &BitString,
    n_classes: usize,
    fallback: usize,
    rng: &mut R,
) -> usize {
    let Some(votes) = class_votes(population, features, n_classes) else {
        return fallback;
    };
    let best = votes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = (0..n_classes).filter(|&k| votes[k] == best).collect();
    if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.gen_range(0..tied.len())]
    }
}

/// A learner bound to one trial: population, strategy, configuration, its
/// own random stream, and the class frequencies seen in training (used when
/// no rule matches at prediction time).
#[derive(Debug, Clone)]
pub struct Ucs {
    pub config: UcsConfig,
    pub strategy: SelectionStrategy,
    pub population: Population,
    n_classes: usize,
    class_counts: Vec<u64>,
    rng: TrialRng,
}

impl Ucs {
    pub fn new(config: UcsConfig, strategy: SelectionStrategy, n_classes: usize, rng: TrialRng) -> Result<Self> {
        config.validate()?;
        strategy.validate()?;
        if n_classes < 2 {
            return Err(invalid("n_classes", "need at least two classes"));
        }
        Ok(Self { config, strategy, population: Population::new(), n_classes, class_counts: vec![0; n_classes], rng })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn train(&mut self, sample: &Sample, cases: &[Sample]) -> Result<()> {
        if sample.class_label >= self.n_classes {
            return Err(invalid("class_label", format!("{} is not below {}", sample.class_label, self.n_classes)));
        }
        self.class_counts[sample.class_label] += 1;
        train_step(&mut self.population, sample, cases, &self.strategy, &self.config, &mut self.rng)
    }

    /// Most frequent training class so far (lowest index on ties).
    pub fn majority_class(&self) -> usize {
        let mut best = 0;
        for (k, &n) in self.class_counts.iter().enumerate() {
            if n > self.class_counts[best] {
                best = k;
            }
        }
        best
    }

    pub fn predict<R: Rng + ?Sized>(&self, features: &BitString, rng: &mut R) -> usize {
        predict(&self.population, features, self.n_classes, self.majority_class(), rng)
    }
}
