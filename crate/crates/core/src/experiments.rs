//! Experiment protocol: random train/test splits repeated over independent
//! runs, metric curves, aggregation across runs, rule-coverage histograms
//! and batch-lexicase parameter sweeps.
//!
//! Everything here is sequential and deterministic. The `ucs` crate runs
//! the same trials on a thread pool and feeds the results back through
//! [`collect_results`].

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::config::UcsConfig;
use crate::engine::{Population, Ucs};
use crate::error::{invalid, Error, Result};
use crate::model::{Dataset, Sample};
use crate::problems::ProblemSpec;
use crate::selection::SelectionStrategy;
use crate::{trial_rng, TrialRng};

/// Default training length: 30,000 steps up to six inputs, 150,000 for the
/// sampled (partial) multiplexer, 100,000 otherwise.
pub fn default_max_steps(problem: &ProblemSpec) -> u64 {
    match problem {
        _ if problem.n_features() <= 6 => 30_000,
        ProblemSpec::Multiplexer { samples: Some(_), .. } => 150_000,
        _ => 100_000,
    }
}

pub const DEFAULT_METRIC_CADENCE: u64 = 500;
pub const DEFAULT_SWEEP_BATCH_SIZES: [usize; 5] = [10, 50, 100, 200, 500];
pub const DEFAULT_SWEEP_THRESHOLDS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// splitmix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of run `run`: `mix64(base_seed + 0x9e3779b97f4a7c15 * (run + 1))`.
/// Every strategy sees the same seed for a given run, so runs pair up
/// across strategies (same data, same split).
pub fn trial_seed(base_seed: u64, run: usize) -> u64 {
    mix64(base_seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(run as u64 + 1)))
}

/// Independent sub-stream of a trial seed.
fn stream_seed(seed: u64, stream: u64) -> u64 {
    mix64(seed ^ mix64(stream))
}

const LEARNER_STREAM: u64 = 1;
const EVAL_STREAM: u64 = 2;

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub problem: ProblemSpec,
    /// Dataset to use instead of generating `problem` (car evaluation).
    pub dataset: Option<Arc<Dataset>>,
    pub strategies: Vec<SelectionStrategy>,
    pub config: UcsConfig,
    pub train_fraction: f64,
    pub discard_fraction: f64,
    pub n_runs: usize,
    pub max_steps: u64,
    pub metric_cadence: u64,
    pub base_seed: u64,
}

impl ExperimentPlan {
    /// Full-data plan with a 70/30 split, 10 runs and the default training
    /// length for the problem.
    pub fn new(problem: ProblemSpec, strategies: Vec<SelectionStrategy>) -> Self {
        let max_steps = default_max_steps(&problem);
        Self {
            problem,
            dataset: None,
            strategies,
            config: UcsConfig::default(),
            train_fraction: 0.7,
            discard_fraction: 0.0,
            n_runs: 10,
            max_steps,
            metric_cadence: DEFAULT_METRIC_CADENCE,
            base_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.discard_fraction >= 0.0)
            || self.train_fraction + self.discard_fraction > 1.0
        {
            return Err(invalid(
                "split fractions",
                format!(
                    "train {} + discard {} must be positive and at most 1",
                    self.train_fraction, self.discard_fraction
                ),
            ));
        }
        if self.n_runs == 0 {
            return Err(invalid("runs", "need at least one run"));
        }
        if self.metric_cadence == 0 {
            return Err(invalid("metric cadence", "must be positive"));
        }
        if self.strategies.is_empty() {
            return Err(invalid("strategies", "need at least one strategy"));
        }
        for s in &self.strategies {
            s.validate()?;
        }
        self.config.validate()
    }

    fn build_dataset<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Dataset> {
        match &self.dataset {
            Some(d) => Ok(Dataset::clone(d)),
            None => self.problem.materialize(rng),
        }
    }
}

/// Shuffles the rows, then takes the first `train_fraction` of them for
/// training, drops the next `discard_fraction`, and tests on the rest.
pub fn split_dataset<R: Rng + ?Sized>(
    dataset: &Dataset,
    train_fraction: f64,
    discard_fraction: f64,
    rng: &mut R,
) -> Result<(Vec<Sample>, Vec<Sample>)> {
    if !(train_fraction >= 0.0 && discard_fraction >= 0.0 && train_fraction + discard_fraction <= 1.0) {
        return Err(invalid("split fractions", format!("train {train_fraction}, discard {discard_fraction}")));
    }
    let n = dataset.len();
    let n_train = libm::round(train_fraction * n as f64) as usize;
    let n_discard = (libm::round(discard_fraction * n as f64) as usize).min(n - n_train);
    let mut rows = dataset.samples.clone();
    rows.shuffle(rng);
    let test = rows.split_off(n_train + n_discard);
    rows.truncate(n_train);
    if rows.is_empty() || test.is_empty() {
        return Err(Error::EmptySplit { train: rows.len(), test: test.len() });
    }
    Ok((rows, test))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricPoint {
    pub step: u64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub macro_rules: usize,
    pub micro_rules: u64,
}

/// Predictions on one split next to the true labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Evaluation {
    pub predictions: Vec<usize>,
    pub labels: Vec<usize>,
}

impl Evaluation {
    pub fn accuracy(&self) -> f64 {
        let hits = self.predictions.iter().zip(&self.labels).filter(|(p, l)| p == l).count();
        hits as f64 / self.labels.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub seed: u64,
    pub points: Vec<MetricPoint>,
    pub final_population: Population,
    /// Predictions behind the last point's accuracies.
    pub final_train: Evaluation,
    pub final_test: Evaluation,
}

impl RunMetrics {
    pub fn last(&self) -> &MetricPoint {
        self.points.last().expect("a run always has its step-0 measurement")
    }
}

/// One trial in progress: a learner, its data, and the presentation order.
///
/// The first epoch visits the (already shuffled) training split in order,
/// so the cases available to lexicase selection are always a prefix of it.
/// Later epochs reshuffle.
#[derive(Debug, Clone)]
pub struct Trial {
    ucs: Ucs,
    train: Vec<Sample>,
    test: Vec<Sample>,
    presented: u64,
    order: Vec<usize>,
    cursor: usize,
    order_rng: TrialRng,
    eval_rng: TrialRng,
}

impl Trial {
    /// Sets up a trial from an explicit split. `order_rng` drives epoch
    /// shuffles; the learner and evaluation streams derive from `seed`.
    pub fn new(
        config: UcsConfig,
        strategy: SelectionStrategy,
        n_classes: usize,
        train: Vec<Sample>,
        test: Vec<Sample>,
        seed: u64,
        order_rng: TrialRng,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptySplit { train: 0, test: test.len() });
        }
        let ucs = Ucs::new(config, strategy, n_classes, trial_rng(stream_seed(seed, LEARNER_STREAM)))?;
        let order = (0..train.len()).collect();
        Ok(Self {
            ucs,
            train,
            test,
            presented: 0,
            order,
            cursor: 0,
            order_rng,
            eval_rng: trial_rng(stream_seed(seed, EVAL_STREAM)),
        })
    }

    pub fn learner(&self) -> &Ucs {
        &self.ucs
    }

    pub fn train_split(&self) -> &[Sample] {
        &self.train
    }

    pub fn test_split(&self) -> &[Sample] {
        &self.test
    }

    /// Training samples presented so far (at most the whole split).
    pub fn cases(&self) -> &[Sample] {
        let n = (self.presented as usize).min(self.train.len());
        &self.train[..n]
    }

    /// Index (into the training split) of the sample the next step uses.
    fn next_index(&mut self) -> usize {
        if self.presented < self.train.len() as u64 {
            return self.presented as usize;
        }
        if self.cursor == self.order.len() {
            self.order.shuffle(&mut self.order_rng);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.order[self.cursor - 1]
    }

    /// Trains on the next sample and returns it.
    pub fn step(&mut self) -> Result<&Sample> {
        let i = self.next_index();
        self.presented += 1;
        let n = (self.presented as usize).min(self.train.len());
        self.ucs.train(&self.train[i], &self.train[..n])?;
        Ok(&self.train[i])
    }

    fn evaluate(&mut self, on_test: bool) -> Evaluation {
        let split = if on_test { &self.test } else { &self.train };
        let mut eval = Evaluation::default();
        for s in split {
            eval.predictions.push(self.ucs.predict(&s.features, &mut self.eval_rng));
            eval.labels.push(s.class_label);
        }
        eval
    }

    /// Accuracy on both splits and rule counts at the current step.
    pub fn measure(&mut self) -> (MetricPoint, Evaluation, Evaluation) {
        let train = self.evaluate(false);
        let test = self.evaluate(true);
        let pop = &self.ucs.population;
        let point = MetricPoint {
            step: pop.step,
            train_acc: train.accuracy(),
            test_acc: test.accuracy(),
            macro_rules: pop.macro_count(),
            micro_rules: pop.micro_count(),
        };
        (point, train, test)
    }
}

/// Runs one trial: build the data, split it, train for `max_steps` and
/// measure every `metric_cadence` steps (plus at step 0 and the end).
pub fn run_trial(plan: &ExperimentPlan, strategy: &SelectionStrategy, seed: u64) -> Result<RunMetrics> {
    plan.validate()?;
    let mut rng = trial_rng(seed);
    let dataset = plan.build_dataset(&mut rng)?;
    let (train, test) = split_dataset(&dataset, plan.train_fraction, plan.discard_fraction, &mut rng)?;
    let config = UcsConfig { seed, ..plan.config.clone() };
    let mut trial = Trial::new(config, *strategy, dataset.n_classes, train, test, seed, rng)?;

    let (first, mut final_train, mut final_test) = trial.measure();
    let mut points = vec![first];
    for step in 1..=plan.max_steps {
        trial.step()?;
        if step % plan.metric_cadence == 0 || step == plan.max_steps {
            let (p, tr, te) = trial.measure();
            points.push(p);
            final_train = tr;
            final_test = te;
        }
    }
    Ok(RunMetrics { seed, points, final_population: trial.ucs.population, final_train, final_test })
}

/// One unit of work of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialJob {
    pub strategy_index: usize,
    pub strategy: SelectionStrategy,
    pub run: usize,
    pub seed: u64,
}

/// Every (strategy, run) pair of the plan, strategy-major.
pub fn plan_jobs(plan: &ExperimentPlan) -> Vec<TrialJob> {
    let mut jobs = Vec::with_capacity(plan.strategies.len() * plan.n_runs);
    for (strategy_index, strategy) in plan.strategies.iter().enumerate() {
        for run in 0..plan.n_runs {
            jobs.push(TrialJob { strategy_index, strategy: *strategy, run, seed: trial_seed(plan.base_seed, run) });
        }
    }
    jobs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    TrainAcc,
    TestAcc,
    MacroRules,
    MicroRules,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::TrainAcc, Metric::TestAcc, Metric::MacroRules, Metric::MicroRules];

    pub fn name(self) -> &'static str {
        match self {
            Metric::TrainAcc => "train_acc",
            Metric::TestAcc => "test_acc",
            Metric::MacroRules => "macro_rules",
            Metric::MicroRules => "micro_rules",
        }
    }

    pub fn of(self, p: &MetricPoint) -> f64 {
        match self {
            Metric::TrainAcc => p.train_acc,
            Metric::TestAcc => p.test_acc,
            Metric::MacroRules => p.macro_rules as f64,
            Metric::MicroRules => p.micro_rules as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (zero for a single run).
    pub std: f64,
}

impl Stat {
    /// Welford's running update, so identical values give exactly zero spread.
    pub fn of(values: &[f64]) -> Self {
        let (mut mean, mut m2) = (0.0, 0.0);
        for (k, &v) in values.iter().enumerate() {
            let d = v - mean;
            mean += d / (k + 1) as f64;
            m2 += d * (v - mean);
        }
        let std = if values.len() < 2 { 0.0 } else { libm::sqrt(m2 / (values.len() - 1) as f64) };
        Stat { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatePoint {
    pub step: u64,
    /// Indexed like [`Metric::ALL`].
    pub stats: [Stat; 4],
}

impl AggregatePoint {
    pub fn get(&self, metric: Metric) -> Stat {
        self.stats[Metric::ALL.iter().position(|&m| m == metric).unwrap()]
    }
}

/// Mean and sample standard deviation per measurement step across runs.
pub fn aggregate_runs(runs: &[RunMetrics]) -> Result<Vec<AggregatePoint>> {
    let first = runs.first().ok_or_else(|| invalid("runs", "nothing to aggregate"))?;
    for r in runs {
        if r.points.len() != first.points.len() || r.points.iter().zip(&first.points).any(|(a, b)| a.step != b.step) {
            return Err(Error::MismatchedGrids);
        }
    }
    Ok(first
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let stats = Metric::ALL.map(|m| {
                let values: Vec<f64> = runs.iter().map(|r| m.of(&r.points[i])).collect();
                Stat::of(&values)
            });
            AggregatePoint { step: p.step, stats }
        })
        .collect())
}

/// All runs of one strategy plus their aggregate.
#[derive(Debug, Clone)]
pub struct StrategyResult {
    pub strategy: SelectionStrategy,
    /// Ordered by run index.
    pub runs: Vec<RunMetrics>,
    pub aggregate: Vec<AggregatePoint>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub problem: String,
    pub strategies: Vec<StrategyResult>,
}

/// Groups finished trials (in any order) by strategy and run and
/// aggregates them.
pub fn collect_results(
    plan: &ExperimentPlan,
    finished: impl IntoIterator<Item = (TrialJob, RunMetrics)>,
) -> Result<ExperimentResult> {
    let mut slots: Vec<Vec<Option<RunMetrics>>> = vec![vec![None; plan.n_runs]; plan.strategies.len()];
    for (job, metrics) in finished {
        slots[job.strategy_index][job.run] = Some(metrics);
    }
    let strategies = slots
        .into_iter()
        .zip(&plan.strategies)
        .map(|(runs, strategy)| {
            let runs: Vec<RunMetrics> = runs
                .into_iter()
                .collect::<Option<_>>()
                .ok_or_else(|| invalid("results", format!("missing runs for {strategy}")))?;
            let aggregate = aggregate_runs(&runs)?;
            Ok(StrategyResult { strategy: *strategy, runs, aggregate })
        })
        .collect::<Result<_>>()?;
    Ok(ExperimentResult { problem: plan.problem.name(), strategies })
}

/// Runs the whole plan on the calling thread.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentResult> {
    plan.validate()?;
    let finished = plan_jobs(plan)
        .into_iter()
        .map(|job| run_trial(plan, &job.strategy, job.seed).map(|m| (job, m)))
        .collect::<Result<Vec<_>>>()?;
    collect_results(plan, finished)
}

/// For each macroclassifier, the number of dataset rows it matches and
/// classifies correctly.
pub fn coverage_counts(population: &Population, dataset: &Dataset) -> Vec<usize> {
    population.classifiers.iter().map(|c| dataset.samples.iter().filter(|s| c.is_correct_on(s)).count()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistogramBin {
    /// Inclusive.
    pub lo: usize,
    /// Exclusive.
    pub hi: usize,
    pub count: usize,
}

/// Rules binned by how many rows they correctly cover. Bins are
/// `[k * width, (k + 1) * width)` from zero up to the largest count.
pub fn coverage_histogram(population: &Population, dataset: &Dataset, bin_width: usize) -> Result<Vec<HistogramBin>> {
    if bin_width == 0 {
        return Err(invalid("bin width", "must be positive"));
    }
    let counts = coverage_counts(population, dataset);
    let Some(&max) = counts.iter().max() else {
        return Ok(Vec::new());
    };
    let mut bins: Vec<HistogramBin> =
        (0..=max / bin_width).map(|k| HistogramBin { lo: k * bin_width, hi: (k + 1) * bin_width, count: 0 }).collect();
    for c in counts {
        bins[c / bin_width].count += 1;
    }
    Ok(bins)
}

/// Mean number of correctly covered rows per macroclassifier.
pub fn mean_coverage(population: &Population, dataset: &Dataset) -> f64 {
    let counts = coverage_counts(population, dataset);
    if counts.is_empty() {
        return 0.0;
    }
    counts.iter().sum::<usize>() as f64 / counts.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepAxis {
    BatchSize,
    Threshold,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::BatchSize => "batch_size",
            SweepAxis::Threshold => "threshold",
        }
    }
}

/// Batch sizes between 5% and 10% of the data with a 0.9 threshold are
/// the robust default region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecommendedRegion {
    pub batch_size_lo: usize,
    pub batch_size_hi: usize,
    pub threshold: f64,
}

impl RecommendedRegion {
    pub fn for_data_size(n: usize) -> Self {
        Self {
            batch_size_lo: libm::round(0.05 * n as f64) as usize,
            batch_size_hi: libm::round(0.1 * n as f64) as usize,
            threshold: 0.9,
        }
    }
}

/// A batch-lexicase plan expanded into its sweep settings: batch sizes at
/// the base threshold, then thresholds at the base batch size.
pub fn sweep_plan(
    plan: &ExperimentPlan,
    batch_sizes: &[usize],
    thresholds: &[f64],
) -> Result<(ExperimentPlan, Vec<SweepAxis>)> {
    let (base_size, base_threshold) = match plan.strategies.as_slice() {
        [SelectionStrategy::BatchLexicase { batch_size, threshold }] => (*batch_size, *threshold),
        _ => return Err(invalid("sweep strategy", "a sweep needs exactly one batch-lexicase strategy")),
    };
    let mut strategies = Vec::new();
    let mut axes = Vec::new();
    for &b in batch_sizes {
        strategies.push(SelectionStrategy::BatchLexicase { batch_size: b, threshold: base_threshold });
        axes.push(SweepAxis::BatchSize);
    }
    for &t in thresholds {
        strategies.push(SelectionStrategy::BatchLexicase { batch_size: base_size, threshold: t });
        axes.push(SweepAxis::Threshold);
    }
    let swept = ExperimentPlan { strategies, ..plan.clone() };
    swept.validate()?;
    Ok((swept, axes))
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub axes: Vec<SweepAxis>,
    pub result: ExperimentResult,
    pub recommended: RecommendedRegion,
}

/// Sweeps batch size and threshold of batch-lexicase, sequentially.
pub fn parameter_sweep(plan: &ExperimentPlan, batch_sizes: &[usize], thresholds: &[f64]) -> Result<SweepTable> {
    let (swept, axes) = sweep_plan(plan, batch_sizes, thresholds)?;
    let result = run_experiment(&swept)?;
    let data_size = sweep_data_size(plan);
    Ok(SweepTable { axes, result, recommended: RecommendedRegion::for_data_size(data_size) })
}

/// Number of rows the plan's problem produces.
pub fn sweep_data_size(plan: &ExperimentPlan) -> usize {
    match (&plan.dataset, &plan.problem) {
        (Some(d), _) => d.len(),
        (None, ProblemSpec::Multiplexer { samples: Some(n), .. } | ProblemSpec::Parity { samples: Some(n), .. }) => *n,
        (None, ProblemSpec::Led { samples, .. }) => *samples,
        (None, p) => 1usize << p.n_features().min(usize::BITS as usize - 1),
    }
}
