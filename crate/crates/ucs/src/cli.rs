//! The `ucs` command line: `gen-data`, `train`, `experiment`, `sweep` and
//! `histogram`.
//!
//! Besides flags, every subcommand accepts `--config <file>` with one
//! `key = value` per line, keys spelled like the long flags. File entries
//! are inserted before the command-line flags, so flags win.

use std::ffi::OsString;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Arg, ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use ucs_core::experiments::{
    coverage_histogram, default_max_steps, mean_coverage, run_trial, sweep_data_size, trial_seed, ExperimentPlan,
    DEFAULT_METRIC_CADENCE,
};
use ucs_core::{trial_rng, Dataset, Error, ProblemSpec, SelectionStrategy, UcsConfig};

use crate::{car, formats, harness, CliError};

#[derive(Debug, Parser)]
#[command(name = "ucs", version, about = "Supervised learning classifier system with lexicase parent selection")]
#[command(args_override_self = true)]
pub struct Cli {
    /// File of `key = value` lines using the long flag names; flags given on
    /// the command line take precedence
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a problem's dataset and write it as text
    GenData {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Seed for sampled and noisy problems
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file
        #[arg(long, default_value = "data.txt")]
        out: PathBuf,
    },
    /// Run one trial; writes metrics.csv and population.tsv
    Train {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Parent selection: roulette, tournament[:f], lexicase, batch-lexicase[:size[:threshold]]
        #[arg(long, default_value = "batch-lexicase")]
        strategy: String,
        /// Run index combined with --seed into the trial seed
        #[arg(long = "run", default_value_t = 0)]
        run_index: usize,
        #[arg(long, default_value = "ucs-out")]
        out_dir: PathBuf,
        #[command(flatten)]
        learner: LearnerArgs,
    },
    /// Run several strategies over seeded runs; writes runs.csv, aggregate.csv and populations/
    Experiment {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated parent selection strategies
        #[arg(long, value_delimiter = ',', default_value = "roulette,tournament,lexicase,batch-lexicase")]
        strategies: Vec<String>,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Worker threads (0 uses every core)
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, default_value = "ucs-out")]
        out_dir: PathBuf,
        #[command(flatten)]
        learner: LearnerArgs,
    },
    /// Sweep batch-lexicase batch size and threshold; writes sweep.csv, sweep_meta.csv and aggregate.csv
    Sweep {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Batch sizes tried at the base threshold (--batch-threshold)
        #[arg(long, value_delimiter = ',', default_value = "10,50,100,200,500")]
        batch_sizes: Vec<usize>,
        /// Thresholds tried at the base batch size (--batch-size)
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5,0.7,0.9")]
        thresholds: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Worker threads (0 uses every core)
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, default_value = "ucs-out")]
        out_dir: PathBuf,
        #[command(flatten)]
        learner: LearnerArgs,
    },
    /// Histogram of how many dataset rows each rule of a population covers
    Histogram {
        /// Population snapshot written by `train` or `experiment`
        #[arg(long, default_value = "ucs-out/population.tsv")]
        population: PathBuf,
        #[command(flatten)]
        problem: ProblemArgs,
        /// Seed used to generate sampled or noisy problems
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        bin_width: usize,
        #[arg(long, default_value = "histogram.csv")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// mux<k+2^k>, parity<n>, led or car:<path to car.data>
    #[arg(long, default_value = "mux6")]
    pub problem: String,
    /// Distinct rows to sample from a boolean problem, or LED rows [default: full truth table; 2000 for led]
    #[arg(long)]
    pub samples: Option<usize>,
    /// LED segment flip probability
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Dataset file (as written by gen-data) to use instead of generating the problem
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Base seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Training steps [default: 30000 up to 6 inputs, 150000 for sampled multiplexers, 100000 otherwise]
    #[arg(long)]
    pub steps: Option<u64>,
    /// Steps between measurements
    #[arg(long, default_value_t = DEFAULT_METRIC_CADENCE)]
    pub cadence: u64,
    /// Fraction of rows used for training [default: 0.7; 0.4 with --samples]
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Fraction of rows dropped after the training part [default: 0; 0.4 with --samples]
    #[arg(long)]
    pub discard_fraction: Option<f64>,
}

/// Learner parameters, one flag per configuration key. Defaults are
/// generated from [`UcsConfig::default`].
#[derive(Debug, Clone)]
pub struct LearnerArgs(pub UcsConfig);

const HEADING: &str = "Learner parameters";

fn key_help(key: &str) -> &'static str {
    match key {
        "nu" => "Fitness exponent: fitness = accuracy^nu",
        "alpha" => "Accuracy fall-off (kept for completeness, unused by the supervised fitness)",
        "beta" => "Learning rate of the correct-set size estimate",
        "theta-ga" => "GA threshold on the mean steps since the correct set's last GA",
        "chi" => "Crossover probability",
        "mu" => "Per-position mutation probability",
        "theta-del" => "Experience before a rule's fitness counts against it in deletion",
        "delta" => "Fraction of mean fitness below which deletion votes are scaled up",
        "max-population" => "Maximum total numerosity",
        "p-hash" => "Probability of a # in covering",
        "tournament-fraction" => "Tournament size as a fraction of the correct set's numerosity",
        "batch-size" => "Cases per batch in batch-lexicase",
        "batch-threshold" => "Per-batch accuracy a batch-lexicase candidate must exceed",
        "subsumption-interval" => "Steps between population subsumption passes",
        "theta-sub" => "Experience required to subsume",
        "acc-sub" => "Accuracy required to subsume",
        "cover-trigger" => "Cover when this set lacks a rule: correct-set or match-set",
        "zero-match" => "Batch-lexicase candidates matching nothing in a batch: eliminate or retain",
        "final-pick" => "Lexicase pick among final survivors: uniform or numerosity",
        _ => "",
    }
}

fn learner_keys() -> impl Iterator<Item = (&'static str, String)> {
    UcsConfig::default().entries().into_iter().filter(|(k, _)| *k != "seed")
}

impl FromArgMatches for LearnerArgs {
    fn from_arg_matches(matches: &ArgMatches) -> Result<Self, clap::Error> {
        let mut args = LearnerArgs(UcsConfig::default());
        args.update_from_arg_matches(matches)?;
        Ok(args)
    }

    fn update_from_arg_matches(&mut self, matches: &ArgMatches) -> Result<(), clap::Error> {
        for (key, _) in learner_keys() {
            if let Some(value) = matches.get_one::<String>(key) {
                self.0
                    .set(key, value)
                    .map_err(|e| clap::Error::raw(ErrorKind::ValueValidation, format!("--{key}: {e}\n")))?;
            }
        }
        Ok(())
    }
}

impl Args for LearnerArgs {
    fn augment_args(mut cmd: clap::Command) -> clap::Command {
        for (key, default) in learner_keys() {
            cmd = cmd.arg(
                Arg::new(key)
                    .long(key)
                    .value_name("VALUE")
                    .default_value(default)
                    .help(key_help(key))
                    .help_heading(HEADING),
            );
        }
        cmd
    }

    fn augment_args_for_update(cmd: clap::Command) -> clap::Command {
        Self::augment_args(cmd)
    }
}

/// Parses a strategy; bare names take their parameters from the config.
pub fn parse_strategy(text: &str, config: &UcsConfig) -> Result<SelectionStrategy, Error> {
    let text = text.trim();
    let strategy = match text {
        "tournament" => SelectionStrategy::Tournament { fraction: config.tournament_fraction },
        "batch-lexicase" => {
            SelectionStrategy::BatchLexicase { batch_size: config.batch_size, threshold: config.batch_threshold }
        }
        other => other.parse()?,
    };
    strategy.validate()?;
    Ok(strategy)
}

/// A flag value that does not parse is a usage error.
fn bad_value(flag: &'static str, e: Error) -> CliError {
    CliError::Usage(format!("{flag}: {e}"))
}

/// Maps a library error raised while handling `flag` to an exit class.
fn core_error(flag: &'static str, e: Error) -> CliError {
    match e {
        Error::InvalidParameter { .. } | Error::EnumerationTooLarge { .. } | Error::EmptySplit { .. } => {
            CliError::Usage(format!("{flag}: {e}"))
        }
        Error::Parse(_) | Error::ExternalData(_) | Error::TooManySamples { .. } | Error::LengthMismatch { .. } => {
            CliError::Data { flag, message: e.to_string() }
        }
        Error::EmptyCandidates | Error::MismatchedGrids => CliError::Internal(e.to_string()),
    }
}

struct Problem {
    spec: ProblemSpec,
    dataset: Option<Arc<Dataset>>,
}

impl ProblemArgs {
    fn resolve(&self) -> Result<Problem, CliError> {
        let mut spec: ProblemSpec = self.problem.parse().map_err(|e| bad_value("--problem", e))?;
        if let ProblemSpec::Led { noise, .. } = &mut spec {
            *noise = self.noise;
        }
        spec = spec.with_samples(self.samples);
        let dataset = match (&self.data, &spec) {
            (Some(path), _) => Some(formats::read_dataset(path).map_err(|e| core_error("--data", e))?),
            (None, ProblemSpec::CarEval { path }) => {
                Some(car::load_car_eval(Path::new(path)).map_err(|e| core_error("--problem", e))?)
            }
            _ => None,
        };
        Ok(Problem { spec, dataset: dataset.map(Arc::new) })
    }
}

impl Problem {
    fn materialize(&self, seed: u64) -> Result<Dataset, CliError> {
        match &self.dataset {
            Some(d) => Ok(Dataset::clone(d)),
            None => self.spec.materialize(&mut trial_rng(seed)).map_err(|e| core_error("--problem", e)),
        }
    }

    fn plan(&self, run: &RunArgs, strategies: Vec<SelectionStrategy>, config: UcsConfig) -> ExperimentPlan {
        let mut plan = ExperimentPlan::new(self.spec.clone(), strategies);
        plan.dataset = self.dataset.clone();
        plan.config = config;
        let partial = matches!(
            self.spec,
            ProblemSpec::Multiplexer { samples: Some(_), .. } | ProblemSpec::Parity { samples: Some(_), .. }
        );
        let (train, discard) = if partial { (0.4, 0.4) } else { (0.7, 0.0) };
        plan.train_fraction = run.train_fraction.unwrap_or(train);
        plan.discard_fraction = run.discard_fraction.unwrap_or(discard);
        plan.max_steps = run.steps.unwrap_or_else(|| default_max_steps(&self.spec));
        plan.metric_cadence = run.cadence;
        plan.base_seed = run.seed;
        plan
    }
}

fn validated(plan: ExperimentPlan) -> Result<ExperimentPlan, CliError> {
    plan.validate().map_err(|e| {
        let flag = match &e {
            Error::InvalidParameter { name, .. } => match *name {
                "split fractions" => "--train-fraction",
                "runs" => "--runs",
                "metric cadence" => "--cadence",
                _ => "--strategies",
            },
            _ => "--config",
        };
        core_error(flag, e)
    })?;
    Ok(plan)
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    let flag = "--out";
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Data { flag, message: format!("{}: {e}", dir.display()) })?;
    }
    fs::write(path, contents).map_err(|e| CliError::Data { flag, message: format!("{}: {e}", path.display()) })
}

fn file_stem_safe(strategy: &SelectionStrategy) -> String {
    strategy.to_string().replace(':', "_")
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData { problem, seed, out } => {
            let data = problem.resolve()?.materialize(seed)?;
            write(&out, &formats::dataset_to_string(&data))?;
            println!("wrote {} rows to {}", data.len(), out.display());
        }
        Command::Train { problem, run, strategy, run_index, out_dir, learner } => {
            let problem = problem.resolve()?;
            let strategy = parse_strategy(&strategy, &learner.0).map_err(|e| bad_value("--strategy", e))?;
            let plan = validated(problem.plan(&run, vec![strategy], learner.0))?;
            let seed = trial_seed(plan.base_seed, run_index);
            let metrics = run_trial(&plan, &strategy, seed).map_err(|e| core_error("--problem", e))?;
            let csv = formats::run_metrics_csv(&plan.problem.name(), &strategy.to_string(), run_index, &metrics);
            write(&out_dir.join("metrics.csv"), &csv)?;
            write(&out_dir.join("population.tsv"), &metrics.final_population.snapshot())?;
            let last = metrics.last();
            println!(
                "step {}: train {} test {} rules {} ({} micro)",
                last.step, last.train_acc, last.test_acc, last.macro_rules, last.micro_rules
            );
        }
        Command::Experiment { problem, run, strategies, runs, workers, out_dir, learner } => {
            let problem = problem.resolve()?;
            let strategies = strategies
                .iter()
                .map(|s| parse_strategy(s, &learner.0))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| bad_value("--strategies", e))?;
            let mut plan = problem.plan(&run, strategies, learner.0);
            plan.n_runs = runs;
            let plan = validated(plan)?;
            let result = harness::run_parallel(&plan, workers).map_err(|e| core_error("--problem", e))?;
            write(&out_dir.join("runs.csv"), &formats::runs_csv(&result))?;
            write(&out_dir.join("aggregate.csv"), &formats::aggregate_csv(&result))?;
            for s in &result.strategies {
                for (r, m) in s.runs.iter().enumerate() {
                    let name = format!("{}-run{r}.tsv", file_stem_safe(&s.strategy));
                    write(&out_dir.join("populations").join(name), &m.final_population.snapshot())?;
                }
                let last = s.aggregate.last().expect("at least one measurement");
                println!(
                    "{}: test {} ± {}",
                    s.strategy,
                    last.get(ucs_core::experiments::Metric::TestAcc).mean,
                    last.get(ucs_core::experiments::Metric::TestAcc).std
                );
            }
        }
        Command::Sweep { problem, run, batch_sizes, thresholds, runs, workers, out_dir, learner } => {
            let problem = problem.resolve()?;
            let base = SelectionStrategy::BatchLexicase {
                batch_size: learner.0.batch_size,
                threshold: learner.0.batch_threshold,
            };
            let mut plan = problem.plan(&run, vec![base], learner.0);
            plan.n_runs = runs;
            let plan = validated(plan)?;
            let table = harness::sweep_parallel(&plan, &batch_sizes, &thresholds, workers)
                .map_err(|e| core_error("--batch-sizes", e))?;
            write(&out_dir.join("sweep.csv"), &formats::sweep_csv(&table))?;
            write(&out_dir.join("sweep_meta.csv"), &formats::sweep_meta_csv(&table, sweep_data_size(&plan)))?;
            write(&out_dir.join("aggregate.csv"), &formats::aggregate_csv(&table.result))?;
            println!("{} settings written to {}", table.axes.len(), out_dir.display());
        }
        Command::Histogram { population, problem, seed, bin_width, out } => {
            let pop = formats::read_population(&population).map_err(|e| core_error("--population", e))?;
            let data = problem.resolve()?.materialize(seed)?;
            if let Some(rule) = pop.classifiers.iter().find(|c| c.condition.len() != data.n_features) {
                return Err(CliError::Data {
                    flag: "--population",
                    message: format!(
                        "rule width {} does not match the dataset's {} features",
                        rule.condition.len(),
                        data.n_features
                    ),
                });
            }
            let bins = coverage_histogram(&pop, &data, bin_width).map_err(|e| core_error("--bin-width", e))?;
            write(&out, &formats::histogram_csv(&bins))?;
            println!("mean coverage {}", mean_coverage(&pop, &data));
        }
    }
    Ok(())
}

/// Reads `key = value` lines of a config file into `--key=value` flags
/// accepted by `subcommand`.
fn config_flags(path: &Path, subcommand: &str) -> Result<Vec<OsString>, CliError> {
    let data_err = |message: String| CliError::Data { flag: "--config", message };
    let text = fs::read_to_string(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    let cmd = Cli::command();
    let known = |c: &clap::Command, key: &str| c.get_arguments().any(|a| a.get_long() == Some(key));
    let target = cmd.find_subcommand(subcommand);
    let mut flags = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| data_err(format!("{}:{}: expected `key = value`", path.display(), i + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if key == "config" {
            continue;
        }
        match target {
            Some(sub) if known(sub, key) => flags.push(format!("--{key}={value}").into()),
            _ if cmd.get_subcommands().any(|s| known(s, key)) => {}
            _ => return Err(CliError::Usage(format!("--config: unknown key {key:?} at {}:{}", path.display(), i + 1))),
        }
    }
    Ok(flags)
}

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut iter = argv.iter().skip(1);
    while let Some(arg) = iter.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return iter.next().map(PathBuf::from);
        }
        if let Some(path) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(path));
        }
    }
    None
}

fn run_inner(argv: Vec<OsString>) -> Result<(), CliError> {
    let mut argv = argv;
    if let Some(path) = config_path(&argv) {
        let sub_pos = argv
            .iter()
            .skip(1)
            .position(|a| !a.to_string_lossy().starts_with('-'))
            .map(|p| p + 1)
            .filter(|&p| argv[p - 1] != "--config");
        if let Some(pos) = sub_pos {
            let sub = argv[pos].to_string_lossy().into_owned();
            let flags = config_flags(&path, &sub)?;
            argv.splice(pos + 1..pos + 1, flags);
        }
    }
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            return Err(CliError::Usage(e.render().to_string().trim_end().to_owned()));
        }
        Err(e) => {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            return Err(CliError::Usage(first.trim_start_matches("error: ").to_owned()));
        }
    };
    execute(cli)
}

/// Runs the tool on `argv` (program name first) and returns the exit
/// code: 0 on success, 1 for usage errors, 2 for data errors and 3 for
/// internal failures.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| run_inner(argv))).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(CliError::Internal(msg))
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
