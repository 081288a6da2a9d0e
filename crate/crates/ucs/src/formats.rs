//! Text formats: dataset files, population snapshots and the CSV outputs
//! of training runs, experiments, sweeps and coverage histograms.
//!
//! Floating-point values are written with Rust's shortest round-trip
//! formatting, so every CSV value parses back to the exact `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ucs_core::experiments::{ExperimentResult, HistogramBin, Metric, RunMetrics, SweepTable};
use ucs_core::{BitString, Dataset, Error, Population, Result, Sample};

pub const METRICS_HEADER: &str = "problem,strategy,run,seed,step,train_acc,test_acc,macro_rules,micro_rules";
pub const AGGREGATE_HEADER: &str = "problem,strategy,step,metric,mean,std";
pub const HISTOGRAM_HEADER: &str = "bin_lo,bin_hi,count";
pub const SWEEP_HEADER: &str = "axis,batch_size,threshold,step,mean,std";

/// Dataset file: a `n_features n_classes` header line, then one row per
/// sample with the features as a bit string and the class label.
pub fn dataset_to_string(dataset: &Dataset) -> String {
    let mut out = format!("{} {}\n", dataset.n_features, dataset.n_classes);
    for s in &dataset.samples {
        let _ = writeln!(out, "{} {}", s.features, s.class_label);
    }
    out
}

pub fn parse_dataset(name: &str, text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Parse("empty dataset file".into()))?;
    let numbers: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("line 1: bad header {header:?}"))))
        .collect::<Result<_>>()?;
    let [n_features, n_classes] = numbers[..] else {
        return Err(Error::Parse(format!("line 1: header needs `n_features n_classes`, found {header:?}")));
    };
    let mut samples = Vec::new();
    for (i, line) in lines {
        let bad = |what: &str| Error::Parse(format!("line {}: {what}", i + 1));
        let mut fields = line.split_whitespace();
        let (Some(bits), Some(class), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(bad("expected `<bits> <class>`"));
        };
        let features = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(bad("features must be 0/1")),
            })
            .collect::<Result<BitString>>()?;
        let class_label = class.parse().map_err(|_| bad("class label is not a number"))?;
        samples.push(Sample::new(features, class_label));
    }
    Dataset::new(name, n_features, n_classes, samples)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = read_text(path)?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_dataset(&name, &text).map_err(|e| prefix(path, e))
}

pub fn read_population(path: &Path) -> Result<Population> {
    Population::from_snapshot(&read_text(path)?).map_err(|e| prefix(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::ExternalData(format!("cannot read {}: {e}", path.display())))
}

fn prefix(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    }
}

fn metric_rows(out: &mut String, problem: &str, strategy: &str, run: usize, m: &RunMetrics) {
    for p in &m.points {
        let _ = writeln!(
            out,
            "{problem},{strategy},{run},{},{},{},{},{},{}",
            m.seed, p.step, p.train_acc, p.test_acc, p.macro_rules, p.micro_rules
        );
    }
}

/// Metrics CSV for a single trial.
pub fn run_metrics_csv(problem: &str, strategy: &str, run: usize, metrics: &RunMetrics) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    metric_rows(&mut out, problem, strategy, run, metrics);
    out
}

/// Metrics CSV with every run of every strategy.
pub fn runs_csv(result: &ExperimentResult) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for s in &result.strategies {
        let name = s.strategy.to_string();
        for (run, m) in s.runs.iter().enumerate() {
            metric_rows(&mut out, &result.problem, &name, run, m);
        }
    }
    out
}

pub fn aggregate_csv(result: &ExperimentResult) -> String {
    let mut out = format!("{AGGREGATE_HEADER}\n");
    for s in &result.strategies {
        for p in &s.aggregate {
            for metric in Metric::ALL {
                let stat = p.get(metric);
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    result.problem,
                    s.strategy,
                    p.step,
                    metric.name(),
                    stat.mean,
                    stat.std
                );
            }
        }
    }
    out
}

pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut out = format!("{HISTOGRAM_HEADER}\n");
    for b in bins {
        let _ = writeln!(out, "{},{},{}", b.lo, b.hi, b.count);
    }
    out
}

/// Mean and std of training accuracy per sweep setting and step.
pub fn sweep_csv(table: &SweepTable) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for (axis, s) in table.axes.iter().zip(&table.result.strategies) {
        let ucs_core::SelectionStrategy::BatchLexicase { batch_size, threshold } = s.strategy else {
            continue;
        };
        for p in &s.aggregate {
            let stat = p.get(Metric::TrainAcc);
            let _ = writeln!(out, "{},{batch_size},{threshold},{},{},{}", axis.name(), p.step, stat.mean, stat.std);
        }
    }
    out
}

/// `key,value` metadata written next to a sweep table.
pub fn sweep_meta_csv(table: &SweepTable, data_size: usize) -> String {
    let r = &table.recommended;
    format!(
        "key,value\nproblem,{}\ndata_size,{data_size}\nrecommended_batch_size_lo,{}\nrecommended_batch_size_hi,{}\nrecommended_threshold,{}\n",
        table.result.problem, r.batch_size_lo, r.batch_size_hi, r.threshold
    )
}
