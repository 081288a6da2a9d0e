//! Parallel execution of experiment plans on a rayon pool.
//!
//! Trials are independent and seeded per run, and results are reassembled
//! in plan order, so the output does not depend on the worker count.

use rayon::prelude::*;
use ucs_core::experiments::{
    collect_results, plan_jobs, run_trial, sweep_data_size, sweep_plan, ExperimentPlan, ExperimentResult,
    RecommendedRegion, SweepTable,
};
use ucs_core::{Error, Result};

/// Runs every trial of `plan` on `workers` threads (0 means one per core).
pub fn run_parallel(plan: &ExperimentPlan, workers: usize) -> Result<ExperimentResult> {
    plan.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter { name: "workers", reason: e.to_string() })?;
    let jobs = plan_jobs(plan);
    let finished = pool.install(|| {
        jobs.par_iter()
            .map(|job| run_trial(plan, &job.strategy, job.seed).map(|m| (*job, m)))
            .collect::<Result<Vec<_>>>()
    })?;
    collect_results(plan, finished)
}

pub fn sweep_parallel(
    plan: &ExperimentPlan,
    batch_sizes: &[usize],
    thresholds: &[f64],
    workers: usize,
) -> Result<SweepTable> {
    let (swept, axes) = sweep_plan(plan, batch_sizes, thresholds)?;
    let result = run_parallel(&swept, workers)?;
    Ok(SweepTable { axes, result, recommended: RecommendedRegion::for_data_size(sweep_data_size(plan)) })
}
