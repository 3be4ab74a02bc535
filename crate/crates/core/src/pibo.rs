//! Parallel-initialized BO: several independent small runs explore the
//! space from different seeds, their datasets are merged into one
//! canonically ordered dataset, and a single final loop continues from the
//! merged data with no fresh random initialization.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::bo::{self, BoConfig, Phase, RunTrace, ThetaPolicy};
use crate::error::{Error, Result, RunFailure};
use crate::gp::Dataset;
use crate::objective::Objective;
use crate::space::{DesignPoint, SearchSpace};

/// Value gap above which two evaluations of the same point are treated as
/// contradictory rather than as a benign duplicate.
const DUPLICATE_TOL: f64 = 1e-9;

/// Configuration of a parallel-initialized run.
#[derive(Debug, Clone, PartialEq)]
pub struct PiboConfig {
    /// Number of independent phase-1 workers (at least 1).
    pub workers: usize,
    /// Per-worker run shape; its `seed` field is ignored (worker seeds are
    /// derived from `master_seed`).
    pub per_worker: BoConfig,
    /// Acquisition steps of the final merged-data phase.
    pub final_iterations: usize,
    /// Seed from which all worker seeds and the final phase's seed derive.
    pub master_seed: u64,
}

impl PiboConfig {
    /// The default shape: 4 workers of 10 + 50 evaluations each, then 20
    /// final steps, 260 evaluations in total.
    pub fn with_master_seed(master_seed: u64) -> Self {
        let mut per_worker = BoConfig::with_seed(0);
        per_worker.init_samples = 10;
        per_worker.iterations = 50;
        Self { workers: 4, per_worker, final_iterations: 20, master_seed }
    }

    /// Checks all field invariants.
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::InvalidParameter {
                name: "workers",
                reason: "must be at least 1".into(),
            });
        }
        self.per_worker.validate()
    }

    /// Upper bound on evaluations: workers times their budget, plus the
    /// final steps. The realized count is lower when workers collide.
    pub fn max_evaluations(&self) -> u64 {
        self.workers as u64
            * (self.per_worker.init_samples as u64 + self.per_worker.iterations as u64)
            + self.final_iterations as u64
    }
}

/// How phase-1 workers are executed. Both orders produce byte-identical
/// results; the knob exists so that equality is testable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerExecution {
    /// Workers run on the rayon pool.
    Concurrent,
    /// Workers run one after another on the calling thread.
    Sequential,
}

/// Everything a parallel-initialized run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct PiboOutcome {
    /// All evaluations: the canonical merge of the worker datasets followed
    /// by the final phase's points in acquisition order.
    pub dataset: Dataset,
    /// Combined trace: worker evaluations in worker order, then the final
    /// phase, with indices and incumbents recomputed globally.
    pub trace: RunTrace,
    /// Best point found.
    pub best_point: DesignPoint,
    /// Its objective value.
    pub best_value: f64,
}

/// Derives the seed of worker `index` (1-based) from the master seed.
/// Distinct indices give distinct seeds.
pub fn derive_worker_seed(master_seed: u64, index: usize) -> u64 {
    assert!(index >= 1, "worker indices are 1-based");
    bo::split_seed(master_seed, index as u64 - 1)
}

/// Runs parallel-initialized BO with workers on the rayon pool.
pub fn run_pibo<O: Objective + ?Sized>(
    space: &SearchSpace,
    objective: &O,
    config: &PiboConfig,
) -> std::result::Result<PiboOutcome, RunFailure> {
    run_pibo_with(space, objective, config, WorkerExecution::Concurrent)
}

/// Runs parallel-initialized BO with the given worker execution order.
pub fn run_pibo_with<O: Objective + ?Sized>(
    space: &SearchSpace,
    objective: &O,
    config: &PiboConfig,
    execution: WorkerExecution,
) -> std::result::Result<PiboOutcome, RunFailure> {
    if let Err(error) = config.validate() {
        return Err(RunFailure::new(0, error, RunTrace::default()));
    }
    let budget = config.max_evaluations();
    if budget > space.total_count() {
        let error = Error::BudgetExceedsSpace { budget, total: space.total_count() };
        return Err(RunFailure::new(0, error, RunTrace::default()));
    }

    let worker_config = |index: usize| {
        let mut cfg = config.per_worker.clone();
        cfg.seed = derive_worker_seed(config.master_seed, index);
        cfg
    };
    let run_worker = |index: usize| {
        bo::run_bo_worker(space, objective, &worker_config(index), index)
    };

    // Worker results are collected in worker-id order regardless of
    // completion order, so the failure reported (and the merge input) is
    // independent of scheduling.
    let results: Vec<std::result::Result<(Dataset, RunTrace), RunFailure>> = match execution {
        WorkerExecution::Concurrent => {
            (1..=config.workers).into_par_iter().map(run_worker).collect()
        }
        WorkerExecution::Sequential => (1..=config.workers).map(run_worker).collect(),
    };
    let mut worker_runs = Vec::with_capacity(config.workers);
    for result in results {
        worker_runs.push(result?);
    }

    let datasets: Vec<Dataset> = worker_runs.iter().map(|(d, _)| d.clone()).collect();
    let merged = match merge_datasets(&datasets) {
        Ok(merged) => merged,
        Err(error) => return Err(RunFailure::new(0, error, RunTrace::default())),
    };

    // Combined trace so far: worker 1's evaluations, then worker 2's, and
    // so on, with incumbents recomputed across the concatenation.
    let mut trace = RunTrace::from_evals(worker_runs.iter().flat_map(|(_, trace)| {
        trace
            .records()
            .iter()
            .map(|r| (r.worker_id, r.phase, r.point.clone(), r.objective_value))
    }));

    let mut dataset = merged;
    let mut visited: std::collections::HashSet<[u32; 6]> =
        dataset.points().iter().map(|p| *p.indices()).collect();
    let final_seed = bo::split_seed(config.master_seed, config.workers as u64);
    let theta = match &config.per_worker.theta {
        ThetaPolicy::Fixed(theta) => ThetaPolicy::Fixed(*theta),
        // The merged dataset is a size jump; the loop re-selects the length
        // scale on entry, so the policy carries over unchanged.
        policy @ ThetaPolicy::MmlGrid { .. } => policy.clone(),
    };
    let loop_config = bo::LoopConfig {
        iterations: config.final_iterations,
        theta,
        acquisition: config.per_worker.acquisition,
        seed: final_seed,
        stall: config.per_worker.stall,
        worker_id: 0,
        phase: Phase::Final,
    };
    if let Err(error) =
        bo::acquisition_loop(space, objective, &mut dataset, &mut trace, &mut visited, &loop_config)
    {
        return Err(RunFailure::new(0, error, trace));
    }

    let (best_point, best_value) = dataset
        .best()
        .map(|(p, v)| (p.clone(), v))
        .expect("dataset non-empty: every worker ran at least one init sample");
    Ok(PiboOutcome { dataset, trace, best_point, best_value })
}

/// Merges worker datasets into one dataset in canonical order: sorted by
/// index tuple, which equals row-major linear order. Duplicate points are
/// kept once; duplicates whose values disagree by more than a hair are an
/// error, since the objective is deterministic.
pub fn merge_datasets(datasets: &[Dataset]) -> Result<Dataset> {
    let mut by_indices: BTreeMap<[u32; 6], (DesignPoint, f64)> = BTreeMap::new();
    for dataset in datasets {
        for (point, value) in dataset.iter() {
            match by_indices.get(point.indices()) {
                None => {
                    by_indices.insert(*point.indices(), (point.clone(), value));
                }
                Some((_, existing)) => {
                    if (existing - value).abs() > DUPLICATE_TOL {
                        return Err(Error::InconsistentDuplicate {
                            indices: *point.indices(),
                            a: *existing,
                            b: value,
                        });
                    }
                }
            }
        }
    }
    if by_indices.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut merged = Dataset::with_capacity(by_indices.len());
    for (_, (point, value)) in by_indices {
        merged.push(point, value)?;
    }
    Ok(merged)
}
