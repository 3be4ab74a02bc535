//! Exhaustive reference search and the statistical harnesses that measure
//! optimizer quality against it across many seeds.

use crate::bo::{self, BoConfig, Phase};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::pibo::{self, PiboConfig};
use crate::space::{DesignPoint, SearchSpace};

/// Largest space [`brute_force`] will enumerate.
pub const ENUMERATION_CAP: u64 = 2_000_000;

/// Relative tolerance used by [`benchmark`] to call a run a near-hit.
pub const NEAR_HIT_REL_TOL: f64 = 0.01;

/// Result of an exhaustive scan.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    /// The global minimizer (row-major-first among exact ties).
    pub best_point: DesignPoint,
    /// Its objective value.
    pub best_value: f64,
    /// All objective values in row-major order, when requested.
    pub table: Option<Vec<f64>>,
}

/// Evaluates every grid point and returns the global minimum. Ties go to
/// the lowest row-major index. Spaces beyond [`ENUMERATION_CAP`] are
/// refused; the first objective error aborts the scan.
pub fn brute_force<O: Objective + ?Sized>(
    space: &SearchSpace,
    objective: &O,
    want_table: bool,
) -> Result<BruteForceResult> {
    let total = space.total_count();
    if total > ENUMERATION_CAP {
        return Err(Error::EnumerationCapExceeded { total, cap: ENUMERATION_CAP });
    }
    let mut table = want_table.then(|| Vec::with_capacity(total as usize));
    let mut best: Option<(f64, DesignPoint)> = None;
    for point in space.enumerate_all() {
        let value = objective.evaluate(&point)?;
        if let Some(table) = table.as_mut() {
            table.push(value);
        }
        // Strict comparison keeps the earliest (lowest row-major) tie.
        if best.as_ref().is_none_or(|(bv, _)| value < *bv) {
            best = Some((value, point));
        }
    }
    let (best_value, best_point) = best.ok_or(Error::SpaceExhausted)?;
    Ok(BruteForceResult { best_point, best_value, table })
}

/// Per-seed outcome of a [`benchmark`] run.
#[derive(Debug, Clone, PartialEq)]
pub enum SeedOutcome {
    /// The run finished.
    Completed {
        /// Evaluations actually spent.
        total_evaluations: usize,
        /// Best value found.
        best_value: f64,
        /// Where it was found.
        best_point: DesignPoint,
        /// Evaluations until the incumbent first came within the relative
        /// tolerance of the global optimum, if it ever did.
        evals_to_within_tol: Option<usize>,
        /// Evaluations until the incumbent first equaled the global
        /// optimum exactly (same grid indices), if it ever did.
        first_hit_index: Option<usize>,
        /// Whether the final best point is the global optimizer.
        hit_global: bool,
        /// Best value at the end of the worker phase, before any
        /// final-phase step ran.
        phase1_best: f64,
    },
    /// The run aborted; the error is kept as text so records stay clonable.
    Failed {
        /// Display form of the failure.
        error: String,
    },
}

/// One benchmarked seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRecord {
    /// The master seed of the run.
    pub seed: u64,
    /// What happened.
    pub outcome: SeedOutcome,
}

/// Aggregates over the completed runs of a benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchAggregates {
    /// Completed runs whose final best value is within the tolerance of
    /// the global optimum, divided by completed runs.
    pub within_tol_rate: f64,
    /// Completed runs that ended exactly at the global optimizer, divided
    /// by completed runs.
    pub exact_hit_rate: f64,
    /// Median evaluations-to-within-tolerance among runs that got there.
    pub median_evals_to_tol: Option<f64>,
    /// Best-value quartiles (25th, 50th, 75th) over completed runs.
    pub best_value_quartiles: [f64; 3],
}

/// A benchmark over many master seeds against the exhaustive optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    /// Per-seed outcomes, in input seed order.
    pub records: Vec<SeedRecord>,
    /// The exhaustive global optimum value.
    pub oracle_value: f64,
    /// The exhaustive global optimizer.
    pub oracle_point: DesignPoint,
    /// Relative tolerance used for near-hit accounting.
    pub rel_tol: f64,
    /// Aggregates; absent when no run completed.
    pub aggregates: Option<BenchAggregates>,
}

/// Runs the parallel-initialized optimizer once per seed and scores each
/// run against the exhaustive optimum. A failing seed is recorded and the
/// benchmark continues.
pub fn benchmark<O: Objective + ?Sized>(
    space: &SearchSpace,
    objective: &O,
    config: &PiboConfig,
    seeds: &[u64],
) -> Result<BenchReport> {
    let oracle = brute_force(space, objective, false)?;
    let threshold = near_hit_threshold(oracle.best_value, NEAR_HIT_REL_TOL);

    let records = seeds
        .iter()
        .map(|&seed| {
            let mut cfg = config.clone();
            cfg.master_seed = seed;
            let outcome = match pibo::run_pibo(space, objective, &cfg) {
                Err(failure) => SeedOutcome::Failed { error: failure.to_string() },
                Ok(run) => {
                    let records = run.trace.records();
                    let evals_to_within_tol = records
                        .iter()
                        .position(|r| r.incumbent_best_value <= threshold)
                        .map(|i| i + 1);
                    let first_hit_index = records
                        .iter()
                        .position(|r| r.incumbent_best_point.indices() == oracle.best_point.indices())
                        .map(|i| i + 1);
                    let phase1_best = records
                        .iter()
                        .take_while(|r| r.phase != Phase::Final)
                        .map(|r| r.incumbent_best_value)
                        .last()
                        .unwrap_or(f64::INFINITY);
                    SeedOutcome::Completed {
                        total_evaluations: records.len(),
                        best_value: run.best_value,
                        hit_global: run.best_point.indices() == oracle.best_point.indices(),
                        best_point: run.best_point,
                        evals_to_within_tol,
                        first_hit_index,
                        phase1_best,
                    }
                }
            };
            SeedRecord { seed, outcome }
        })
        .collect::<Vec<_>>();

    let aggregates = compute_aggregates(&records);
    Ok(BenchReport {
        records,
        oracle_value: oracle.best_value,
        oracle_point: oracle.best_point,
        rel_tol: NEAR_HIT_REL_TOL,
        aggregates,
    })
}

/// The value below which a run counts as within `rel_tol` of `optimum`.
/// The band is relative to the optimum's magnitude.
pub fn near_hit_threshold(optimum: f64, rel_tol: f64) -> f64 {
    optimum + rel_tol * optimum.abs()
}

fn compute_aggregates(records: &[SeedRecord]) -> Option<BenchAggregates> {
    let completed: Vec<&SeedOutcome> = records
        .iter()
        .map(|r| &r.outcome)
        .filter(|o| matches!(o, SeedOutcome::Completed { .. }))
        .collect();
    if completed.is_empty() {
        return None;
    }
    let n = completed.len() as f64;
    let mut within = 0usize;
    let mut exact = 0usize;
    let mut tol_evals: Vec<f64> = Vec::new();
    let mut best_values: Vec<f64> = Vec::new();
    for outcome in &completed {
        if let SeedOutcome::Completed {
            best_value, evals_to_within_tol, hit_global, ..
        } = outcome
        {
            best_values.push(*best_value);
            if let Some(evals) = evals_to_within_tol {
                within += 1;
                tol_evals.push(*evals as f64);
            }
            if *hit_global {
                exact += 1;
            }
        }
    }
    best_values.sort_by(|a, b| a.partial_cmp(b).expect("objective values are finite"));
    tol_evals.sort_by(|a, b| a.partial_cmp(b).expect("eval counts are finite"));
    Some(BenchAggregates {
        within_tol_rate: within as f64 / n,
        exact_hit_rate: exact as f64 / n,
        median_evals_to_tol: if tol_evals.is_empty() { None } else { Some(quantile(&tol_evals, 0.5)) },
        best_value_quartiles: [
            quantile(&best_values, 0.25),
            quantile(&best_values, 0.5),
            quantile(&best_values, 0.75),
        ],
    })
}

/// Linear-interpolation quantile of an ascending slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let last = sorted.len() - 1;
    let pos = q * last as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// One seed's paired result in a budget-matched comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRecord {
    /// The seed both arms used.
    pub seed: u64,
    /// Best value of the single sequential run.
    pub solo_best: f64,
    /// Best value of the parallel-initialized run.
    pub pibo_best: f64,
}

/// Budget-matched comparison of a single sequential run against the
/// parallel-initialized strategy across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    /// Per-seed pairs, in input seed order.
    pub records: Vec<CompareRecord>,
    /// Mean best value of the sequential arm.
    pub solo_mean: f64,
    /// Mean best value of the parallel-initialized arm.
    pub pibo_mean: f64,
    /// Population variance of the sequential arm's best values.
    pub solo_variance: f64,
    /// Population variance of the parallel-initialized arm's best values.
    pub pibo_variance: f64,
    /// Seeds where the parallel-initialized arm found a strictly lower value.
    pub pibo_wins: usize,
    /// Seeds with exactly equal best values.
    pub ties: usize,
    /// Seeds where the sequential arm found a strictly lower value.
    pub solo_wins: usize,
}

/// Splits `total_budget` evaluations into a parallel-run shape: the final
/// phase gets roughly a thirteenth, the rest is divided evenly among
/// workers after their initial samples, and division leftovers go to the
/// final phase. A 260-evaluation budget at 4 workers of 10 initial samples
/// yields 4 x (10 + 50) and 20 final steps. The budget must cover at least
/// the workers' initial samples.
pub fn split_budget(total_budget: usize, workers: usize, init_samples: usize) -> Result<PiboConfig> {
    if workers == 0 || init_samples == 0 {
        return Err(Error::InvalidParameter {
            name: "split_budget",
            reason: "workers and init_samples must be at least 1".into(),
        });
    }
    if total_budget < workers * init_samples {
        return Err(Error::InvalidParameter {
            name: "total_budget",
            reason: format!(
                "{total_budget} evaluations cannot cover {workers} workers x {init_samples} initial samples"
            ),
        });
    }
    let nominal_final = (total_budget / 13).max(1).min(total_budget);
    let worker_budget = total_budget - nominal_final;
    let per_worker_total = worker_budget / workers;
    let iterations = per_worker_total.saturating_sub(init_samples);
    let final_iterations = total_budget - workers * (init_samples + iterations);
    let mut per_worker = BoConfig::with_seed(0);
    per_worker.init_samples = init_samples;
    per_worker.iterations = iterations;
    Ok(PiboConfig { workers, per_worker, final_iterations, master_seed: 0 })
}

/// Runs both arms at an equal `total_budget` for every seed: a single
/// sequential run, and the parallel-initialized strategy with the budget
/// split by [`split_budget`]. Worker collisions can leave the parallel arm
/// short of the nominal budget, which only handicaps it.
pub fn compare_solo_vs_pibo<O: Objective + ?Sized>(
    space: &SearchSpace,
    objective: &O,
    total_budget: usize,
    seeds: &[u64],
) -> Result<CompareReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter {
            name: "seeds",
            reason: "at least one seed is required".into(),
        });
    }
    let pibo_template = split_budget(total_budget, 4, 10)?;

    let records: Vec<CompareRecord> = seeds
        .iter()
        .map(|&seed| {
            let solo_cfg = BoConfig {
                init_samples: 10,
                iterations: total_budget - 10,
                seed,
                ..BoConfig::with_seed(seed)
            };
            let (solo_data, _) = bo::run_bo(space, objective, &solo_cfg)
                .map_err(|f| Error::InvalidParameter {
                    name: "solo_run",
                    reason: f.to_string(),
                })?;
            let solo_best = solo_data.best().expect("init_samples >= 1").1;

            let mut pibo_cfg = pibo_template.clone();
            pibo_cfg.master_seed = seed;
            let outcome = pibo::run_pibo_with(
                space,
                objective,
                &pibo_cfg,
                pibo::WorkerExecution::Sequential,
            )
            .map_err(|f| Error::InvalidParameter {
                name: "pibo_run",
                reason: f.to_string(),
            })?;
            Ok(CompareRecord { seed, solo_best, pibo_best: outcome.best_value })
        })
        .collect::<Result<Vec<_>>>()?;

    let solo: Vec<f64> = records.iter().map(|r| r.solo_best).collect();
    let pibo_vals: Vec<f64> = records.iter().map(|r| r.pibo_best).collect();
    let (solo_mean, solo_variance) = mean_variance(&solo);
    let (pibo_mean, pibo_variance) = mean_variance(&pibo_vals);
    let pibo_wins = records.iter().filter(|r| r.pibo_best < r.solo_best).count();
    let solo_wins = records.iter().filter(|r| r.solo_best < r.pibo_best).count();
    let ties = records.len() - pibo_wins - solo_wins;

    Ok(CompareReport {
        records,
        solo_mean,
        pibo_mean,
        solo_variance,
        pibo_variance,
        pibo_wins,
        ties,
        solo_wins,
    })
}

/// Mean and population variance.
fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, variance)
}
