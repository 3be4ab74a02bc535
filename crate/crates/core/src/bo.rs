//! The sequential Bayesian-optimization loop: draw random initial samples,
//! then repeatedly refit the surrogate on everything observed so far, pick
//! the acquisition winner among unvisited points, and evaluate it.

use std::collections::HashSet;

use crate::acquisition::{self, AcquisitionConfig, CandidateScanner, VisitedMask, CANDIDATE_CAP};
use crate::error::{Error, Result, RunFailure};
use crate::gp::{self, Dataset, KernelParams};
use crate::objective::Objective;
use crate::space::{DesignPoint, SearchSpace};

/// How the kernel length scale is chosen during a run.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaPolicy {
    /// One fixed length scale for the whole run.
    Fixed(f64),
    /// Maximum-marginal-likelihood selection over `grid`, re-run after
    /// every `refit_every` new observations (and at the start of the final
    /// phase of a parallel run, where the dataset size jumps).
    MmlGrid {
        /// Candidate length scales.
        grid: Vec<f64>,
        /// How many new observations between re-selections.
        refit_every: usize,
    },
}

impl ThetaPolicy {
    /// The default grid-selection policy.
    pub fn mml_default() -> Self {
        Self::MmlGrid { grid: gp::DEFAULT_THETA_GRID.to_vec(), refit_every: 10 }
    }

    /// Checks the policy's parameters.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Fixed(theta) => KernelParams::with_theta(*theta).validate(),
            Self::MmlGrid { grid, refit_every } => {
                if grid.is_empty() {
                    return Err(Error::ThetaSelection { reason: "empty length-scale grid".into() });
                }
                for &theta in grid {
                    KernelParams::with_theta(theta).validate()?;
                }
                if *refit_every == 0 {
                    return Err(Error::InvalidParameter {
                        name: "refit_every",
                        reason: "must be at least 1".into(),
                    });
                }
                Ok(())
            }
        }
    }
}

impl Default for ThetaPolicy {
    fn default() -> Self {
        Self::Fixed(gp::DEFAULT_THETA)
    }
}

/// Optional early-stop rule: stop when `patience` consecutive acquisitions
/// fail to improve the incumbent by more than `rel_tol` relatively.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StallRule {
    /// Number of consecutive non-improving acquisitions that triggers a stop.
    pub patience: usize,
    /// Relative improvement threshold.
    pub rel_tol: f64,
}

/// Configuration of one BO run.
#[derive(Debug, Clone, PartialEq)]
pub struct BoConfig {
    /// Number of random initial evaluations (at least 1).
    pub init_samples: usize,
    /// Number of acquisition steps after initialization.
    pub iterations: usize,
    /// Length-scale policy.
    pub theta: ThetaPolicy,
    /// Acquisition criterion.
    pub acquisition: AcquisitionConfig,
    /// Seed for initialization (and candidate subsets on oversized spaces).
    pub seed: u64,
    /// Optional stall rule; off by default.
    pub stall: Option<StallRule>,
}

impl BoConfig {
    /// A default-shaped solo config: 10 initial samples, 250 acquisitions.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            init_samples: 10,
            iterations: 250,
            theta: ThetaPolicy::default(),
            acquisition: AcquisitionConfig::default(),
            seed,
            stall: None,
        }
    }

    /// Checks all field invariants.
    pub fn validate(&self) -> Result<()> {
        if self.init_samples == 0 {
            return Err(Error::InvalidParameter {
                name: "init_samples",
                reason: "must be at least 1".into(),
            });
        }
        self.theta.validate()?;
        self.acquisition.validate()?;
        if let Some(rule) = &self.stall {
            if rule.patience == 0 {
                return Err(Error::InvalidParameter {
                    name: "stall.patience",
                    reason: "must be at least 1".into(),
                });
            }
            if !(rule.rel_tol >= 0.0 && rule.rel_tol.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "stall.rel_tol",
                    reason: format!("must be >= 0 and finite, got {}", rule.rel_tol),
                });
            }
        }
        Ok(())
    }
}

/// Which stage of a run produced an evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Random initialization.
    Init,
    /// Acquisition step of a worker or solo run.
    Acquire,
    /// Acquisition step of the final merged-data phase of a parallel run.
    Final,
}

impl Phase {
    /// Stable lowercase name used in serialized traces.
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Acquire => "acquire",
            Phase::Final => "final",
        }
    }
}

/// One evaluation in a run, with the incumbent after it.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Dense position in the trace, from 0.
    pub eval_index: usize,
    /// Worker that produced the evaluation; 0 for solo runs and the final
    /// phase of a parallel run.
    pub worker_id: usize,
    /// Stage that produced the evaluation.
    pub phase: Phase,
    /// The evaluated point.
    pub point: DesignPoint,
    /// Its objective value.
    pub objective_value: f64,
    /// Best value observed up to and including this record.
    pub incumbent_best_value: f64,
    /// The point achieving that best value.
    pub incumbent_best_point: DesignPoint,
}

/// The ordered evaluation log of a run. Incumbent values are non-increasing
/// and evaluation indices dense from 0, both by construction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    records: Vec<TraceRecord>,
}

impl RunTrace {
    /// The records in evaluation order.
    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    /// Number of evaluations logged.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Whether the trace is empty.
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Incumbent after the last evaluation, if any.
    pub fn best(&self) -> Option<(&DesignPoint, f64)> {
        self.records.last().map(|r| (&r.incumbent_best_point, r.incumbent_best_value))
    }

    /// Appends an evaluation, carrying the incumbent forward (a new point
    /// takes over only when strictly better).
    pub fn push_eval(&mut self, worker_id: usize, phase: Phase, point: DesignPoint, value: f64) {
        let (best_point, best_value) = match self.records.last() {
            Some(last) if last.incumbent_best_value <= value => {
                (last.incumbent_best_point.clone(), last.incumbent_best_value)
            }
            _ => (point.clone(), value),
        };
        self.records.push(TraceRecord {
            eval_index: self.records.len(),
            worker_id,
            phase,
            point,
            objective_value: value,
            incumbent_best_value: best_value,
            incumbent_best_point: best_point,
        });
    }

    /// Rebuilds a trace from bare evaluations, recomputing indices and
    /// incumbents in the given order.
    pub(crate) fn from_evals(
        evals: impl IntoIterator<Item = (usize, Phase, DesignPoint, f64)>,
    ) -> Self {
        let mut trace = Self::default();
        for (worker_id, phase, point, value) in evals {
            trace.push_eval(worker_id, phase, point, value);
        }
        trace
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The acquisition budget is used up.
    Budget,
    /// Every grid point has been evaluated.
    Exhausted,
    /// The stall rule fired.
    Stalled,
}

/// Verdict of [`stopping_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopCheck {
    /// Keep acquiring.
    Continue,
    /// Stop for the given reason.
    Stop(StopReason),
}

/// Decides whether a run with `config` should stop given its trace so far:
/// on budget (acquisition records have reached `config.iterations`), on
/// exhaustion (every one of `total_count` points evaluated), or on the
/// optional stall rule.
pub fn stopping_check(trace: &RunTrace, config: &BoConfig, total_count: u64) -> StopCheck {
    if trace.len() as u64 >= total_count {
        return StopCheck::Stop(StopReason::Exhausted);
    }
    let acquisitions = trace.records.iter().filter(|r| r.phase != Phase::Init).count();
    if acquisitions >= config.iterations {
        return StopCheck::Stop(StopReason::Budget);
    }
    if let Some(rule) = &config.stall {
        if trailing_stall(trace, rule) >= rule.patience {
            return StopCheck::Stop(StopReason::Stalled);
        }
    }
    StopCheck::Continue
}

/// Number of consecutive most-recent acquisition records that failed to
/// improve the incumbent by more than the rule's relative tolerance.
fn trailing_stall(trace: &RunTrace, rule: &StallRule) -> usize {
    let records = &trace.records;
    let mut count = 0;
    for i in (1..records.len()).rev() {
        if records[i].phase == Phase::Init {
            break;
        }
        let previous = records[i - 1].incumbent_best_value;
        let improvement = previous - records[i].incumbent_best_value;
        if improvement > rule.rel_tol * previous.abs() {
            break;
        }
        count += 1;
    }
    count
}

/// SplitMix64-style stream derivation: distinct streams give distinct seeds
/// (the pre-mix is injective in `stream`, the finalizer bijective).
pub(crate) fn split_seed(master: u64, stream: u64) -> u64 {
    let mut z = master.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream offset for per-iteration candidate-subset seeds, disjoint from
/// the small stream indices used for worker seeds.
const SUBSET_STREAM_BASE: u64 = 1 << 32;

/// Runs one BO: `init_samples` seeded random evaluations, then
/// `iterations` acquisition steps, refitting the surrogate each step.
///
/// Evaluates exactly `init_samples + iterations` distinct points (fewer
/// only if the space is exhausted or a stall rule fires) and returns the
/// dataset plus the evaluation trace. Deterministic for a given seed. An
/// objective failure aborts the run, returning the partial trace.
pub fn run_bo<O: Objective + ?Sized>(
    space: &SearchSpace,
    objective: &O,
    config: &BoConfig,
) -> std::result::Result<(Dataset, RunTrace), RunFailure> {
    run_bo_worker(space, objective, config, 0)
}

pub(crate) fn run_bo_worker<O: Objective + ?Sized>(
    space: &SearchSpace,
    objective: &O,
    config: &BoConfig,
    worker_id: usize,
) -> std::result::Result<(Dataset, RunTrace), RunFailure> {
    let fail = |error: Error, trace: RunTrace| RunFailure::new(worker_id, error, trace);
    if let Err(error) = config.validate() {
        return Err(fail(error, RunTrace::default()));
    }
    let budget = config.init_samples as u64 + config.iterations as u64;
    if budget > space.total_count() {
        return Err(fail(
            Error::BudgetExceedsSpace { budget, total: space.total_count() },
            RunTrace::default(),
        ));
    }

    let mut dataset = Dataset::with_capacity(budget as usize);
    let mut trace = RunTrace::default();
    let mut visited: HashSet<[u32; 6]> = HashSet::with_capacity(budget as usize);

    let init_points = match space.sample_uniform(config.init_samples, config.seed) {
        Ok(points) => points,
        Err(error) => return Err(fail(error, trace)),
    };
    for point in init_points {
        let value = match objective.evaluate(&point) {
            Ok(value) => value,
            Err(error) => return Err(fail(error, trace)),
        };
        trace.push_eval(worker_id, Phase::Init, point.clone(), value);
        visited.insert(*point.indices());
        if let Err(error) = dataset.push(point, value) {
            return Err(fail(error, trace));
        }
    }

    let loop_config = LoopConfig {
        iterations: config.iterations,
        theta: config.theta.clone(),
        acquisition: config.acquisition,
        seed: config.seed,
        stall: config.stall,
        worker_id,
        phase: Phase::Acquire,
    };
    match acquisition_loop(space, objective, &mut dataset, &mut trace, &mut visited, &loop_config) {
        Ok(()) => Ok((dataset, trace)),
        Err(error) => Err(fail(error, trace)),
    }
}

/// Parameters of one acquisition loop (shared by solo runs, phase-1
/// workers, and the final phase of a parallel run).
pub(crate) struct LoopConfig {
    pub iterations: usize,
    pub theta: ThetaPolicy,
    pub acquisition: AcquisitionConfig,
    pub seed: u64,
    pub stall: Option<StallRule>,
    pub worker_id: usize,
    pub phase: Phase,
}

/// The fit-select-evaluate loop, starting from whatever `dataset`,
/// `trace`, and `visited` already contain.
pub(crate) fn acquisition_loop<O: Objective + ?Sized>(
    space: &SearchSpace,
    objective: &O,
    dataset: &mut Dataset,
    trace: &mut RunTrace,
    visited: &mut HashSet<[u32; 6]>,
    config: &LoopConfig,
) -> Result<()> {
    let total = space.total_count();
    let full_scan = total <= CANDIDATE_CAP;
    let stride = dataset.len() + config.iterations;
    let mut scanner: Option<CandidateScanner> = None;
    let mut mask = full_scan.then(|| {
        let mut mask = VisitedMask::new(total as usize);
        for indices in visited.iter() {
            mask.set(space.linear_index(indices) as usize);
        }
        mask
    });

    // The budget/stall decision mirrors stopping_check over a trace that
    // contains only this loop's records; exhaustion is checked against the
    // visited set, which phase-3 loops inherit from the merge.
    let stop_config = BoConfig {
        init_samples: 1,
        iterations: config.iterations,
        theta: config.theta.clone(),
        acquisition: config.acquisition,
        seed: config.seed,
        stall: config.stall,
    };
    let mut local_trace = RunTrace::default();
    if let Some(last) = trace.records().last() {
        // Seed the stall window with the incumbent inherited from earlier
        // phases so relative improvements are judged against it.
        local_trace.push_eval(
            last.worker_id,
            Phase::Init,
            last.incumbent_best_point.clone(),
            last.incumbent_best_value,
        );
    }

    // Jitter is carried forward monotonically within the run: re-trying a
    // smaller jitter after an escalation would only re-fail and would
    // invalidate the scanner cache every iteration.
    let mut jitter = gp::BASE_JITTER;
    let mut theta_current = match &config.theta {
        ThetaPolicy::Fixed(theta) => *theta,
        ThetaPolicy::MmlGrid { grid, .. } => gp::select_theta(dataset, grid)?,
    };
    let mut last_theta_selection = dataset.len();

    for step in 0..config.iterations {
        if visited.len() as u64 >= total {
            break;
        }
        match stopping_check(&local_trace, &stop_config, u64::MAX) {
            StopCheck::Continue => {}
            StopCheck::Stop(_) => break,
        }

        if let ThetaPolicy::MmlGrid { grid, refit_every } = &config.theta {
            if dataset.len() - last_theta_selection >= *refit_every {
                theta_current = gp::select_theta(dataset, grid)?;
                last_theta_selection = dataset.len();
            }
        }

        let model = gp::fit(dataset, KernelParams { theta: theta_current, jitter })?;
        jitter = model.jitter();

        let point = if full_scan {
            let scanner = scanner
                .get_or_insert_with(|| CandidateScanner::new(space, stride));
            scanner.sync(&model);
            let mask = mask.as_mut().expect("mask exists in full-scan mode");
            match scanner.select(&model, mask, &config.acquisition) {
                Some((linear, _)) => space.point_from_linear(linear),
                None => break,
            }
        } else {
            let subset_seed = split_seed(config.seed, SUBSET_STREAM_BASE + step as u64);
            match acquisition::select_next(
                &model,
                space,
                visited,
                &config.acquisition,
                subset_seed,
            ) {
                Ok(point) => point,
                Err(Error::SpaceExhausted) => break,
                Err(error) => return Err(error),
            }
        };

        let value = objective.evaluate(&point)?;
        if let Some(mask) = mask.as_mut() {
            mask.set(space.linear_index(point.indices()) as usize);
        }
        visited.insert(*point.indices());
        trace.push_eval(config.worker_id, config.phase, point.clone(), value);
        local_trace.push_eval(config.worker_id, config.phase, point.clone(), value);
        dataset.push(point, value)?;
    }
    Ok(())
}
