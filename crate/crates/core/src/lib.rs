//! Grid-constrained Bayesian optimization of differential stripline
//! geometry, with a parallel-initialization strategy: several independent
//! small runs seed one final run on their merged data.
//!
//! The crate is organized around six pieces:
//!
//! * [`space`]: the six-axis discrete design grid and its point type.
//! * [`objective`]: closed-form differential impedance and loss, combined
//!   into the scalar optimization target.
//! * [`gp`]: a Gaussian-process surrogate with a Matern-5/2 kernel and
//!   marginal-likelihood length-scale selection.
//! * [`acquisition`]: lower-confidence-bound and improvement-based
//!   criteria, and exact next-point selection over the grid.
//! * [`bo`] and [`pibo`]: the sequential loop and the parallel-initialized
//!   orchestration on top of it.
//! * [`bench`]: exhaustive reference search plus multi-seed quality and
//!   budget-matched comparison harnesses.
//!
//! All randomness flows from explicit seeds; results are reproducible
//! bit-for-bit across runs and across worker scheduling.

#![warn(missing_docs)]

pub mod acquisition;
pub mod bench;
pub mod bo;
pub mod error;
pub mod gp;
pub mod objective;
pub mod pibo;
pub mod space;

pub use acquisition::{
    ei_score, lcb_score, normal_cdf, normal_pdf, pi_score, select_next, AcquisitionConfig,
    AcquisitionKind, CANDIDATE_CAP, DEFAULT_TAU, SUBSET_SIZE,
};
pub use bench::{
    benchmark, brute_force, compare_solo_vs_pibo, near_hit_threshold, split_budget,
    BenchAggregates, BenchReport, BruteForceResult, CompareRecord, CompareReport, SeedOutcome,
    SeedRecord, ENUMERATION_CAP, NEAR_HIT_REL_TOL,
};
pub use bo::{
    run_bo, stopping_check, BoConfig, Phase, RunTrace, StallRule, StopCheck, StopReason,
    ThetaPolicy, TraceRecord,
};
pub use error::{Error, Result, RunFailure};
pub use gp::{
    fit, log_marginal_likelihood, matern52, select_theta, Dataset, GpModel, KernelParams,
    Posterior, BASE_JITTER, DEFAULT_THETA, DEFAULT_THETA_GRID, MAX_JITTER,
};
pub use objective::{
    line_metrics, line_metrics_from_values, objective_from_metrics, objective_value, LineMetrics,
    Objective, ObjectiveMode, ObjectiveSpec, StriplineObjective,
};
pub use pibo::{
    derive_worker_seed, merge_datasets, run_pibo, run_pibo_with, PiboConfig, PiboOutcome,
    WorkerExecution,
};
pub use space::{AxisSpec, DesignPoint, SearchSpace, AXIS_NAMES};
