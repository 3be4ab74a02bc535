//! Error types shared across the crate.

use crate::bo::RunTrace;

/// Errors produced by space construction, model fitting, and the optimizer.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// An axis definition violates its invariants (step, range, or grid
    /// alignment).
    #[error("axis {axis}: {reason}")]
    InvalidAxis {
        /// Name of the offending axis.
        axis: String,
        /// What was wrong with it.
        reason: String,
    },

    /// An index is out of range for its axis.
    #[error("index {index} out of range for axis {axis} (cardinality {cardinality})")]
    IndexOutOfRange {
        /// Name of the offending axis.
        axis: String,
        /// The rejected index.
        index: u32,
        /// Number of grid values on that axis.
        cardinality: u32,
    },

    /// More samples were requested than the grid contains.
    #[error("requested {requested} distinct points but the space holds only {available}")]
    CapacityExceeded {
        /// Number of points requested.
        requested: u64,
        /// Total points in the space.
        available: u64,
    },

    /// A dataset was given two entries with the same index tuple.
    #[error("duplicate design point at indices {indices:?}")]
    DuplicatePoint {
        /// The repeated index tuple.
        indices: [u32; 6],
    },

    /// The same point carried materially different objective values in a
    /// merge (the objective is deterministic, so this is data corruption).
    #[error(
        "inconsistent duplicate at indices {indices:?}: values {a} vs {b} differ by more than 1e-9"
    )]
    InconsistentDuplicate {
        /// The colliding index tuple.
        indices: [u32; 6],
        /// Value from one dataset.
        a: f64,
        /// Conflicting value from another dataset.
        b: f64,
    },

    /// An operation that needs observations was handed an empty dataset.
    #[error("dataset is empty")]
    EmptyDataset,

    /// Cholesky factorization kept failing after the jitter escalation
    /// ladder was exhausted.
    #[error("covariance matrix ill-conditioned: Cholesky failed even with jitter {final_jitter}")]
    IllConditioned {
        /// The last (largest) jitter tried.
        final_jitter: f64,
    },

    /// A kernel or acquisition parameter is outside its legal range.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter {
        /// Parameter name.
        name: &'static str,
        /// Why it was rejected.
        reason: String,
    },

    /// Length-scale selection had no usable candidate.
    #[error("no usable length scale: {reason}")]
    ThetaSelection {
        /// Why every candidate failed.
        reason: String,
    },

    /// Every grid point has already been evaluated.
    #[error("search space exhausted: no unvisited points remain")]
    SpaceExhausted,

    /// A run was configured to evaluate more points than the grid contains.
    #[error("evaluation budget {budget} exceeds the {total} points in the space")]
    BudgetExceedsSpace {
        /// Requested number of evaluations.
        budget: u64,
        /// Total points in the space.
        total: u64,
    },

    /// The geometry makes the transmission-line model meaningless.
    #[error("invalid geometry: {constraint}")]
    InvalidGeometry {
        /// The violated constraint, in terms of the design parameters.
        constraint: String,
    },

    /// Brute force was asked to enumerate more points than the configured cap.
    #[error("enumeration of {total} points exceeds the cap of {cap}")]
    EnumerationCapExceeded {
        /// Total points in the space.
        total: u64,
        /// Configured enumeration cap.
        cap: u64,
    },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// An aborted optimization run: the causing error plus whatever had been
/// evaluated before the abort.
#[derive(Debug, Clone, thiserror::Error)]
#[error("worker {worker_id} aborted after {} evaluations: {error}", partial_trace.len())]
pub struct RunFailure {
    /// Worker that failed (0 for solo runs and the final phase).
    pub worker_id: usize,
    /// The underlying error.
    pub error: Error,
    /// Evaluations completed before the abort.
    pub partial_trace: RunTrace,
}

impl RunFailure {
    pub(crate) fn new(worker_id: usize, error: Error, partial_trace: RunTrace) -> Self {
        Self { worker_id, error, partial_trace }
    }
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        Self { worker_id: 0, error, partial_trace: RunTrace::default() }
    }
}
