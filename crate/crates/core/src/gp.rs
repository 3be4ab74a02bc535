//! Gaussian-process surrogate: Matern-5/2 kernel over normalized grid
//! coordinates, numerically stable fit via Cholesky factorization, posterior
//! prediction, and log marginal likelihood for length-scale selection.
//!
//! Observed values are standardized per fit (zero mean, unit variance), so
//! the prior mean is 0 and the kernel variance 1 in standardized space; the
//! posterior is mapped back to original units. Observations are treated as
//! noise-free; the diagonal jitter exists only to keep the factorization
//! well conditioned and escalates tenfold per failure up to a hard cap.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::space::DesignPoint;

/// Default kernel length scale in normalized coordinates.
pub const DEFAULT_THETA: f64 = 0.5;
/// Starting diagonal jitter.
pub const BASE_JITTER: f64 = 1e-8;
/// Largest jitter the escalation ladder will try.
pub const MAX_JITTER: f64 = 1e-4;
/// Length-scale grid for marginal-likelihood selection.
pub const DEFAULT_THETA_GRID: [f64; 9] = [0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0, 1.5, 2.0];

/// Kernel hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    /// Length scale in normalized-coordinate units; must be positive.
    pub theta: f64,
    /// Starting diagonal jitter, in `[0, 1e-3]`.
    pub jitter: f64,
}

impl KernelParams {
    /// Params with the given length scale and the default starting jitter.
    pub fn with_theta(theta: f64) -> Self {
        Self { theta, jitter: BASE_JITTER }
    }

    /// Checks the parameter ranges.
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: format!("must be positive and finite, got {}", self.theta),
            });
        }
        if !(self.jitter >= 0.0 && self.jitter <= 1e-3) {
            return Err(Error::InvalidParameter {
                name: "jitter",
                reason: format!("must lie in [0, 1e-3], got {}", self.jitter),
            });
        }
        Ok(())
    }
}

impl Default for KernelParams {
    fn default() -> Self {
        Self { theta: DEFAULT_THETA, jitter: BASE_JITTER }
    }
}

/// Matern-5/2 covariance between two normalized coordinate vectors:
/// with `r` the Euclidean distance and `q = sqrt(5) r / theta`, returns
/// `(1 + q + q^2/3) exp(-q)`. Unit variance: exactly 1 at `r = 0`.
pub fn matern52(a: &[f64; 6], b: &[f64; 6], theta: f64) -> f64 {
    let mut sq = 0.0;
    for i in 0..6 {
        let d = a[i] - b[i];
        sq += d * d;
    }
    let q = 5.0f64.sqrt() * sq.sqrt() / theta;
    (1.0 + q + q * q / 3.0) * (-q).exp()
}

/// Dot product with a fixed four-accumulator summation order.
///
/// Every inner product in this crate (Cholesky, triangular solves, posterior
/// means, candidate scans) goes through this one function, so identical
/// inputs give bit-identical results on every code path.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail_a = chunks_a.remainder();
    let tail_b = chunks_b.remainder();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        lanes[0] += ca[0] * cb[0];
        lanes[1] += ca[1] * cb[1];
        lanes[2] += ca[2] * cb[2];
        lanes[3] += ca[3] * cb[3];
    }
    let mut tail = 0.0;
    for (x, y) in tail_a.iter().zip(tail_b) {
        tail += x * y;
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

/// One forward-substitution step: given row `i` of a lower-triangular factor
/// (as `row[..=i]`) and the already-solved prefix `v[..i]`, returns `v[i]`
/// for the right-hand side entry `rhs`.
pub(crate) fn forward_step(row: &[f64], prefix: &[f64], rhs: f64) -> f64 {
    let i = prefix.len();
    (rhs - dot(&row[..i], prefix)) / row[i]
}

/// Observed evaluations: grid points with their objective values. Holds no
/// duplicate index tuples by construction.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    points: Vec<DesignPoint>,
    values: Vec<f64>,
    seen: HashSet<[u32; 6]>,
}

impl Dataset {
    /// An empty dataset.
    pub fn new() -> Self {
        Self::default()
    }

    /// An empty dataset with reserved capacity.
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            points: Vec::with_capacity(capacity),
            values: Vec::with_capacity(capacity),
            seen: HashSet::with_capacity(capacity),
        }
    }

    /// Builds a dataset from `(point, value)` pairs, rejecting duplicates.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (DesignPoint, f64)>) -> Result<Self> {
        let mut dataset = Self::new();
        for (point, value) in pairs {
            dataset.push(point, value)?;
        }
        Ok(dataset)
    }

    /// Appends one observation. Fails on a repeated index tuple or a
    /// non-finite value.
    pub fn push(&mut self, point: DesignPoint, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidParameter {
                name: "objective value",
                reason: format!("must be finite, got {value} at {point:?}"),
            });
        }
        if !self.seen.insert(*point.indices()) {
            return Err(Error::DuplicatePoint { indices: *point.indices() });
        }
        self.points.push(point);
        self.values.push(value);
        Ok(())
    }

    /// Number of observations.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Whether the dataset holds no observations.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The observed points, in insertion order.
    pub fn points(&self) -> &[DesignPoint] {
        &self.points
    }

    /// The observed values, aligned with [`points`](Self::points).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Whether an index tuple has been observed.
    pub fn contains(&self, indices: &[u32; 6]) -> bool {
        self.seen.contains(indices)
    }

    /// The observation with the lowest value; the earliest one on ties.
    pub fn best(&self) -> Option<(&DesignPoint, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &value) in self.values.iter().enumerate() {
            if best.is_none_or(|(_, bv)| value < bv) {
                best = Some((i, value));
            }
        }
        best.map(|(i, value)| (&self.points[i], value))
    }

    /// Iterates `(point, value)` pairs in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&DesignPoint, f64)> {
        self.points.iter().zip(self.values.iter().copied())
    }
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points && self.values == other.values
    }
}

/// Posterior prediction at one point, in original objective units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    /// Predictive mean.
    pub mean: f64,
    /// Predictive variance, clamped to be non-negative.
    pub variance: f64,
}

impl Posterior {
    /// Predictive standard deviation.
    pub fn stddev(&self) -> f64 {
        self.variance.sqrt()
    }
}

pub(crate) fn posterior_from_parts(y_mean: f64, y_std: f64, mean_std: f64, vsq: f64) -> Posterior {
    let var_std = (1.0 - vsq).max(0.0);
    Posterior { mean: y_mean + y_std * mean_std, variance: y_std * y_std * var_std }
}

/// A fitted surrogate: standardization constants, the Cholesky factor of the
/// jittered covariance matrix, and the solved weights.
#[derive(Debug, Clone)]
pub struct GpModel {
    points: Vec<DesignPoint>,
    x: Vec<[f64; 6]>,
    y: Vec<f64>,
    y_mean: f64,
    y_std: f64,
    theta: f64,
    jitter: f64,
    /// Row-major `n x n` buffer; the lower triangle holds the factor.
    chol: Vec<f64>,
    /// `L^{-1} y_std`, reused for posterior means.
    w: Vec<f64>,
    alpha: Vec<f64>,
}

impl GpModel {
    /// Number of training observations.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false: fitting an empty dataset is an error.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Length scale the model was fit with.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// The jitter that actually succeeded (may exceed the requested start
    /// if escalation was needed).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Mean of the training values.
    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    /// Standard deviation of the training values (1 for constant data).
    pub fn y_std(&self) -> f64 {
        self.y_std
    }

    /// Weights solving `(K + jitter I) alpha = y_standardized`.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Training points, in dataset order.
    pub fn training_points(&self) -> &[DesignPoint] {
        &self.points
    }

    /// Training values (original units), aligned with the points.
    pub fn training_values(&self) -> &[f64] {
        &self.y
    }

    /// Lowest observed value and its point; earliest on ties.
    pub fn best_observed(&self) -> (&DesignPoint, f64) {
        let mut best = 0;
        for i in 1..self.y.len() {
            if self.y[i] < self.y[best] {
                best = i;
            }
        }
        (&self.points[best], self.y[best])
    }

    pub(crate) fn chol_row(&self, i: usize) -> &[f64] {
        let n = self.points.len();
        &self.chol[i * n..i * n + i + 1]
    }

    pub(crate) fn unit_coord(&self, i: usize) -> &[f64; 6] {
        &self.x[i]
    }

    pub(crate) fn mean_weights(&self) -> &[f64] {
        &self.w
    }

    /// Posterior at a grid point.
    pub fn posterior(&self, point: &DesignPoint) -> Posterior {
        self.posterior_unit(point.unit())
    }

    /// Posterior at arbitrary normalized coordinates.
    ///
    /// The mean is the kernel-weighted combination of training values,
    /// evaluated as `(L^{-1} k) . (L^{-1} y_std)` so that it shares every
    /// floating-point operation with the batch candidate scanner; the
    /// variance is `1 - |L^{-1} k|^2` clamped at zero, rescaled to original
    /// units.
    pub fn posterior_unit(&self, xq: &[f64; 6]) -> Posterior {
        let n = self.points.len();
        let mut v = Vec::with_capacity(n);
        let mut vsq = 0.0;
        for i in 0..n {
            let k = matern52(xq, &self.x[i], self.theta);
            let vi = forward_step(self.chol_row(i), &v, k);
            vsq += vi * vi;
            v.push(vi);
        }
        let mean_std = dot(&v, &self.w);
        posterior_from_parts(self.y_mean, self.y_std, mean_std, vsq)
    }

    /// Log marginal likelihood of the training data under this fit
    /// (standardized values, the fit's final jitter).
    pub fn log_marginal(&self) -> f64 {
        let n = self.points.len();
        let mut log_det_half = 0.0;
        for i in 0..n {
            log_det_half += self.chol[i * n + i].ln();
        }
        -0.5 * dot(&self.w, &self.w) - log_det_half
            - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Fits a GP to `dataset`.
///
/// Standardizes the values, assembles the Matern-5/2 covariance over the
/// points' normalized coordinates, and Cholesky-factorizes `K + jitter I`.
/// If factorization fails the jitter escalates tenfold (from 1e-8 if the
/// start was smaller) up to [`MAX_JITTER`]; running out of ladder is an
/// [`Error::IllConditioned`] carrying the last jitter tried.
pub fn fit(dataset: &Dataset, params: KernelParams) -> Result<GpModel> {
    params.validate()?;
    let n = dataset.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }

    let y = dataset.values().to_vec();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let variance = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / n as f64;
    let mut y_std = variance.sqrt();
    if y_std < 1e-12 {
        // Constant data: predict the constant instead of dividing by zero.
        y_std = 1.0;
    }
    let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_std).collect();

    let x: Vec<[f64; 6]> = dataset.points().iter().map(|p| *p.unit()).collect();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let k = matern52(&x[i], &x[j], params.theta);
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
    }

    let (chol, jitter) = cholesky_with_ladder(&gram, n, params.jitter)?;

    // w solves L w = y_std; alpha solves L^T alpha = w.
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        let wi = forward_step(&chol[i * n..i * n + i + 1], &w, ys[i]);
        w.push(wi);
    }
    let mut alpha = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = 0.0;
        for m in i + 1..n {
            sum += chol[m * n + i] * alpha[m];
        }
        alpha[i] = (w[i] - sum) / chol[i * n + i];
    }

    Ok(GpModel {
        points: dataset.points().to_vec(),
        x,
        y,
        y_mean,
        y_std,
        theta: params.theta,
        jitter,
        chol,
        w,
        alpha,
    })
}

/// Factorizes `gram + jitter I`, escalating the jitter tenfold on failure
/// (from 1e-8 when the start was smaller) up to [`MAX_JITTER`]. Returns the
/// factor together with the jitter that succeeded; running out of ladder is
/// an [`Error::IllConditioned`] carrying the last jitter tried.
pub(crate) fn cholesky_with_ladder(
    gram: &[f64],
    n: usize,
    start_jitter: f64,
) -> Result<(Vec<f64>, f64)> {
    // Exact decade rungs rather than repeated x10, which drifts in the
    // last bit and would make the final jitter seed-path dependent.
    const RUNGS: [f64; 5] = [1e-8, 1e-7, 1e-6, 1e-5, MAX_JITTER];
    if let Some(chol) = cholesky_lower(gram, n, start_jitter) {
        return Ok((chol, start_jitter));
    }
    let mut last = start_jitter;
    for &rung in RUNGS.iter().filter(|&&r| r > start_jitter) {
        last = rung;
        if let Some(chol) = cholesky_lower(gram, n, rung) {
            return Ok((chol, rung));
        }
    }
    Err(Error::IllConditioned { final_jitter: last })
}

/// Row-by-row Cholesky of `gram + jitter I`. Returns `None` when a pivot is
/// not strictly positive. Row `i` depends only on rows `0..i`, so the factor
/// of a dataset prefix is bitwise a prefix of the full factor; the candidate
/// scanner relies on exactly this to extend cached solves one row at a time.
fn cholesky_lower(gram: &[f64], n: usize, jitter: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let sum = dot(&l[i * n..i * n + j], &l[j * n..j * n + j]);
            let kij = gram[i * n + j] + if i == j { jitter } else { 0.0 };
            let rest = kij - sum;
            if i == j {
                if !(rest > 0.0 && rest.is_finite()) {
                    return None;
                }
                l[i * n + i] = rest.sqrt();
            } else {
                l[i * n + j] = rest / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Log marginal likelihood of `dataset` under `params`:
/// the Gaussian data likelihood on standardized values, computed through the
/// same Cholesky path as [`fit`] (including jitter escalation).
pub fn log_marginal_likelihood(dataset: &Dataset, params: KernelParams) -> Result<f64> {
    Ok(fit(dataset, params)?.log_marginal())
}

/// Picks the grid length scale maximizing the log marginal likelihood.
/// Ties break toward the smaller scale; candidates whose fits stay
/// ill-conditioned are skipped, and an error is returned only if every
/// candidate fails.
pub fn select_theta(dataset: &Dataset, theta_grid: &[f64]) -> Result<f64> {
    if theta_grid.is_empty() {
        return Err(Error::ThetaSelection { reason: "empty length-scale grid".into() });
    }
    let mut best: Option<(f64, f64)> = None;
    let mut last_error = None;
    for &theta in theta_grid {
        let params = KernelParams::with_theta(theta);
        match fit(dataset, params) {
            Ok(model) => {
                let lml = model.log_marginal();
                let better = match best {
                    None => true,
                    Some((best_lml, best_theta)) => {
                        lml > best_lml || (lml == best_lml && theta < best_theta)
                    }
                };
                if better {
                    best = Some((lml, theta));
                }
            }
            Err(err) => last_error = Some(err),
        }
    }
    match best {
        Some((_, theta)) => Ok(theta),
        None => Err(Error::ThetaSelection {
            reason: format!(
                "every candidate was rejected; last error: {}",
                last_error.map_or_else(|| "none".to_string(), |e| e.to_string())
            ),
        }),
    }
}
