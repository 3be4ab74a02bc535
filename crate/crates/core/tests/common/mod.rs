//! Helpers shared by the integration suites: small-space builders, an
//! independent dense-algebra reference for the surrogate, and the pinned
//! exhaustive-search fixture.

#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use pibo_core::{
    AxisSpec, Dataset, DesignPoint, ObjectiveSpec, SearchSpace, StriplineObjective, AXIS_NAMES,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// The corrected production grid (99,225 points).
pub fn stripline_space() -> SearchSpace {
    SearchSpace::default_stripline_grid()
}

/// The default analytic objective (85 ohm target, loss minimized).
pub fn stripline_objective() -> StriplineObjective {
    StriplineObjective::new(ObjectiveSpec::default()).unwrap()
}

/// A unit-step space with the given per-axis cardinalities.
pub fn test_space(cards: [u32; 6]) -> SearchSpace {
    let axes: [AxisSpec; 6] = std::array::from_fn(|i| {
        AxisSpec::new(AXIS_NAMES[i], 0.0, (cards[i] - 1) as f64, 1.0).unwrap()
    });
    SearchSpace::new(axes).unwrap()
}

/// A seeded dataset of distinct points with values in [60, 100).
pub fn random_dataset(space: &SearchSpace, n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    let points = space.sample_uniform(n, seed).unwrap();
    Dataset::from_pairs(points.into_iter().map(|p| (p, rng.random::<f64>() * 40.0 + 60.0)))
        .unwrap()
}

/// Reference surrogate computed with dense linear algebra: explicit Gram
/// matrix inverse instead of Cholesky solves. Deliberately a different
/// algorithm from the production path so agreement is meaningful.
pub struct DenseGp {
    x: Vec<[f64; 6]>,
    k_inv: DMatrix<f64>,
    alpha: DVector<f64>,
    y_mean: f64,
    y_scale: f64,
    theta: f64,
}

impl DenseGp {
    pub fn fit(dataset: &Dataset, theta: f64, jitter: f64) -> Self {
        let n = dataset.len();
        let x: Vec<[f64; 6]> = dataset.points().iter().map(|p| *p.unit()).collect();
        let y_mean = dataset.values().iter().sum::<f64>() / n as f64;
        let var =
            dataset.values().iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / n as f64;
        let y_scale = if var.sqrt() < 1e-12 { 1.0 } else { var.sqrt() };
        let y_std =
            DVector::from_iterator(n, dataset.values().iter().map(|v| (v - y_mean) / y_scale));
        let gram = DMatrix::from_fn(n, n, |i, j| {
            pibo_core::matern52(&x[i], &x[j], theta) + if i == j { jitter } else { 0.0 }
        });
        let k_inv = gram.try_inverse().expect("reference Gram matrix is invertible");
        let alpha = &k_inv * &y_std;
        Self { x, k_inv, alpha, y_mean, y_scale, theta }
    }

    /// Predictive mean and variance at a unit-cube query point, in original
    /// units (the variance carries the standardization scale squared).
    pub fn mean_var(&self, xq: &[f64; 6]) -> (f64, f64) {
        let n = self.x.len();
        let k_star =
            DVector::from_iterator(n, self.x.iter().map(|xi| pibo_core::matern52(xi, xq, self.theta)));
        let mean_std = k_star.dot(&self.alpha);
        let variance = 1.0 - (k_star.transpose() * &self.k_inv * &k_star)[(0, 0)];
        (self.y_mean + self.y_scale * mean_std, self.y_scale * self.y_scale * variance.max(0.0))
    }

    pub fn y_scale(&self) -> f64 {
        self.y_scale
    }
}

/// The pinned exhaustive-search golden for the corrected grid.
pub struct BruteFixture {
    pub indices: [u32; 6],
    pub objective: f64,
    pub z_diff: f64,
    pub loss: f64,
}

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corrected_grid_brute.json")
}

pub fn load_brute_fixture() -> BruteFixture {
    let text = std::fs::read_to_string(fixture_path()).expect("fixture file exists");
    let json: serde_json::Value = serde_json::from_str(&text).expect("fixture parses");
    let indices: Vec<u32> = json["indices"]
        .as_array()
        .expect("indices array")
        .iter()
        .map(|v| v.as_u64().expect("index") as u32)
        .collect();
    BruteFixture {
        indices: indices.try_into().expect("six indices"),
        objective: json["objective"].as_f64().expect("objective"),
        z_diff: json["z_diff"].as_f64().expect("z_diff"),
        loss: json["loss"].as_f64().expect("loss"),
    }
}

/// Rewrites the fixture from a freshly computed optimum. Only invoked when
/// the REGEN_GOLDENS environment variable is set.
pub fn save_brute_fixture(space: &SearchSpace, point: &DesignPoint, objective: f64) {
    let spec = ObjectiveSpec::default();
    let metrics = pibo_core::line_metrics(point, &spec).unwrap();
    let grid = space
        .axes()
        .iter()
        .map(|a| format!("{} {}-{}/{}", a.name(), a.min(), a.max(), a.step()))
        .collect::<Vec<_>>()
        .join(", ");
    let json = serde_json::json!({
        "grid": grid,
        "indices": point.indices().to_vec(),
        "objective": objective,
        "z_diff": metrics.z_diff,
        "loss": metrics.loss,
    });
    std::fs::write(fixture_path(), serde_json::to_string_pretty(&json).unwrap() + "\n")
        .expect("fixture is writable");
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let last = sorted.len() - 1;
    let pos = q * last as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}
