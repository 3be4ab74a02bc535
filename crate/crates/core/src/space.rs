//! The discrete six-parameter design grid.
//!
//! Points are identified by integer indices, never by floats: index tuples
//! make deduplication and determinism exact, and physical values are decoded
//! on demand as `min + index * step`. Normalized coordinates (index divided
//! by cardinality minus one) map the lattice into the unit hypercube so one
//! kernel length scale is meaningful across axes with different units.

use std::fmt;
use std::hash::{Hash, Hasher};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Canonical axis order: trace width, trace spacing, trace thickness, core
/// height, total dielectric height, dielectric constant. Fixed and part of
/// every serialized format.
pub const AXIS_NAMES: [&str; 6] = ["W", "S", "T", "H1", "H2", "er"];

/// One grid axis: an inclusive range of physical values with a fixed step.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisSpec {
    name: String,
    min: f64,
    max: f64,
    step: f64,
    cardinality: u32,
}

impl AxisSpec {
    /// Validates the axis and computes its cardinality.
    ///
    /// `min + (cardinality - 1) * step` must land on `max` within 1e-9
    /// relative tolerance, so the range is an exact multiple of the step.
    pub fn new(name: impl Into<String>, min: f64, max: f64, step: f64) -> Result<Self> {
        let name = name.into();
        let invalid = |reason: String| Error::InvalidAxis { axis: name.clone(), reason };
        if name.is_empty() {
            return Err(Error::InvalidAxis {
                axis: "<unnamed>".into(),
                reason: "axis name must be non-empty".into(),
            });
        }
        if !(min.is_finite() && max.is_finite() && step.is_finite()) {
            return Err(invalid("min, max, and step must be finite".into()));
        }
        if step <= 0.0 {
            return Err(invalid(format!("step must be > 0, got {step}")));
        }
        if max < min {
            return Err(invalid(format!("max {max} is below min {min}")));
        }
        let steps = ((max - min) / step).round();
        if steps > (u32::MAX - 1) as f64 {
            return Err(invalid(format!("{steps} steps exceed the supported axis size")));
        }
        let scale = min.abs().max(max.abs()).max(1.0);
        let landed = min + steps * step;
        if (landed - max).abs() > 1e-9 * scale {
            return Err(invalid(format!(
                "range is not a whole number of steps: min + {steps}*step = {landed}, max = {max}"
            )));
        }
        Ok(Self { name, min, max, step, cardinality: steps as u32 + 1 })
    }

    /// Axis name.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Lower bound of the range.
    pub fn min(&self) -> f64 {
        self.min
    }

    /// Upper bound of the range.
    pub fn max(&self) -> f64 {
        self.max
    }

    /// Grid step.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of grid values on this axis.
    pub fn cardinality(&self) -> u32 {
        self.cardinality
    }

    /// Physical value at `index`. Exact for binary-representable steps.
    pub fn value(&self, index: u32) -> f64 {
        self.min + index as f64 * self.step
    }

    fn unit(&self, index: u32) -> f64 {
        if self.cardinality == 1 {
            0.0
        } else {
            index as f64 / (self.cardinality - 1) as f64
        }
    }
}

/// The full six-axis grid, in canonical axis order.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    axes: [AxisSpec; 6],
    total: u64,
}

impl SearchSpace {
    /// Builds a space from six validated axes.
    pub fn new(axes: [AxisSpec; 6]) -> Result<Self> {
        let total = axes.iter().map(|a| a.cardinality as u64).product();
        Ok(Self { axes, total })
    }

    /// The default design grid: W and S from 3 to 8 mil in 0.25 mil steps,
    /// T from 1.1 to 1.3 mil in 0.1 steps, H1 from 3 to 5 mil in 0.5 steps,
    /// H2 from 8 to 10 mil in 0.5 steps, er from 3.6 to 3.8 in 0.1 steps;
    /// 99,225 points in total. Every point satisfies H1 + T < H2, so the
    /// stripline model is defined on the whole grid.
    pub fn default_stripline_grid() -> Self {
        let spec = [
            ("W", 3.0, 8.0, 0.25),
            ("S", 3.0, 8.0, 0.25),
            ("T", 1.1, 1.3, 0.1),
            ("H1", 3.0, 5.0, 0.5),
            ("H2", 8.0, 10.0, 0.5),
            ("er", 3.6, 3.8, 0.1),
        ];
        let axes = spec.map(|(name, min, max, step)| {
            AxisSpec::new(name, min, max, step).expect("default grid axes are valid")
        });
        Self::new(axes).expect("default grid is valid")
    }

    /// The six axes in canonical order.
    pub fn axes(&self) -> &[AxisSpec; 6] {
        &self.axes
    }

    /// Total number of grid points (product of axis cardinalities).
    pub fn total_count(&self) -> u64 {
        self.total
    }

    /// Builds the point at `indices`, decoding physical values and
    /// normalized coordinates.
    pub fn point_from_indices(&self, indices: [u32; 6]) -> Result<DesignPoint> {
        for (axis, &index) in self.axes.iter().zip(indices.iter()) {
            if index >= axis.cardinality {
                return Err(Error::IndexOutOfRange {
                    axis: axis.name.clone(),
                    index,
                    cardinality: axis.cardinality,
                });
            }
        }
        Ok(self.decode(indices))
    }

    fn decode(&self, indices: [u32; 6]) -> DesignPoint {
        let mut values = [0.0; 6];
        let mut unit = [0.0; 6];
        for i in 0..6 {
            values[i] = self.axes[i].value(indices[i]);
            unit[i] = self.axes[i].unit(indices[i]);
        }
        DesignPoint { indices, values, unit }
    }

    /// Normalized unit-hypercube coordinates of `point`:
    /// `index / (cardinality - 1)` per axis, 0 for degenerate axes.
    pub fn normalize(&self, point: &DesignPoint) -> [f64; 6] {
        let mut unit = [0.0; 6];
        for (u, (axis, &index)) in unit.iter_mut().zip(self.axes.iter().zip(&point.indices)) {
            *u = axis.unit(index);
        }
        unit
    }

    /// Row-major linear index of an index tuple (W slowest, er fastest).
    pub fn linear_index(&self, indices: &[u32; 6]) -> u64 {
        let mut linear = 0u64;
        for (axis, &index) in self.axes.iter().zip(indices) {
            linear = linear * axis.cardinality as u64 + index as u64;
        }
        linear
    }

    /// Inverse of [`linear_index`](Self::linear_index). `linear` must be
    /// below `total_count`.
    pub fn point_from_linear(&self, linear: u64) -> DesignPoint {
        debug_assert!(linear < self.total);
        let mut rest = linear;
        let mut indices = [0u32; 6];
        for i in (0..6).rev() {
            let card = self.axes[i].cardinality as u64;
            indices[i] = (rest % card) as u32;
            rest /= card;
        }
        self.decode(indices)
    }

    /// Draws `n` distinct points uniformly without replacement,
    /// reproducibly from `seed`.
    pub fn sample_uniform(&self, n: usize, seed: u64) -> Result<Vec<DesignPoint>> {
        if n as u64 > self.total {
            return Err(Error::CapacityExceeded { requested: n as u64, available: self.total });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let drawn = rand::seq::index::sample(&mut rng, self.total as usize, n);
        Ok(drawn.into_iter().map(|linear| self.point_from_linear(linear as u64)).collect())
    }

    /// Iterates every grid point once, in row-major index order
    /// (W slowest, er fastest).
    pub fn enumerate_all(&self) -> PointIter<'_> {
        PointIter { space: self, next: 0 }
    }

    /// The 1-step grid neighbors of `point` (up to 12, two per axis).
    pub(crate) fn neighbors(&self, point: &DesignPoint) -> Vec<DesignPoint> {
        let mut out = Vec::with_capacity(12);
        for i in 0..6 {
            let idx = point.indices[i];
            if idx > 0 {
                let mut indices = point.indices;
                indices[i] = idx - 1;
                out.push(self.decode(indices));
            }
            if idx + 1 < self.axes[i].cardinality {
                let mut indices = point.indices;
                indices[i] = idx + 1;
                out.push(self.decode(indices));
            }
        }
        out
    }
}

/// Row-major iterator over all points of a space.
pub struct PointIter<'a> {
    space: &'a SearchSpace,
    next: u64,
}

impl Iterator for PointIter<'_> {
    type Item = DesignPoint;

    fn next(&mut self) -> Option<DesignPoint> {
        if self.next >= self.space.total {
            return None;
        }
        let point = self.space.point_from_linear(self.next);
        self.next += 1;
        Some(point)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let remaining = (self.space.total - self.next) as usize;
        (remaining, Some(remaining))
    }
}

impl ExactSizeIterator for PointIter<'_> {}

/// One grid point. The index tuple is the identity; physical values and
/// normalized coordinates are pure functions of the indices, decoded at
/// construction and never stored independently of them.
#[derive(Clone)]
pub struct DesignPoint {
    indices: [u32; 6],
    values: [f64; 6],
    unit: [f64; 6],
}

impl DesignPoint {
    /// Per-axis grid indices, in canonical axis order.
    pub fn indices(&self) -> &[u32; 6] {
        &self.indices
    }

    /// Physical values (W, S, T, H1, H2 in mils; er dimensionless).
    pub fn values(&self) -> &[f64; 6] {
        &self.values
    }

    /// Normalized unit-hypercube coordinates.
    pub fn unit(&self) -> &[f64; 6] {
        &self.unit
    }
}

impl PartialEq for DesignPoint {
    fn eq(&self, other: &Self) -> bool {
        self.indices == other.indices
    }
}

impl Eq for DesignPoint {}

impl Hash for DesignPoint {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.indices.hash(state);
    }
}

impl fmt::Debug for DesignPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DesignPoint({:?} -> ", self.indices)?;
        for (i, (name, value)) in AXIS_NAMES.iter().zip(self.values.iter()).enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{name}={value}")?;
        }
        write!(f, ")")
    }
}
