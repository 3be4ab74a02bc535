//! Analytic objective: closed-form differential impedance and per-inch loss
//! of an edge-coupled offset stripline, combined into a scalar score.
//!
//! This is a deterministic, smooth substitute for a 2-D field solver. The
//! optimizer only sees the [`Objective`] trait, so a real solver client can
//! replace this module without touching anything else. All lengths are in
//! mils, the loss frequency in GHz; loss is a positive dB-per-inch magnitude,
//! which is what makes `loss_weight * loss` meaningful as a penalty.

use crate::error::{Error, Result};
use crate::space::DesignPoint;

/// Which form the scalar objective takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveMode {
    /// `|z_diff - Z_T| + loss_weight * loss`: hit the impedance target with
    /// as little loss as possible.
    MinimizeLoss,
    /// `|z_diff - Z_T| + loss_weight / loss`: hit the target while driving
    /// loss up (the lossiest matched line).
    MaximizeLoss,
}

/// Parameters of the line model and of the scalar objective built on it.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    /// Target differential impedance in ohms.
    pub z_t: f64,
    /// Objective form.
    pub mode: ObjectiveMode,
    /// Weight coupling the loss term to the impedance error term.
    pub loss_weight: f64,
    /// Frequency at which loss is evaluated, in GHz.
    pub f0_ghz: f64,
    /// Dielectric loss tangent.
    pub tan_delta: f64,
    /// Coefficient of the conductor-loss term.
    pub conductor_coeff: f64,
}

impl ObjectiveSpec {
    /// Default loss weight when minimizing loss.
    pub const MINIMIZE_LOSS_WEIGHT: f64 = 100.0;
    /// Default loss weight when maximizing loss.
    pub const MAXIMIZE_LOSS_WEIGHT: f64 = 40.0;

    /// Default spec for `mode`: 85 ohm target, 4 GHz, tan_delta 0.02,
    /// conductor coefficient 36, and the mode's conventional loss weight.
    pub fn for_mode(mode: ObjectiveMode) -> Self {
        let loss_weight = match mode {
            ObjectiveMode::MinimizeLoss => Self::MINIMIZE_LOSS_WEIGHT,
            ObjectiveMode::MaximizeLoss => Self::MAXIMIZE_LOSS_WEIGHT,
        };
        Self { z_t: 85.0, mode, loss_weight, f0_ghz: 4.0, tan_delta: 0.02, conductor_coeff: 36.0 }
    }

    /// Checks the numeric ranges of all fields.
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, name: &'static str, reason: String| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, reason })
            }
        };
        check(self.z_t > 0.0, "z_t", format!("must be > 0, got {}", self.z_t))?;
        check(self.f0_ghz > 0.0, "f0_ghz", format!("must be > 0, got {}", self.f0_ghz))?;
        check(
            self.tan_delta > 0.0 && self.tan_delta < 0.1,
            "tan_delta",
            format!("must be in (0, 0.1), got {}", self.tan_delta),
        )?;
        check(
            self.loss_weight > 0.0,
            "loss_weight",
            format!("must be > 0, got {}", self.loss_weight),
        )?;
        check(
            self.conductor_coeff > 0.0,
            "conductor_coeff",
            format!("must be > 0, got {}", self.conductor_coeff),
        )
    }
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        Self::for_mode(ObjectiveMode::MinimizeLoss)
    }
}

/// Electrical figures of one geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMetrics {
    /// Differential characteristic impedance in ohms.
    pub z_diff: f64,
    /// Insertion-loss magnitude in dB per inch at the configured frequency.
    pub loss: f64,
}

/// Computes the line metrics from raw parameter values
/// `[W, S, T, H1, H2, er]`, which need not lie on any grid.
///
/// The model: the trace sits off-center between planes spaced `b = H2`
/// apart, `H1` below it and `h_up = H2 - H1 - T` above it. Each half-space
/// contributes a symmetric-stripline impedance
/// `Zss(s) = (60/sqrt(er)) * ln(4 s / (0.67 pi (0.8 W + T)))` evaluated at
/// the effective plane spacing `2 h + T`; the two halves combine in
/// parallel, and edge coupling scales the differential impedance by
/// `2 (1 - 0.347 exp(-2.9 S / b))`. Loss is the sum of a dielectric term
/// `2.3 f0 sqrt(er) tan_delta` and a conductor term
/// `conductor_coeff * sqrt(f0) / (Z0 W)`.
pub fn line_metrics_from_values(values: &[f64; 6], spec: &ObjectiveSpec) -> Result<LineMetrics> {
    let [w, s, t, h1, h2, er] = *values;
    for (value, name) in values.iter().zip(crate::space::AXIS_NAMES) {
        if !(*value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidGeometry {
                constraint: format!("{name} must be positive and finite, got {value}"),
            });
        }
    }
    let h_up = h2 - h1 - t;
    if h_up <= 0.0 {
        return Err(Error::InvalidGeometry {
            constraint: format!(
                "H1 + T must stay below H2 (H1={h1}, T={t}, H2={h2}: trace breaks the upper plane)"
            ),
        });
    }
    let b = h2;
    let h_low = h1;
    let z1 = zss(2.0 * h_low + t, w, t, er)?;
    let z2 = zss(2.0 * h_up + t, w, t, er)?;
    let z0 = 2.0 * z1 * z2 / (z1 + z2);
    let z_diff = 2.0 * z0 * (1.0 - 0.347 * (-2.9 * s / b).exp());
    let alpha_d = 2.3 * spec.f0_ghz * er.sqrt() * spec.tan_delta;
    let alpha_c = spec.conductor_coeff * spec.f0_ghz.sqrt() / (z0 * w);
    Ok(LineMetrics { z_diff, loss: alpha_d + alpha_c })
}

fn zss(spacing: f64, w: f64, t: f64, er: f64) -> Result<f64> {
    let arg = 4.0 * spacing / (0.67 * std::f64::consts::PI * (0.8 * w + t));
    if arg <= 1.0 {
        return Err(Error::InvalidGeometry {
            constraint: format!(
                "trace cross-section too large for plane spacing {spacing}: \
                 impedance log argument {arg} is not above 1"
            ),
        });
    }
    Ok(60.0 / er.sqrt() * arg.ln())
}

/// [`line_metrics_from_values`] on a grid point.
pub fn line_metrics(point: &DesignPoint, spec: &ObjectiveSpec) -> Result<LineMetrics> {
    line_metrics_from_values(point.values(), spec)
}

/// Combines metrics into the scalar objective for `spec.mode`.
pub fn objective_from_metrics(metrics: &LineMetrics, spec: &ObjectiveSpec) -> f64 {
    let impedance_error = (metrics.z_diff - spec.z_t).abs();
    match spec.mode {
        ObjectiveMode::MinimizeLoss => impedance_error + spec.loss_weight * metrics.loss,
        ObjectiveMode::MaximizeLoss => impedance_error + spec.loss_weight / metrics.loss,
    }
}

/// Full objective evaluation of a grid point.
pub fn objective_value(point: &DesignPoint, spec: &ObjectiveSpec) -> Result<f64> {
    Ok(objective_from_metrics(&line_metrics(point, spec)?, spec))
}

/// Anything that scores a design point. Evaluators must be deterministic:
/// the optimizer deduplicates repeated evaluations by index tuple and
/// cross-checks values when merging worker datasets.
pub trait Objective: Sync {
    /// Scores `point`; lower is better.
    fn evaluate(&self, point: &DesignPoint) -> Result<f64>;
}

impl<F> Objective for F
where
    F: Fn(&DesignPoint) -> Result<f64> + Sync,
{
    fn evaluate(&self, point: &DesignPoint) -> Result<f64> {
        self(point)
    }
}

/// The stripline objective as an [`Objective`].
#[derive(Debug, Clone)]
pub struct StriplineObjective {
    spec: ObjectiveSpec,
}

impl StriplineObjective {
    /// Validates `spec` and wraps it.
    pub fn new(spec: ObjectiveSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    /// The wrapped spec.
    pub fn spec(&self) -> &ObjectiveSpec {
        &self.spec
    }
}

impl Objective for StriplineObjective {
    fn evaluate(&self, point: &DesignPoint) -> Result<f64> {
        objective_value(point, &self.spec)
    }
}
