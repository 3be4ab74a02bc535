//! JSON run configuration: strict parsing and conversion to core types.
//!
//! Unknown keys are rejected everywhere; load errors name the JSON path of
//! the offending field. A geometry grid that cannot fit the trace inside
//! the dielectric is a warning, not an error, because the objective reports
//! per-point geometry failures on its own.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use pibo_core::{
    AcquisitionConfig, AcquisitionKind, AxisSpec, BoConfig, ObjectiveMode, ObjectiveSpec,
    PiboConfig, SearchSpace, StallRule, ThetaPolicy, AXIS_NAMES, DEFAULT_THETA,
    DEFAULT_THETA_GRID,
};
use serde::Deserialize;

/// One grid axis. Order and names must match `AXIS_NAMES`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    MinimizeLoss,
    MaximizeLoss,
}

/// Objective parameters. Omitted fields take the mode's defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    pub mode: Option<ModeName>,
    pub z_t: Option<f64>,
    pub loss_weight: Option<f64>,
    pub f0_ghz: Option<f64>,
    pub tan_delta: Option<f64>,
    pub conductor_coeff: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    Lcb,
    Pi,
    Ei,
}

/// Acquisition criterion; defaults to the library's LCB setting.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionSection {
    pub kind: Option<KindName>,
    pub tau: Option<f64>,
    pub xi: Option<f64>,
}

/// Length-scale policy: `"fixed"` with an optional `value`, or `"mml"`
/// with an optional `grid` and `refit_every`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaSection {
    pub policy: String,
    pub value: Option<f64>,
    pub grid: Option<Vec<f64>>,
    pub refit_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StallSection {
    pub patience: usize,
    pub rel_tol: f64,
}

/// Shape of a single sequential run (the `solo` subcommand).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoSection {
    pub init_samples: usize,
    pub iterations: usize,
    pub stall: Option<StallSection>,
}

impl Default for BoSection {
    fn default() -> Self {
        Self { init_samples: 10, iterations: 250, stall: None }
    }
}

/// Shape of a parallel-initialized run (the `run` subcommand).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiboSection {
    pub workers: usize,
    pub init_samples: usize,
    pub iterations: usize,
    pub final_iterations: usize,
}

impl Default for PiboSection {
    fn default() -> Self {
        Self { workers: 4, init_samples: 10, iterations: 50, final_iterations: 20 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Trace CSV path; the `--out` flag overrides it.
    pub trace: Option<String>,
}

/// A fully parsed run configuration.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub space: Vec<AxisConfig>,
    #[serde(default)]
    pub objective: ObjectiveSection,
    #[serde(default)]
    pub acquisition: AcquisitionSection,
    pub theta: Option<ThetaSection>,
    #[serde(default)]
    pub bo: BoSection,
    #[serde(default)]
    pub pibo: PiboSection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSection,
}

/// Reads and strictly parses a JSON config, reporting the JSON path of any
/// invalid or unknown field.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let mut deserializer = serde_json::Deserializer::from_str(&text);
    let config: RunConfig = serde_path_to_error::deserialize(&mut deserializer)
        .map_err(|e| anyhow::anyhow!("{} at `{}`: {}", path.display(), e.path(), e.inner()))?;
    Ok(config)
}

impl RunConfig {
    /// Builds the search space, checking axis names and order.
    pub fn build_space(&self) -> Result<SearchSpace> {
        if self.space.len() != 6 {
            bail!("space must list exactly 6 axes ({}), got {}", AXIS_NAMES.join(", "), self.space.len());
        }
        let mut axes: Vec<AxisSpec> = Vec::with_capacity(6);
        for (i, axis) in self.space.iter().enumerate() {
            if axis.name != AXIS_NAMES[i] {
                bail!("space[{i}].name must be `{}` (axes are ordered), got `{}`", AXIS_NAMES[i], axis.name);
            }
            let spec = AxisSpec::new(axis.name.clone(), axis.min, axis.max, axis.step)
                .with_context(|| format!("space[{i}] ({})", axis.name))?;
            axes.push(spec);
        }
        let axes: [AxisSpec; 6] = axes.try_into().expect("length checked above");
        Ok(SearchSpace::new(axes)?)
    }

    /// Warns when no grid point can place the trace inside the dielectric.
    pub fn geometry_warning(space: &SearchSpace) -> Option<String> {
        let axes = space.axes();
        let (t, h1, h2) = (&axes[2], &axes[3], &axes[4]);
        if h1.min() + t.min() >= h2.max() {
            Some(format!(
                "warning: min(H1) + min(T) = {} >= max(H2) = {}; every grid point puts the trace outside the dielectric and objective evaluations will fail",
                h1.min() + t.min(),
                h2.max()
            ))
        } else {
            None
        }
    }

    /// Builds the objective parameters with per-mode defaults.
    pub fn objective_spec(&self) -> Result<ObjectiveSpec> {
        let mode = match self.objective.mode.unwrap_or(ModeName::MinimizeLoss) {
            ModeName::MinimizeLoss => ObjectiveMode::MinimizeLoss,
            ModeName::MaximizeLoss => ObjectiveMode::MaximizeLoss,
        };
        let mut spec = ObjectiveSpec::for_mode(mode);
        if let Some(z_t) = self.objective.z_t {
            spec.z_t = z_t;
        }
        if let Some(w) = self.objective.loss_weight {
            spec.loss_weight = w;
        }
        if let Some(f0) = self.objective.f0_ghz {
            spec.f0_ghz = f0;
        }
        if let Some(td) = self.objective.tan_delta {
            spec.tan_delta = td;
        }
        if let Some(c) = self.objective.conductor_coeff {
            spec.conductor_coeff = c;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Builds the acquisition criterion.
    pub fn acquisition_config(&self) -> Result<AcquisitionConfig> {
        let default = AcquisitionConfig::default();
        let kind = match self.acquisition.kind.unwrap_or(KindName::Lcb) {
            KindName::Lcb => AcquisitionKind::Lcb,
            KindName::Pi => AcquisitionKind::Pi,
            KindName::Ei => AcquisitionKind::Ei,
        };
        let config = AcquisitionConfig {
            kind,
            tau: self.acquisition.tau.unwrap_or(default.tau),
            xi: self.acquisition.xi.unwrap_or(0.0),
        };
        config.validate()?;
        Ok(config)
    }

    /// Builds the length-scale policy.
    pub fn theta_policy(&self) -> Result<ThetaPolicy> {
        let Some(section) = &self.theta else {
            return Ok(ThetaPolicy::Fixed(DEFAULT_THETA));
        };
        let policy = match section.policy.as_str() {
            "fixed" => {
                if section.grid.is_some() || section.refit_every.is_some() {
                    bail!("theta: `grid` and `refit_every` apply only to policy `mml`");
                }
                ThetaPolicy::Fixed(section.value.unwrap_or(DEFAULT_THETA))
            }
            "mml" => {
                if section.value.is_some() {
                    bail!("theta: `value` applies only to policy `fixed`");
                }
                ThetaPolicy::MmlGrid {
                    grid: section.grid.clone().unwrap_or_else(|| DEFAULT_THETA_GRID.to_vec()),
                    refit_every: section.refit_every.unwrap_or(10),
                }
            }
            other => bail!("theta.policy must be `fixed` or `mml`, got `{other}`"),
        };
        policy.validate()?;
        Ok(policy)
    }

    /// Assembles the sequential-run config used by `solo`.
    pub fn bo_config(&self, seed: u64) -> Result<BoConfig> {
        let config = BoConfig {
            init_samples: self.bo.init_samples,
            iterations: self.bo.iterations,
            theta: self.theta_policy()?,
            acquisition: self.acquisition_config()?,
            seed,
            stall: self.bo.stall.map(|s| StallRule { patience: s.patience, rel_tol: s.rel_tol }),
        };
        config.validate()?;
        Ok(config)
    }

    /// Assembles the parallel-run config used by `run`.
    pub fn pibo_config(&self, master_seed: u64) -> Result<PiboConfig> {
        let per_worker = BoConfig {
            init_samples: self.pibo.init_samples,
            iterations: self.pibo.iterations,
            theta: self.theta_policy()?,
            acquisition: self.acquisition_config()?,
            seed: 0,
            stall: None,
        };
        let config = PiboConfig {
            workers: self.pibo.workers,
            per_worker,
            final_iterations: self.pibo.final_iterations,
            master_seed,
        };
        config.validate()?;
        Ok(config)
    }
}
