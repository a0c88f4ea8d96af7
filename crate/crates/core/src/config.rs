//! JSON run configuration.
//!
//! Every key is optional; an empty object `{}` is the default forward →
//! turning transition of the viscous swimmer. Unknown keys are rejected.
//!
//! ```json
//! {
//!   "metric": "swimmer",
//!   "variant": "accel",
//!   "departure_phase": 0.25,
//!   "source_gait": { "label": "forward", "period": 1.0,
//!                    "joints": [[0.0, 0.8, 0.0], [0.0, 0.0, -0.8]] },
//!   "solver": { "steps": 256, "phase_count": 12 },
//!   "output": { "dir": "out" }
//! }
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{named_field, InducedTorqueMetric};
use crate::gait::{Gait, ShapeCurve};
use crate::geometry::{MetricField, MetricTensor};
use crate::ode::Limits;
use crate::solver::{SolverSettings, TransitionProblem, Variant};
use crate::swimmer::{ConnectionField, DragMetric, MassMetric, SwimmerParams, ZeroConnection};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn invalid(e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid(e.to_string())
}

/// Which metric field drives the problem.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    /// Drag metric for the path variant, mass metric otherwise.
    #[default]
    Swimmer,
    /// Viscous swimmer drag metric `D(r)`.
    Drag,
    /// Perfect-fluid swimmer mass metric `M(r)`.
    Mass,
    Euclidean,
    Sphere,
}

/// A gait given either by Fourier rows, as a circle, or as a straight line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum GaitSpec {
    Fourier {
        #[serde(default = "default_label")]
        label: String,
        period: f64,
        /// Rows `[a0, a1, b1, a2, b2, ...]`, one per joint.
        joints: Vec<Vec<f64>>,
    },
    Circle {
        #[serde(default = "default_label")]
        label: String,
        center: [f64; 2],
        radius: f64,
        period: f64,
        #[serde(default = "yes")]
        clockwise: bool,
    },
    Line {
        #[serde(default = "default_label")]
        label: String,
        origin: Vec<f64>,
        velocity: Vec<f64>,
    },
}

fn default_label() -> String {
    "gait".into()
}

fn yes() -> bool {
    true
}

impl GaitSpec {
    pub fn build(&self) -> Result<Gait, ConfigError> {
        let gait = match self {
            GaitSpec::Fourier {
                label,
                period,
                joints,
            } => Gait::fourier(label.clone(), *period, joints),
            GaitSpec::Circle {
                label,
                center,
                radius,
                period,
                clockwise,
            } => Gait::circle(label.clone(), *center, *radius, *period, *clockwise),
            GaitSpec::Line {
                label,
                origin,
                velocity,
            } => Gait::line(label.clone(), origin, velocity),
        };
        gait.map_err(invalid)
    }

    fn from_gait(g: &Gait) -> Self {
        GaitSpec::Fourier {
            label: g.label().into(),
            period: g.period().unwrap_or(1.0),
            joints: g.coefficients().unwrap_or_default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSettings {
    pub dir: Option<PathBuf>,
    /// Scenario samples per gait period.
    pub samples_per_period: usize,
    /// Points per axis of the metric grid.
    pub grid: usize,
    /// Joint-angle range of the metric grid.
    pub grid_range: [f64; 2],
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self {
            dir: None,
            samples_per_period: crate::scenario::DEFAULT_SAMPLES_PER_PERIOD,
            grid: 25,
            grid_range: [-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub metric: MetricKind,
    pub swimmer: SwimmerParams,
    /// Actuator cometric `M̃` for the torque variant; identity if absent.
    pub actuator_cometric: Option<Vec<Vec<f64>>>,
    pub source_gait: GaitSpec,
    pub target_gait: GaitSpec,
    pub variant: Variant,
    pub departure_phase: f64,
    /// Defaults to ±π/2 per joint and 50 rad/s².
    pub limits: Option<Limits>,
    pub solver: SolverSettings,
    pub output: OutputSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            metric: MetricKind::Swimmer,
            swimmer: SwimmerParams::default(),
            actuator_cometric: None,
            source_gait: GaitSpec::from_gait(&Gait::default_forward()),
            target_gait: GaitSpec::from_gait(&Gait::default_turning()),
            variant: Variant::Path,
            departure_phase: 0.0,
            limits: None,
            solver: SolverSettings::default(),
            output: OutputSettings::default(),
        }
    }
}

impl std::str::FromStr for Config {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }
}

impl Config {
    /// Reads, parses and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config: Config = text.parse()?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.swimmer.validate().map_err(invalid)?;
        if self.solver.phase_count == 0 {
            return Err(invalid("solver.phase_count must be at least 1"));
        }
        if self.output.samples_per_period == 0 || self.output.grid == 0 {
            return Err(invalid("output sample counts must be positive"));
        }
        let [lo, hi] = self.output.grid_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid("output.grid_range must be finite and increasing"));
        }
        self.problem(None, None)?;
        Ok(())
    }

    fn dim(&self) -> Result<usize, ConfigError> {
        let source = self.source_gait.build()?;
        let target = self.target_gait.build()?;
        if source.dim() != target.dim() {
            return Err(invalid("source and target gaits have different dimensions"));
        }
        Ok(source.dim())
    }

    /// The metric field for a variant.
    pub fn metric_field(&self, variant: Variant) -> Result<Arc<dyn MetricField>, ConfigError> {
        let n = self.dim()?;
        let swimmer = |drag: bool| -> Result<Arc<dyn MetricField>, ConfigError> {
            if n != 2 {
                return Err(invalid("swimmer metrics need two-joint gaits"));
            }
            Ok(if drag {
                Arc::new(DragMetric::new(self.swimmer.clone()).map_err(invalid)?)
            } else {
                Arc::new(MassMetric::new(self.swimmer.clone()).map_err(invalid)?)
            })
        };
        match self.metric {
            MetricKind::Swimmer => swimmer(variant == Variant::Path),
            MetricKind::Drag => swimmer(true),
            MetricKind::Mass => swimmer(false),
            MetricKind::Euclidean => Ok(named_field("euclidean", n).expect("flat field of any dimension")),
            MetricKind::Sphere => {
                named_field("sphere", n).ok_or_else(|| invalid("the sphere metric needs two-joint gaits"))
            }
        }
    }

    /// Body-velocity source for scenario reconstruction.
    pub fn connection(&self, variant: Variant) -> Result<Arc<dyn ConnectionField>, ConfigError> {
        let drag = match self.metric {
            MetricKind::Swimmer => variant == Variant::Path,
            MetricKind::Drag => true,
            MetricKind::Mass => false,
            MetricKind::Euclidean | MetricKind::Sphere => return Ok(Arc::new(ZeroConnection)),
        };
        Ok(if drag {
            Arc::new(DragMetric::new(self.swimmer.clone()).map_err(invalid)?)
        } else {
            Arc::new(MassMetric::new(self.swimmer.clone()).map_err(invalid)?)
        })
    }

    /// Builds the transition problem, optionally overriding the variant and
    /// departure phase.
    pub fn problem(
        &self,
        variant: Option<Variant>,
        phase: Option<f64>,
    ) -> Result<TransitionProblem, ConfigError> {
        let variant = variant.unwrap_or(self.variant);
        let metric = self.metric_field(variant)?;
        let n = metric.dim();
        let mut problem = TransitionProblem::new(
            variant,
            metric.clone(),
            self.source_gait.build()?,
            phase.unwrap_or(self.departure_phase),
            self.target_gait.build()?,
        )
        .with_limits(self.limits.clone().unwrap_or_else(|| Limits::default_for(n)))
        .with_settings(self.solver.clone());
        if let (Variant::Torque, Some(rows)) = (variant, &self.actuator_cometric) {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(invalid(format!("actuator_cometric must be {n}×{n}")));
            }
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            let m = MetricTensor::new(nalgebra::DMatrix::from_row_slice(n, n, &flat)).map_err(invalid)?;
            let h = InducedTorqueMetric::new(metric, m).map_err(invalid)?;
            problem = problem.with_induced(Arc::new(h));
        }
        problem.validate().map_err(invalid)?;
        Ok(problem)
    }
}
