//! Optimal gait transitions for shape-space locomoting systems.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] and [`fields`]: metric fields, Christoffel symbols,
//!   curvature and covariant derivatives on a coordinate chart.
//! * [`swimmer`] and [`se2`]: planar three-link swimmers in viscous and
//!   perfect fluids, their reduced metrics and local connections, and body
//!   pose reconstruction on SE(2).
//! * [`gait`]: periodic shape-space curves.
//! * [`ode`] and [`splines`]: fixed-step shooting of geodesics and
//!   Riemannian splines.
//! * [`solver`]: the path-, acceleration- and torque-optimal transition
//!   boundary value problems.
//! * [`scenario`]: gait → transition → gait assemblies with body motion and
//!   accumulated cost.
//! * [`config`], [`export`] and [`cli`]: the JSON configuration, CSV/JSON
//!   outputs and the `rsg` command line.

pub mod cli;
pub mod config;
pub mod export;
pub mod fields;
pub mod gait;
pub mod geometry;
pub mod ode;
pub mod scenario;
pub mod se2;
pub mod solver;
pub mod splines;
pub mod swimmer;
mod optim;

pub use fields::{Euclidean, FnMetric, InducedTorqueMetric, Sphere};
pub use gait::{Gait, ShapeCurve};
pub use geometry::{Covector, GeometryError, MetricField, MetricTensor, TangentVector};
pub use scenario::Scenario;
pub use solver::{Solution, Status, TransitionProblem, Variant};
pub use swimmer::{DragMetric, MassMetric, SwimmerParams};
