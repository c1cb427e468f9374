//! Classic sliding mode control for control-affine SISO plants.
//!
//! The crate synthesizes the switching control law, integrates the resulting
//! discontinuous closed loop with fixed-step methods, and checks the
//! finite-time reaching and Lyapunov-decrease properties numerically.
//!
//! The numeric core ([`dynamics`], [`controller`], [`simulator`],
//! [`analysis`]) is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision. Configuration, scenarios on disk, sweeps and the
//! verification suites work in `f64`.
//!
//! ```
//! use smc_core::{simulate, ControllerConfig, IntegratorConfig, SlidingSurfaceF64, SystemModelF64};
//!
//! // x1' = x2, x2' = u; slide on s = x1 + x2.
//! let model = SystemModelF64::new(2, |x: &[f64], _| vec![x[1], 0.0], |_: &[f64]| vec![0.0, 1.0]).unwrap();
//! let surface = SlidingSurfaceF64::linear(vec![1.0, 1.0]).unwrap();
//! let traj = simulate(&model, &surface, &ControllerConfig::new(1.0), &IntegratorConfig::rk4(1e-3, 4.0), &[1.0, 1.0])
//!     .unwrap();
//! assert!(traj.samples.last().unwrap().s.abs() < 1e-2);
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod runner;
pub mod scalar;
pub mod scenarios;
pub mod simulator;
pub mod verify;

pub use analysis::{
    chattering_metrics, compare_closed_form, lyapunov_monotonicity, measure_reaching_time, verify_reaching_bound,
    ChatterReport, MarginReport, MonotonicityReport, ReachReport,
};
pub use config::{load_config, parse_config, write_config, RunConfig, ScenarioSpec};
pub use controller::{
    closed_form_s, control, margin_report, reaching_residual, reaching_time_predicted, ControlDecision,
    ControllerConfig, ReachPrediction,
};
pub use dynamics::{sgn, DisturbanceKind, DisturbanceSignal, SlidingSurface, StateVector, SystemModel};
pub use error::{Result, SmcError};
pub use runner::{execute, run_scenario, sweep, RunOutcome, RunReport, SweepRow};
pub use scalar::Scalar;
pub use scenarios::ScenarioKind;
pub use simulator::{
    lyapunov_of, simulate, simulate_reaching_law, IntegratorConfig, Method, SimulationError, Trajectory,
    TrajectorySample,
};

pub type StateVectorF64 = StateVector<f64>;
pub type SystemModelF64 = SystemModel<f64>;
pub type SlidingSurfaceF64 = SlidingSurface<f64>;
pub type ControllerConfigF64 = ControllerConfig<f64>;
pub type IntegratorConfigF64 = IntegratorConfig<f64>;
pub type TrajectoryF64 = Trajectory<f64>;

pub type StateVectorF32 = StateVector<f32>;
pub type SystemModelF32 = SystemModel<f32>;
pub type SlidingSurfaceF32 = SlidingSurface<f32>;
pub type ControllerConfigF32 = ControllerConfig<f32>;
pub type IntegratorConfigF32 = IntegratorConfig<f32>;
pub type TrajectoryF32 = Trajectory<f32>;
