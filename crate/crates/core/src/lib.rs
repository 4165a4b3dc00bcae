//! Finite-difference simulation of acid-mediated tumor invasion.
//!
//! Three species on a square: normal cells `N` (no diffusion), tumor cells
//! `A` and excess acid `H`. Space is discretized with the five-point
//! Laplacian, time with classical RK4. A closed-form operator for `N` given
//! the `A`/`H` histories ([`theta`]) serves as an independent check of the
//! solver.
//!
//! ```no_run
//! use acidfront::{run, ScenarioPreset};
//!
//! let cfg = ScenarioPreset::Fig2.config().with_t_end(5.0);
//! let result = run(&cfg).unwrap();
//! println!("{} steps, dt = {}", result.step_count, result.dt_used);
//! ```

// `!(x > 0.0)` style checks are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod integrator;
pub mod io;
pub mod monitor;
pub mod props;
pub mod reaction;
pub mod scenario;
pub mod stencil;
pub mod theta;
pub mod types;

pub use error::{Error, ParamViolation, Result};
pub use integrator::{run, run_with, stable_dt, step_rk4, Rk4Workspace, RunOptions, RunResult, Schedule};
pub use monitor::{check_state, ViolationReport};
pub use props::{run_props, PropsConfig, PropsReport};
pub use reaction::{full_rhs, reaction_rhs, StateDerivative};
pub use scenario::ScenarioPreset;
pub use stencil::{laplacian, laplacian_into};
pub use theta::{
    ode_reference_run, ratio_g, theta, theta_series, verify_n_field, NodeTrajectory, ThetaBounds,
    TrajectoryRecord, VerifyReport,
};
pub use types::{
    build_initial_state, validate_params, BoundaryKind, Field2D, GridSpec, InitRecipe, ModelParams,
    MonitorSettings, ScenarioConfig, SimState,
};
