//! Density-dependent Poisson jump processes of epidemic type: exact
//! simulation, fluid limits, large-deviations rate functions, path actions,
//! quasipotentials, exit-time asymptotics, and tilted importance sampling.
//!
//! The crate ships the SIRS model without demography as its reference system
//! and exposes the general machinery for user-defined models:
//!
//! - [`model`] — jump models (directions, rates, domain), the SIRS builder,
//!   equilibria, and grid snapping;
//! - [`simulate`] — exact Gillespie simulation, exit-time sampling, the
//!   trajectory likelihood ratio between rate families, and tilted
//!   (importance) sampling;
//! - [`fluid`] — the fluid-limit ODE and the sup-distance of a trajectory
//!   from it;
//! - [`ratefn`] — the local rate function by its primal and dual
//!   characterizations, and path actions;
//! - [`quasipotential`] — minimal-action connections, boundary
//!   quasipotentials with shrunken-domain extrapolation, exit-time scaling
//!   fits, and branching-process extinction bounds;
//! - [`stats`], [`rng`], [`quad`] — supporting numerics.

// Negated comparisons reject NaNs on purpose; index loops mirror the usual
// matrix notation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod fluid;
mod lp;
pub mod model;
mod optim;
pub mod quad;
pub mod quasipotential;
pub mod ratefn;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use fluid::{integrate_ode, lln_distance, OdePath};
pub use model::{
    birth_death_1d, constant_rate_1d, endemic_equilibrium, grid_snap, linear_birth_1d,
    pure_death_1d, r0, sirs_model, HalfSpace, JumpModel, SirsParams,
};
pub use quasipotential::{
    branching_extinction_prob, default_t_grid, eta_boundary_problem, extinction_problem,
    extrapolate_vbar, fit_exit_scaling, mean_exit_time, v_fixed_horizon, v_free_horizon, vbar,
    ExitProblem, ExitTimeStats, QpResult, DEFAULT_SEGMENTS,
};
pub use ratefn::{
    ell, ell_tilde, local_rate_dual, local_rate_primal, path_rate, LocalRate, PlPath, RateStatus,
    DEFAULT_QUAD_ORDER,
};
pub use rng::ReplicaRng;
pub use simulate::{
    exit_time, exit_time_ensemble, log_radon_nikodym, simulate_ensemble, simulate_exact,
    simulate_tilted, tilted_ensemble, ExitOutcome, LogWeight, SimConfig, Trajectory,
};
