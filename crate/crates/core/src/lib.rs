//! Solver and verification harness for the one-dimensional non-isentropic
//! compressible Navier-Stokes/Allen-Cahn system in Lagrangian mass coordinates,
//! with phase-dependent viscosity `eta(chi) = chi^alpha` and
//! temperature-dependent conductivity `kappa(theta) = theta^beta`.
//!
//! The system is semi-discretized on a collocated uniform grid
//! ([`discretization`]), integrated with explicit RK4 ([`timestepper`]) and
//! monitored through conserved integrals, the Lyapunov functional and its
//! dissipation, the maximum principle for the phase field ([`diagnostics`]) and
//! an independent reconstruction of the specific volume ([`representation`]).

// Floors and ranges are checked as `!(x > floor)` on purpose: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod discretization;
pub mod error;
pub mod io;
pub mod representation;
mod simd;
pub mod state;
pub mod timestepper;

pub use diagnostics::DiagnosticsRecord;
pub use discretization::{eval_rhs, Rhs};
pub use error::{NsacError, Result};
pub use representation::{reconstruct_v, ReprResult};
pub use state::{
    build_grid, make_initial_state, normalize_initial_data, validate_initial_data,
    CosineAmplitudes, FieldState, Grid, InitialDataReport, Params, Preset,
};
pub use timestepper::{advance, step_rk, History, Integrator};
