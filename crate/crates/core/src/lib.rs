//! Simulation and potential theory for the two-parameter Brownian sheet.
//!
//! The crate covers four layers:
//!
//! * [`domain`]: time points under the sup norm, the two partial orders of
//!   the quarter plane, and finite discretizations of compact sets;
//! * [`field`]: exact Gaussian samplers for the `(2,d)`-Brownian sheet, its
//!   two path decompositions, and additive Brownian motion;
//! * [`capacity`]: truncated Riesz kernels, discrete energies and capacities
//!   computed by Frank–Wolfe over the probability simplex;
//! * [`constants`] and [`montecarlo`]: the explicit constants of the
//!   hitting-probability sandwich and the estimators that check it.
//!
//! [`harness`] wires these into named experiments with JSON reports.
//!
//! Monte Carlo loops and kernel assembly run on rayon when the `parallel`
//! feature is enabled (the default) and sequentially otherwise. Results are
//! bitwise identical in both modes.

pub mod capacity;
pub mod constants;
pub mod domain;
mod error;
pub mod field;
pub mod harness;
pub mod montecarlo;
pub mod par;
pub mod seed;

pub use capacity::{
    brute_force_energy_min, capacity_limit_check, capacity_of_mesh, energy, kernel_matrix,
    kernel_value, minimize_energy, CapacityResult, DiscreteMeasure, KernelMatrix, KernelSpec,
    SolverOptions, StepRule,
};
pub use constants::{ConstantSet, ProblemParams};
pub use domain::{
    build_rect_mesh, build_segment_mesh, partial_order, restrict_mesh, sup_dist_time,
    sup_norm_time, CompactMesh, OrderFlags, SpacePoint, TimePoint,
};
pub use error::{Error, Result};
pub use field::{sheet_covariance, SheetSample};
pub use montecarlo::{HitQuery, MCEstimate, Sampling};
pub use par::Execution;
pub use seed::SeedSpec;
