//! Optimal empirical quantization of measures on R^d.
//!
//! The crate discretizes measures onto regular cubic grids, computes optimal
//! (empirical and classical) quantization errors through capacity-constrained
//! semidiscrete transport, provides the constructive quantizers used to prove
//! the matching upper bounds, and drives asymptotic sweeps that estimate
//! quantization coefficients and convergence rates.
//!
//! Module map:
//! - [`measure`]: measure specs, grid discretization, moments, density functionals
//! - [`transport`]: network-simplex transport solver, 1D exact solver,
//!   boundary-reservoir pseudodistance, brute-force oracle
//! - [`quantize`]: quantizer constructions (midpoint, CDF chunks, scale-copy,
//!   dimension induction, Pierce greedy, hexagonal tiling) and Lloyd iterations
//! - [`asympt`]: sweeps over n, coefficient estimation, rate fits, bound reports
//! - [`io`]: deterministic file formats (grids, point clouds, sweeps, reports)

pub mod asympt;
pub mod error;
pub mod io;
pub mod measure;
pub(crate) mod num;
pub mod quantize;
pub mod transport;

pub use asympt::{
    bound_report, coefficient_estimate, distant_bound, rate_fit, sweep, BoundReport,
    CoeffEstimate, RateFit, SweepResult, SweepRow,
};
pub use error::{Error, Result};
pub use measure::{
    density_functional, grid_for_spec, moment, GridDensity, MeasureSpec, MixturePart,
};
pub use quantize::{
    best_quantizer, best_quantizer_detailed, chunk_1d, dim_induct, hex_2d, lloyd_capacity,
    lloyd_capacity_warm, lloyd_classical, midpoint_1d, p_centroid, pierce_greedy,
    pierce_greedy_detailed, scale_copy, HexRegion, InitStrategy, Method, MethodCost,
    OptimizerConfig, PierceTrace, QuantizerResult,
};
pub use transport::{
    brute_force_oracle, nearest_assignment_cost, solve_uniform_capacity,
    solve_uniform_capacity_with_limit, w1d_exact, wb_boundary, PlanEntry, PointCloud,
    TransportPlan, DEFAULT_CELL_LIMIT,
};
