//! Quantizer constructions and local optimizers.
//!
//! Produces n-point clouds for a grid measure: exact 1D quantizers
//! ([`midpoint_1d`], [`chunk_1d`]), self-similar and inductive assemblies
//! ([`scale_copy`], [`dim_induct`]), greedy moment-controlled construction
//! ([`pierce_greedy`]), hexagonal tilings for planar regions ([`hex_2d`]),
//! and Lloyd-type alternating minimizers for both the empirical
//! (capacity-constrained, [`lloyd_capacity`]) and classical
//! ([`lloyd_classical`]) objectives.
//!
//! All optimizers are local: returned costs are upper estimates of the
//! optimal errors, reported together with the seed and restart count that
//! produced them.

mod centroid;
mod constructions;
mod hex;
mod lloyd;
mod pierce;

pub use centroid::p_centroid;
pub use constructions::{chunk_1d, dim_induct, midpoint_1d, scale_copy};
pub use hex::{hex_2d, HexRegion};
pub use lloyd::{lloyd_capacity, lloyd_capacity_warm, lloyd_classical};
pub use pierce::{pierce_greedy, pierce_greedy_detailed, PierceTrace};

pub(crate) use centroid::p_centroid_flat;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::GridDensity;
use crate::transport::{solve_uniform_capacity_with_limit, PointCloud, DEFAULT_CELL_LIMIT};

/// How an optimizer draws its initial point cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// I.i.d. draws from the grid distribution (tracks the density itself,
    /// which is the right bias for empirical quantizers).
    RhoSample,
    /// Near-uniform lattice over the grid's bounding box, jittered uniformly
    /// within each lattice cell.
    GridJitter,
    /// Caller-supplied starting cloud; only reachable through
    /// [`lloyd_capacity_warm`] (the plain entry points have nowhere to take
    /// a cloud from and reject this variant).
    User,
}

impl InitStrategy {
    /// Parses the CLI spelling of the strategy.
    pub fn parse(name: &str) -> Result<InitStrategy> {
        match name {
            "rho_sample" => Ok(InitStrategy::RhoSample),
            "grid_jitter" => Ok(InitStrategy::GridJitter),
            "user" => Ok(InitStrategy::User),
            other => Err(Error::Precondition(format!(
                "unknown init strategy {other:?} (expected rho_sample, grid_jitter, or user)"
            ))),
        }
    }

    /// Stable spelling used in CLI flags and result metadata.
    pub fn name(&self) -> &'static str {
        match self {
            InitStrategy::RhoSample => "rho_sample",
            InitStrategy::GridJitter => "grid_jitter",
            InitStrategy::User => "user",
        }
    }
}

/// Shared knobs of the Lloyd-type optimizers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Maximum accepted iterations per run (≥ 1); the initial evaluation
    /// counts as the first iteration.
    pub max_iters: usize,
    /// Stop once the relative cost decrease of an accepted iteration falls
    /// below this threshold (> 0).
    pub tol: f64,
    /// Independent restarts (≥ 1); the best final cost wins, ties broken by
    /// the earlier restart.
    pub restarts: usize,
    /// Master seed; restart r draws from the ChaCha stream (seed, r), so
    /// results are reproducible regardless of execution order.
    pub seed: u64,
    /// Initial cloud strategy.
    pub init: InitStrategy,
    /// Cap on nonzero grid cells a single transport solve may take on.
    /// Mirrors the solver default; sweeps on fine grids raise it explicitly.
    pub cell_limit: usize,
}

impl Default for OptimizerConfig {
    fn default() -> OptimizerConfig {
        OptimizerConfig {
            max_iters: 50,
            tol: 1e-6,
            restarts: 1,
            seed: 0,
            init: InitStrategy::RhoSample,
            cell_limit: DEFAULT_CELL_LIMIT,
        }
    }
}

impl OptimizerConfig {
    /// Checks the structural invariants shared by all optimizers.
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::Precondition("max_iters must be ≥ 1".into()));
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::Precondition(format!(
                "tol must be a positive finite number, got {}",
                self.tol
            )));
        }
        if self.restarts < 1 {
            return Err(Error::Precondition("restarts must be ≥ 1".into()));
        }
        if self.cell_limit == 0 {
            return Err(Error::Precondition("cell_limit must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// A quantizer construction runnable from (grid, n, p) alone.
///
/// The assemblies that consume other clouds ([`scale_copy`], [`dim_induct`])
/// are not listed here; they are invoked directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum Method {
    /// Exact uniform-measure 1D quantizer at the chunk midpoints.
    Midpoint,
    /// CDF-inversion chunk quantizer for arbitrary 1D grids.
    Chunk,
    /// Greedy moment-controlled extraction with tail radii from the
    /// θ-moment.
    Pierce {
        /// Moment exponent θ; must exceed p·d/(d−p) when p < d.
        theta: f64,
    },
    /// Hexagonal tiling with boundary-strip equalization (d = 2 only).
    Hex,
    /// Capacity-constrained Lloyd iteration (empirical objective).
    LloydCapacity,
    /// Classical Lloyd / k-means iteration (free-weight objective).
    LloydClassical,
}

impl Method {
    /// Stable tag used in result metadata and sweep CSV rows.
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Midpoint => "midpoint",
            Method::Chunk => "chunk",
            Method::Pierce { .. } => "pierce",
            Method::Hex => "hex",
            Method::LloydCapacity => "lloyd_capacity",
            Method::LloydClassical => "lloyd_classical",
        }
    }

    /// Parses a CLI method name; `theta` is consulted only by `pierce`.
    pub fn parse(name: &str, theta: Option<f64>) -> Result<Method> {
        match name {
            "midpoint" => Ok(Method::Midpoint),
            "chunk" => Ok(Method::Chunk),
            "pierce" => {
                let theta = theta.ok_or_else(|| {
                    Error::Precondition("method pierce requires --theta".into())
                })?;
                Ok(Method::Pierce { theta })
            }
            "hex" => Ok(Method::Hex),
            "lloyd_capacity" => Ok(Method::LloydCapacity),
            "lloyd_classical" => Ok(Method::LloydClassical),
            other => Err(Error::Precondition(format!(
                "unknown method {other:?} (expected midpoint, chunk, pierce, hex, \
                 lloyd_capacity, or lloyd_classical)"
            ))),
        }
    }

    /// Returns the violation, if any, of running this method on a `d`-dimensional grid.
    pub fn applicability(&self, d: usize, n: usize, p: f64) -> Option<String> {
        match self {
            Method::Midpoint | Method::Chunk if d != 1 => {
                Some(format!("method {} requires d = 1, got d = {d}", self.tag()))
            }
            Method::Hex if d != 2 => Some(format!("method hex requires d = 2, got d = {d}")),
            Method::Pierce { theta } => {
                if n < 2 {
                    Some("method pierce requires n ≥ 2".into())
                } else if p < d as f64 && *theta <= p * d as f64 / (d as f64 - p) {
                    Some(format!(
                        "method pierce requires theta > p·d/(d−p) = {} for p = {p}, d = {d}, \
                         got theta = {theta}",
                        p * d as f64 / (d as f64 - p)
                    ))
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

/// Outcome of one optimizer or construction run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantizerResult {
    /// The n-point cloud, uniform weights summing to the grid total.
    pub cloud: PointCloud,
    /// Final cost (the p-th root, i.e. in the units of the error itself);
    /// equals the last trace entry.
    pub cost: f64,
    /// Method tag that produced the cloud.
    pub method: String,
    /// Accepted per-iteration costs, nonincreasing within 1e−12.
    pub trace: Vec<f64>,
    /// Master seed the run drew from (restart streams derive from it).
    pub seed_used: u64,
}

/// Per-method outcome recorded by [`best_quantizer_detailed`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodCost {
    /// Method tag.
    pub method: String,
    /// Empirical (capacity) cost of the method's cloud, when it ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    /// Failure description, when it did not.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Runs every requested method and returns the cheapest result.
///
/// See [`best_quantizer_detailed`] for the per-method breakdown.
pub fn best_quantizer(
    grid: &GridDensity,
    n: usize,
    p: f64,
    methods: &[Method],
    cfg: &OptimizerConfig,
    polish: bool,
) -> Result<QuantizerResult> {
    best_quantizer_detailed(grid, n, p, methods, cfg, polish).map(|(best, _)| best)
}

/// Runs every requested method, optionally polishes each cloud with a
/// warm-started capacity Lloyd pass, and returns the minimum-cost result
/// along with the per-method cost record.
///
/// Every cloud — including the classical Lloyd output — is costed with the
/// capacity solver so the comparison is apples-to-apples in the empirical
/// objective (any n-point cloud is a valid upper estimate for it). Methods
/// may fail individually (recorded in the breakdown); the call fails only
/// if all of them do.
pub fn best_quantizer_detailed(
    grid: &GridDensity,
    n: usize,
    p: f64,
    methods: &[Method],
    cfg: &OptimizerConfig,
    polish: bool,
) -> Result<(QuantizerResult, Vec<MethodCost>)> {
    if methods.is_empty() {
        return Err(Error::Precondition("best_quantizer needs at least one method".into()));
    }
    cfg.validate()?;
    let d = grid.d();
    let mut record: Vec<MethodCost> = Vec::with_capacity(methods.len());
    let mut best: Option<QuantizerResult> = None;

    for method in methods {
        let tag = method.tag().to_string();
        if let Some(violation) = method.applicability(d, n, p) {
            record.push(MethodCost { method: tag, cost: None, error: Some(violation) });
            continue;
        }
        let run = run_method(grid, n, p, method, cfg, polish);
        match run {
            Ok(result) => {
                record.push(MethodCost {
                    method: tag,
                    cost: Some(result.cost),
                    error: None,
                });
                let better = match &best {
                    Some(b) => result.cost < b.cost,
                    None => true,
                };
                if better {
                    best = Some(result);
                }
            }
            Err(err) => {
                record.push(MethodCost { method: tag, cost: None, error: Some(err.to_string()) });
            }
        }
    }

    match best {
        Some(best) => Ok((best, record)),
        None => {
            let detail = record
                .iter()
                .map(|m| format!("{}: {}", m.method, m.error.as_deref().unwrap_or("?")))
                .collect::<Vec<_>>()
                .join("; ");
            Err(Error::Precondition(format!("all methods failed: {detail}")))
        }
    }
}

/// Runs a single method and reduces it to a capacity-costed result.
fn run_method(
    grid: &GridDensity,
    n: usize,
    p: f64,
    method: &Method,
    cfg: &OptimizerConfig,
    polish: bool,
) -> Result<QuantizerResult> {
    // The Lloyd methods carry their own cost and trace.
    match method {
        Method::LloydCapacity => return lloyd_capacity(grid, n, p, cfg),
        Method::LloydClassical => {
            let classical = lloyd_classical(grid, n, p, cfg)?;
            // Re-cost the cloud in the empirical objective for comparability.
            return finish_construction(grid, classical.cloud, p, "lloyd_classical", cfg, polish);
        }
        _ => {}
    }
    let cloud = match method {
        Method::Midpoint => {
            if n < 1 {
                return Err(Error::Precondition("midpoint requires n ≥ 1".into()));
            }
            midpoint_1d(n)
        }
        Method::Chunk => chunk_1d(grid, n, p)?,
        Method::Pierce { theta } => pierce_greedy(grid, n, *theta, p)?,
        Method::Hex => hex_2d(grid, n, p)?,
        Method::LloydCapacity | Method::LloydClassical => unreachable!("handled above"),
    };
    finish_construction(grid, cloud, p, method.tag(), cfg, polish)
}

/// Costs a constructed cloud with the capacity solver and optionally
/// polishes it with a warm-started capacity Lloyd pass (which never
/// increases the cost: its trace is nonincreasing and starts at the
/// construction's own cost).
fn finish_construction(
    grid: &GridDensity,
    cloud: PointCloud,
    p: f64,
    tag: &str,
    cfg: &OptimizerConfig,
    polish: bool,
) -> Result<QuantizerResult> {
    if polish {
        let mut result = lloyd_capacity_warm(grid, &cloud, p, cfg)?;
        result.method = tag.to_string();
        return Ok(result);
    }
    let (cost, _) = solve_uniform_capacity_with_limit(grid, &cloud, p, cfg.cell_limit)?;
    Ok(QuantizerResult {
        cloud,
        cost,
        method: tag.to_string(),
        trace: vec![cost],
        seed_used: cfg.seed,
    })
}
