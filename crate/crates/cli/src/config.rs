//! Flag surface and configuration validation.
//!
//! Validation is two-phase. Shape checks ([`shape_violations`]) need only
//! the flags themselves; dimension checks ([`dimension_violations`]) run
//! after the measure or grid is loaded, because method applicability and
//! functional exponents depend on d. Each phase collects *every* violation
//! it can see rather than stopping at the first.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use eqq_core::{InitStrategy, Method, DEFAULT_CELL_LIMIT};

/// Quantizers, transport costs, and asymptotic sweeps for measures on ℝ^d.
#[derive(Parser, Debug)]
#[command(name = "eqq", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Rasterize a measure spec to a grid density JSON file.
    Grid(GridArgs),
    /// Construct an n-point quantizer; writes the cloud CSV and a run
    /// summary JSON next to it.
    Quantize(QuantizeArgs),
    /// Evaluate one transport cost between a grid and a point cloud.
    Error(ErrorArgs),
    /// Run an (n, method) sweep and write the rows as CSV.
    Sweep(SweepArgs),
    /// Upper estimate of the quantization coefficient from a sweep.
    Coeff(CoeffArgs),
    /// Density functionals and bound right-hand sides for a measure.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct GridArgs {
    /// Measure spec JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// Cells per axis of the rasterization.
    #[arg(long, default_value_t = 256)]
    pub resolution: usize,
    /// Output grid JSON path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct QuantizeArgs {
    /// Measure spec JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// Cells per axis of the rasterization.
    #[arg(long, default_value_t = 256)]
    pub resolution: usize,
    /// Number of quantizer points.
    #[arg(long)]
    pub n: usize,
    /// Error exponent p ≥ 1.
    #[arg(long)]
    pub p: f64,
    /// Methods to try, comma-separated; the cheapest result wins. Names:
    /// midpoint, chunk, pierce, hex, lloyd_capacity, lloyd_classical.
    #[arg(long, value_delimiter = ',')]
    pub method: Vec<String>,
    /// Moment exponent θ for the pierce method.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Master seed for randomized initializations.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independent optimizer restarts.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    /// Initial cloud strategy for the Lloyd methods: rho_sample or grid_jitter.
    #[arg(long, default_value = "rho_sample")]
    pub init: String,
    /// Maximum Lloyd iterations per restart.
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    /// Relative cost-decrease stopping threshold.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Cap on nonzero grid cells a single transport solve may take on.
    #[arg(long, default_value_t = DEFAULT_CELL_LIMIT)]
    pub cell_limit: usize,
    /// Refine construction methods with a warm-started capacity Lloyd pass.
    #[arg(long)]
    pub polish: bool,
    /// Output cloud CSV path; the run summary goes to the same stem with
    /// extension .result.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ErrorArgs {
    /// Grid density JSON (as written by `eqq grid`).
    #[arg(long)]
    pub grid: PathBuf,
    /// Point cloud path; a .json extension selects the weighted JSON form,
    /// anything else is read as headerless CSV with weights 1/n.
    #[arg(long)]
    pub cloud: PathBuf,
    /// Error exponent p ≥ 1.
    #[arg(long)]
    pub p: f64,
    /// Cost to compute: capacity, free, exact1d, or wb.
    #[arg(long)]
    pub mode: String,
    /// Open-box domain for wb, as lo_1,hi_1,…,lo_d,hi_d.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub omega: Option<Vec<f64>>,
    /// Cap on nonzero grid cells the capacity solve may take on.
    #[arg(long, default_value_t = DEFAULT_CELL_LIMIT)]
    pub cell_limit: usize,
    /// Optional JSON output {mode, p, cost}; the cost always prints to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Measure spec JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// Cells per axis of the rasterization.
    #[arg(long, default_value_t = 256)]
    pub resolution: usize,
    /// Error exponent p ≥ 1.
    #[arg(long)]
    pub p: f64,
    /// Strictly increasing point counts, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub n_list: Vec<usize>,
    /// Methods to run per n, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub method: Vec<String>,
    /// Moment exponent θ for the pierce method.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Master seed for randomized initializations.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independent optimizer restarts.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    /// Initial cloud strategy for the Lloyd methods: rho_sample or grid_jitter.
    #[arg(long, default_value = "rho_sample")]
    pub init: String,
    /// Maximum Lloyd iterations per restart.
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    /// Relative cost-decrease stopping threshold.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Cap on nonzero grid cells a single transport solve may take on.
    #[arg(long, default_value_t = DEFAULT_CELL_LIMIT)]
    pub cell_limit: usize,
    /// Output sweep CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CoeffArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Ambient dimension; defaults to the measure's own, and must match it
    /// when given.
    #[arg(long)]
    pub d: Option<usize>,
    /// Also write the underlying sweep rows as CSV.
    #[arg(long)]
    pub sweep_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Measure spec JSON, rasterized at --resolution (alternative to --grid).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Pre-rasterized grid JSON (alternative to --spec).
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Cells per axis when rasterizing a spec.
    #[arg(long, default_value_t = 256)]
    pub resolution: usize,
    /// Error exponent p; the empirical functionals need p < d.
    #[arg(long)]
    pub p: f64,
    /// Ambient dimension; defaults to the measure's own, and must match it
    /// when given.
    #[arg(long)]
    pub d: Option<usize>,
    /// Classical coefficient estimate feeding the lower-bound line.
    #[arg(long)]
    pub q_lower: Option<f64>,
    /// Empirical coefficient estimate feeding the upper-bound line.
    #[arg(long)]
    pub q_upper: Option<f64>,
    /// Output report JSON path.
    #[arg(long)]
    pub out: PathBuf,
}

/// Which cost the `error` command evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostMode {
    /// Capacity-constrained W_p (each point receives exactly total/n).
    Capacity,
    /// Free nearest-site assignment (the classical inner objective).
    Free,
    /// Exact 1D capacity cost via the sorted coupling.
    Exact1d,
    /// Boundary pseudodistance on an open box Ω.
    Wb,
}

impl CostMode {
    pub fn parse(name: &str) -> Result<CostMode, String> {
        match name {
            "capacity" => Ok(CostMode::Capacity),
            "free" => Ok(CostMode::Free),
            "exact1d" => Ok(CostMode::Exact1d),
            "wb" => Ok(CostMode::Wb),
            other => Err(format!(
                "unknown mode {other:?} (expected capacity, free, exact1d, or wb)"
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CostMode::Capacity => "capacity",
            CostMode::Free => "free",
            CostMode::Exact1d => "exact1d",
            CostMode::Wb => "wb",
        }
    }
}

/// Optimizer knobs shared by quantize/sweep/coeff, already shape-checked.
pub struct OptimizerFlags {
    pub seed: u64,
    pub restarts: usize,
    pub init: String,
    pub max_iters: usize,
    pub tol: f64,
    pub cell_limit: usize,
}

fn check_p(p: f64, out: &mut Vec<String>) {
    if !(p >= 1.0) || !p.is_finite() {
        out.push(format!("p must be a finite number ≥ 1, got {p}"));
    }
}

fn check_resolution(resolution: usize, out: &mut Vec<String>) {
    if resolution < 1 {
        out.push("resolution must be ≥ 1".into());
    }
}

fn check_optimizer(flags: &OptimizerFlags, out: &mut Vec<String>) {
    if flags.restarts < 1 {
        out.push("restarts must be ≥ 1".into());
    }
    if flags.max_iters < 1 {
        out.push("max-iters must be ≥ 1".into());
    }
    if !(flags.tol > 0.0) || !flags.tol.is_finite() {
        out.push(format!("tol must be a positive finite number, got {}", flags.tol));
    }
    if flags.cell_limit < 1 {
        out.push("cell-limit must be ≥ 1".into());
    }
    match InitStrategy::parse(&flags.init) {
        Ok(InitStrategy::User) => out.push(
            "init user needs a caller-supplied cloud and is not reachable from the CLI; \
             use rho_sample or grid_jitter"
            .into(),
        ),
        Ok(_) => {}
        Err(e) => out.push(e.to_string()),
    }
}

/// Parses the method names, pushing one violation per unknown name or
/// missing theta; the surviving methods are returned in order.
pub fn parse_methods(names: &[String], theta: Option<f64>, out: &mut Vec<String>) -> Vec<Method> {
    if names.is_empty() {
        out.push("at least one method is required".into());
    }
    let mut methods = Vec::with_capacity(names.len());
    for name in names {
        match Method::parse(name, theta) {
            Ok(m) => methods.push(m),
            Err(e) => out.push(e.to_string()),
        }
    }
    methods
}

fn check_n_list(n_list: &[usize], out: &mut Vec<String>) {
    if n_list.is_empty() {
        out.push("n-list must be nonempty".into());
        return;
    }
    if n_list[0] < 1 {
        out.push("n-list entries must be ≥ 1".into());
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        out.push("n-list must be strictly increasing".into());
    }
}

fn check_omega_shape(omega: &Option<Vec<f64>>, mode: CostMode, out: &mut Vec<String>) {
    match omega {
        None if mode == CostMode::Wb => {
            out.push("mode wb requires --omega lo_1,hi_1,…,lo_d,hi_d".into())
        }
        None => {}
        Some(_) if mode != CostMode::Wb => {
            out.push(format!("--omega only applies to mode wb, not {}", mode.name()))
        }
        Some(vals) => {
            if vals.len() < 2 || vals.len() % 2 != 0 {
                out.push(format!(
                    "omega needs an even number of coordinates (lo,hi per axis), got {}",
                    vals.len()
                ));
                return;
            }
            for (k, pair) in vals.chunks(2).enumerate() {
                if !pair[0].is_finite() || !pair[1].is_finite() || pair[0] >= pair[1] {
                    out.push(format!(
                        "omega axis {k}: need finite lo < hi, got [{}, {}]",
                        pair[0], pair[1]
                    ));
                }
            }
        }
    }
}

/// Phase-one violations: everything visible from the flags alone. Returns
/// the parsed method list / cost mode where applicable so the caller does
/// not parse twice.
pub fn shape_violations(cmd: &Command) -> (Vec<String>, Vec<Method>, Option<CostMode>) {
    let mut v = Vec::new();
    let mut methods = Vec::new();
    let mut mode = None;
    match cmd {
        Command::Grid(a) => check_resolution(a.resolution, &mut v),
        Command::Quantize(a) => {
            check_p(a.p, &mut v);
            check_resolution(a.resolution, &mut v);
            if a.n < 1 {
                v.push("n must be ≥ 1".into());
            }
            methods = parse_methods(&a.method, a.theta, &mut v);
            check_optimizer(&optimizer_flags_quantize(a), &mut v);
        }
        Command::Error(a) => {
            check_p(a.p, &mut v);
            if a.cell_limit < 1 {
                v.push("cell-limit must be ≥ 1".into());
            }
            match CostMode::parse(&a.mode) {
                Ok(m) => {
                    check_omega_shape(&a.omega, m, &mut v);
                    mode = Some(m);
                }
                Err(e) => v.push(e),
            }
        }
        Command::Sweep(a) => {
            check_p(a.p, &mut v);
            check_resolution(a.resolution, &mut v);
            check_n_list(&a.n_list, &mut v);
            methods = parse_methods(&a.method, a.theta, &mut v);
            check_optimizer(&optimizer_flags_sweep(a), &mut v);
        }
        Command::Coeff(a) => {
            check_p(a.sweep.p, &mut v);
            check_resolution(a.sweep.resolution, &mut v);
            check_n_list(&a.sweep.n_list, &mut v);
            methods = parse_methods(&a.sweep.method, a.sweep.theta, &mut v);
            check_optimizer(&optimizer_flags_sweep(&a.sweep), &mut v);
        }
        Command::Report(a) => {
            check_p(a.p, &mut v);
            check_resolution(a.resolution, &mut v);
            match (&a.spec, &a.grid) {
                (Some(_), Some(_)) => v.push("--spec and --grid are mutually exclusive".into()),
                (None, None) => v.push("report needs either --spec or --grid".into()),
                _ => {}
            }
        }
    }
    (v, methods, mode)
}

pub fn optimizer_flags_quantize(a: &QuantizeArgs) -> OptimizerFlags {
    OptimizerFlags {
        seed: a.seed,
        restarts: a.restarts,
        init: a.init.clone(),
        max_iters: a.max_iters,
        tol: a.tol,
        cell_limit: a.cell_limit,
    }
}

pub fn optimizer_flags_sweep(a: &SweepArgs) -> OptimizerFlags {
    OptimizerFlags {
        seed: a.seed,
        restarts: a.restarts,
        init: a.init.clone(),
        max_iters: a.max_iters,
        tol: a.tol,
        cell_limit: a.cell_limit,
    }
}

/// Phase-two violations: checks that need the ambient dimension. `n` is
/// the single point count for quantize, or the largest swept n (so a
/// sweep is only rejected when no row could ever run; smaller n may still
/// fail per-row and are marked in the CSV rather than blocking the run).
pub fn method_violations(methods: &[Method], d: usize, n: usize, p: f64) -> Vec<String> {
    methods
        .iter()
        .filter_map(|m| m.applicability(d, n, p))
        .collect()
}

/// Phase-two check shared by coeff/report: an explicit --d must match the
/// measure's own dimension.
pub fn dimension_flag_violation(requested: Option<usize>, actual: usize) -> Option<String> {
    match requested {
        Some(d) if d != actual => Some(format!(
            "--d {d} does not match the measure's dimension {actual}"
        )),
        _ => None,
    }
}
