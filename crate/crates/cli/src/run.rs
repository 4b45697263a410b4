//! Command execution: load inputs, validate, compute, write outputs.

use std::path::{Path, PathBuf};

use eqq_core::io;
use eqq_core::{
    best_quantizer, bound_report, coefficient_estimate, grid_for_spec, nearest_assignment_cost,
    solve_uniform_capacity_with_limit, sweep, w1d_exact, wb_boundary, Error, GridDensity,
    InitStrategy, Method, OptimizerConfig, SweepResult,
};

use crate::config::{
    dimension_flag_violation, method_violations, optimizer_flags_quantize, optimizer_flags_sweep,
    shape_violations, Cli, Command, CostMode, ErrorArgs, GridArgs, OptimizerFlags, QuantizeArgs,
    ReportArgs, SweepArgs,
};

/// Why a run stopped: a validation report (exit 2, all violations listed)
/// or an error from the computation itself (exit per its class).
pub enum Failure {
    Violations(Vec<String>),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure::Core(e)
    }
}

fn fail_unless_empty(violations: Vec<String>) -> Result<(), Failure> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violations(violations))
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    let (shape, methods, mode) = shape_violations(&cli.command);
    // Unknown method names are already in `shape`; the surviving methods
    // feed the dimension checks below only when the shape is sound.
    fail_unless_empty(shape)?;
    match cli.command {
        Command::Grid(a) => run_grid(a),
        Command::Quantize(a) => run_quantize(a, methods),
        Command::Error(a) => run_error(a, mode.expect("mode parsed in shape phase")),
        Command::Sweep(a) => run_sweep(a, methods).map(|_| ()),
        Command::Coeff(a) => {
            let d = a.d;
            let sweep_out = a.sweep_out.clone();
            run_coeff(a.sweep, methods, d, sweep_out)
        }
        Command::Report(a) => run_report(a),
    }
}

fn optimizer_config(flags: &OptimizerFlags) -> OptimizerConfig {
    OptimizerConfig {
        max_iters: flags.max_iters,
        tol: flags.tol,
        restarts: flags.restarts,
        seed: flags.seed,
        init: InitStrategy::parse(&flags.init).expect("init checked in shape phase"),
        cell_limit: flags.cell_limit,
    }
}

fn run_grid(a: GridArgs) -> Result<(), Failure> {
    let spec = io::read_measure_spec(&a.spec)?;
    let grid = grid_for_spec(&spec, a.resolution, true)?;
    io::write_grid_json(&a.out, &grid)?;
    Ok(())
}

/// The quantize run summary lands next to the cloud: same stem, extension
/// `.result.json`.
fn result_json_path(out: &Path) -> PathBuf {
    let mut p = out.to_path_buf();
    p.set_extension("result.json");
    p
}

fn run_quantize(a: QuantizeArgs, methods: Vec<Method>) -> Result<(), Failure> {
    let spec = io::read_measure_spec(&a.spec)?;
    fail_unless_empty(method_violations(&methods, spec.d(), a.n, a.p))?;
    let grid = grid_for_spec(&spec, a.resolution, true)?;
    let cfg = optimizer_config(&optimizer_flags_quantize(&a));
    let result = best_quantizer(&grid, a.n, a.p, &methods, &cfg, a.polish)?;
    io::write_cloud_csv(&a.out, &result.cloud)?;
    io::write_quantizer_result_json(&result_json_path(&a.out), &result, a.p)?;
    Ok(())
}

fn read_cloud(path: &Path) -> Result<eqq_core::PointCloud, Error> {
    if path.extension().is_some_and(|e| e == "json") {
        io::read_cloud_json(path)
    } else {
        io::read_cloud_csv(path)
    }
}

fn run_error(a: ErrorArgs, mode: CostMode) -> Result<(), Failure> {
    let grid = io::read_grid_json(&a.grid)?;
    let cloud = read_cloud(&a.cloud)?;
    let d = grid.d();
    let mut violations = Vec::new();
    if mode == CostMode::Exact1d && d != 1 {
        violations.push(format!("mode exact1d requires d = 1, got d = {d}"));
    }
    if mode == CostMode::Wb {
        let len = a.omega.as_ref().map_or(0, Vec::len);
        if len != 2 * d {
            violations.push(format!(
                "omega has {len} coordinates but the measures are {d}-dimensional (need {})",
                2 * d
            ));
        }
    }
    fail_unless_empty(violations)?;

    let cost = match mode {
        CostMode::Capacity => {
            solve_uniform_capacity_with_limit(&grid, &cloud, a.p, a.cell_limit)?.0
        }
        CostMode::Free => nearest_assignment_cost(&grid, &cloud, a.p)?,
        CostMode::Exact1d => w1d_exact(&grid, &cloud, a.p)?.0,
        CostMode::Wb => {
            let omega = a.omega.as_ref().expect("omega checked above");
            let lo: Vec<f64> = omega.chunks(2).map(|c| c[0]).collect();
            let hi: Vec<f64> = omega.chunks(2).map(|c| c[1]).collect();
            wb_boundary(&grid, &cloud, a.p, &lo, &hi)?
        }
    };
    println!("{}", io::fmt_float(cost));
    if let Some(out) = &a.out {
        let payload = serde_json::json!({ "mode": mode.name(), "p": a.p, "cost": cost });
        io::write_json(out, &payload)?;
    }
    Ok(())
}

fn run_sweep(a: SweepArgs, methods: Vec<Method>) -> Result<SweepResult, Failure> {
    let spec = io::read_measure_spec(&a.spec)?;
    let max_n = *a.n_list.last().expect("n-list checked in shape phase");
    fail_unless_empty(method_violations(&methods, spec.d(), max_n, a.p))?;
    let cfg = optimizer_config(&optimizer_flags_sweep(&a));
    let result = sweep(&spec, a.p, &a.n_list, &methods, &cfg, a.resolution)?;
    io::write_sweep_csv(&a.out, &result)?;
    Ok(result)
}

fn run_coeff(
    a: SweepArgs,
    methods: Vec<Method>,
    d: Option<usize>,
    sweep_out: Option<PathBuf>,
) -> Result<(), Failure> {
    let spec = io::read_measure_spec(&a.spec)?;
    let max_n = *a.n_list.last().expect("n-list checked in shape phase");
    let mut violations = Vec::new();
    if let Some(v) = dimension_flag_violation(d, spec.d()) {
        violations.push(v);
    }
    violations.extend(method_violations(&methods, spec.d(), max_n, a.p));
    fail_unless_empty(violations)?;
    let d = d.unwrap_or(spec.d());

    let cfg = optimizer_config(&optimizer_flags_sweep(&a));
    let rows = sweep(&spec, a.p, &a.n_list, &methods, &cfg, a.resolution)?;
    if let Some(path) = &sweep_out {
        io::write_sweep_csv(path, &rows)?;
    }
    let estimate = coefficient_estimate(&rows, d)?;
    io::write_json(&a.out, &estimate)?;
    Ok(())
}

fn run_report(a: ReportArgs) -> Result<(), Failure> {
    let grid: GridDensity = match (&a.spec, &a.grid) {
        (Some(spec_path), None) => {
            let spec = io::read_measure_spec(spec_path)?;
            grid_for_spec(&spec, a.resolution, true)?
        }
        (None, Some(grid_path)) => io::read_grid_json(grid_path)?,
        _ => unreachable!("spec/grid exclusivity checked in shape phase"),
    };
    let mut violations = Vec::new();
    if let Some(v) = dimension_flag_violation(a.d, grid.d()) {
        violations.push(v);
    }
    let d = a.d.unwrap_or(grid.d());
    if a.p >= d as f64 {
        violations.push(format!(
            "the empirical functionals need p < d (exponent (d−p)/d must lie in (0,1]); \
             got p = {}, d = {d}",
            a.p
        ));
    }
    fail_unless_empty(violations)?;
    let report = bound_report(&grid, a.p, d, a.q_lower, a.q_upper)?;
    io::write_json(&a.out, &report)?;
    Ok(())
}
