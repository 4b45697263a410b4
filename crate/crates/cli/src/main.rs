//! `eqq`: quantizers, transport costs, and asymptotic sweeps from the
//! command line.
//!
//! Six subcommands cover the pipeline: `grid` rasterizes a measure spec,
//! `quantize` constructs an n-point quantizer, `error` evaluates a single
//! transport cost, `sweep` runs (n, method) grids, `coeff` turns a sweep
//! into a quantization-coefficient estimate, and `report` computes density
//! functionals with bound right-hand sides.
//!
//! Exit codes: 0 on success, 2 when the configuration or an input file is
//! invalid, 3 when a solver fails. Failures are reported on stderr as a
//! single JSON line `{"error": code, "detail": …}`; validation failures
//! list every violation at once. `EQQ_THREADS` caps worker parallelism.

mod config;
mod run;

use std::process::ExitCode;

use clap::Parser;

use run::Failure;

fn emit_violations(violations: &[String]) -> ExitCode {
    eprintln!(
        "{}",
        serde_json::json!({ "error": "validation", "detail": violations })
    );
    ExitCode::from(2)
}

/// Applies `EQQ_THREADS` to the global worker pool before any job runs.
fn apply_thread_cap() -> Result<(), String> {
    let raw = match std::env::var("EQQ_THREADS") {
        Err(std::env::VarError::NotPresent) => return Ok(()),
        Err(std::env::VarError::NotUnicode(_)) => {
            return Err("EQQ_THREADS is not valid UTF-8".into())
        }
        Ok(raw) => raw,
    };
    match raw.trim().parse::<usize>() {
        Ok(threads) if threads >= 1 => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .map_err(|e| format!("EQQ_THREADS: worker pool rejected the cap: {e}"))
        }
        _ => Err(format!(
            "EQQ_THREADS must be a positive integer, got {raw:?}"
        )),
    }
}

fn main() -> ExitCode {
    let cli = config::Cli::parse();
    if let Err(violation) = apply_thread_cap() {
        return emit_violations(&[violation]);
    }
    match run::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violations(violations)) => emit_violations(&violations),
        Err(Failure::Core(err)) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": err.code(), "detail": err.to_string() })
            );
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
