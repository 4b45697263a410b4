//! Asymptotic experiments: n-sweeps, coefficient estimates, rate fits, and
//! bound reports.
//!
//! A sweep runs a set of quantizer methods over an increasing list of n on
//! one grid and records the empirical cost of each (n, method) job together
//! with its n^{1/d}-scaled value. From sweeps one extracts
//! - coefficient estimates: min over rows of n^{1/d}·error, a valid upper
//!   estimate of the optimal empirical quantization coefficient
//!   Q̃_{p,d} = inf_n n^{1/d}·ẽ_{p,n}(U_d) (and of q_{p,d} via classical
//!   costs), because every row is itself an upper estimate;
//! - rate fits: OLS of log(error) against log(n), with the smallest 20% of
//!   n values excluded to reduce preasymptotic bias;
//! - bound reports: the density functionals ∫ρ^{d/(d+p)} (Zador) and
//!   ∫ρ^{(d−p)/d} (empirical high-resolution formula, full and with the
//!   singular support excluded), combined with user-supplied coefficient
//!   bounds into right-hand sides for the sandwich
//!   q·(∫_{∖supp μs} ρ^{(d−p)/d})^{1/p} ≤ liminf n^{1/d}ẽ ≤
//!   limsup n^{1/d}ẽ ≤ Q̃·(∫ρ^{(d−p)/d})^{1/p}.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{density_functional, grid_for_spec, MeasureSpec};
use crate::quantize::{best_quantizer, Method, OptimizerConfig};

/// One (n, method) job of a sweep. `error` is the empirical cost estimate;
/// a failed job is marked by `error = NaN` with the detail in `note`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub method: String,
    pub p: f64,
    pub d: usize,
    pub error: f64,
    /// n^{1/d}·error, the quantity whose limit is the quantization
    /// coefficient.
    pub scaled_error: f64,
    pub seed: u64,
    pub restarts: usize,
    /// Wall-clock runtime of the job. The one field that is not
    /// deterministic across reruns.
    pub runtime_ms: u64,
    /// Failure detail for rows with `error = NaN`; not part of the CSV
    /// schema.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

/// All rows of one sweep, ordered by (n, method-list position).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub measure_id: String,
    pub grid_resolution: usize,
}

/// Upper estimate of a quantization coefficient extracted from a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoeffEstimate {
    /// min over rows of scaled_error.
    pub value: f64,
    /// The n achieving the minimum.
    pub at_n: usize,
    /// The method achieving the minimum.
    pub method: String,
    pub p: f64,
    pub d: usize,
    pub seed: u64,
    pub restarts: usize,
    pub grid_resolution: usize,
}

/// OLS fit of log(error) against log(n), with the fitting window recorded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Smallest and largest n actually used (after the 20% exclusion).
    pub n_min_used: usize,
    pub n_max_used: usize,
    pub rows_used: usize,
}

/// Functionals and (optional) right-hand sides of the asymptotic bounds.
/// The rhs fields are filled only when the corresponding coefficient input
/// is provided, since no numeric q_{p,d} is available in general.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub p: f64,
    pub d: usize,
    /// ∫ρ^{d/(d+p)} (Zador's functional).
    pub zador_functional: f64,
    /// ∫ρ^{(d−p)/d} over everything.
    pub empirical_functional_full: f64,
    /// ∫ρ^{(d−p)/d} excluding the singular support.
    pub empirical_functional_excl: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q_lower_input: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q_upper_input: Option<f64>,
    /// q_lower·(∫_{∖supp μs} ρ^{(d−p)/d})^{1/p}: lower sandwich side.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rhs_l: Option<f64>,
    /// q_upper·(∫ρ^{(d−p)/d})^{1/p}: upper sandwich side.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rhs_u: Option<f64>,
    /// q_lower·(∫ρ^{d/(d+p)})^{(d+p)/(dp)}: Zador's classical limit.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rhs_zador: Option<f64>,
}

/// Runs every method over every n of `n_list` on one grid discretization
/// of `spec` and records one row per (n, method) job.
///
/// Construction methods are polished by a warm-started capacity pass (a
/// strictly-not-worse upper estimate); the Lloyd methods run their own
/// optimization. Job failures (inapplicable method, solver error) are
/// recorded as NaN rows with a note and do not abort the sweep. Everything
/// except `runtime_ms` is deterministic given the config's seed.
pub fn sweep(
    spec: &MeasureSpec,
    p: f64,
    n_list: &[usize],
    methods: &[Method],
    cfg: &OptimizerConfig,
    grid_resolution: usize,
) -> Result<SweepResult> {
    if n_list.is_empty() {
        return Err(Error::Precondition("sweep: n_list must be nonempty".into()));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition(
            "sweep: n_list must be strictly increasing".into(),
        ));
    }
    if n_list[0] == 0 {
        return Err(Error::Precondition("sweep: n must be ≥ 1".into()));
    }
    if methods.is_empty() {
        return Err(Error::Precondition("sweep: method set must be nonempty".into()));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Precondition(format!("sweep: p must be ≥ 1, got {p}")));
    }
    cfg.validate()?;

    let grid = grid_for_spec(spec, grid_resolution, true)?;
    let d = grid.d();
    let mut rows = Vec::with_capacity(n_list.len() * methods.len());
    for &n in n_list {
        for method in methods {
            let polish = !matches!(method, Method::LloydCapacity | Method::LloydClassical);
            let started = Instant::now();
            let outcome = best_quantizer(&grid, n, p, std::slice::from_ref(method), cfg, polish);
            let runtime_ms = started.elapsed().as_millis() as u64;
            let (error, note) = match outcome {
                Ok(result) => (result.cost, None),
                Err(e) => (f64::NAN, Some(e.to_string())),
            };
            rows.push(SweepRow {
                n,
                method: method.tag().to_string(),
                p,
                d,
                error,
                scaled_error: (n as f64).powf(1.0 / d as f64) * error,
                seed: cfg.seed,
                restarts: cfg.restarts,
                runtime_ms,
                note,
            });
        }
    }
    Ok(SweepResult {
        rows,
        measure_id: spec.id(),
        grid_resolution,
    })
}

/// Minimum scaled error over the sweep: an upper estimate of the
/// quantization coefficient inf_n n^{1/d}·error_n (every row is itself an
/// upper estimate, so the min over rows still is one).
pub fn coefficient_estimate(sweep: &SweepResult, d: usize) -> Result<CoeffEstimate> {
    let mut best: Option<&SweepRow> = None;
    for row in &sweep.rows {
        if row.d != d || !row.scaled_error.is_finite() {
            continue;
        }
        if best.map_or(true, |b| row.scaled_error < b.scaled_error) {
            best = Some(row);
        }
    }
    let row = best.ok_or_else(|| {
        Error::EmptySweep(format!("no finite rows with d = {d} to estimate from"))
    })?;
    Ok(CoeffEstimate {
        value: row.scaled_error,
        at_n: row.n,
        method: row.method.clone(),
        p: row.p,
        d,
        seed: row.seed,
        restarts: row.restarts,
        grid_resolution: sweep.grid_resolution,
    })
}

/// OLS of log(error) against log(n) over the sweep's usable rows (finite
/// positive error). The smallest 20% of distinct n values are excluded to
/// reduce preasymptotic bias; the window actually used is recorded.
pub fn rate_fit(sweep: &SweepResult) -> Result<RateFit> {
    let usable: Vec<&SweepRow> = sweep
        .rows
        .iter()
        .filter(|r| r.error.is_finite() && r.error > 0.0)
        .collect();
    if usable.len() < 3 {
        return Err(Error::Precondition(format!(
            "rate_fit needs ≥ 3 rows with positive error, got {}",
            usable.len()
        )));
    }
    let mut distinct_n: Vec<usize> = usable.iter().map(|r| r.n).collect();
    distinct_n.sort_unstable();
    distinct_n.dedup();
    let dropped = distinct_n.len() / 5;
    let n_floor = distinct_n[dropped];
    let window: Vec<&SweepRow> = usable.iter().copied().filter(|r| r.n >= n_floor).collect();
    if window.len() < 3 || distinct_n.len() - dropped < 2 {
        return Err(Error::DegenerateFit(
            "fewer than 3 rows / 2 distinct n after the 20% exclusion".into(),
        ));
    }

    let m = window.len() as f64;
    let xs: Vec<f64> = window.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = window.iter().map(|r| r.error.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / m;
    let y_mean = ys.iter().sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..window.len() {
        let dx = xs[i] - x_mean;
        let dy = ys[i] - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if syy == 0.0 {
        return Err(Error::DegenerateFit("all errors in the window are equal".into()));
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all n in the window are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res = syy - slope * sxy;
    let r2 = 1.0 - ss_res / syy;
    Ok(RateFit {
        slope,
        intercept,
        r2,
        n_min_used: window.iter().map(|r| r.n).min().unwrap(),
        n_max_used: window.iter().map(|r| r.n).max().unwrap(),
        rows_used: window.len(),
    })
}

/// The two-distant-blocks lower bound: for μ = β·U(B) + (1−β)·U(B′) with
/// the blocks r apart, n^{1/p}·ẽ_{p,n}(μ) ≥ (r/2)·min(τ, 1−τ)^{1/p} where
/// τ = frac(n·β): whichever block's quota is fractional leaves at least
/// min(τ, 1−τ)/n mass to be carried across the gap.
pub fn distant_bound(n: usize, r: f64, beta: f64, p: f64) -> f64 {
    debug_assert!(n >= 1, "distant_bound: n must be ≥ 1");
    debug_assert!(beta > 0.0 && beta < 1.0, "distant_bound: beta must be in (0,1)");
    debug_assert!(r > 0.0, "distant_bound: r must be positive");
    let tau = (n as f64 * beta).fract();
    (r / 2.0) * (tau.min(1.0 - tau) / n as f64).powf(1.0 / p)
}

/// Evaluates the bound functionals on a grid and, when coefficient inputs
/// are given, the right-hand sides of the sandwich and of Zador's limit.
/// The report always carries the empirical functionals, so p < d is
/// required (the exponent (d−p)/d must lie in (0,1)).
pub fn bound_report(
    grid: &crate::measure::GridDensity,
    p: f64,
    d: usize,
    q_lower_input: Option<f64>,
    q_upper_input: Option<f64>,
) -> Result<BoundReport> {
    if grid.d() != d {
        return Err(Error::DimensionMismatch(format!(
            "bound_report: grid d = {} but d = {d} requested",
            grid.d()
        )));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Precondition(format!("bound_report: p must be ≥ 1, got {p}")));
    }
    let df = d as f64;
    if p >= df {
        return Err(Error::ExponentOutOfRange(format!(
            "empirical functional exponent (d−p)/d = {} requires p < d (p = {p}, d = {d})",
            (df - p) / df
        )));
    }
    let zador_functional = density_functional(grid, df / (df + p), false)?;
    let emp_exp = (df - p) / df;
    let empirical_functional_full = density_functional(grid, emp_exp, false)?;
    let empirical_functional_excl = density_functional(grid, emp_exp, true)?;
    let rhs_l = q_lower_input.map(|q| q * empirical_functional_excl.powf(1.0 / p));
    let rhs_u = q_upper_input.map(|q| q * empirical_functional_full.powf(1.0 / p));
    let rhs_zador = q_lower_input.map(|q| q * zador_functional.powf((df + p) / (df * p)));
    Ok(BoundReport {
        p,
        d,
        zador_functional,
        empirical_functional_full,
        empirical_functional_excl,
        q_lower_input,
        q_upper_input,
        rhs_l,
        rhs_u,
        rhs_zador,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_sweep(errs: &[(usize, f64)]) -> SweepResult {
        SweepResult {
            rows: errs
                .iter()
                .map(|&(n, error)| SweepRow {
                    n,
                    method: "synthetic".into(),
                    p: 2.0,
                    d: 1,
                    error,
                    scaled_error: n as f64 * error,
                    seed: 0,
                    restarts: 1,
                    runtime_ms: 0,
                    note: None,
                })
                .collect(),
            measure_id: "synthetic".into(),
            grid_resolution: 0,
        }
    }

    #[test]
    fn sweep_midpoint_on_u1_matches_formula() {
        let spec = MeasureSpec::UniformCube { d: 1, declared_total: 1.0 };
        let cfg = OptimizerConfig::default();
        for p in [1.0_f64, 2.0] {
            let result =
                sweep(&spec, p, &[1, 2, 4], &[Method::Midpoint], &cfg, 4096).unwrap();
            assert_eq!(result.rows.len(), 3);
            assert_eq!(result.measure_id, "uniform_cube_d1");
            for row in &result.rows {
                let exact = 1.0 / ((p + 1.0).powf(1.0 / p) * 2.0 * row.n as f64);
                // Sweep costs are LP-on-atoms evaluations; they sit below
                // the continuum value by the within-cell moment, O(h²)
                // relative at these n.
                assert!(
                    (row.error - exact).abs() < 2e-6 * exact,
                    "p={p} n={}: {} vs {}",
                    row.n,
                    row.error,
                    exact
                );
                assert!(
                    (row.scaled_error - row.n as f64 * row.error).abs()
                        <= 1e-12 * row.scaled_error.abs()
                );
            }
        }
    }

    #[test]
    fn sweep_failures_are_marked_not_fatal() {
        let spec = MeasureSpec::UniformCube { d: 2, declared_total: 1.0 };
        let cfg = OptimizerConfig::default();
        // midpoint needs d = 1: rows must be NaN-marked, not errors.
        let result = sweep(&spec, 2.0, &[4], &[Method::Midpoint], &cfg, 32).unwrap();
        assert_eq!(result.rows.len(), 1);
        assert!(result.rows[0].error.is_nan());
        assert!(result.rows[0].note.is_some());
    }

    #[test]
    fn sweep_validates_inputs() {
        let spec = MeasureSpec::UniformCube { d: 1, declared_total: 1.0 };
        let cfg = OptimizerConfig::default();
        assert!(matches!(
            sweep(&spec, 2.0, &[], &[Method::Midpoint], &cfg, 64),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            sweep(&spec, 2.0, &[4, 4], &[Method::Midpoint], &cfg, 64),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            sweep(&spec, 2.0, &[4, 2], &[Method::Midpoint], &cfg, 64),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            sweep(&spec, 0.5, &[4], &[Method::Midpoint], &cfg, 64),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn coefficient_estimate_is_min_scaled_error() {
        let spec = MeasureSpec::UniformCube { d: 1, declared_total: 1.0 };
        let cfg = OptimizerConfig::default();
        let p = 2.0;
        let result = sweep(&spec, p, &[1, 2, 4, 8], &[Method::Midpoint], &cfg, 4096).unwrap();
        let est = coefficient_estimate(&result, 1).unwrap();
        // Midpoint rows are the constant sequence 1/(2(p+1)^{1/p}) up to
        // the O(h²) atom-discretization bias (largest at the largest n).
        let exact = 1.0 / (2.0 * (p + 1.0).powf(1.0 / p));
        assert!((est.value - exact).abs() < 1e-5 * exact, "{} vs {exact}", est.value);
        for row in &result.rows {
            assert!(est.value <= row.scaled_error + 1e-15);
        }
        assert!(matches!(
            coefficient_estimate(&result, 3),
            Err(Error::EmptySweep(_))
        ));
    }

    #[test]
    fn rate_fit_recovers_exact_power_law() {
        let rows: Vec<(usize, f64)> =
            [4usize, 8, 16].iter().map(|&n| (n, (n as f64).powf(-0.5))).collect();
        let fit = rate_fit(&synthetic_sweep(&rows)).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12, "slope {}", fit.slope);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert_eq!(fit.rows_used, 3);
    }

    #[test]
    fn rate_fit_excludes_smallest_fifth() {
        // 10 distinct n: the smallest 2 must be dropped.
        let rows: Vec<(usize, f64)> =
            (1..=10).map(|k| (1usize << k, (1.0_f64 / (1 << k) as f64))).collect();
        let fit = rate_fit(&synthetic_sweep(&rows)).unwrap();
        assert_eq!(fit.n_min_used, 8);
        assert_eq!(fit.n_max_used, 1024);
        assert_eq!(fit.rows_used, 8);
        assert!((fit.slope + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rate_fit_degenerate_and_short_inputs() {
        assert!(matches!(
            rate_fit(&synthetic_sweep(&[(2, 0.5), (4, 0.25)])),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            rate_fit(&synthetic_sweep(&[(2, 0.5), (4, 0.5), (8, 0.5)])),
            Err(Error::DegenerateFit(_))
        ));
        // NaN rows don't count as usable.
        assert!(matches!(
            rate_fit(&synthetic_sweep(&[(2, 0.5), (4, 0.25), (8, f64::NAN)])),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn distant_bound_matches_frozen_examples() {
        assert_eq!(distant_bound(4, 1.0, 0.5, 2.0), 0.0);
        let b1 = distant_bound(3, 1.0, 0.5, 1.0);
        assert!((b1 - 1.0 / 12.0).abs() < 1e-15, "{b1}");
        let b2 = distant_bound(3, 1.0, 0.5, 2.0);
        assert!((b2 - 0.2041241452319315).abs() < 1e-15, "{b2}");
    }

    #[test]
    fn bound_report_on_uniform_cube_is_all_ones() {
        let spec = MeasureSpec::UniformCube { d: 2, declared_total: 1.0 };
        let grid = grid_for_spec(&spec, 64, false).unwrap();
        let report = bound_report(&grid, 1.0, 2, Some(0.3), Some(0.4)).unwrap();
        assert!((report.zador_functional - 1.0).abs() < 1e-9);
        assert!((report.empirical_functional_full - 1.0).abs() < 1e-9);
        assert!((report.empirical_functional_excl - 1.0).abs() < 1e-9);
        // ρ ≡ 1 on the cube: every rhs reduces to its input coefficient.
        assert!((report.rhs_u.unwrap() - 0.4).abs() < 1e-9);
        assert!((report.rhs_l.unwrap() - 0.3).abs() < 1e-9);
        assert!((report.rhs_zador.unwrap() - 0.3).abs() < 1e-9);
        // Without inputs the rhs fields stay empty.
        let bare = bound_report(&grid, 1.0, 2, None, None).unwrap();
        assert!(bare.rhs_l.is_none() && bare.rhs_u.is_none() && bare.rhs_zador.is_none());
    }

    #[test]
    fn bound_report_gaussian_matches_quadrature_oracle() {
        // ∫φ^{1/2} over ℝ² for the standard Gaussian (d=2, p=1 exponent
        // (d−p)/d = 1/2): frozen quadrature value 4π/√(2π).
        let spec = MeasureSpec::Gaussian { d: 2, mean: vec![0.0, 0.0], sigma: 1.0, declared_total: 1.0 };
        let grid = grid_for_spec(&spec, 512, true).unwrap();
        let report = bound_report(&grid, 1.0, 2, None, None).unwrap();
        let frozen = 5.013256549262001_f64;
        assert!(
            (report.empirical_functional_full - frozen).abs() < 1e-3 * frozen,
            "{} vs {frozen}",
            report.empirical_functional_full
        );
    }

    #[test]
    fn bound_report_rejects_p_at_least_d() {
        let spec = MeasureSpec::UniformCube { d: 2, declared_total: 1.0 };
        let grid = grid_for_spec(&spec, 32, false).unwrap();
        assert!(matches!(
            bound_report(&grid, 2.0, 2, None, None),
            Err(Error::ExponentOutOfRange(_))
        ));
        assert!(matches!(
            bound_report(&grid, 3.0, 2, None, None),
            Err(Error::ExponentOutOfRange(_))
        ));
    }

    #[test]
    fn singular_support_exclusion_shrinks_the_functional() {
        // 70% uniform square + 30% singular segment: the excluded
        // functional must be strictly smaller.
        let spec = MeasureSpec::Mixture {
            parts: vec![
                crate::measure::MixturePart {
                    w: 0.7,
                    spec: MeasureSpec::UniformCube { d: 2, declared_total: 1.0 },
                },
                crate::measure::MixturePart {
                    w: 0.3,
                    spec: MeasureSpec::SegmentSingular {
                        d: 2,
                        a: vec![0.2, 0.2],
                        b: vec![0.8, 0.8],
                        declared_total: 1.0,
                    },
                },
            ],
            declared_total: 1.0,
        };
        let grid = grid_for_spec(&spec, 128, false).unwrap();
        assert!(!grid.singular_cells().is_empty());
        let report = bound_report(&grid, 1.0, 2, None, None).unwrap();
        assert!(
            report.empirical_functional_excl < report.empirical_functional_full,
            "excl {} !< full {}",
            report.empirical_functional_excl,
            report.empirical_functional_full
        );
    }
}
