//! Exact capacity-constrained transport on the line.
//!
//! In 1D the optimal coupling between any density and n equal-weight sites
//! is monotone: sort the sites, then the i-th site receives exactly the
//! mass between the (i-1)/n and i/n quantiles. The grid is read as the
//! piecewise-uniform density it discretizes (cells marked singular are
//! read as atoms at their centers), so the per-slice cost is a closed-form
//! integral rather than a center-distance approximation.

use crate::error::{Error, Result};
use crate::measure::GridDensity;
use crate::num::{abs_pow, root_p, KahanAcc};
use crate::transport::{PlanEntry, PointCloud, TransportPlan};

/// Antiderivative of t ↦ |t|^p: G(t) = t·|t|^p / (p+1).
pub(crate) fn g(t: f64, p: f64) -> f64 {
    t * abs_pow(t, p) / (p + 1.0)
}

/// Exact W_p between a 1D grid density and a uniform-weight cloud under the
/// capacity constraint. Returns the cost and the cell-level plan; the plan's
/// `cost_pow_p` is the exact integral, not a sum of center distances.
pub fn w1d_exact(
    grid: &GridDensity,
    cloud: &PointCloud,
    p: f64,
) -> Result<(f64, TransportPlan)> {
    if grid.d() != 1 || cloud.d() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "w1d_exact needs d=1, got grid d={} cloud d={}",
            grid.d(),
            cloud.d()
        )));
    }
    super::check_common(grid, cloud, p)?;
    super::check_totals(grid, cloud)?;

    let n = cloud.n();
    let w = grid.total() / n as f64;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        cloud.point(a)[0]
            .partial_cmp(&cloud.point(b)[0])
            .expect("finite coordinates")
            .then(a.cmp(&b))
    });

    let h = grid.spacing();
    let origin = grid.origin()[0];
    let mut acc = KahanAcc::new();
    let mut cum = KahanAcc::new();
    let mut entries: Vec<PlanEntry> = Vec::new();
    let mut band = 0usize;

    for c in 0..grid.masses().len() {
        let m = grid.masses()[c];
        if m <= 0.0 {
            continue;
        }
        let cell_start = cum.total();
        let cell_end = cell_start + m;
        let lo = origin + c as f64 * h;
        let atom = grid.singular_cells().contains(&c);
        loop {
            let b_start = band as f64 * w;
            // The last band absorbs any floating-point residue at the top.
            let b_end = if band + 1 == n {
                f64::INFINITY
            } else {
                (band + 1) as f64 * w
            };
            let q0 = cell_start.max(b_start);
            let q1 = cell_end.min(b_end);
            if q1 > q0 {
                let point = order[band];
                let x = cloud.point(point)[0];
                let mass = q1 - q0;
                let cost = if atom {
                    mass * abs_pow(lo + 0.5 * h - x, p)
                } else {
                    let a = lo + (q0 - cell_start) / m * h;
                    let b = lo + (q1 - cell_start) / m * h;
                    m / h * (g(b - x, p) - g(a - x, p))
                };
                acc.add(cost);
                entries.push(PlanEntry {
                    cell: c,
                    point,
                    mass,
                });
            }
            if b_end <= cell_end && band + 1 < n {
                band += 1;
            } else {
                break;
            }
        }
        cum.add(m);
    }

    entries.sort_by(|a, b| a.cell.cmp(&b.cell).then(a.point.cmp(&b.point)));
    let cost_pow_p = acc.total();
    let plan = TransportPlan {
        entries,
        cost_pow_p,
        p,
    };
    Ok((root_p(cost_pow_p, p), plan))
}
