//! Boundary pseudodistance on a box domain.
//!
//! Wb treats the boundary of Ω as a reservoir: mass of either measure may
//! be created or destroyed there, paying distance-to-boundary per unit.
//! Both measures are first restricted to the open box; a grid cell counts
//! as inside when its center is, and is read as an atom there.

use crate::error::{Error, Result};
use crate::measure::GridDensity;
use crate::num::{abs_pow, dist_pow_p, kahan_sum, root_p, KahanAcc};
use crate::transport::{solve_dense_bipartite, PointCloud};

fn inside(x: &[f64], lo: &[f64], hi: &[f64]) -> bool {
    x.iter()
        .zip(lo.iter().zip(hi))
        .all(|(&v, (&l, &h))| l < v && v < h)
}

/// Distance from an interior point to the boundary of the box [lo, hi].
fn boundary_dist(x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&v, (&l, &h))| (v - l).min(h - v))
        .fold(f64::INFINITY, f64::min)
}

/// Boundary pseudodistance Wb_{Ω,p} between a grid density and a cloud,
/// with Ω the open box (lo, hi). Unlike W_p the two restricted totals may
/// differ; the surplus flows to the boundary.
pub fn wb_boundary(
    grid: &GridDensity,
    cloud: &PointCloud,
    p: f64,
    lo: &[f64],
    hi: &[f64],
) -> Result<f64> {
    super::check_common(grid, cloud, p)?;
    let d = grid.d();
    if lo.len() != d || hi.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "wb domain has {} axes, measures have {d}",
            lo.len()
        )));
    }
    for k in 0..d {
        if !(lo[k] < hi[k]) || !lo[k].is_finite() || !hi[k].is_finite() {
            return Err(Error::Precondition(format!(
                "wb domain axis {k}: need finite lo < hi, got [{}, {}]",
                lo[k], hi[k]
            )));
        }
    }

    let mut center = vec![0.0; d];
    let mut in_cells: Vec<usize> = Vec::new();
    for c in grid.nonzero_cells() {
        grid.center_into(c, &mut center);
        if inside(&center, lo, hi) {
            in_cells.push(c);
        }
    }
    let in_points: Vec<usize> = (0..cloud.n())
        .filter(|&i| inside(cloud.point(i), lo, hi))
        .collect();
    if in_cells.is_empty() && in_points.is_empty() {
        return Ok(0.0);
    }

    let nc = in_cells.len();
    let np = in_points.len();
    let centers = grid.centers_flat(&in_cells);
    let w = cloud.weight_each();

    let mut supplies: Vec<f64> = in_cells.iter().map(|&c| grid.masses()[c]).collect();
    let mass_mu = kahan_sum(supplies.iter().copied());
    supplies.push(np as f64 * w);
    let mut demands = vec![w; np];
    demands.push(mass_mu);

    // Dense cost matrix over (cells + reservoir) x (points + reservoir).
    let cols = np + 1;
    let mut costs = vec![0.0_f64; (nc + 1) * cols];
    for s in 0..nc {
        let ctr = &centers[s * d..(s + 1) * d];
        for (t, &i) in in_points.iter().enumerate() {
            costs[s * cols + t] = dist_pow_p(ctr, cloud.point(i), p);
        }
        costs[s * cols + np] = abs_pow(boundary_dist(ctr, lo, hi), p);
    }
    for (t, &i) in in_points.iter().enumerate() {
        costs[nc * cols + t] = abs_pow(boundary_dist(cloud.point(i), lo, hi), p);
    }
    let max_cost = costs.iter().fold(0.0_f64, |a, &c| a.max(c));

    let flows = solve_dense_bipartite(&supplies, &demands, |s, t| costs[s * cols + t], max_cost)?;
    let mut acc = KahanAcc::new();
    for (s, t, f) in flows {
        acc.add(f * costs[s as usize * cols + t as usize]);
    }
    Ok(root_p(acc.total(), p))
}
