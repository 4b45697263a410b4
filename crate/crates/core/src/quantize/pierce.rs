//! Greedy moment-controlled quantizer with nonasymptotic support bounds.
//!
//! Builds n points one at a time: at step k the remaining mass is
//! restricted to the cube [−r_k, r_k]^d with r_k = (2nM/(n−k))^{1/θ}
//! (M the normalized θ-moment, so the cube holds at least one quota of
//! mass by Markov's inequality), a dyadic descent finds a small cube still
//! holding a full quota total/n, and that quota is extracted from the
//! descent cube in raster order. The extraction's support diameter is
//! recorded and obeys 4√d·r_k·(n‖ν_k‖)^{−1/d} + h√d, which is what drives
//! the bounded n^{1/d}-scaled error of the construction.

use crate::error::{Error, Result};
use crate::measure::{moment, GridDensity};
use crate::num::kahan_sum;
use crate::transport::PointCloud;

use super::p_centroid_flat;

/// Per-step bookkeeping of a [`pierce_greedy`] run.
#[derive(Debug, Clone)]
pub struct PierceTrace {
    /// Tail radii r_k, k = 1..n−1.
    pub radii: Vec<f64>,
    /// Mass of the remaining measure inside [−r_k, r_k]^d, as a fraction
    /// of the grid total (the ‖ν_k‖ of the diameter bound).
    pub box_masses: Vec<f64>,
    /// Recorded support diameter of each extraction (bounding-box diagonal
    /// of the touched cell centers plus one cell diagonal).
    pub diameters: Vec<f64>,
    /// The guaranteed ceilings 4√d·r_k·(n‖ν_k‖)^{−1/d} + h√d.
    pub diameter_bounds: Vec<f64>,
    /// Mass extracted per point, total/n.
    pub quota: f64,
}

/// Greedy construction; see the module docs. Returns the n-point cloud.
pub fn pierce_greedy(grid: &GridDensity, n: usize, theta: f64, p: f64) -> Result<PointCloud> {
    pierce_greedy_detailed(grid, n, theta, p).map(|(cloud, _)| cloud)
}

/// [`pierce_greedy`] plus the per-step radii, masses, and diameters used
/// by the diameter-bound checks.
pub fn pierce_greedy_detailed(
    grid: &GridDensity,
    n: usize,
    theta: f64,
    p: f64,
) -> Result<(PointCloud, PierceTrace)> {
    let d = grid.d();
    if n < 2 {
        return Err(Error::Precondition("pierce_greedy requires n ≥ 2".into()));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Precondition(format!("pierce_greedy requires p ≥ 1, got {p}")));
    }
    let df = d as f64;
    if p < df && theta <= p * df / (df - p) {
        return Err(Error::Precondition(format!(
            "pierce_greedy requires theta > p·d/(d−p) = {} when p < d, got theta = {theta}",
            p * df / (df - p)
        )));
    }
    let total = grid.total();
    if !(total > 0.0) {
        return Err(Error::EmptyMeasure("pierce_greedy: grid has no mass".into()));
    }
    let h = grid.spacing();
    let sqrt_d = df.sqrt();
    let quota = total / n as f64;
    // Normalized θ-moment of the grid measure (the paper's M for the
    // probability measure μ = grid/total).
    let m_norm = moment(grid, theta)? / total;

    let cells = grid.nonzero_cells();
    let centers = grid.centers_flat(&cells);
    let mut remaining: Vec<f64> = cells.iter().map(|&c| grid.masses()[c]).collect();
    let nc = remaining.len();

    let mut trace = PierceTrace {
        radii: Vec::with_capacity(n - 1),
        box_masses: Vec::with_capacity(n - 1),
        diameters: Vec::with_capacity(n - 1),
        diameter_bounds: Vec::with_capacity(n - 1),
        quota,
    };
    let mut points = Vec::with_capacity(n * d);
    let mut g_masses: Vec<f64> = Vec::new();
    let mut g_coords: Vec<f64> = Vec::new();

    for k in 1..n {
        let r_k = (2.0 * n as f64 * m_norm / (n - k) as f64).powf(1.0 / theta);
        // Candidate cells: positive remaining mass, center in the tail box.
        // Ascending cell order doubles as the raster extraction order.
        let mut cand: Vec<u32> = (0..nc as u32)
            .filter(|&i| {
                remaining[i as usize] > 0.0
                    && centers[i as usize * d..(i as usize + 1) * d]
                        .iter()
                        .all(|&v| v.abs() <= r_k)
            })
            .collect();
        let mut box_mass = kahan_sum(cand.iter().map(|&i| remaining[i as usize]));
        if box_mass < quota * (1.0 - 1e-9) {
            // Markov guarantees a quota inside the box in exact arithmetic;
            // if discretization residue ever lands us short, fall back to
            // the unrestricted remainder rather than failing the step.
            cand = (0..nc as u32).filter(|&i| remaining[i as usize] > 0.0).collect();
            box_mass = kahan_sum(cand.iter().map(|&i| remaining[i as usize]));
            if box_mass < quota * (1.0 - 1e-9) {
                return Err(Error::InsufficientMass(format!(
                    "pierce_greedy: {box_mass} mass left at step {k}, quota {quota}"
                )));
            }
        }
        trace.radii.push(r_k);
        trace.box_masses.push(box_mass / total);

        // Dyadic descent: halve the cube into 2^d children and follow the
        // heaviest child (lowest index on ties) while it still holds a
        // full quota.
        let mut cube_lo = vec![-r_k; d];
        let mut side = 2.0 * r_k;
        let n_children = 1usize << d;
        let mut child_mass = vec![0.0_f64; n_children];
        loop {
            let half = 0.5 * side;
            child_mass.iter_mut().for_each(|m| *m = 0.0);
            for &i in &cand {
                let c = &centers[i as usize * d..(i as usize + 1) * d];
                let mut child = 0usize;
                for k_ax in 0..d {
                    if c[k_ax] >= cube_lo[k_ax] + half {
                        child |= 1 << k_ax;
                    }
                }
                child_mass[child] += remaining[i as usize];
            }
            let (mut best_c, mut best_m) = (0usize, child_mass[0]);
            for (c, &m) in child_mass.iter().enumerate().skip(1) {
                if m > best_m {
                    best_c = c;
                    best_m = m;
                }
            }
            if best_m < quota || half <= 0.0 {
                break;
            }
            // Keep exactly the cells that were counted into the chosen
            // child, then shrink the cube.
            let lo_old = cube_lo.clone();
            cand.retain(|&i| {
                let c = &centers[i as usize * d..(i as usize + 1) * d];
                (0..d).all(|k_ax| {
                    let upper = best_c & (1 << k_ax) != 0;
                    if upper {
                        c[k_ax] >= lo_old[k_ax] + half
                    } else {
                        c[k_ax] < lo_old[k_ax] + half
                    }
                })
            });
            for k_ax in 0..d {
                if best_c & (1 << k_ax) != 0 {
                    cube_lo[k_ax] += half;
                }
            }
            side = half;
        }

        // Extract the quota from the descent cube in raster order, the
        // last touched cell split fractionally.
        g_masses.clear();
        g_coords.clear();
        let mut need = quota;
        let mut bb_lo = vec![f64::INFINITY; d];
        let mut bb_hi = vec![f64::NEG_INFINITY; d];
        for &i in &cand {
            if need <= 0.0 {
                break;
            }
            let i = i as usize;
            let take = remaining[i].min(need);
            if take <= 0.0 {
                continue;
            }
            remaining[i] -= take;
            need -= take;
            g_masses.push(take);
            let c = &centers[i * d..(i + 1) * d];
            g_coords.extend_from_slice(c);
            for k_ax in 0..d {
                bb_lo[k_ax] = bb_lo[k_ax].min(c[k_ax]);
                bb_hi[k_ax] = bb_hi[k_ax].max(c[k_ax]);
            }
        }
        if need > quota * 1e-9 {
            return Err(Error::InsufficientMass(format!(
                "pierce_greedy: descent cube ran dry at step {k} ({need} of {quota} missing)"
            )));
        }
        let diag_sq: f64 = (0..d).map(|k_ax| (bb_hi[k_ax] - bb_lo[k_ax]).powi(2)).sum();
        trace.diameters.push(diag_sq.sqrt() + h * sqrt_d);
        let nu = trace.box_masses.last().copied().unwrap_or(1.0);
        trace
            .diameter_bounds
            .push(4.0 * sqrt_d * r_k * (n as f64 * nu).powf(-1.0 / df) + h * sqrt_d);

        let mut point = vec![0.0_f64; d];
        p_centroid_flat(&g_masses, &g_coords, d, p, &mut point);
        points.extend_from_slice(&point);
    }
    // x_n: the origin carries whatever remains.
    points.extend_from_slice(&vec![0.0_f64; d]);

    let cloud = PointCloud::from_flat(d, points, quota)?;
    Ok((cloud, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{grid_for_spec, MeasureSpec};
    use std::collections::BTreeSet;

    #[test]
    fn radius_formula_matches_frozen_example() {
        // Unit normalized 4th moment: a single atom at x = 1. Then
        // r_2 = (2·4·1/(4−2))^{1/4} = 4^{1/4} = √2.
        let grid = GridDensity::from_parts(
            1,
            vec![3],
            vec![0.0],
            0.4,
            vec![0.0, 0.0, 1.0],
            1.0,
            BTreeSet::from([2usize]),
        )
        .unwrap();
        let (_, trace) = pierce_greedy_detailed(&grid, 4, 4.0, 2.0).unwrap();
        let frozen = 1.4142135623730951_f64;
        assert!((trace.radii[1] - frozen).abs() < 1e-15 * frozen, "{}", trace.radii[1]);
        assert!((trace.radii[0] - (8.0_f64 / 3.0).powf(0.25)).abs() < 1e-15);
    }

    #[test]
    fn single_cell_at_origin_collapses_all_points() {
        let grid = GridDensity::from_parts(
            1,
            vec![1],
            vec![-0.5],
            1.0,
            vec![1.0],
            1.0,
            BTreeSet::from([0usize]),
        )
        .unwrap();
        let (cloud, trace) = pierce_greedy_detailed(&grid, 4, 4.0, 2.0).unwrap();
        for x in cloud.iter_points() {
            assert_eq!(x[0], 0.0);
        }
        for (diam, bound) in trace.diameters.iter().zip(&trace.diameter_bounds) {
            assert!(diam <= bound, "diameter {diam} exceeds bound {bound}");
        }
    }

    #[test]
    fn diameter_bound_holds_on_gaussian() {
        let spec = MeasureSpec::Gaussian { d: 2, mean: vec![0.0, 0.0], sigma: 1.0, declared_total: 1.0 };
        let grid = grid_for_spec(&spec, 48, true).unwrap();
        for p in [1.0, 2.0] {
            let (cloud, trace) = pierce_greedy_detailed(&grid, 16, 8.0, p).unwrap();
            assert_eq!(cloud.n(), 16);
            for (i, (diam, bound)) in
                trace.diameters.iter().zip(&trace.diameter_bounds).enumerate()
            {
                assert!(
                    diam <= bound,
                    "p={p} step {}: diameter {diam} exceeds bound {bound}",
                    i + 1
                );
            }
            // Mass bookkeeping: n−1 extractions of one quota each.
            assert_eq!(trace.radii.len(), 15);
            assert!((trace.quota - 1.0 / 16.0).abs() < 1e-9);
        }
    }

    #[test]
    fn preconditions_are_enforced() {
        let spec = MeasureSpec::Gaussian { d: 2, mean: vec![0.0, 0.0], sigma: 1.0, declared_total: 1.0 };
        let grid = grid_for_spec(&spec, 16, true).unwrap();
        assert!(matches!(
            pierce_greedy(&grid, 1, 8.0, 1.0),
            Err(Error::Precondition(_))
        ));
        // p = 1, d = 2 → needs theta > 2.
        assert!(matches!(
            pierce_greedy(&grid, 4, 2.0, 1.0),
            Err(Error::Precondition(_))
        ));
        assert!(pierce_greedy(&grid, 4, 2.1, 1.0).is_ok());
    }

    #[test]
    fn radii_grow_with_k() {
        let spec = MeasureSpec::Gaussian { d: 1, mean: vec![0.0], sigma: 1.0, declared_total: 1.0 };
        let grid = grid_for_spec(&spec, 512, true).unwrap();
        let (_, trace) = pierce_greedy_detailed(&grid, 32, 6.0, 2.0).unwrap();
        for w in trace.radii.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }
}
