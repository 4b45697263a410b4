//! Exact reference solver for tiny capacity-constrained instances.
//!
//! Every vertex of a transportation polytope is reached by the
//! northwest-corner rule after some permutation of rows and columns, so
//! enumerating all row/column permutation pairs and keeping the cheapest
//! greedy filling is an exact (if exponential) optimum. Used to validate
//! the network simplex on small random instances.

use crate::error::{Error, Result};
use crate::measure::GridDensity;
use crate::num::{dist_pow_p, kahan_sum, root_p, KahanAcc};
use crate::transport::PointCloud;

/// All permutations of 0..k via Heap's algorithm (k <= 8).
fn permutations(k: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut a: Vec<u8> = (0..k as u8).collect();
    let mut c = vec![0usize; k];
    out.push(a.clone());
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

fn factorial(k: usize) -> u64 {
    (1..=k as u64).product()
}

/// Exact W_p between a grid and a uniform-weight cloud under the capacity
/// constraint, by vertex enumeration. Rejects instances with more than a
/// couple million vertices; meant for single-digit cell and point counts.
pub fn brute_force_oracle(grid: &GridDensity, cloud: &PointCloud, p: f64) -> Result<f64> {
    super::check_common(grid, cloud, p)?;
    super::check_totals(grid, cloud)?;
    let cells = grid.nonzero_cells();
    let ns = cells.len();
    let nt = cloud.n();
    if ns == 0 {
        return Err(Error::EmptyMeasure("oracle: grid has no mass".into()));
    }
    if ns > 8 || nt > 8 || factorial(ns) * factorial(nt) > 2_000_000 {
        return Err(Error::TooLarge(format!(
            "oracle: {ns} cells x {nt} points is past the enumeration budget"
        )));
    }

    let d = grid.d();
    let centers = grid.centers_flat(&cells);
    let supplies: Vec<f64> = cells.iter().map(|&c| grid.masses()[c]).collect();
    let total = kahan_sum(supplies.iter().copied());
    // Same demand vector the simplex solver uses: exact fp balance on the tail.
    let q = total / nt as f64;
    let mut demands = vec![q; nt];
    demands[nt - 1] = total - q * (nt - 1) as f64;

    let mut cost_mat = vec![0.0_f64; ns * nt];
    for s in 0..ns {
        for t in 0..nt {
            cost_mat[s * nt + t] =
                dist_pow_p(&centers[s * d..(s + 1) * d], cloud.point(t), p);
        }
    }

    let row_perms = permutations(ns);
    let col_perms = permutations(nt);
    let mut best = f64::INFINITY;
    let mut a = vec![0.0_f64; ns];
    let mut b = vec![0.0_f64; nt];
    for rp in &row_perms {
        for cp in &col_perms {
            a.copy_from_slice(&supplies);
            b.copy_from_slice(&demands);
            let mut acc = KahanAcc::new();
            let (mut i, mut j) = (0usize, 0usize);
            while i < ns && j < nt {
                let r = rp[i] as usize;
                let c = cp[j] as usize;
                let f = a[r].min(b[c]);
                if f > 0.0 {
                    acc.add(f * cost_mat[r * nt + c]);
                }
                a[r] -= f;
                b[c] -= f;
                if a[r] <= 0.0 {
                    i += 1;
                } else {
                    j += 1;
                }
            }
            let cost = acc.total();
            if cost < best {
                best = cost;
            }
        }
    }
    Ok(root_p(best, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::GridDensity;
    use crate::transport::solve_uniform_capacity;
    use std::collections::BTreeSet;

    fn grid_1d(masses: Vec<f64>, origin: f64, spacing: f64) -> GridDensity {
        let total = masses.iter().sum();
        let shape = vec![masses.len()];
        GridDensity::from_parts(1, shape, vec![origin], spacing, masses, total, BTreeSet::new())
            .unwrap()
    }

    #[test]
    fn permutation_count_is_factorial() {
        assert_eq!(permutations(1).len(), 1);
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(5).len(), 120);
    }

    #[test]
    fn two_cell_two_point_example() {
        // Atoms of mass 1/2 at 0.25 and 0.75; sites at 0.2 and 0.9; p=1.
        // Monotone matching pays 0.5*0.05 + 0.5*0.15 = 0.1.
        let grid = grid_1d(vec![0.5, 0.5], 0.0, 0.5);
        let cloud = PointCloud::new(1, &[vec![0.2], vec![0.9]], 0.5).unwrap();
        let cost = brute_force_oracle(&grid, &cloud, 1.0).unwrap();
        assert!((cost - 0.1).abs() < 1e-15);
    }

    #[test]
    fn matches_simplex_on_small_instances() {
        let grid = grid_1d(vec![0.31, 0.07, 0.12, 0.26, 0.24], 0.0, 0.2);
        let clouds = [
            PointCloud::new(1, &[vec![0.14], vec![0.83]], 0.5).unwrap(),
            PointCloud::new(1, &[vec![0.9], vec![0.91], vec![0.05]], 1.0 / 3.0).unwrap(),
        ];
        for cloud in &clouds {
            for &p in &[1.0, 2.0] {
                let want = brute_force_oracle(&grid, cloud, p).unwrap();
                let (got, _) = solve_uniform_capacity(&grid, cloud, p).unwrap();
                assert!(
                    (got.powf(p) - want.powf(p)).abs() < 1e-9,
                    "p={p}: simplex {got} vs oracle {want}"
                );
            }
        }
    }

    #[test]
    fn matches_simplex_in_2d() {
        let masses = vec![0.1, 0.2, 0.3, 0.4];
        let grid = GridDensity::from_parts(
            2,
            vec![2, 2],
            vec![0.0, 0.0],
            0.5,
            masses,
            1.0,
            BTreeSet::new(),
        )
        .unwrap();
        let cloud =
            PointCloud::new(2, &[vec![0.1, 0.9], vec![0.8, 0.2], vec![0.5, 0.5]], 1.0 / 3.0)
                .unwrap();
        for &p in &[1.0, 2.0] {
            let want = brute_force_oracle(&grid, &cloud, p).unwrap();
            let (got, _) = solve_uniform_capacity(&grid, &cloud, p).unwrap();
            assert!((got.powf(p) - want.powf(p)).abs() < 1e-9);
        }
    }

    #[test]
    fn enumeration_budget_is_enforced() {
        let grid = grid_1d(vec![0.1; 10], 0.0, 0.1);
        let cloud = PointCloud::new(1, &[vec![0.5]], 1.0).unwrap();
        assert!(matches!(
            brute_force_oracle(&grid, &cloud, 1.0),
            Err(Error::TooLarge(_))
        ));
    }
}
