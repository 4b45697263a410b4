//! Closed-form and assembled quantizer constructions.
//!
//! [`midpoint_1d`] and [`chunk_1d`] are the exact 1D empirical quantizers
//! (equal-mass chunks of the quantile function, one p-center per chunk).
//! [`scale_copy`] replicates a unit-cube quantizer into k^d shrunken copies
//! and [`dim_induct`] assembles a (d+1)-dimensional cloud from a
//! d-dimensional one plus a boundary layer; both reproduce the maps used in
//! the scaling and induction arguments for the coefficient bounds.

use crate::error::{Error, Result};
use crate::measure::GridDensity;
use crate::num::{abs_pow, golden_min, kahan_sum, KahanAcc};
use crate::transport::{g, PointCloud};

/// Exact empirical n-quantizer of the uniform measure on [0,1]:
/// the chunk midpoints (2i−1)/(2n), i = 1..n, each carrying weight 1/n.
pub fn midpoint_1d(n: usize) -> PointCloud {
    assert!(n >= 1, "midpoint_1d requires n >= 1");
    let coords: Vec<f64> = (1..=n).map(|i| (2 * i - 1) as f64 / (2 * n) as f64).collect();
    PointCloud::from_flat(1, coords, 1.0 / n as f64).expect("valid by construction")
}

/// One maximal piece of constant composition inside a chunk: either a slab
/// of continuum density or an atom sitting at a cell center.
enum Piece {
    /// Uniform density `rate` (mass per unit length) on [a, b].
    Slab { a: f64, b: f64, rate: f64 },
    /// Point mass at `x`.
    Atom { x: f64, mass: f64 },
}

impl Piece {
    fn mass(&self) -> f64 {
        match *self {
            Piece::Slab { a, b, rate } => rate * (b - a),
            Piece::Atom { mass, .. } => mass,
        }
    }

    fn lo(&self) -> f64 {
        match *self {
            Piece::Slab { a, .. } => a,
            Piece::Atom { x, .. } => x,
        }
    }

    fn hi(&self) -> f64 {
        match *self {
            Piece::Slab { b, .. } => b,
            Piece::Atom { x, .. } => x,
        }
    }

    /// Σ within-piece mass · |x − c|^p.
    fn cost_at(&self, c: f64, p: f64) -> f64 {
        match *self {
            Piece::Slab { a, b, rate } => rate * (g(b - c, p) - g(a - c, p)),
            Piece::Atom { x, mass } => mass * abs_pow(x - c, p),
        }
    }
}

/// Optimal empirical n-quantizer of a 1D grid measure: splits the line into
/// n consecutive chunks of mass total/n by CDF inversion (cells are uniform
/// slabs, singular cells are atoms at their centers) and places the
/// p-center of each chunk — the mass-weighted median for p = 1, the mean
/// for p = 2, and a golden-section minimizer otherwise.
pub fn chunk_1d(grid: &GridDensity, n: usize, p: f64) -> Result<PointCloud> {
    if grid.d() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "chunk_1d requires a 1D grid, got d = {}",
            grid.d()
        )));
    }
    if n < 1 {
        return Err(Error::Precondition("chunk_1d requires n >= 1".into()));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Precondition(format!("chunk_1d requires p >= 1, got {p}")));
    }
    let total = grid.total();
    if !(total > 0.0) {
        return Err(Error::EmptyMeasure("chunk_1d: grid has no mass".into()));
    }
    let h = grid.spacing();
    let origin = grid.origin()[0];
    let quota = total / n as f64;

    // Walk the cells once, carving off a chunk whenever the consumed mass
    // reaches the next absolute cut target j·quota (absolute targets keep
    // thousands of tiny subtractions from drifting the cuts).
    let mut chunks: Vec<Vec<Piece>> = Vec::with_capacity(n);
    let mut current: Vec<Piece> = Vec::new();
    let mut consumed = KahanAcc::new();
    let cells = grid.masses().len();
    for i in 0..cells {
        let mass = grid.masses()[i];
        if mass <= 0.0 {
            continue;
        }
        let lo = origin + i as f64 * h;
        if grid.singular_cells().contains(&i) {
            // Atom at the cell center; may split across several cuts.
            let x = lo + 0.5 * h;
            let mut left = mass;
            while left > 0.0 {
                if chunks.len() == n - 1 {
                    // Last chunk absorbs everything that remains.
                    current.push(Piece::Atom { x, mass: left });
                    consumed.add(left);
                    break;
                }
                let want = (quota * (chunks.len() + 1) as f64 - consumed.total()).max(0.0);
                if left < want {
                    current.push(Piece::Atom { x, mass: left });
                    consumed.add(left);
                    break;
                }
                if want > 0.0 {
                    current.push(Piece::Atom { x, mass: want });
                    consumed.add(want);
                    left -= want;
                }
                chunks.push(std::mem::take(&mut current));
            }
        } else {
            let rate = mass / h;
            let mut a = lo;
            let cell_hi = lo + h;
            loop {
                if chunks.len() == n - 1 {
                    current.push(Piece::Slab { a, b: cell_hi, rate });
                    consumed.add(rate * (cell_hi - a));
                    break;
                }
                let want = (quota * (chunks.len() + 1) as f64 - consumed.total()).max(0.0);
                let left = rate * (cell_hi - a);
                if left < want {
                    if left > 0.0 {
                        current.push(Piece::Slab { a, b: cell_hi, rate });
                        consumed.add(left);
                    }
                    break;
                }
                // The cut lands inside this cell.
                let b = (a + want / rate).min(cell_hi);
                if b > a {
                    current.push(Piece::Slab { a, b, rate });
                    consumed.add(rate * (b - a));
                }
                chunks.push(std::mem::take(&mut current));
                a = b;
            }
        }
    }
    if !current.is_empty() {
        chunks.push(current);
    }
    // Trailing cuts that coincide with the end of the support can leave
    // empty chunks unmaterialized; that means the quota was not met, which
    // only happens through floating-point residue on the last chunk.
    if chunks.len() != n {
        return Err(Error::Internal(format!(
            "chunk_1d produced {} chunks for n = {n}",
            chunks.len()
        )));
    }

    let coords: Vec<f64> = chunks.iter().map(|chunk| piece_center(chunk, p)).collect();
    PointCloud::from_flat(1, coords, quota)
}

/// p-center of a list of pieces (closed forms for p ∈ {1, 2}, golden-section
/// search on the chunk's hull otherwise).
fn piece_center(pieces: &[Piece], p: f64) -> f64 {
    let total = kahan_sum(pieces.iter().map(Piece::mass));
    if p == 2.0 {
        // Mass-weighted mean; a slab's own centroid is its midpoint.
        let s = kahan_sum(pieces.iter().map(|piece| match *piece {
            Piece::Slab { a, b, rate } => rate * (b - a) * 0.5 * (a + b),
            Piece::Atom { x, mass } => mass * x,
        }));
        return if total > 0.0 { s / total } else { pieces[0].lo() };
    }
    if p == 1.0 {
        // Mass-weighted median: walk to half mass, linear within slabs.
        let half = 0.5 * total;
        let mut acc = 0.0;
        for piece in pieces {
            let m = piece.mass();
            if acc + m >= half {
                return match *piece {
                    Piece::Atom { x, .. } => x,
                    Piece::Slab { a, rate, .. } => a + (half - acc) / rate,
                };
            }
            acc += m;
        }
        return pieces.last().expect("nonempty chunk").hi();
    }
    let lo = pieces.iter().map(Piece::lo).fold(f64::INFINITY, f64::min);
    let hi = pieces.iter().map(Piece::hi).fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-15 {
        return 0.5 * (lo + hi);
    }
    golden_min(lo, hi, 1e-12, |c| {
        kahan_sum(pieces.iter().map(|piece| piece.cost_at(c, p)))
    })
}

/// Replicates a unit-cube quantizer into k^d scaled copies: the points
/// (i + x_j)/k for every offset i ∈ {0..k−1}^d (last axis fastest) and
/// every base point x_j. Weights shrink so the output total matches the
/// base total.
pub fn scale_copy(base: &PointCloud, k: usize) -> Result<PointCloud> {
    if k < 1 {
        return Err(Error::Precondition("scale_copy requires k >= 1".into()));
    }
    let d = base.d();
    for (j, x) in base.iter_points().enumerate() {
        if x.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::OutOfDomain(format!(
                "scale_copy: base point {j} at {x:?} leaves [0,1]^{d}"
            )));
        }
    }
    let copies = (k as u64)
        .checked_pow(d as u32)
        .and_then(|c| c.checked_mul(base.n() as u64))
        .filter(|&c| c <= 50_000_000)
        .ok_or_else(|| Error::TooLarge(format!("scale_copy: k^d·n overflows at k = {k}, d = {d}")))?;
    let inv_k = 1.0 / k as f64;
    let mut coords = Vec::with_capacity(copies as usize * d);
    let mut offset = vec![0usize; d];
    loop {
        for x in base.iter_points() {
            for (axis, &v) in x.iter().enumerate() {
                coords.push((offset[axis] as f64 + v) * inv_k);
            }
        }
        // Odometer over {0..k−1}^d, last axis fastest.
        let mut axis = d;
        loop {
            if axis == 0 {
                let weight = base.total() / copies as f64;
                return PointCloud::from_flat(d, coords, weight);
            }
            axis -= 1;
            offset[axis] += 1;
            if offset[axis] < k {
                break;
            }
            offset[axis] = 0;
        }
    }
}

/// Dimension-induction assembly: keeps the n points of `cloud_hi`
/// (d+1 dimensions) with their last coordinate shrunk by n/(n+l), and lifts
/// the l points of `cloud_lo` (d dimensions) to the top face at height 1.
/// Returns exactly n+l points; the output total matches `cloud_hi`'s.
pub fn dim_induct(cloud_hi: &PointCloud, cloud_lo: &PointCloud) -> Result<PointCloud> {
    let d_hi = cloud_hi.d();
    if d_hi != cloud_lo.d() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "dim_induct: cloud_hi has d = {d_hi}, cloud_lo must have d = {}, got {}",
            d_hi - 1,
            cloud_lo.d()
        )));
    }
    let n = cloud_hi.n();
    let l = cloud_lo.n();
    let shrink = n as f64 / (n + l) as f64;
    let mut coords = Vec::with_capacity((n + l) * d_hi);
    for x in cloud_hi.iter_points() {
        coords.extend_from_slice(&x[..d_hi - 1]);
        coords.push(x[d_hi - 1] * shrink);
    }
    for y in cloud_lo.iter_points() {
        coords.extend_from_slice(y);
        coords.push(1.0);
    }
    PointCloud::from_flat(d_hi, coords, cloud_hi.total() / (n + l) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{grid_for_spec, MeasureSpec};
    use crate::transport::solve_uniform_capacity;
    use std::collections::BTreeSet;

    fn u1(resolution: usize) -> GridDensity {
        let spec = MeasureSpec::UniformCube { d: 1, declared_total: 1.0 };
        grid_for_spec(&spec, resolution, false).unwrap()
    }

    #[test]
    fn midpoint_matches_formula() {
        assert_eq!(midpoint_1d(1).coords(), &[0.5]);
        assert_eq!(midpoint_1d(2).coords(), &[0.25, 0.75]);
        assert_eq!(midpoint_1d(4).coords(), &[0.125, 0.375, 0.625, 0.875]);
        assert!((midpoint_1d(3).total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chunk_on_uniform_reproduces_midpoints() {
        let grid = u1(4096);
        for p in [1.0, 2.0, 3.0] {
            for n in [1usize, 2, 7, 64] {
                let cloud = chunk_1d(&grid, n, p).unwrap();
                let mid = midpoint_1d(n);
                for (a, b) in cloud.coords().iter().zip(mid.coords()) {
                    assert!(
                        (a - b).abs() < 1e-6,
                        "p={p} n={n}: chunk point {a} vs midpoint {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn chunk_of_point_mass_is_the_cell_center() {
        // All mass is an atom in cell 3 of an 8-cell grid on [0,1].
        let mut masses = vec![0.0; 8];
        masses[3] = 1.0;
        let grid = GridDensity::from_parts(
            1,
            vec![8],
            vec![0.0],
            0.125,
            masses,
            1.0,
            BTreeSet::from([3usize]),
        )
        .unwrap();
        for p in [1.0, 2.0, 2.5] {
            let cloud = chunk_1d(&grid, 1, p).unwrap();
            assert!((cloud.coords()[0] - 0.4375).abs() < 1e-12, "p={p}");
        }
    }

    #[test]
    fn chunk_on_staircase_matches_frozen_oracle() {
        // Doubling staircase on 8 cells: masses 2^i / 255. The oracle froze
        // the p = 2 chunk means for n = 2 and cross-checked them against a
        // 200-point grid search of the continuous objective.
        let masses: Vec<f64> = (0..8).map(|i| (2.0_f64).powi(i) / 255.0).collect();
        let total = kahan_sum(masses.iter().copied());
        let grid =
            GridDensity::from_parts(1, vec![8], vec![0.0], 0.125, masses, total, BTreeSet::new())
                .unwrap();
        let cloud = chunk_1d(&grid, 2, 2.0).unwrap();
        let expected = [0.6950989966299019, 0.937744140625];
        for (a, b) in cloud.coords().iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12, "chunk mean {a} vs frozen {b}");
        }
    }

    #[test]
    fn chunk_rejects_bad_inputs() {
        let spec = MeasureSpec::UniformCube { d: 2, declared_total: 1.0 };
        let grid2 = grid_for_spec(&spec, 8, false).unwrap();
        assert!(matches!(chunk_1d(&grid2, 2, 2.0), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn scale_copy_matches_example() {
        let base = PointCloud::new(2, &[vec![0.5, 0.5]], 1.0).unwrap();
        let out = scale_copy(&base, 2).unwrap();
        let rows = out.to_rows();
        assert_eq!(
            rows,
            vec![
                vec![0.25, 0.25],
                vec![0.25, 0.75],
                vec![0.75, 0.25],
                vec![0.75, 0.75]
            ]
        );
        assert!((out.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scale_copy_identity_and_domain_check() {
        let base = PointCloud::new(1, &[vec![0.25], vec![0.75]], 0.5).unwrap();
        let out = scale_copy(&base, 1).unwrap();
        assert_eq!(out.coords(), base.coords());
        let outside = PointCloud::new(1, &[vec![1.5]], 1.0).unwrap();
        assert!(matches!(scale_copy(&outside, 2), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn scale_copy_cost_contracts_on_u2() {
        // ẽ-cost of the replicated cloud is at most the base cost divided
        // by k (evaluated on the same uniform grid).
        let spec = MeasureSpec::UniformCube { d: 2, declared_total: 1.0 };
        let grid = grid_for_spec(&spec, 64, false).unwrap();
        let base = PointCloud::new(2, &[vec![0.5, 0.5]], 1.0).unwrap();
        let base_cost = solve_uniform_capacity(&grid, &base, 2.0).unwrap().0;
        let copied = scale_copy(&base, 2).unwrap();
        let copied_cost = solve_uniform_capacity(&grid, &copied, 2.0).unwrap().0;
        assert!(
            copied_cost <= base_cost / 2.0 + 1e-9,
            "copied {copied_cost} vs base/k {}",
            base_cost / 2.0
        );
    }

    #[test]
    fn dim_induct_matches_example() {
        // n = 4 points in 2D plus l = 3 points in 1D → 7 points in 2D.
        let hi = PointCloud::new(
            2,
            &[vec![0.25, 0.4], vec![0.75, 0.4], vec![0.25, 0.9], vec![0.75, 0.9]],
            0.25,
        )
        .unwrap();
        let lo = midpoint_1d(3);
        let out = dim_induct(&hi, &lo).unwrap();
        assert_eq!(out.n(), 7);
        let rows = out.to_rows();
        for (i, row) in rows.iter().take(4).enumerate() {
            assert_eq!(row[0], hi.point(i)[0]);
            assert!((row[1] - hi.point(i)[1] * 4.0 / 7.0).abs() < 1e-15);
        }
        for (j, row) in rows.iter().skip(4).enumerate() {
            assert_eq!(row[0], lo.point(j)[0]);
            assert_eq!(row[1], 1.0);
        }
        assert!((out.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dim_induct_rejects_mismatched_dims() {
        let hi = PointCloud::new(2, &[vec![0.5, 0.5]], 1.0).unwrap();
        let lo = PointCloud::new(2, &[vec![0.5, 0.5]], 1.0).unwrap();
        assert!(matches!(dim_induct(&hi, &lo), Err(Error::DimensionMismatch(_))));
    }
}
