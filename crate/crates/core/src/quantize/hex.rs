//! Hexagonal tiling quantizer for uniform mass on a square or disk.
//!
//! Tiles the region with flat-top hexagons of area |A|/n, keeps the k_n
//! hexagons lying further than their own diameter from the boundary, and
//! splits the leftover boundary strip into n−k_n pieces of equal mass
//! ordered along the boundary. Each kept hexagon contributes its center;
//! each strip piece contributes its p-center. As n grows, k_n/n → 1 and
//! the cost approaches the optimal hexagonal second-moment rate, which is
//! what makes this the sharp d = 2 upper-bound construction.
//!
//! Hexagon/cell overlaps are computed by exact convex polygon clipping, so
//! on a uniform grid every interior hexagon carries exactly total/n mass
//! and the strip pieces inherit the exact remainder.

use crate::error::{Error, Result};
use crate::measure::GridDensity;
use crate::num::KahanAcc;
use crate::transport::PointCloud;

use super::p_centroid_flat;

const SQRT3: f64 = 1.732050807568877293527446341505872367_f64;

/// The uniform region a grid is recognized as covering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HexRegion {
    /// Axis-aligned square spanning the grid bounding box.
    Square,
    /// Disk inscribed in the grid bounding box.
    Disk,
}

struct Geometry {
    region: HexRegion,
    lo: [f64; 2],
    hi: [f64; 2],
    center: [f64; 2],
    radius: f64,
    /// Continuum area of the region.
    area: f64,
}

/// Layout details behind a [`hex_2d`] cloud, for diagnostics and tests.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) struct HexLayout {
    pub region: HexRegion,
    pub side: f64,
    pub k_n: usize,
    pub piece_masses: Vec<f64>,
}

/// Hexagonal-tiling quantizer; see the module docs. The grid must be
/// two-dimensional and recognizable as a uniform square or inscribed disk.
pub fn hex_2d(grid: &GridDensity, n: usize, p: f64) -> Result<PointCloud> {
    hex_2d_detailed(grid, n, p).map(|(cloud, _)| cloud)
}

pub(crate) fn hex_2d_detailed(
    grid: &GridDensity,
    n: usize,
    p: f64,
) -> Result<(PointCloud, HexLayout)> {
    if grid.d() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "hex_2d requires d = 2, got d = {}",
            grid.d()
        )));
    }
    if n == 0 {
        return Err(Error::Precondition("hex_2d requires n ≥ 1".into()));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Precondition(format!("hex_2d requires p ≥ 1, got {p}")));
    }
    let total = grid.total();
    if !(total > 0.0) {
        return Err(Error::EmptyMeasure("hex_2d: grid has no mass".into()));
    }
    let geom = detect_region(grid)?;
    let h = grid.spacing();

    // Hexagon side from the area quota: area(hex) = (3√3/2)·s² = |A|/n.
    let s = (2.0 * geom.area / (3.0 * SQRT3 * n as f64)).sqrt();
    if s < 2.0 * h && n > 1 {
        return Err(Error::TooCoarse(format!(
            "hex_2d: hexagon side {s:.3e} is below two cells ({:.3e}); raise the resolution",
            2.0 * h
        )));
    }

    // Offset search over one lattice period (x-period 3s, y-period √3·s):
    // keep the shift admitting the most interior hexagons.
    let mut best: Option<(usize, usize, usize)> = None; // (count, u, v)
    for u in 0..5usize {
        for v in 0..5usize {
            let ox = u as f64 * 3.0 * s / 5.0;
            let oy = v as f64 * SQRT3 * s / 5.0;
            let count = interior_centers(&geom, s, ox, oy).len();
            if best.map_or(true, |(c, _, _)| count > c) {
                best = Some((count, u, v));
            }
        }
    }
    let (_, u, v) = best.unwrap();
    let ox = u as f64 * 3.0 * s / 5.0;
    let oy = v as f64 * SQRT3 * s / 5.0;
    let mut hex_centers = interior_centers(&geom, s, ox, oy);
    hex_centers.truncate(n);
    let k_n = hex_centers.len();

    // Exact covered fraction per grid cell (hexagons tile, so fractions
    // from distinct hexagons never overlap).
    let shape = [grid.shape()[0], grid.shape()[1]];
    let g_lo = [grid.origin()[0], grid.origin()[1]];
    let mut covered = vec![0.0_f64; shape[0] * shape[1]];
    for &(cx, cy) in &hex_centers {
        let hex = hexagon_vertices(cx, cy, s);
        let ix_lo = (((cx - s - g_lo[0]) / h).floor().max(0.0)) as usize;
        let ix_hi = ((((cx + s - g_lo[0]) / h).ceil()) as usize).min(shape[0]);
        let iy_lo = (((cy - SQRT3 / 2.0 * s - g_lo[1]) / h).floor().max(0.0)) as usize;
        let iy_hi = ((((cy + SQRT3 / 2.0 * s - g_lo[1]) / h).ceil()) as usize).min(shape[1]);
        for ix in ix_lo..ix_hi {
            let x0 = g_lo[0] + ix as f64 * h;
            for iy in iy_lo..iy_hi {
                let y0 = g_lo[1] + iy as f64 * h;
                let area = clip_cell_area([x0, y0], h, &hex);
                if area > 0.0 {
                    covered[ix * shape[1] + iy] += area / (h * h);
                }
            }
        }
    }

    let mut points: Vec<f64> = Vec::with_capacity(2 * n);
    for &(cx, cy) in &hex_centers {
        points.push(cx);
        points.push(cy);
    }

    let pieces = n - k_n;
    let mut piece_masses: Vec<f64> = Vec::with_capacity(pieces);
    if pieces > 0 {
        // Strip cells: leftover mass ordered by a boundary-arc parameter.
        let mut strip: Vec<(f64, usize, f64)> = Vec::new(); // (t, flat, mass)
        let mut strip_total = KahanAcc::new();
        for (flat, &m) in grid.masses().iter().enumerate() {
            if m <= 0.0 {
                continue;
            }
            let frac = covered[flat].min(1.0);
            let left = m * (1.0 - frac);
            if left > 0.0 {
                let ix = flat / shape[1];
                let iy = flat % shape[1];
                let cx = g_lo[0] + (ix as f64 + 0.5) * h;
                let cy = g_lo[1] + (iy as f64 + 0.5) * h;
                strip.push((boundary_parameter(&geom, cx, cy), flat, left));
                strip_total.add(left);
            }
        }
        let strip_total = strip_total.total();
        if !(strip_total > 0.0) {
            return Err(Error::Internal(
                "hex_2d: boundary strip carries no mass but pieces are required".into(),
            ));
        }
        if (strip.len() as f64) / (pieces as f64) < 4.0 {
            return Err(Error::TooCoarse(format!(
                "hex_2d: {} strip cells for {} pieces; raise the resolution",
                strip.len(),
                pieces
            )));
        }
        strip.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

        // Cut the arc-ordered strip into equal-mass pieces, splitting the
        // straddling cell fractionally; cuts are placed against absolute
        // targets so long walks cannot drift.
        let target = strip_total / pieces as f64;
        let mut consumed = KahanAcc::new();
        let mut done = 0usize;
        let mut cur_m: Vec<f64> = Vec::new();
        let mut cur_xy: Vec<f64> = Vec::new();
        let mut cur_mass = KahanAcc::new();
        let mut finalize =
            |cur_m: &mut Vec<f64>, cur_xy: &mut Vec<f64>, cur_mass: &mut KahanAcc| -> Result<()> {
                if cur_m.is_empty() {
                    return Err(Error::Internal("hex_2d: empty strip piece".into()));
                }
                let mut c = [0.0_f64; 2];
                p_centroid_flat(cur_m, cur_xy, 2, p, &mut c);
                points.extend_from_slice(&c);
                piece_masses.push(cur_mass.total());
                cur_m.clear();
                cur_xy.clear();
                *cur_mass = KahanAcc::new();
                Ok(())
            };
        for &(_, flat, m) in &strip {
            let ix = flat / shape[1];
            let iy = flat % shape[1];
            let cx = g_lo[0] + (ix as f64 + 0.5) * h;
            let cy = g_lo[1] + (iy as f64 + 0.5) * h;
            let mut m_left = m;
            while done + 1 < pieces {
                let want = (target * (done + 1) as f64 - consumed.total()).max(0.0);
                if m_left < want {
                    break;
                }
                if want > 0.0 {
                    cur_m.push(want);
                    cur_xy.push(cx);
                    cur_xy.push(cy);
                    cur_mass.add(want);
                    consumed.add(want);
                    m_left -= want;
                }
                finalize(&mut cur_m, &mut cur_xy, &mut cur_mass)?;
                done += 1;
            }
            if m_left > 0.0 {
                cur_m.push(m_left);
                cur_xy.push(cx);
                cur_xy.push(cy);
                cur_mass.add(m_left);
                consumed.add(m_left);
            }
        }
        finalize(&mut cur_m, &mut cur_xy, &mut cur_mass)?;
        done += 1;
        if done != pieces {
            return Err(Error::Internal(format!(
                "hex_2d: assembled {done} strip pieces, expected {pieces}"
            )));
        }
    }

    let cloud = PointCloud::from_flat(2, points, total / n as f64)?;
    Ok((cloud, HexLayout { region: geom.region, side: s, k_n, piece_masses }))
}

/// Classify the grid as a uniform square or an inscribed disk from its
/// support pattern.
fn detect_region(grid: &GridDensity) -> Result<Geometry> {
    let lo = [grid.origin()[0], grid.origin()[1]];
    let up = grid.upper();
    let hi = [up[0], up[1]];
    let ext = [hi[0] - lo[0], hi[1] - lo[1]];
    let ext_max = ext[0].max(ext[1]);
    if (ext[0] - ext[1]).abs() > 1e-9 * ext_max {
        return Err(Error::Precondition(format!(
            "hex_2d needs a square bounding box, got extents {} × {}",
            ext[0], ext[1]
        )));
    }
    let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let radius = 0.5 * ext_max;
    let nc = grid.shape()[0] * grid.shape()[1];
    let ratio = grid.nonzero_cells().len() as f64 / nc as f64;
    if ratio > 0.999 {
        return Ok(Geometry {
            region: HexRegion::Square,
            lo,
            hi,
            center,
            radius,
            area: ext[0] * ext[1],
        });
    }
    if (ratio - std::f64::consts::FRAC_PI_4).abs() < 0.02 {
        return Ok(Geometry {
            region: HexRegion::Disk,
            lo,
            hi,
            center,
            radius,
            area: std::f64::consts::PI * radius * radius,
        });
    }
    Err(Error::Precondition(format!(
        "hex_2d: support fills {ratio:.3} of the bounding box; expected a square (≈1) or inscribed disk (≈π/4)"
    )))
}

/// Lattice centers whose hexagon sits further than its own diameter 2s
/// from the region boundary, in column-major scan order.
fn interior_centers(geom: &Geometry, s: f64, ox: f64, oy: f64) -> Vec<(f64, f64)> {
    let ext = geom.hi[0] - geom.lo[0];
    let i_max = (ext / (1.5 * s)).ceil() as usize + 1;
    let j_max = (ext / (SQRT3 * s)).ceil() as usize + 1;
    let mut out = Vec::new();
    for i in 0..=i_max {
        let x = geom.lo[0] + ox + 1.5 * s * i as f64;
        if x > geom.hi[0] {
            break;
        }
        let stagger = if i % 2 == 1 { SQRT3 * s / 2.0 } else { 0.0 };
        for j in 0..=j_max {
            let y = geom.lo[1] + oy + SQRT3 * s * j as f64 + stagger;
            if y > geom.hi[1] {
                break;
            }
            if hexagon_boundary_gap(geom, x, y, s) > 2.0 * s {
                out.push((x, y));
            }
        }
    }
    out
}

/// Distance from the hexagon centered at (x, y) to the region boundary
/// (direction-aware support for the square, circumradius for the disk).
fn hexagon_boundary_gap(geom: &Geometry, x: f64, y: f64, s: f64) -> f64 {
    match geom.region {
        HexRegion::Square => {
            let half_h = SQRT3 / 2.0 * s;
            (x - geom.lo[0] - s)
                .min(geom.hi[0] - x - s)
                .min(y - geom.lo[1] - half_h)
                .min(geom.hi[1] - y - half_h)
        }
        HexRegion::Disk => {
            let r = ((x - geom.center[0]).powi(2) + (y - geom.center[1]).powi(2)).sqrt();
            geom.radius - r - s
        }
    }
}

/// Flat-top hexagon vertices, counterclockwise.
fn hexagon_vertices(cx: f64, cy: f64, s: f64) -> [(f64, f64); 6] {
    let hy = SQRT3 / 2.0 * s;
    [
        (cx + s, cy),
        (cx + 0.5 * s, cy + hy),
        (cx - 0.5 * s, cy + hy),
        (cx - s, cy),
        (cx - 0.5 * s, cy - hy),
        (cx + 0.5 * s, cy - hy),
    ]
}

/// Area of the intersection of the cell square [x0, x0+h]×[y0, y0+h] with
/// a convex counterclockwise hexagon (Sutherland–Hodgman clipping).
fn clip_cell_area(cell_lo: [f64; 2], h: f64, hex: &[(f64, f64); 6]) -> f64 {
    let (x0, y0) = (cell_lo[0], cell_lo[1]);
    let mut poly: Vec<(f64, f64)> =
        vec![(x0, y0), (x0 + h, y0), (x0 + h, y0 + h), (x0, y0 + h)];
    let mut next: Vec<(f64, f64)> = Vec::with_capacity(10);
    for e in 0..6 {
        if poly.is_empty() {
            return 0.0;
        }
        let (ax, ay) = hex[e];
        let (bx, by) = hex[(e + 1) % 6];
        let (ex, ey) = (bx - ax, by - ay);
        let side = |q: (f64, f64)| ex * (q.1 - ay) - ey * (q.0 - ax);
        next.clear();
        for i in 0..poly.len() {
            let cur = poly[i];
            let nxt = poly[(i + 1) % poly.len()];
            let s_cur = side(cur);
            let s_nxt = side(nxt);
            if s_cur >= 0.0 {
                next.push(cur);
            }
            if (s_cur >= 0.0) != (s_nxt >= 0.0) {
                let t = s_cur / (s_cur - s_nxt);
                next.push((cur.0 + t * (nxt.0 - cur.0), cur.1 + t * (nxt.1 - cur.1)));
            }
        }
        std::mem::swap(&mut poly, &mut next);
    }
    if poly.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..poly.len() {
        let (xa, ya) = poly[i];
        let (xb, yb) = poly[(i + 1) % poly.len()];
        twice += xa * yb - xb * ya;
    }
    (0.5 * twice).max(0.0)
}

/// Monotone parameter along the region boundary used to order strip cells:
/// perimeter walk (bottom, right, top, left) for the square, polar angle
/// for the disk.
fn boundary_parameter(geom: &Geometry, x: f64, y: f64) -> f64 {
    match geom.region {
        HexRegion::Square => {
            let l0 = geom.hi[0] - geom.lo[0];
            let l1 = geom.hi[1] - geom.lo[1];
            let db = y - geom.lo[1];
            let dr = geom.hi[0] - x;
            let dt = geom.hi[1] - y;
            let dl = x - geom.lo[0];
            let m = db.min(dr).min(dt).min(dl);
            if m == db {
                x - geom.lo[0]
            } else if m == dr {
                l0 + (y - geom.lo[1])
            } else if m == dt {
                l0 + l1 + (geom.hi[0] - x)
            } else {
                2.0 * l0 + l1 + (geom.hi[1] - y)
            }
        }
        HexRegion::Disk => {
            let a = (y - geom.center[1]).atan2(x - geom.center[0]);
            if a < 0.0 {
                a + 2.0 * std::f64::consts::PI
            } else {
                a
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{grid_for_spec, MeasureSpec};
    use std::collections::BTreeSet;

    fn unit_square(res: usize) -> GridDensity {
        let spec = MeasureSpec::UniformCube { d: 2, declared_total: 1.0 };
        grid_for_spec(&spec, res, false).unwrap()
    }

    fn unit_disk_grid(res: usize) -> GridDensity {
        // Indicator of the disk inscribed in [0,1]², uniform mass on the
        // covered cells.
        let h = 1.0 / res as f64;
        let mut masses = vec![0.0; res * res];
        let mut count = 0usize;
        for ix in 0..res {
            for iy in 0..res {
                let cx = (ix as f64 + 0.5) * h - 0.5;
                let cy = (iy as f64 + 0.5) * h - 0.5;
                if cx * cx + cy * cy <= 0.25 {
                    masses[ix * res + iy] = 1.0;
                    count += 1;
                }
            }
        }
        let w = 1.0 / count as f64;
        masses.iter_mut().for_each(|m| *m *= w);
        GridDensity::from_parts(2, vec![res, res], vec![0.0, 0.0], h, masses, 1.0, BTreeSet::new())
            .unwrap()
    }

    #[test]
    fn square_pieces_have_exact_quota_mass() {
        let grid = unit_square(128);
        let (cloud, layout) = hex_2d_detailed(&grid, 64, 2.0).unwrap();
        assert_eq!(cloud.n(), 64);
        assert_eq!(layout.region, HexRegion::Square);
        assert!(layout.k_n >= 1);
        // Area quota: (3√3/2)·s² = 1/64.
        let expect_s = (2.0 / (3.0 * SQRT3 * 64.0)).sqrt();
        assert!((layout.side - expect_s).abs() < 1e-15);
        assert_eq!(layout.piece_masses.len(), 64 - layout.k_n);
        let quota = grid.total() / 64.0;
        for &m in &layout.piece_masses {
            assert!(
                (m - quota).abs() <= 1e-9,
                "piece mass {m} deviates from quota {quota}"
            );
        }
        // All points inside the square.
        for q in cloud.iter_points() {
            assert!(q[0] >= 0.0 && q[0] <= 1.0 && q[1] >= 0.0 && q[1] <= 1.0);
        }
    }

    #[test]
    fn interior_fraction_grows_with_n() {
        let grid = unit_square(256);
        let mut prev_ratio = 0.0;
        for n in [64usize, 256, 1024] {
            let (_, layout) = hex_2d_detailed(&grid, n, 2.0).unwrap();
            let ratio = layout.k_n as f64 / n as f64;
            let floor = 1.0 - 14.0 / (n as f64).sqrt();
            assert!(
                layout.k_n as f64 >= n as f64 * floor,
                "n={n}: k_n={} below {}",
                layout.k_n,
                n as f64 * floor
            );
            assert!(ratio > prev_ratio, "interior ratio not increasing at n={n}");
            prev_ratio = ratio;
        }
    }

    #[test]
    fn disk_is_detected_and_pieces_are_equal() {
        let grid = unit_disk_grid(128);
        let (cloud, layout) = hex_2d_detailed(&grid, 32, 2.0).unwrap();
        assert_eq!(layout.region, HexRegion::Disk);
        assert_eq!(cloud.n(), 32);
        if layout.piece_masses.len() > 1 {
            let mean: f64 =
                layout.piece_masses.iter().sum::<f64>() / layout.piece_masses.len() as f64;
            for &m in &layout.piece_masses {
                assert!((m - mean).abs() <= 1e-9, "piece mass {m} vs mean {mean}");
            }
        }
        // Centers stay inside the disk.
        for q in cloud.iter_points() {
            let r = ((q[0] - 0.5).powi(2) + (q[1] - 0.5).powi(2)).sqrt();
            assert!(r <= 0.5 + 1e-9, "point at radius {r}");
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let grid = unit_square(16);
        match hex_2d(&grid, 64, 2.0) {
            Err(Error::TooCoarse(_)) => {}
            other => panic!("expected TooCoarse, got {other:?}"),
        }
    }

    #[test]
    fn single_point_is_the_centroid() {
        let grid = unit_square(64);
        let cloud = hex_2d(&grid, 1, 2.0).unwrap();
        assert_eq!(cloud.n(), 1);
        let q = cloud.iter_points().next().unwrap();
        assert!((q[0] - 0.5).abs() < 1e-12 && (q[1] - 0.5).abs() < 1e-12);
    }
}
