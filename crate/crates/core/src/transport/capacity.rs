//! Capacity-constrained semidiscrete transport between a grid density and a
//! uniform-weight point cloud, built on the network-simplex core.
//!
//! Arcs are generated lazily: each source starts with its k nearest sinks,
//! then full implicit pricing scans add the best violating arc per source
//! until a clean scan certifies optimality. The solver object survives
//! across Lloyd iterations: moving the sinks only rewrites arc costs, so the
//! old basis stays primal feasible and re-optimization is warm.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::GridDensity;
use crate::num::{kahan_sum, pow_half_p, sq_dist};
use crate::transport::simplex::SimplexCore;
use crate::transport::PlanEntry;

/// Initial nearest-sink arcs per source.
const KNN: usize = 8;
/// Flow threshold below which plan entries are treated as degenerate zeros.
const PLAN_FLOOR: f64 = 1e-13;
/// Minimum sources per parallel work item in pricing scans.
const PRICE_MIN_LEN: usize = 1024;

pub(crate) struct CapacitySolver {
    d: usize,
    p: f64,
    /// Flat grid indices of the nonzero cells, ascending.
    cells: Vec<usize>,
    centers: Vec<f64>,
    points: Vec<f64>,
    n_points: usize,
    demand_each: f64,
    demands: Vec<f64>,
    total: f64,
    core: SimplexCore,
}

impl CapacitySolver {
    pub(crate) fn new(
        grid: &GridDensity,
        points: &[f64],
        n_points: usize,
        p: f64,
        cell_limit: usize,
    ) -> Result<CapacitySolver> {
        let d = grid.d();
        debug_assert_eq!(points.len(), n_points * d);
        let cells = grid.nonzero_cells();
        if cells.is_empty() {
            return Err(Error::EmptyMeasure("capacity solve: grid has no mass".into()));
        }
        if cells.len() > cell_limit {
            return Err(Error::SolverLimitExceeded(cells.len(), cell_limit));
        }
        let centers = grid.centers_flat(&cells);
        let supplies: Vec<f64> = cells.iter().map(|&c| grid.masses()[c]).collect();
        let total = kahan_sum(supplies.iter().copied());
        let demand_each = total / n_points as f64;
        let mut demands = vec![demand_each; n_points];
        // Absorb the rounding residue into the last sink so that supplies and
        // demands balance to the last ulp the solver can see.
        demands[n_points - 1] = total - demand_each * (n_points as f64 - 1.0);

        // Upper bound on any cost this solver can ever see: points produced
        // by Lloyd stay inside the hull of the cell centers, but user-given
        // clouds may sit outside, so pad the diameter generously.
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        let mut bound_sq = 0.0_f64;
        for k in 0..d {
            for i in 0..cells.len() {
                let v = centers[i * d + k];
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
            for j in 0..n_points {
                let v = points[j * d + k];
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
            bound_sq += (hi[k] - lo[k]) * (hi[k] - lo[k]);
        }
        let max_cost_bound = pow_half_p(16.0 * bound_sq, p);

        let mut core = SimplexCore::new(&supplies, &demands, max_cost_bound);
        // Cold start: a northwest-corner basis along a shared Morton order
        // gives each sink a spatially compact run of cells.
        let row_order = morton_order(&centers, d, &lo, &hi);
        let col_order = morton_order(points, d, &lo, &hi);
        core.init_basis_nw(&row_order, &col_order, |s, t| {
            pow_half_p(
                sq_dist(&centers[s * d..(s + 1) * d], &points[t * d..(t + 1) * d]),
                p,
            )
        });
        seed_knn_arcs(&mut core, &centers, points, d, n_points, p);
        Ok(CapacitySolver {
            d,
            p,
            cells,
            centers,
            points: points.to_vec(),
            n_points,
            demand_each,
            demands,
            total,
            core,
        })
    }

    pub(crate) fn demand_each(&self) -> f64 {
        self.demand_each
    }

    pub(crate) fn centers(&self) -> &[f64] {
        &self.centers
    }

    fn cost_of(&self, s: usize, t: usize) -> f64 {
        let d = self.d;
        pow_half_p(
            sq_dist(&self.centers[s * d..(s + 1) * d], &self.points[t * d..(t + 1) * d]),
            self.p,
        )
    }

    /// One full implicit pricing scan: for every source, the most negative
    /// reduced cost over all sinks; violating arcs get added. Returns how
    /// many arcs were added (zero = optimality certificate).
    fn price_and_add(&mut self) -> usize {
        let d = self.d;
        let ns = self.cells.len();
        let nt = self.n_points;
        let pi = self.core.potentials();
        let centers = &self.centers;
        let points = &self.points;
        let p = self.p;
        let candidates: Vec<Option<(u32, f64)>> = (0..ns)
            .into_par_iter()
            .with_min_len(PRICE_MIN_LEN)
            .map(|s| {
                let c = &centers[s * d..(s + 1) * d];
                let pi_s = pi[s];
                let mut best_val = f64::INFINITY;
                let mut best_t = 0usize;
                let mut best_cost = 0.0;
                for t in 0..nt {
                    let cost = pow_half_p(sq_dist(c, &points[t * d..(t + 1) * d]), p);
                    let val = cost - pi[ns + t];
                    if val < best_val {
                        best_val = val;
                        best_t = t;
                        best_cost = cost;
                    }
                }
                let rc = best_val + pi_s;
                let eps = 1e-13
                    * best_cost
                        .abs()
                        .max(pi_s.abs())
                        .max(pi[ns + best_t].abs())
                        .max(1.0);
                if rc < -eps {
                    Some((best_t as u32, best_cost))
                } else {
                    None
                }
            })
            .collect();
        let mut added = 0;
        for (s, cand) in candidates.into_iter().enumerate() {
            if let Some((t, c)) = cand {
                if self.core.add_arc(s, t as usize, c) {
                    added += 1;
                }
            }
        }
        added
    }

    /// Optimizes to a full-pricing certificate.
    pub(crate) fn solve(&mut self) -> Result<()> {
        let budget = self.pivot_budget();
        let trace = std::env::var_os("EQQ_TRACE_SOLVE").is_some();
        loop {
            let t0 = std::time::Instant::now();
            let pivots = self.core.optimize(budget)?;
            let t1 = std::time::Instant::now();
            let added = self.price_and_add();
            if trace {
                eprintln!(
                    "[solve] pivots={pivots} opt={:.2}s price={:.2}s added={added} pool={}",
                    (t1 - t0).as_secs_f64(),
                    t1.elapsed().as_secs_f64(),
                    self.core.pool_len()
                );
            }
            if added == 0 {
                break;
            }
        }
        let residual = self.core.artificial_residual();
        if residual > 1e-9 * self.total.max(1.0) {
            return Err(Error::Internal(format!(
                "capacity solve left {residual:.3e} mass on artificial arcs"
            )));
        }
        Ok(())
    }

    fn pivot_budget(&self) -> u64 {
        1000 * (self.cells.len() + self.n_points + 1000) as u64
    }

    /// Moves the sinks, rewriting pool-arc costs in place; the basis stays
    /// primal feasible so the next `solve` is warm.
    pub(crate) fn update_points(&mut self, points: &[f64]) {
        debug_assert_eq!(points.len(), self.n_points * self.d);
        self.points.copy_from_slice(points);
        let knn_total = KNN.min(self.n_points) * self.cells.len();
        if self.core.pool_len() > knn_total + 6 * self.cells.len() {
            self.core.compact_pool();
        }
        let d = self.d;
        let p = self.p;
        let centers = std::mem::take(&mut self.centers);
        let pts = std::mem::take(&mut self.points);
        self.core.rewrite_pool_costs(|s, t| {
            pow_half_p(
                sq_dist(
                    &centers[s as usize * d..(s as usize + 1) * d],
                    &pts[t as usize * d..(t as usize + 1) * d],
                ),
                p,
            )
        });
        self.centers = centers;
        self.points = pts;
        self.core.recompute_potentials();
    }

    /// Repaired positive flows as (source index, sink index, mass), sorted by
    /// (source, sink): drops degenerate dust below the floor and rescales
    /// each sink column to its exact demand.
    pub(crate) fn repaired_flows(&self) -> Vec<(u32, u32, f64)> {
        let mut flows = self.core.flows(PLAN_FLOOR);
        let mut col = vec![0.0_f64; self.n_points];
        for &(_, t, f) in &flows {
            col[t as usize] += f;
        }
        for f in &mut flows {
            let t = f.1 as usize;
            if col[t] > 0.0 {
                f.2 *= self.demands[t] / col[t];
            }
        }
        flows.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        flows
    }

    /// Plan in grid terms plus the geometric cost recomputed from entries.
    pub(crate) fn plan(&self) -> (f64, Vec<PlanEntry>) {
        let flows = self.repaired_flows();
        let entries: Vec<PlanEntry> = flows
            .iter()
            .map(|&(s, t, mass)| PlanEntry {
                cell: self.cells[s as usize],
                point: t as usize,
                mass,
            })
            .collect();
        let cost_pow_p = kahan_sum(
            flows
                .iter()
                .map(|&(s, t, mass)| mass * self.cost_of(s as usize, t as usize)),
        );
        (cost_pow_p, entries)
    }

    /// Per-sink lists of (mass, source index) from the repaired flows.
    pub(crate) fn groups(&self) -> Vec<Vec<(f64, u32)>> {
        let mut groups = vec![Vec::new(); self.n_points];
        for (s, t, mass) in self.repaired_flows() {
            groups[t as usize].push((mass, s));
        }
        groups
    }
}

/// Sorts the rows of `coords` along a Morton (Z-order) curve over the box
/// [lo, hi], ties broken by index. Gives northwest-corner initial bases
/// their spatial locality.
fn morton_order(coords: &[f64], d: usize, lo: &[f64], hi: &[f64]) -> Vec<u32> {
    let n = coords.len() / d;
    let bits = (63 / d.max(1)).min(21);
    if bits == 0 {
        return (0..n as u32).collect();
    }
    let scale = ((1u64 << bits) - 1) as f64;
    let mut keyed: Vec<(u64, u32)> = (0..n)
        .map(|i| {
            let mut key = 0u64;
            for k in 0..d {
                let ext = hi[k] - lo[k];
                let t = if ext > 0.0 {
                    ((coords[i * d + k] - lo[k]) / ext).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let q = (t * scale).round() as u64;
                for b in 0..bits {
                    key |= ((q >> b) & 1) << (b * d + k);
                }
            }
            (key, i as u32)
        })
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Adds each source's k nearest sinks (ties to the lower sink index).
fn seed_knn_arcs(
    core: &mut SimplexCore,
    centers: &[f64],
    points: &[f64],
    d: usize,
    n_points: usize,
    p: f64,
) {
    let ns = centers.len() / d;
    let k = KNN.min(n_points);
    let nearest: Vec<Vec<(f64, u32)>> = (0..ns)
        .into_par_iter()
        .with_min_len(PRICE_MIN_LEN)
        .map(|s| {
            let c = &centers[s * d..(s + 1) * d];
            let mut top: Vec<(f64, u32)> = Vec::with_capacity(k + 1);
            for t in 0..n_points {
                let ds = sq_dist(c, &points[t * d..(t + 1) * d]);
                if top.len() < k || ds < top[top.len() - 1].0 {
                    let pos = top.partition_point(|&(v, _)| v <= ds);
                    top.insert(pos, (ds, t as u32));
                    if top.len() > k {
                        top.pop();
                    }
                }
            }
            top
        })
        .collect();
    for (s, top) in nearest.into_iter().enumerate() {
        for (ds, t) in top {
            core.add_arc(s, t as usize, pow_half_p(ds, p));
        }
    }
}

/// Solves a small dense transportation instance outright: every
/// source-sink arc is materialized, costs come from the closure. Returns
/// positive flows as (source, sink, flow). Supplies and demands must balance.
pub(crate) fn solve_dense_bipartite(
    supplies: &[f64],
    demands: &[f64],
    cost: impl Fn(usize, usize) -> f64,
    max_cost_bound: f64,
) -> Result<Vec<(u32, u32, f64)>> {
    let ns = supplies.len();
    let nt = demands.len();
    let arcs = ns
        .checked_mul(nt)
        .filter(|&m| m <= 50_000_000)
        .ok_or_else(|| Error::TooLarge(format!("dense transport: {ns} x {nt} arcs")))?;
    let mut core = SimplexCore::new(supplies, demands, max_cost_bound);
    for s in 0..ns {
        for t in 0..nt {
            core.add_arc(s, t, cost(s, t));
        }
    }
    core.optimize(1000 * (arcs as u64 + ns as u64 + nt as u64 + 100))?;
    let total: f64 = kahan_sum(supplies.iter().copied());
    if core.artificial_residual() > 1e-9 * total.max(1.0) {
        return Err(Error::Internal(
            "dense transport left mass on artificial arcs".into(),
        ));
    }
    Ok(core.flows(0.0))
}

#[cfg(test)]
mod tests {
    use crate::measure::{build_grid, MeasureSpec};
    use crate::transport::{solve_uniform_capacity_with_limit, PointCloud};

    /// Timing probe at sweep scale; run on demand with
    /// `cargo test -p eqq-core scale_probe -- --ignored --nocapture`.
    #[test]
    #[ignore]
    fn scale_probe() {
        let spec = MeasureSpec::UniformCube { d: 2, declared_total: 1.0 };
        for &(res, k) in &[(256usize, 16usize), (512, 16), (512, 32)] {
            let grid = build_grid(
                &spec,
                &[res, res],
                (&[0.0, 0.0][..], &[1.0, 1.0][..]),
                false,
            )
            .unwrap();
            let n = k * k;
            let mut rows = Vec::with_capacity(n);
            for i in 0..k {
                for j in 0..k {
                    rows.push(vec![
                        (2 * i + 1) as f64 / (2 * k) as f64 + 1e-3 * ((i * 7 + j) % 5) as f64,
                        (2 * j + 1) as f64 / (2 * k) as f64 + 1e-3 * ((i + j * 3) % 7) as f64,
                    ]);
                }
            }
            let cloud = PointCloud::new(2, &rows, 1.0 / n as f64).unwrap();
            let t0 = std::time::Instant::now();
            let (cost, _) =
                solve_uniform_capacity_with_limit(&grid, &cloud, 2.0, usize::MAX).unwrap();
            println!(
                "res={res} n={n}: cost={cost:.6} in {:.2}s",
                t0.elapsed().as_secs_f64()
            );
        }
    }

    /// Warm-restart probe: Lloyd-sized moves and a full re-randomization on
    /// a persistent solver. Run with
    /// `cargo test -p eqq-core warm_probe -- --ignored --nocapture`.
    #[test]
    #[ignore]
    fn warm_probe() {
        use super::CapacitySolver;
        let spec = MeasureSpec::UniformCube { d: 2, declared_total: 1.0 };
        let grid = build_grid(
            &spec,
            &[512, 512],
            (&[0.0, 0.0][..], &[1.0, 1.0][..]),
            false,
        )
        .unwrap();
        let k = 32;
        let n = k * k;
        let mut pts = Vec::with_capacity(n * 2);
        for i in 0..k {
            for j in 0..k {
                pts.push((2 * i + 1) as f64 / (2 * k) as f64 + 1e-3 * ((i * 7 + j) % 5) as f64);
                pts.push((2 * j + 1) as f64 / (2 * k) as f64 + 1e-3 * ((i + j * 3) % 7) as f64);
            }
        }
        let mut solver = CapacitySolver::new(&grid, &pts, n, 2.0, usize::MAX).unwrap();
        let t0 = std::time::Instant::now();
        solver.solve().unwrap();
        println!("cold: {:.2}s", t0.elapsed().as_secs_f64());
        // Lloyd-sized nudges.
        for it in 0..3 {
            for (idx, v) in pts.iter_mut().enumerate() {
                *v += 3e-3 * (((idx * 31 + it * 17) % 11) as f64 / 11.0 - 0.5);
            }
            let t0 = std::time::Instant::now();
            solver.update_points(&pts);
            solver.solve().unwrap();
            let (cost, _) = solver.plan();
            println!(
                "lloyd step {it}: {:.2}s cost_pow_p={cost:.6}",
                t0.elapsed().as_secs_f64()
            );
        }
        // Restart-sized moves want a fresh solver: the old basis and arc
        // pool are built around the old positions and fight the new ones.
        for (idx, v) in pts.iter_mut().enumerate() {
            *v = 0.05 + 0.9 * (((idx * 2654435761_usize) % 104729) as f64 / 104729.0);
        }
        let t0 = std::time::Instant::now();
        let mut fresh = CapacitySolver::new(&grid, &pts, n, 2.0, usize::MAX).unwrap();
        fresh.solve().unwrap();
        println!("fresh solver after restart move: {:.2}s", t0.elapsed().as_secs_f64());
    }
}
