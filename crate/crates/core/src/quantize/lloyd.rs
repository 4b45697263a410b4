//! Lloyd-type alternating minimizers for both quantization objectives.
//!
//! [`lloyd_classical`] alternates nearest-site assignment with p-centroid
//! updates (k-means for p = 2). [`lloyd_capacity`] replaces the assignment
//! step with an exact capacity-constrained transport solve so every site
//! receives mass total/n, which makes the converged cost an upper estimate
//! of the empirical error ẽ_{p,n}.
//!
//! Restart scheme of the capacity variant: raw random initial clouds are
//! brutal for the transport solver (clustered sinks force it through
//! millions of pivots), so each restart is first pre-smoothed by a short
//! classical Lloyd burn-in — pure geometry, no LP — and then scored with a
//! single capacity solve. Only the best-scoring restart is polished by the
//! full alternation, which warm-starts each solve from the previous basis.
//! The burn-in is an initialization detail: traces contain capacity costs
//! only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::GridDensity;
use crate::num::{pow_half_p, root_p, sq_dist, KahanAcc};
use crate::transport::{CapacitySolver, PointCloud};

use super::{p_centroid_flat, InitStrategy, OptimizerConfig, QuantizerResult};

/// Classical pre-smoothing budget per restart (initialization only).
const BURN_ITERS: usize = 50;
/// Burn-in stops early once the classical cost decrease falls below this.
const BURN_TOL: f64 = 1e-4;
/// Accepted iterations may wiggle upward by this relative slack (fp noise
/// in an alternation that is nonincreasing in exact arithmetic).
const ACCEPT_SLACK: f64 = 1e-12;

/// Maximum ambient dimension of the nearest-site accelerator (and of the
/// stack buffers throughout the assignment loops).
const MAX_D: usize = 8;

// ---------------------------------------------------------------------------
// Grid view shared by the classical passes

/// Nonzero cells of a grid unpacked for hot loops: flat centers, masses,
/// cumulative masses for sampling, and the bounding box for lattice inits.
struct CellsView {
    d: usize,
    spacing: f64,
    centers: Vec<f64>,
    masses: Vec<f64>,
    /// prefix[i] = Σ masses[0..=i]; last entry is the total.
    prefix: Vec<f64>,
    singular: Vec<bool>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl CellsView {
    fn build(grid: &GridDensity) -> Result<CellsView> {
        let cells = grid.nonzero_cells();
        if cells.is_empty() {
            return Err(Error::EmptyMeasure("lloyd: grid has no mass".into()));
        }
        let d = grid.d();
        let centers = grid.centers_flat(&cells);
        let masses: Vec<f64> = cells.iter().map(|&c| grid.masses()[c]).collect();
        let mut acc = KahanAcc::new();
        let prefix: Vec<f64> = masses
            .iter()
            .map(|&m| {
                acc.add(m);
                acc.total()
            })
            .collect();
        let singular: Vec<bool> =
            cells.iter().map(|c| grid.singular_cells().contains(c)).collect();
        Ok(CellsView {
            d,
            spacing: grid.spacing(),
            centers,
            masses,
            prefix,
            singular,
            lo: grid.origin().to_vec(),
            hi: grid.upper(),
        })
    }

    fn total(&self) -> f64 {
        *self.prefix.last().expect("nonempty")
    }

    fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.d..(i + 1) * self.d]
    }
}

// ---------------------------------------------------------------------------
// Bucket-grid nearest-site accelerator

/// Uniform bucket grid over the sites' bounding box (about one site per
/// bucket) answering nearest-site queries by expanding Chebyshev rings.
///
/// Ties are broken toward the lowest site index, so results match a naive
/// strict-`<` argmin scan bit for bit.
struct SiteIndex {
    d: usize,
    sites: Vec<f64>,
    lo: Vec<f64>,
    edge: f64,
    dims: [i64; MAX_D],
    strides: [usize; MAX_D],
    /// CSR buckets: sites of bucket b are items[starts[b]..starts[b+1]].
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl SiteIndex {
    fn new(sites: &[f64], d: usize) -> SiteIndex {
        assert!(d >= 1 && d <= MAX_D, "site index supports 1 ≤ d ≤ {MAX_D}");
        let n = sites.len() / d;
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for j in 0..n {
            for k in 0..d {
                let v = sites[j * d + k];
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        let max_ext = (0..d).map(|k| hi[k] - lo[k]).fold(0.0_f64, f64::max);
        let per_axis = (n as f64).powf(1.0 / d as f64).ceil().max(1.0);
        // Degenerate spread (single site, coincident sites): one bucket.
        let edge = if max_ext > 0.0 { max_ext / per_axis } else { 1.0 };
        let mut dims = [1_i64; MAX_D];
        let mut n_buckets = 1_usize;
        for k in 0..d {
            let w = (((hi[k] - lo[k]) / edge).ceil() as i64).max(1);
            dims[k] = w;
            n_buckets *= w as usize;
        }
        let mut strides = [0_usize; MAX_D];
        let mut s = 1_usize;
        for k in (0..d).rev() {
            strides[k] = s;
            s *= dims[k] as usize;
        }
        // CSR fill: count, prefix, place.
        let bucket_of = |x: &[f64]| -> usize {
            let mut b = 0;
            for k in 0..d {
                let c = (((x[k] - lo[k]) / edge).floor() as i64).clamp(0, dims[k] - 1);
                b += c as usize * strides[k];
            }
            b
        };
        let mut counts = vec![0_u32; n_buckets + 1];
        for j in 0..n {
            counts[bucket_of(&sites[j * d..(j + 1) * d]) + 1] += 1;
        }
        for b in 0..n_buckets {
            counts[b + 1] += counts[b];
        }
        let starts = counts.clone();
        let mut items = vec![0_u32; n];
        let mut cursor = counts;
        // Ascending j keeps each bucket's items sorted by site index.
        for j in 0..n {
            let b = bucket_of(&sites[j * d..(j + 1) * d]);
            items[cursor[b] as usize] = j as u32;
            cursor[b] += 1;
        }
        SiteIndex {
            d,
            sites: sites.to_vec(),
            lo,
            edge,
            dims,
            strides,
            starts,
            items,
        }
    }

    fn site(&self, j: usize) -> &[f64] {
        &self.sites[j * self.d..(j + 1) * self.d]
    }

    /// Index and squared distance of the nearest site to `q`.
    ///
    /// Scans Chebyshev rings around the query's bucket. A site in a
    /// ring-r bucket is at least (r−1)·edge away, so once the best squared
    /// distance beats (r−1)²·edge² no further ring can improve and the
    /// scan stops (the `==` case keeps scanning, which is what preserves
    /// lowest-index tie-breaking across ring boundaries).
    fn nearest(&self, q: &[f64]) -> (u32, f64) {
        let d = self.d;
        let mut c = [0_i64; MAX_D];
        for k in 0..d {
            c[k] = (((q[k] - self.lo[k]) / self.edge).floor() as i64).clamp(0, self.dims[k] - 1);
        }
        // Farthest bucket in Chebyshev terms: past it there is nothing left.
        let max_r = (0..d)
            .map(|k| c[k].max(self.dims[k] - 1 - c[k]))
            .max()
            .unwrap_or(0);
        let mut best = (u32::MAX, f64::INFINITY);
        let mut off = [0_i64; MAX_D];
        for r in 0..=max_r {
            if best.0 != u32::MAX {
                let cutoff = (r - 1).max(0) as f64 * self.edge;
                if cutoff * cutoff > best.1 {
                    break;
                }
            }
            // Odometer over the box [c−r, c+r] ∩ grid, keeping Chebyshev
            // distance exactly r.
            for k in 0..d {
                off[k] = (c[k] - r).max(0);
            }
            'ring: loop {
                let mut cheb = 0_i64;
                let mut b = 0_usize;
                for k in 0..d {
                    cheb = cheb.max((off[k] - c[k]).abs());
                    b += off[k] as usize * self.strides[k];
                }
                if cheb == r {
                    for &j in
                        &self.items[self.starts[b] as usize..self.starts[b + 1] as usize]
                    {
                        let sq = sq_dist(q, self.site(j as usize));
                        if sq < best.1 || (sq == best.1 && j < best.0) {
                            best = (j, sq);
                        }
                    }
                }
                // Advance the odometer, last axis fastest.
                let mut axis = d;
                loop {
                    if axis == 0 {
                        break 'ring;
                    }
                    axis -= 1;
                    off[axis] += 1;
                    if off[axis] <= (c[axis] + r).min(self.dims[axis] - 1) {
                        break;
                    }
                    off[axis] = (c[axis] - r).max(0);
                }
            }
        }
        best
    }
}

// ---------------------------------------------------------------------------
// Classical passes (assignment, centroids, repair)

/// Nearest-site assignment of every cell, plus the deterministic cost^p
/// (assignment in parallel, cost summed sequentially so identical inputs
/// give identical bits regardless of thread count).
fn assign_cells(view: &CellsView, idx: &SiteIndex, p: f64) -> (Vec<u32>, f64) {
    let nc = view.masses.len();
    let assign: Vec<u32> = (0..nc)
        .into_par_iter()
        .with_min_len(2048)
        .map(|i| idx.nearest(view.center(i)).0)
        .collect();
    let mut acc = KahanAcc::new();
    for i in 0..nc {
        let s = assign[i] as usize;
        acc.add(view.masses[i] * pow_half_p(sq_dist(view.center(i), idx.site(s)), p));
    }
    (assign, acc.total())
}

/// p-centroid update with empty-site repair: a site that received no mass
/// respawns at the center of the cell contributing most to the current
/// cost (mass · distance^p to its assigned site), largest first; repairs
/// and centroid moves both never increase the classical cost.
fn centroid_update(
    view: &CellsView,
    assign: &[u32],
    old_sites: &[f64],
    n: usize,
    p: f64,
) -> Vec<f64> {
    let d = view.d;
    let nc = view.masses.len();
    let mut new_sites = vec![0.0_f64; n * d];
    let mut mass_of = vec![0.0_f64; n];
    if p == 2.0 {
        // Weighted means, accumulated in place.
        for i in 0..nc {
            let s = assign[i] as usize;
            let m = view.masses[i];
            mass_of[s] += m;
            for k in 0..d {
                new_sites[s * d + k] += m * view.centers[i * d + k];
            }
        }
        for s in 0..n {
            if mass_of[s] > 0.0 {
                for k in 0..d {
                    new_sites[s * d + k] /= mass_of[s];
                }
            } else {
                new_sites[s * d..(s + 1) * d].copy_from_slice(&old_sites[s * d..(s + 1) * d]);
            }
        }
    } else {
        // CSR grouping, then an exact p-center per nonempty site.
        let mut counts = vec![0_u32; n + 1];
        for &s in assign {
            counts[s as usize + 1] += 1;
        }
        for s in 0..n {
            counts[s + 1] += counts[s];
        }
        let starts = counts.clone();
        let mut members = vec![0_u32; nc];
        let mut cursor = counts;
        for (i, &s) in assign.iter().enumerate() {
            members[cursor[s as usize] as usize] = i as u32;
            cursor[s as usize] += 1;
        }
        let mut g_masses: Vec<f64> = Vec::new();
        let mut g_coords: Vec<f64> = Vec::new();
        for s in 0..n {
            let group = &members[starts[s] as usize..starts[s + 1] as usize];
            if group.is_empty() {
                new_sites[s * d..(s + 1) * d].copy_from_slice(&old_sites[s * d..(s + 1) * d]);
                continue;
            }
            g_masses.clear();
            g_coords.clear();
            for &i in group {
                let i = i as usize;
                g_masses.push(view.masses[i]);
                mass_of[s] += view.masses[i];
                g_coords.extend_from_slice(view.center(i));
            }
            p_centroid_flat(&g_masses, &g_coords, d, p, &mut new_sites[s * d..(s + 1) * d]);
        }
        // A group of zero-mass cells counts as empty for repair purposes.
    }

    let empties: Vec<usize> = (0..n).filter(|&s| mass_of[s] <= 0.0).collect();
    if !empties.is_empty() {
        let mut contributions: Vec<(f64, usize)> = (0..nc)
            .map(|i| {
                let s = assign[i] as usize;
                let cost = view.masses[i]
                    * pow_half_p(sq_dist(view.center(i), &old_sites[s * d..(s + 1) * d]), p);
                (cost, i)
            })
            .collect();
        contributions.sort_unstable_by(|a, b| {
            b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1))
        });
        for (rank, &s) in empties.iter().enumerate() {
            let (_, cell) = contributions[rank % contributions.len()];
            new_sites[s * d..(s + 1) * d].copy_from_slice(view.center(cell));
        }
    }
    new_sites
}

// ---------------------------------------------------------------------------
// Initial clouds

/// I.i.d. draws from the grid distribution: pick a cell by mass, then a
/// uniform position inside it (singular cells are atoms at their centers).
fn rho_sample(view: &CellsView, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = view.d;
    let total = view.total();
    let mut pts = Vec::with_capacity(n * d);
    for _ in 0..n {
        let u = rng.gen::<f64>() * total;
        let i = view.prefix.partition_point(|&c| c <= u).min(view.masses.len() - 1);
        let center = view.center(i);
        if view.singular[i] {
            pts.extend_from_slice(center);
        } else {
            for k in 0..d {
                pts.push(center[k] + (rng.gen::<f64>() - 0.5) * view.spacing);
            }
        }
    }
    pts
}

/// Lattice of ⌈n^{1/d}⌉ cells per axis over the grid's bounding box; n of
/// the lattice cells are chosen at even strides and each contributes its
/// center jittered uniformly within the cell.
fn grid_jitter(view: &CellsView, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = view.d;
    let m = (n as f64).powf(1.0 / d as f64).ceil().max(1.0) as u64;
    let cells = m.pow(d as u32);
    let mut pts = Vec::with_capacity(n * d);
    let mut mi = vec![0_u64; d];
    for j in 0..n as u64 {
        let mut rank = j * cells / n as u64;
        for k in (0..d).rev() {
            mi[k] = rank % m;
            rank /= m;
        }
        for k in 0..d {
            let ext = view.hi[k] - view.lo[k];
            pts.push(view.lo[k] + (mi[k] as f64 + rng.gen::<f64>()) * ext / m as f64);
        }
    }
    pts
}

fn initial_cloud(
    view: &CellsView,
    n: usize,
    cfg: &OptimizerConfig,
    restart: usize,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(restart as u64);
    match cfg.init {
        InitStrategy::RhoSample => Ok(rho_sample(view, n, &mut rng)),
        InitStrategy::GridJitter => Ok(grid_jitter(view, n, &mut rng)),
        InitStrategy::User => Err(Error::Precondition(
            "init strategy `user` needs an explicit starting cloud; use lloyd_capacity_warm"
                .into(),
        )),
    }
}

fn entry_checks(grid: &GridDensity, n: usize, p: f64, cfg: &OptimizerConfig) -> Result<()> {
    cfg.validate()?;
    if n < 1 {
        return Err(Error::Precondition("lloyd: n must be ≥ 1".into()));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Precondition(format!("lloyd: p must be ≥ 1, got {p}")));
    }
    if grid.d() > MAX_D {
        return Err(Error::TooLarge(format!(
            "lloyd: d = {} exceeds the accelerator cap {MAX_D}",
            grid.d()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Classical Lloyd

/// Classical (free-weight) Lloyd iteration; the converged cost is an upper
/// estimate of e_{p,n}. Restart r draws from ChaCha stream (seed, r); the
/// best final cost wins, first winner on ties.
pub fn lloyd_classical(
    grid: &GridDensity,
    n: usize,
    p: f64,
    cfg: &OptimizerConfig,
) -> Result<QuantizerResult> {
    entry_checks(grid, n, p, cfg)?;
    let view = CellsView::build(grid)?;
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for r in 0..cfg.restarts {
        let pts = initial_cloud(&view, n, cfg, r)?;
        let (pts, cost, trace) = classical_run(&view, pts, n, p, cfg.max_iters, cfg.tol);
        if best.as_ref().map_or(true, |(c, ..)| cost < *c) {
            best = Some((cost, pts, trace));
        }
    }
    let (cost, pts, trace) = best.expect("restarts >= 1");
    Ok(QuantizerResult {
        cloud: PointCloud::from_flat(view.d, pts, view.total() / n as f64)?,
        cost,
        method: "lloyd_classical".into(),
        trace,
        seed_used: cfg.seed,
    })
}

/// One classical Lloyd run from a given cloud. Returns (points, final cost,
/// accepted trace); the initial evaluation is the first trace entry.
fn classical_run(
    view: &CellsView,
    mut pts: Vec<f64>,
    n: usize,
    p: f64,
    max_iters: usize,
    tol: f64,
) -> (Vec<f64>, f64, Vec<f64>) {
    let idx = SiteIndex::new(&pts, view.d);
    let (mut assign, cost_pow) = assign_cells(view, &idx, p);
    let mut c_prev = root_p(cost_pow, p);
    let mut trace = vec![c_prev];
    for _ in 1..max_iters {
        if c_prev <= 0.0 {
            break;
        }
        let new_pts = centroid_update(view, &assign, &pts, n, p);
        let idx = SiteIndex::new(&new_pts, view.d);
        let (new_assign, cost_pow) = assign_cells(view, &idx, p);
        let c_new = root_p(cost_pow, p);
        if !(c_new <= c_prev * (1.0 + ACCEPT_SLACK) + f64::MIN_POSITIVE) {
            break; // fp wiggle upward: keep the previous iterate
        }
        pts = new_pts;
        assign = new_assign;
        trace.push(c_new);
        let done = (c_prev - c_new) < tol * c_prev;
        c_prev = c_new;
        if done {
            break;
        }
    }
    (pts, c_prev, trace)
}

// ---------------------------------------------------------------------------
// Capacity-constrained Lloyd

/// Capacity-constrained Lloyd iteration; every site receives mass total/n
/// through an exact transport solve, so the converged cost is an upper
/// estimate of the empirical error ẽ_{p,n}. See the module docs for the
/// restart scheme.
pub fn lloyd_capacity(
    grid: &GridDensity,
    n: usize,
    p: f64,
    cfg: &OptimizerConfig,
) -> Result<QuantizerResult> {
    entry_checks(grid, n, p, cfg)?;
    let view = CellsView::build(grid)?;
    // Tournament: burn in each restart classically, score it with one
    // capacity solve, keep the cheapest (at most two solvers alive).
    let mut best: Option<(f64, Vec<f64>, CapacitySolver)> = None;
    for r in 0..cfg.restarts {
        let mut pts = initial_cloud(&view, n, cfg, r)?;
        if n > 1 {
            (pts, _, _) = classical_run(&view, pts, n, p, BURN_ITERS, BURN_TOL);
        }
        let mut solver = CapacitySolver::new(grid, &pts, n, p, cfg.cell_limit)?;
        solver.solve()?;
        let (cost_pow, _) = solver.plan();
        let cost = root_p(cost_pow, p);
        if best.as_ref().map_or(true, |(c, ..)| cost < *c) {
            best = Some((cost, pts, solver));
        }
    }
    let (c0, pts, solver) = best.expect("restarts >= 1");
    capacity_polish(solver, pts, c0, n, p, cfg)
}

/// Capacity Lloyd from a caller-supplied starting cloud (the `user` init):
/// no restarts, no burn-in — the cloud is taken as iterate zero and only
/// polished, so the result cost never exceeds the cloud's own cost.
pub fn lloyd_capacity_warm(
    grid: &GridDensity,
    cloud: &PointCloud,
    p: f64,
    cfg: &OptimizerConfig,
) -> Result<QuantizerResult> {
    entry_checks(grid, cloud.n(), p, cfg)?;
    if cloud.d() != grid.d() {
        return Err(Error::DimensionMismatch(format!(
            "lloyd_capacity_warm: cloud d = {}, grid d = {}",
            cloud.d(),
            grid.d()
        )));
    }
    let rel = (cloud.total() - grid.total()).abs() / grid.total().max(f64::MIN_POSITIVE);
    if rel > 1e-9 {
        return Err(Error::Precondition(format!(
            "lloyd_capacity_warm: cloud total {} differs from grid total {}",
            cloud.total(),
            grid.total()
        )));
    }
    let mut solver = CapacitySolver::new(grid, cloud.coords(), cloud.n(), p, cfg.cell_limit)?;
    solver.solve()?;
    let (cost_pow, _) = solver.plan();
    let c0 = root_p(cost_pow, p);
    capacity_polish(solver, cloud.coords().to_vec(), c0, cloud.n(), p, cfg)
}

/// The capacity alternation: group mass per site from the current optimal
/// plan, move each site to its group's p-centroid, re-solve warm. Stops on
/// relative decrease < tol, on max_iters, or on an fp-level increase
/// (which reverts to the previous iterate).
fn capacity_polish(
    mut solver: CapacitySolver,
    mut pts: Vec<f64>,
    c0: f64,
    n: usize,
    p: f64,
    cfg: &OptimizerConfig,
) -> Result<QuantizerResult> {
    let d = pts.len() / n;
    let mut c_prev = c0;
    let mut trace = vec![c0];
    let mut g_masses: Vec<f64> = Vec::new();
    let mut g_coords: Vec<f64> = Vec::new();
    for _ in 1..cfg.max_iters {
        if c_prev <= 0.0 {
            break;
        }
        let groups = solver.groups();
        let mut new_pts = vec![0.0_f64; n * d];
        {
            let centers = solver.centers();
            for (t, group) in groups.iter().enumerate() {
                if group.is_empty() {
                    // Cannot happen with positive quotas; keep the site put.
                    new_pts[t * d..(t + 1) * d].copy_from_slice(&pts[t * d..(t + 1) * d]);
                    continue;
                }
                g_masses.clear();
                g_coords.clear();
                for &(mass, src) in group {
                    g_masses.push(mass);
                    g_coords
                        .extend_from_slice(&centers[src as usize * d..(src as usize + 1) * d]);
                }
                p_centroid_flat(&g_masses, &g_coords, d, p, &mut new_pts[t * d..(t + 1) * d]);
            }
        }
        solver.update_points(&new_pts);
        solver.solve()?;
        let (cost_pow, _) = solver.plan();
        let c_new = root_p(cost_pow, p);
        if !(c_new <= c_prev * (1.0 + ACCEPT_SLACK) + f64::MIN_POSITIVE) {
            break; // fp wiggle upward: report the previous iterate
        }
        pts = new_pts;
        trace.push(c_new);
        let done = (c_prev - c_new) < cfg.tol * c_prev;
        c_prev = c_new;
        if done {
            break;
        }
    }
    Ok(QuantizerResult {
        cloud: PointCloud::from_flat(d, pts, solver.demand_each())?,
        cost: c_prev,
        method: "lloyd_capacity".into(),
        trace,
        seed_used: cfg.seed,
    })
}
