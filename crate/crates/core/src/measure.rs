//! Measure specifications and their grid discretizations.
//!
//! A [`MeasureSpec`] describes an analytic measure on R^d (uniform boxes,
//! Gaussians, mixtures, two separated blocks, a singular segment).
//! [`build_grid`] discretizes a spec onto a regular cubic grid by closed-form
//! cell masses and renormalizes to the declared total. Moments and the
//! density functionals used in coefficient bounds are evaluated by the
//! midpoint rule.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{abs_pow, kahan_sum, norm_pow, normal_cdf};

fn default_total() -> f64 {
    1.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

/// Declarative description of an analytic test measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    /// Uniform probability measure on the unit cube [0,1]^d.
    UniformCube {
        d: usize,
        #[serde(default = "default_total", skip_serializing_if = "is_one")]
        declared_total: f64,
    },
    /// Uniform measure on a union of cubic cells given by an indicator grid.
    UniformSet {
        d: usize,
        /// Per-axis cell counts of the indicator grid.
        shape: Vec<usize>,
        /// Lower corner of the indicator grid.
        origin: Vec<f64>,
        /// Indicator cell edge length.
        spacing: f64,
        /// Flattened indicator (C order, last axis fastest); nonzero = in the set.
        indicator: Vec<u8>,
        #[serde(default = "default_total", skip_serializing_if = "is_one")]
        declared_total: f64,
    },
    /// Isotropic Gaussian N(mean, sigma^2 I).
    Gaussian {
        d: usize,
        mean: Vec<f64>,
        sigma: f64,
        #[serde(default = "default_total", skip_serializing_if = "is_one")]
        declared_total: f64,
    },
    /// Convex combination of probability specs.
    Mixture {
        parts: Vec<MixturePart>,
        #[serde(default = "default_total", skip_serializing_if = "is_one")]
        declared_total: f64,
    },
    /// Half mass on [0,1]^d, half on shift + [0,1]^d, with positive gap.
    TwoBlocks {
        d: usize,
        shift: Vec<f64>,
        #[serde(default = "default_total", skip_serializing_if = "is_one")]
        declared_total: f64,
    },
    /// Uniform (arc-length) measure on a segment: a singular component in d ≥ 2.
    SegmentSingular {
        d: usize,
        a: Vec<f64>,
        b: Vec<f64>,
        #[serde(default = "default_total", skip_serializing_if = "is_one")]
        declared_total: f64,
    },
}

/// One weighted component of a mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixturePart {
    /// Mixture weight in [0,1].
    pub w: f64,
    #[serde(flatten)]
    pub spec: MeasureSpec,
}

impl MeasureSpec {
    /// Ambient dimension.
    pub fn d(&self) -> usize {
        match self {
            MeasureSpec::UniformCube { d, .. }
            | MeasureSpec::UniformSet { d, .. }
            | MeasureSpec::Gaussian { d, .. }
            | MeasureSpec::TwoBlocks { d, .. }
            | MeasureSpec::SegmentSingular { d, .. } => *d,
            MeasureSpec::Mixture { parts, .. } => parts.first().map_or(0, |p| p.spec.d()),
        }
    }

    /// Total mass the discretization must carry.
    pub fn declared_total(&self) -> f64 {
        match self {
            MeasureSpec::UniformCube { declared_total, .. }
            | MeasureSpec::UniformSet { declared_total, .. }
            | MeasureSpec::Gaussian { declared_total, .. }
            | MeasureSpec::Mixture { declared_total, .. }
            | MeasureSpec::TwoBlocks { declared_total, .. }
            | MeasureSpec::SegmentSingular { declared_total, .. } => *declared_total,
        }
    }

    /// Short deterministic identifier used in sweep metadata.
    pub fn id(&self) -> String {
        match self {
            MeasureSpec::UniformCube { d, .. } => format!("uniform_cube_d{d}"),
            MeasureSpec::UniformSet { d, .. } => format!("uniform_set_d{d}"),
            MeasureSpec::Gaussian { d, sigma, .. } => format!("gaussian_d{d}_sigma{sigma}"),
            MeasureSpec::Mixture { parts, .. } => {
                format!("mixture_k{}_d{}", parts.len(), self.d())
            }
            MeasureSpec::TwoBlocks { d, .. } => format!("two_blocks_d{d}"),
            MeasureSpec::SegmentSingular { d, .. } => format!("segment_d{d}"),
        }
    }

    /// Validates structural invariants (dimensions, weights, separation).
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSpec(msg));
        match self {
            MeasureSpec::UniformCube { d, declared_total } => {
                if *d == 0 {
                    return fail("uniform_cube: d must be >= 1".into());
                }
                check_total(*declared_total)?;
            }
            MeasureSpec::UniformSet {
                d,
                shape,
                origin,
                spacing,
                indicator,
                declared_total,
            } => {
                if *d == 0 {
                    return fail("uniform_set: d must be >= 1".into());
                }
                if shape.len() != *d || origin.len() != *d {
                    return fail("uniform_set: shape/origin length must equal d".into());
                }
                if shape.iter().any(|&s| s == 0) {
                    return fail("uniform_set: zero-size shape axis".into());
                }
                let cells: usize = shape.iter().product();
                if indicator.len() != cells {
                    return fail(format!(
                        "uniform_set: indicator has {} entries, shape implies {}",
                        indicator.len(),
                        cells
                    ));
                }
                if !(*spacing > 0.0) || !spacing.is_finite() {
                    return fail("uniform_set: spacing must be positive and finite".into());
                }
                if indicator.iter().all(|&v| v == 0) {
                    return fail("uniform_set: indicator selects no cells".into());
                }
                check_total(*declared_total)?;
            }
            MeasureSpec::Gaussian {
                d,
                mean,
                sigma,
                declared_total,
            } => {
                if *d == 0 {
                    return fail("gaussian: d must be >= 1".into());
                }
                if mean.len() != *d {
                    return fail("gaussian: mean length must equal d".into());
                }
                if !(*sigma > 0.0) || !sigma.is_finite() {
                    return fail("gaussian: sigma must be positive and finite".into());
                }
                check_total(*declared_total)?;
            }
            MeasureSpec::Mixture {
                parts,
                declared_total,
            } => {
                if parts.is_empty() {
                    return fail("mixture: needs at least one part".into());
                }
                let d = parts[0].spec.d();
                let mut wsum = 0.0;
                for part in parts {
                    if part.w < 0.0 || part.w > 1.0 {
                        return fail(format!("mixture: weight {} outside [0,1]", part.w));
                    }
                    if part.spec.d() != d {
                        return fail("mixture: parts disagree on dimension".into());
                    }
                    if part.spec.declared_total() != 1.0 {
                        return fail(
                            "mixture: parts must be probability specs (declared_total 1)".into(),
                        );
                    }
                    part.spec.validate()?;
                    wsum += part.w;
                }
                if (wsum - 1.0).abs() > 1e-12 {
                    return fail(format!("mixture: weights sum to {wsum}, expected 1"));
                }
                check_total(*declared_total)?;
            }
            MeasureSpec::TwoBlocks {
                d,
                shift,
                declared_total,
            } => {
                if *d == 0 {
                    return fail("two_blocks: d must be >= 1".into());
                }
                if shift.len() != *d {
                    return fail("two_blocks: shift length must equal d".into());
                }
                // dist(A, B) between [0,1]^d and shift+[0,1]^d: per-axis gap.
                let mut gap_sq = 0.0;
                for &s in shift {
                    let g = (s.abs() - 1.0).max(0.0);
                    gap_sq += g * g;
                }
                if !(gap_sq > 0.0) {
                    return fail("two_blocks: blocks must be separated (dist > 0)".into());
                }
                check_total(*declared_total)?;
            }
            MeasureSpec::SegmentSingular {
                d,
                a,
                b,
                declared_total,
            } => {
                if *d == 0 {
                    return fail("segment_singular: d must be >= 1".into());
                }
                if a.len() != *d || b.len() != *d {
                    return fail("segment_singular: endpoint length must equal d".into());
                }
                if a.iter()
                    .zip(b)
                    .all(|(x, y)| (x - y).abs() <= 1e-15 * x.abs().max(y.abs()).max(1.0))
                {
                    return fail("segment_singular: endpoints must be distinct".into());
                }
                check_total(*declared_total)?;
            }
        }
        Ok(())
    }

    /// Default axis-aligned bounding box covering the support (Gaussians out
    /// to six standard deviations; degenerate axes of a segment get padded).
    pub fn default_bbox(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            MeasureSpec::UniformCube { d, .. } => (vec![0.0; *d], vec![1.0; *d]),
            MeasureSpec::UniformSet {
                d,
                shape,
                origin,
                spacing,
                ..
            } => {
                let lo = origin.clone();
                let hi = (0..*d)
                    .map(|k| origin[k] + shape[k] as f64 * spacing)
                    .collect();
                (lo, hi)
            }
            MeasureSpec::Gaussian { d, mean, sigma, .. } => {
                let lo = (0..*d).map(|k| mean[k] - 6.0 * sigma).collect();
                let hi = (0..*d).map(|k| mean[k] + 6.0 * sigma).collect();
                (lo, hi)
            }
            MeasureSpec::Mixture { parts, .. } => {
                let mut lo = vec![f64::INFINITY; self.d()];
                let mut hi = vec![f64::NEG_INFINITY; self.d()];
                for part in parts {
                    let (plo, phi) = part.spec.default_bbox();
                    for k in 0..lo.len() {
                        lo[k] = lo[k].min(plo[k]);
                        hi[k] = hi[k].max(phi[k]);
                    }
                }
                (lo, hi)
            }
            MeasureSpec::TwoBlocks { d, shift, .. } => {
                let lo = (0..*d).map(|k| shift[k].min(0.0)).collect();
                let hi = (0..*d).map(|k| (shift[k] + 1.0).max(1.0)).collect();
                (lo, hi)
            }
            MeasureSpec::SegmentSingular { d, a, b, .. } => {
                let mut lo: Vec<f64> = (0..*d).map(|k| a[k].min(b[k])).collect();
                let mut hi: Vec<f64> = (0..*d).map(|k| a[k].max(b[k])).collect();
                let max_ext = (0..*d)
                    .map(|k| hi[k] - lo[k])
                    .fold(0.0_f64, f64::max)
                    .max(1e-9);
                for k in 0..*d {
                    if hi[k] - lo[k] < 1e-9 * max_ext {
                        lo[k] -= 0.05 * max_ext;
                        hi[k] += 0.05 * max_ext;
                    }
                }
                (lo, hi)
            }
        }
    }
}

fn check_total(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        Err(Error::InvalidSpec(format!(
            "declared_total must be positive and finite, got {t}"
        )))
    } else {
        Ok(())
    }
}

/// Regular cubic-grid discretization of a measure: per-cell masses plus the
/// geometry needed to reconstruct cell centers and densities.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    d: usize,
    shape: Vec<usize>,
    origin: Vec<f64>,
    spacing: f64,
    masses: Vec<f64>,
    total: f64,
    singular_cells: BTreeSet<usize>,
    strides: Vec<usize>,
}

impl GridDensity {
    /// Assembles a grid from raw parts (used by file readers and tests).
    pub fn from_parts(
        d: usize,
        shape: Vec<usize>,
        origin: Vec<f64>,
        spacing: f64,
        masses: Vec<f64>,
        total: f64,
        singular_cells: BTreeSet<usize>,
    ) -> Result<GridDensity> {
        if d == 0 || shape.len() != d || origin.len() != d {
            return Err(Error::InvalidSpec(
                "grid: shape/origin length must equal d >= 1".into(),
            ));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidSpec("grid: spacing must be positive".into()));
        }
        let cells: usize = shape.iter().product();
        if cells == 0 || masses.len() != cells {
            return Err(Error::InvalidSpec(format!(
                "grid: {} masses for {} cells",
                masses.len(),
                cells
            )));
        }
        if masses.iter().any(|&m| m < 0.0 || !m.is_finite()) {
            return Err(Error::InvalidSpec("grid: negative or non-finite mass".into()));
        }
        if let Some(&c) = singular_cells.iter().next_back() {
            if c >= cells {
                return Err(Error::InvalidSpec(format!(
                    "grid: singular cell index {c} out of range"
                )));
            }
        }
        Ok(GridDensity {
            d,
            strides: strides_of(&shape),
            shape,
            origin,
            spacing,
            masses,
            total,
            singular_cells,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn num_cells(&self) -> usize {
        self.masses.len()
    }

    pub fn singular_cells(&self) -> &BTreeSet<usize> {
        &self.singular_cells
    }

    /// Cell volume h^d.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.d as i32)
    }

    /// Upper corner of the grid box.
    pub fn upper(&self) -> Vec<f64> {
        (0..self.d)
            .map(|k| self.origin[k] + self.shape[k] as f64 * self.spacing)
            .collect()
    }

    /// Multi-index of a flat cell index (C order, last axis fastest).
    pub fn coords_of(&self, flat: usize) -> Vec<usize> {
        let mut rem = flat;
        let mut out = vec![0usize; self.d];
        for k in 0..self.d {
            out[k] = rem / self.strides[k];
            rem %= self.strides[k];
        }
        out
    }

    /// Flat index of a multi-index.
    pub fn flat_index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.strides)
            .map(|(c, s)| c * s)
            .sum()
    }

    /// Writes the center of a cell into `out`.
    pub fn center_into(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for k in 0..self.d {
            let idx = rem / self.strides[k];
            rem %= self.strides[k];
            out[k] = self.origin[k] + self.spacing * (idx as f64 + 0.5);
        }
    }

    /// Center of a cell as a fresh vector.
    pub fn center(&self, flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.center_into(flat, &mut out);
        out
    }

    /// Flat indices of cells with positive mass, ascending.
    pub fn nonzero_cells(&self) -> Vec<usize> {
        (0..self.masses.len())
            .filter(|&c| self.masses[c] > 0.0)
            .collect()
    }

    /// Flat coordinate array (len = count * d) of the centers of `cells`.
    pub fn centers_flat(&self, cells: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; cells.len() * self.d];
        for (i, &c) in cells.iter().enumerate() {
            self.center_into(c, &mut out[i * self.d..(i + 1) * self.d]);
        }
        out
    }
}

fn strides_of(shape: &[usize]) -> Vec<usize> {
    let d = shape.len();
    let mut strides = vec![1usize; d];
    for k in (0..d.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    strides
}

/// Discretizes `spec` onto a cubic grid over `bbox` with `resolution` cells
/// per axis. Cell masses come from closed forms (volume fractions, CDF
/// differences, arc-length fractions) and are renormalized to the declared
/// total. With `truncate_ok` unset, losing more than 1e-6 of the mass to
/// truncation is an error.
pub fn build_grid(
    spec: &MeasureSpec,
    resolution: &[usize],
    bbox: (&[f64], &[f64]),
    truncate_ok: bool,
) -> Result<GridDensity> {
    spec.validate()?;
    let d = spec.d();
    let (lo, hi) = bbox;
    if resolution.len() != d || lo.len() != d || hi.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "build_grid: spec has d={d}, resolution/bbox lengths are {}/{}/{}",
            resolution.len(),
            lo.len(),
            hi.len()
        )));
    }
    if resolution.iter().any(|&r| r == 0) {
        return Err(Error::Precondition("build_grid: resolution >= 1 per axis".into()));
    }
    for k in 0..d {
        if !(hi[k] > lo[k]) {
            return Err(Error::Precondition(format!(
                "build_grid: bbox axis {k} has nonpositive extent"
            )));
        }
    }
    let h = (hi[0] - lo[0]) / resolution[0] as f64;
    for k in 1..d {
        let hk = (hi[k] - lo[k]) / resolution[k] as f64;
        if (hk - h).abs() > 1e-9 * h {
            return Err(Error::InvalidSpec(format!(
                "build_grid: cells must be cubic (axis 0 spacing {h}, axis {k} spacing {hk})"
            )));
        }
    }
    let mut cells = 1usize;
    for &r in resolution {
        cells = cells
            .checked_mul(r)
            .filter(|&c| c <= 1 << 26)
            .ok_or_else(|| Error::TooLarge("build_grid: more than 2^26 cells".into()))?;
    }

    let mut acc = Accum {
        d,
        shape: resolution.to_vec(),
        origin: lo.to_vec(),
        h,
        strides: strides_of(resolution),
        masses: vec![0.0; cells],
        singular: BTreeSet::new(),
    };
    fill(spec, spec.declared_total(), &mut acc)?;

    let captured = kahan_sum(acc.masses.iter().copied());
    let expected = spec.declared_total();
    if captured <= 0.0 {
        return Err(Error::EmptyMeasure(
            "build_grid: no mass falls inside the bounding box".into(),
        ));
    }
    let deficit = expected - captured;
    if deficit > 1e-6 * expected && !truncate_ok {
        return Err(Error::TailTooHeavy(format!(
            "build_grid: {:.3e} of {:.3e} lost outside bbox (tolerance 1e-6); pass truncate_ok to accept",
            deficit, expected
        )));
    }
    let scale = expected / captured;
    for m in &mut acc.masses {
        *m *= scale;
    }
    GridDensity::from_parts(
        d,
        acc.shape,
        acc.origin,
        h,
        acc.masses,
        expected,
        acc.singular,
    )
}

/// Builds a grid over the spec's default bounding box with cubic cells,
/// `resolution` cells along the longest axis, and proportional (rounded-up)
/// counts on shorter axes. Shorter axes get extended upward by a fraction of
/// a cell so spacing stays exactly cubic.
pub fn grid_for_spec(spec: &MeasureSpec, resolution: usize, truncate_ok: bool) -> Result<GridDensity> {
    spec.validate()?;
    if resolution == 0 {
        return Err(Error::Precondition("grid_for_spec: resolution >= 1".into()));
    }
    let d = spec.d();
    let (lo, hi) = spec.default_bbox();
    let max_ext = (0..d).map(|k| hi[k] - lo[k]).fold(f64::NEG_INFINITY, f64::max);
    let h = max_ext / resolution as f64;
    let mut res = vec![0usize; d];
    let mut hi_adj = vec![0.0; d];
    for k in 0..d {
        let exact = (hi[k] - lo[k]) / h;
        let r = (exact - 1e-9).ceil().max(1.0) as usize;
        res[k] = r;
        hi_adj[k] = lo[k] + r as f64 * h;
    }
    build_grid(spec, &res, (&lo, &hi_adj), truncate_ok)
}

/// Default cells-per-longest-axis used by the CLI when none is given.
pub fn default_resolution(d: usize) -> usize {
    match d {
        1 => 4096,
        2 => 512,
        3 => 64,
        _ => 16,
    }
}

struct Accum {
    d: usize,
    shape: Vec<usize>,
    origin: Vec<f64>,
    h: f64,
    strides: Vec<usize>,
    masses: Vec<f64>,
    singular: BTreeSet<usize>,
}

fn fill(spec: &MeasureSpec, w: f64, acc: &mut Accum) -> Result<()> {
    match spec {
        MeasureSpec::UniformCube { d, .. } => {
            fill_box(acc, &vec![0.0; *d], &vec![1.0; *d], w);
        }
        MeasureSpec::UniformSet {
            d,
            shape,
            origin,
            spacing,
            indicator,
            ..
        } => {
            let count = indicator.iter().filter(|&&v| v != 0).count();
            let per = w / count as f64;
            let istrides = strides_of(shape);
            for (flat, &v) in indicator.iter().enumerate() {
                if v == 0 {
                    continue;
                }
                let mut rem = flat;
                let mut blo = vec![0.0; *d];
                let mut bhi = vec![0.0; *d];
                for k in 0..*d {
                    let idx = rem / istrides[k];
                    rem %= istrides[k];
                    blo[k] = origin[k] + idx as f64 * spacing;
                    bhi[k] = blo[k] + spacing;
                }
                fill_box(acc, &blo, &bhi, per);
            }
        }
        MeasureSpec::Gaussian { d, mean, sigma, .. } => {
            let mut axis_weights = Vec::with_capacity(*d);
            for k in 0..*d {
                let n = acc.shape[k];
                let mut wts = Vec::with_capacity(n);
                let mut prev = normal_cdf((acc.origin[k] - mean[k]) / sigma);
                for i in 0..n {
                    let edge = acc.origin[k] + (i + 1) as f64 * acc.h;
                    let next = normal_cdf((edge - mean[k]) / sigma);
                    wts.push((i, (next - prev).max(0.0)));
                    prev = next;
                }
                axis_weights.push(wts);
            }
            product_fill(&axis_weights, &acc.strides, w, &mut acc.masses);
        }
        MeasureSpec::Mixture { parts, .. } => {
            for part in parts {
                fill(&part.spec, w * part.w, acc)?;
            }
        }
        MeasureSpec::TwoBlocks { d, shift, .. } => {
            fill_box(acc, &vec![0.0; *d], &vec![1.0; *d], 0.5 * w);
            let blo = shift.clone();
            let bhi: Vec<f64> = shift.iter().map(|s| s + 1.0).collect();
            fill_box(acc, &blo, &bhi, 0.5 * w);
        }
        MeasureSpec::SegmentSingular { d, a, b, .. } => {
            fill_segment(acc, *d, a, b, w);
        }
    }
    Ok(())
}

/// Spreads `mass` uniformly over the box [blo, bhi], allotting each grid cell
/// its exact overlap-volume fraction.
fn fill_box(acc: &mut Accum, blo: &[f64], bhi: &[f64], mass: f64) {
    let mut vol = 1.0;
    for k in 0..acc.d {
        vol *= bhi[k] - blo[k];
    }
    if !(vol > 0.0) {
        return;
    }
    let mut lists: Vec<Vec<(usize, f64)>> = Vec::with_capacity(acc.d);
    for k in 0..acc.d {
        let lo_idx = ((blo[k] - acc.origin[k]) / acc.h).floor().max(0.0) as usize;
        let hi_real = (bhi[k] - acc.origin[k]) / acc.h;
        if hi_real <= 0.0 || lo_idx >= acc.shape[k] {
            return; // no overlap on this axis
        }
        let hi_idx = (hi_real.ceil() as usize).min(acc.shape[k]);
        let mut list = Vec::with_capacity(hi_idx - lo_idx);
        for i in lo_idx..hi_idx {
            let cell_lo = acc.origin[k] + i as f64 * acc.h;
            let cell_hi = cell_lo + acc.h;
            let ov = (bhi[k].min(cell_hi) - blo[k].max(cell_lo)).max(0.0);
            if ov > 0.0 {
                list.push((i, ov));
            }
        }
        if list.is_empty() {
            return;
        }
        lists.push(list);
    }
    product_fill(&lists, &acc.strides, mass / vol, &mut acc.masses);
}

/// Accumulates scale * Π_k lists[k].weight into masses over the index product.
fn product_fill(lists: &[Vec<(usize, f64)>], strides: &[usize], scale: f64, masses: &mut [f64]) {
    fn rec(
        lists: &[Vec<(usize, f64)>],
        strides: &[usize],
        axis: usize,
        flat: usize,
        prod: f64,
        masses: &mut [f64],
    ) {
        if axis == lists.len() {
            masses[flat] += prod;
            return;
        }
        for &(i, v) in &lists[axis] {
            rec(lists, strides, axis + 1, flat + i * strides[axis], prod * v, masses);
        }
    }
    rec(lists, strides, 0, 0, scale, masses);
}

/// Uniform arc-length measure on the segment a..b: splits the parameter range
/// at every cell-boundary crossing and assigns each piece to the cell holding
/// its midpoint. Touched cells are recorded as singular support.
fn fill_segment(acc: &mut Accum, d: usize, a: &[f64], b: &[f64], mass: f64) {
    let mut ts = vec![0.0, 1.0];
    for k in 0..d {
        let dir = b[k] - a[k];
        if dir == 0.0 {
            continue;
        }
        // planes at origin + i*h crossing the segment
        let (t0, t1) = ((0.0f64), (1.0f64));
        let lo_x = a[k].min(b[k]);
        let hi_x = a[k].max(b[k]);
        let i_lo = ((lo_x - acc.origin[k]) / acc.h).floor() as i64;
        let i_hi = ((hi_x - acc.origin[k]) / acc.h).ceil() as i64;
        for i in i_lo..=i_hi {
            let plane = acc.origin[k] + i as f64 * acc.h;
            let t = (plane - a[k]) / dir;
            if t > t0 + 1e-15 && t < t1 - 1e-15 {
                ts.push(t);
            }
        }
    }
    ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ts.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    for win in ts.windows(2) {
        let (t0, t1) = (win[0], win[1]);
        if t1 - t0 <= 1e-15 {
            continue;
        }
        let tm = 0.5 * (t0 + t1);
        let mut flat = 0usize;
        let mut inside = true;
        for k in 0..d {
            let x = a[k] + tm * (b[k] - a[k]);
            let idx = ((x - acc.origin[k]) / acc.h).floor();
            if idx < 0.0 || idx >= acc.shape[k] as f64 {
                inside = false;
                break;
            }
            flat += (idx as usize) * acc.strides[k];
        }
        if inside {
            acc.masses[flat] += mass * (t1 - t0);
            acc.singular.insert(flat);
        }
    }
}

/// θ-th moment Σ_c m_c · ‖center(c)‖^θ by the midpoint rule.
pub fn moment(grid: &GridDensity, theta: f64) -> Result<f64> {
    if !(theta >= 1.0) {
        return Err(Error::Precondition(format!(
            "moment: theta must be >= 1, got {theta}"
        )));
    }
    let mut center = vec![0.0; grid.d()];
    Ok(kahan_sum((0..grid.num_cells()).map(|c| {
        let m = grid.masses()[c];
        if m == 0.0 {
            0.0
        } else {
            grid.center_into(c, &mut center);
            m * norm_pow(&center, theta)
        }
    })))
}

/// Density functional Σ_c ρ_c^b · h^d = Σ_c m_c^b · h^{d(1−b)} with
/// ρ_c = m_c / h^d, optionally excluding declared singular-support cells.
pub fn density_functional(
    grid: &GridDensity,
    exponent: f64,
    exclude_singular_support: bool,
) -> Result<f64> {
    if !(exponent > 0.0 && exponent <= 1.0) {
        return Err(Error::Precondition(format!(
            "density_functional: exponent must be in (0,1], got {exponent}"
        )));
    }
    let h_factor = grid.spacing().powf(grid.d() as f64 * (1.0 - exponent));
    let sum = kahan_sum((0..grid.num_cells()).map(|c| {
        let m = grid.masses()[c];
        if m == 0.0 || (exclude_singular_support && grid.singular_cells().contains(&c)) {
            0.0
        } else {
            abs_pow(m, exponent)
        }
    }));
    Ok(sum * h_factor)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_bbox(d: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; d], vec![1.0; d])
    }

    #[test]
    fn uniform_cube_2d_equal_cells() {
        let spec = MeasureSpec::UniformCube { d: 2, declared_total: 1.0 };
        let (lo, hi) = unit_bbox(2);
        let grid = build_grid(&spec, &[4, 4], (&lo, &hi), false).unwrap();
        assert_eq!(grid.num_cells(), 16);
        for &m in grid.masses() {
            assert!((m - 1.0 / 16.0).abs() < 1e-15);
        }
        assert!((kahan_sum(grid.masses().iter().copied()) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn uniform_set_half_box() {
        // Indicator for [0, 1/2] x [0, 1] on a 4x4 grid over the unit square.
        let mut indicator = vec![0u8; 16];
        for ix in 0..2usize {
            for iy in 0..4usize {
                indicator[ix * 4 + iy] = 1;
            }
        }
        let spec = MeasureSpec::UniformSet {
            d: 2,
            shape: vec![4, 4],
            origin: vec![0.0, 0.0],
            spacing: 0.25,
            indicator,
            declared_total: 1.0,
        };
        let (lo, hi) = unit_bbox(2);
        let grid = build_grid(&spec, &[4, 4], (&lo, &hi), false).unwrap();
        let mut eighth = 0;
        let mut zero = 0;
        for &m in grid.masses() {
            if (m - 0.125).abs() < 1e-15 {
                eighth += 1;
            } else if m == 0.0 {
                zero += 1;
            }
        }
        assert_eq!((eighth, zero), (8, 8));
    }

    #[test]
    fn gaussian_cells_are_cdf_differences() {
        let spec = MeasureSpec::Gaussian {
            d: 1,
            mean: vec![0.0],
            sigma: 1.0,
            declared_total: 1.0,
        };
        let grid = build_grid(&spec, &[64], (&[-6.0][..], &[6.0][..]), false).unwrap();
        let h = 12.0 / 64.0;
        let captured = 1.0 - 2.0 * normal_cdf(-6.0);
        for i in 0..64 {
            let a = -6.0 + i as f64 * h;
            let want = (normal_cdf(a + h) - normal_cdf(a)) / captured;
            assert!(
                (grid.masses()[i] - want).abs() < 1e-14,
                "cell {i}: {} vs {}",
                grid.masses()[i],
                want
            );
        }
    }

    #[test]
    fn gaussian_tail_requires_optin() {
        let spec = MeasureSpec::Gaussian {
            d: 1,
            mean: vec![0.0],
            sigma: 1.0,
            declared_total: 1.0,
        };
        let narrow = build_grid(&spec, &[8], (&[-1.0][..], &[1.0][..]), false);
        assert!(matches!(narrow, Err(Error::TailTooHeavy(_))));
        let ok = build_grid(&spec, &[8], (&[-1.0][..], &[1.0][..]), true).unwrap();
        assert!((ok.total() - 1.0).abs() <= 1e-12);
        assert!((kahan_sum(ok.masses().iter().copied()) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn moment_examples() {
        // Single cell of mass 1 centered at the origin.
        let single = GridDensity::from_parts(
            2,
            vec![1, 1],
            vec![-0.5, -0.5],
            1.0,
            vec![1.0],
            1.0,
            BTreeSet::new(),
        )
        .unwrap();
        assert_eq!(moment(&single, 2.0).unwrap(), 0.0);

        let u1 = MeasureSpec::UniformCube { d: 1, declared_total: 1.0 };
        let (lo, hi) = unit_bbox(1);
        let g1 = build_grid(&u1, &[2], (&lo, &hi), false).unwrap();
        assert!((moment(&g1, 1.0).unwrap() - 0.5).abs() < 1e-15);

        let u2 = MeasureSpec::UniformCube { d: 2, declared_total: 1.0 };
        let (lo, hi) = unit_bbox(2);
        let g2 = build_grid(&u2, &[256, 256], (&lo, &hi), false).unwrap();
        // ∫ (x²+y²) over the unit square = 2/3; midpoint rule is O(h²).
        assert!((moment(&g2, 2.0).unwrap() - 2.0 / 3.0).abs() < 1e-4);

        assert!(moment(&g2, 0.5).is_err());
    }

    #[test]
    fn density_functional_examples() {
        for d in 1..=3usize {
            let spec = MeasureSpec::UniformCube { d, declared_total: 1.0 };
            let (lo, hi) = unit_bbox(d);
            let res = vec![8usize; d];
            let grid = build_grid(&spec, &res, (&lo, &hi), false).unwrap();
            for &b in &[0.25, 0.5, 1.0] {
                assert!(
                    (density_functional(&grid, b, false).unwrap() - 1.0).abs() < 1e-12,
                    "d={d} b={b}"
                );
            }
        }
        // Uniform on [0,2]^2: density 1/4, ∫(1/4)^{1/2} over area 4 = 2.
        let spec = MeasureSpec::UniformSet {
            d: 2,
            shape: vec![1, 1],
            origin: vec![0.0, 0.0],
            spacing: 2.0,
            indicator: vec![1],
            declared_total: 1.0,
        };
        let grid = build_grid(&spec, &[8, 8], (&[0.0, 0.0][..], &[2.0, 2.0][..]), false).unwrap();
        assert!((density_functional(&grid, 0.5, false).unwrap() - 2.0).abs() < 1e-12);

        assert!(density_functional(&grid, 0.0, false).is_err());
        assert!(density_functional(&grid, 1.5, false).is_err());
    }

    #[test]
    fn gaussian_2d_functional_matches_quadrature_oracle() {
        // Frozen oracle: ∫ φ_1(x)^{1/2} dx over R² = 5.013256549262001.
        let spec = MeasureSpec::Gaussian {
            d: 2,
            mean: vec![0.0, 0.0],
            sigma: 1.0,
            declared_total: 1.0,
        };
        let grid = build_grid(
            &spec,
            &[256, 256],
            (&[-6.0, -6.0][..], &[6.0, 6.0][..]),
            false,
        )
        .unwrap();
        let got = density_functional(&grid, 0.5, false).unwrap();
        let want = 5.013256549262001;
        assert!(
            (got - want).abs() < 1e-3 * want,
            "functional {got} vs quadrature {want}"
        );
    }

    #[test]
    fn segment_singular_diagonal() {
        let spec = MeasureSpec::SegmentSingular {
            d: 2,
            a: vec![0.0, 0.0],
            b: vec![1.0, 1.0],
            declared_total: 1.0,
        };
        let (lo, hi) = unit_bbox(2);
        let grid = build_grid(&spec, &[4, 4], (&lo, &hi), false).unwrap();
        let expected: BTreeSet<usize> = [0usize, 5, 10, 15].into_iter().collect();
        assert_eq!(grid.singular_cells(), &expected);
        for &c in &expected {
            assert!((grid.masses()[c] - 0.25).abs() < 1e-12);
        }
        // Excluding the singular support drops the functional to zero mass.
        let full = density_functional(&grid, 0.5, false).unwrap();
        let excl = density_functional(&grid, 0.5, true).unwrap();
        assert!(full > 0.0 && excl == 0.0);
    }

    #[test]
    fn mixture_and_two_blocks_masses() {
        let spec = MeasureSpec::Mixture {
            parts: vec![
                MixturePart {
                    w: 0.25,
                    spec: MeasureSpec::UniformCube { d: 1, declared_total: 1.0 },
                },
                MixturePart {
                    w: 0.75,
                    spec: MeasureSpec::Gaussian {
                        d: 1,
                        mean: vec![0.5],
                        sigma: 0.1,
                        declared_total: 1.0,
                    },
                },
            ],
            declared_total: 1.0,
        };
        let grid = build_grid(&spec, &[64], (&[0.0][..], &[1.0][..]), true).unwrap();
        assert!((kahan_sum(grid.masses().iter().copied()) - 1.0).abs() <= 1e-12);

        let tb = MeasureSpec::TwoBlocks {
            d: 1,
            shift: vec![2.0],
            declared_total: 1.0,
        };
        let (lo, hi) = tb.default_bbox();
        assert_eq!((lo[0], hi[0]), (0.0, 3.0));
        let grid = build_grid(&tb, &[6], (&lo, &hi), false).unwrap();
        // Cells [0,0.5],[0.5,1] carry 1/4 each; middle cells empty; last two 1/4 each.
        let want = [0.25, 0.25, 0.0, 0.0, 0.25, 0.25];
        for (i, &m) in grid.masses().iter().enumerate() {
            assert!((m - want[i]).abs() < 1e-15, "cell {i}");
        }
    }

    #[test]
    fn two_blocks_requires_separation() {
        let bad = MeasureSpec::TwoBlocks {
            d: 2,
            shift: vec![1.0, 0.0],
            declared_total: 1.0,
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidSpec(_))));
        let good = MeasureSpec::TwoBlocks {
            d: 2,
            shift: vec![2.0, 0.0],
            declared_total: 1.0,
        };
        good.validate().unwrap();
    }

    #[test]
    fn mixture_weights_must_sum_to_one() {
        let bad = MeasureSpec::Mixture {
            parts: vec![MixturePart {
                w: 0.5,
                spec: MeasureSpec::UniformCube { d: 1, declared_total: 1.0 },
            }],
            declared_total: 1.0,
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = MeasureSpec::Gaussian {
            d: 2,
            mean: vec![0.0, 0.0],
            sigma: 1.0,
            declared_total: 1.0,
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"kind\":\"gaussian\""));
        let back: MeasureSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);

        let parsed: MeasureSpec =
            serde_json::from_str(r#"{"kind":"uniform_cube","d":3}"#).unwrap();
        assert_eq!(parsed.declared_total(), 1.0);
        assert_eq!(parsed.d(), 3);

        let mix: MeasureSpec = serde_json::from_str(
            r#"{"kind":"mixture","parts":[{"w":0.5,"kind":"uniform_cube","d":2},{"w":0.5,"kind":"two_blocks","d":2,"shift":[2,0]}]}"#,
        )
        .unwrap();
        mix.validate().unwrap();
    }

    #[test]
    fn dilation_scales_density_functional() {
        // Uniform on [0, λ]^d vs [0,1]^d: functional scales by λ^{d(1-b)}.
        for &(d, lambda) in &[(1usize, 2.0f64), (2, 3.0), (2, 0.5)] {
            let unit = MeasureSpec::UniformSet {
                d,
                shape: vec![1; d],
                origin: vec![0.0; d],
                spacing: 1.0,
                indicator: vec![1],
                declared_total: 1.0,
            };
            let scaled = MeasureSpec::UniformSet {
                d,
                shape: vec![1; d],
                origin: vec![0.0; d],
                spacing: lambda,
                indicator: vec![1],
                declared_total: 1.0,
            };
            let (ulo, uhi) = unit.default_bbox();
            let (slo, shi) = scaled.default_bbox();
            let res = vec![16usize; d];
            let gu = build_grid(&unit, &res, (&ulo, &uhi), false).unwrap();
            let gs = build_grid(&scaled, &res, (&slo, &shi), false).unwrap();
            for &b in &[0.3, 0.5, 0.9] {
                let fu = density_functional(&gu, b, false).unwrap();
                let fs = density_functional(&gs, b, false).unwrap();
                let want = lambda.powf(d as f64 * (1.0 - b)) * fu;
                assert!(
                    (fs - want).abs() <= 1e-9 * want.abs().max(1.0),
                    "d={d} λ={lambda} b={b}: {fs} vs {want}"
                );
            }
        }
    }

    #[test]
    fn refinement_keeps_uniform_set_functional_fixed() {
        let mut indicator = vec![0u8; 4];
        indicator[0] = 1;
        indicator[3] = 1;
        let spec = MeasureSpec::UniformSet {
            d: 2,
            shape: vec![2, 2],
            origin: vec![0.0, 0.0],
            spacing: 0.5,
            indicator,
            declared_total: 1.0,
        };
        let (lo, hi) = spec.default_bbox();
        let coarse = build_grid(&spec, &[8, 8], (&lo, &hi), false).unwrap();
        let fine = build_grid(&spec, &[16, 16], (&lo, &hi), false).unwrap();
        for &b in &[0.25, 0.5, 1.0] {
            let fc = density_functional(&coarse, b, false).unwrap();
            let ff = density_functional(&fine, b, false).unwrap();
            assert!((fc - ff).abs() <= 1e-12 * fc.abs().max(1.0), "b={b}");
        }
    }

    #[test]
    fn grid_for_spec_keeps_cells_cubic() {
        let tb = MeasureSpec::TwoBlocks {
            d: 2,
            shift: vec![2.0, 0.0],
            declared_total: 1.0,
        };
        let grid = grid_for_spec(&tb, 192, false).unwrap();
        assert_eq!(grid.shape(), &[192, 64]);
        assert!((grid.spacing() - 3.0 / 192.0).abs() < 1e-15);
        assert!((kahan_sum(grid.masses().iter().copied()) - 1.0).abs() <= 1e-12);
    }
}
