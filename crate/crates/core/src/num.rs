//! Small numeric helpers shared across modules: compensated summation,
//! power/distance kernels with integer fast paths, the standard normal CDF,
//! and a golden-section minimizer.

/// Neumaier-compensated sum. Grid-wide mass sums must hold a 1e-12 absolute
/// invariant over ~1e6 terms, which naive summation does not guarantee.
pub(crate) fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Streaming Neumaier accumulator for loops that cannot express their terms
/// as a single iterator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanAcc {
    sum: f64,
    comp: f64,
}

impl KahanAcc {
    pub(crate) fn new() -> KahanAcc {
        KahanAcc::default()
    }

    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// |t|^q for q ≥ 0, with fast paths for small integer q.
pub(crate) fn abs_pow(t: f64, q: f64) -> f64 {
    let a = t.abs();
    if q == 1.0 {
        a
    } else if q == 2.0 {
        a * a
    } else if q == 3.0 {
        a * a * a
    } else if q == q.floor() && q >= 0.0 && q <= 32.0 {
        a.powi(q as i32)
    } else {
        a.powf(q)
    }
}

/// ss^{p/2} for a squared distance ss ≥ 0: computes ‖·‖^p from ‖·‖² without
/// a square root when p is even.
pub(crate) fn pow_half_p(ss: f64, p: f64) -> f64 {
    if p == 2.0 {
        ss
    } else if p == 1.0 {
        ss.sqrt()
    } else if p == p.floor() && p > 0.0 && p <= 32.0 {
        let k = p as i32;
        if k % 2 == 0 {
            ss.powi(k / 2)
        } else {
            ss.sqrt().powi(k)
        }
    } else {
        ss.powf(0.5 * p)
    }
}

/// Squared Euclidean distance.
#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut ss = 0.0;
    for k in 0..a.len() {
        let t = a[k] - b[k];
        ss += t * t;
    }
    ss
}

/// ‖a−b‖^p.
#[inline]
pub(crate) fn dist_pow_p(a: &[f64], b: &[f64], p: f64) -> f64 {
    pow_half_p(sq_dist(a, b), p)
}

/// ‖x‖^θ.
pub(crate) fn norm_pow(x: &[f64], theta: f64) -> f64 {
    let mut ss = 0.0;
    for &v in x {
        ss += v * v;
    }
    pow_half_p(ss, theta)
}

/// c^{1/p} for c ≥ 0 with exact fast paths for p ∈ {1,2,3}.
pub(crate) fn root_p(c: f64, p: f64) -> f64 {
    if p == 1.0 {
        c
    } else if p == 2.0 {
        c.sqrt()
    } else if p == 3.0 {
        c.cbrt()
    } else {
        c.powf(1.0 / p)
    }
}

/// Standard normal CDF via erf.
pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

/// Golden-section search for the minimizer of a unimodal function on [lo, hi].
/// Shrinks the bracket below `tol` and returns its midpoint.
pub(crate) fn golden_min<F: FnMut(f64) -> f64>(mut lo: f64, mut hi: f64, tol: f64, mut f: F) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9; // (sqrt(5)-1)/2
    if hi <= lo {
        return 0.5 * (lo + hi);
    }
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}
