#!/usr/bin/env python3
"""Independent oracles for the derived constants used by the test suite.

Run before (and independently of) the Rust implementation; the output is
frozen into frozen.json and mirrored as constants in the tests. Each oracle
uses a method unrelated to the library code path it later validates:
polygon moments come from the Green's-theorem vertex formula plus Monte
Carlo, functionals from scipy adaptive quadrature, optimizer targets from
brute-force grid search.
"""

import json
import math
import random

import numpy as np
from scipy import integrate


def hexagon_vertices(area: float):
    """Flat-top regular hexagon centered at the origin with the given area."""
    r = math.sqrt(2.0 * area / (3.0 * math.sqrt(3.0)))
    return [(r * math.cos(k * math.pi / 3.0), r * math.sin(k * math.pi / 3.0)) for k in range(6)]


def polygon_second_moment(verts):
    """Exact ∫∫_P (x²+y²) dA via the Green's-theorem vertex formula."""
    total = 0.0
    m = len(verts)
    for k in range(m):
        x0, y0 = verts[k]
        x1, y1 = verts[(k + 1) % m]
        cross = x0 * y1 - x1 * y0
        total += cross * (x0 * x0 + x0 * x1 + x1 * x1 + y0 * y0 + y0 * y1 + y1 * y1)
    return total / 12.0


def hexagon_moment_mc(area: float, samples: int, seed: int):
    """Monte Carlo cross-check of the hexagon second moment."""
    rng = random.Random(seed)
    r = math.sqrt(2.0 * area / (3.0 * math.sqrt(3.0)))
    h = r * math.sqrt(3.0) / 2.0
    acc = 0.0
    kept = 0
    while kept < samples:
        x = rng.uniform(-r, r)
        y = rng.uniform(-h, h)
        # flat-top hexagon: |y| ≤ h and the two slanted pairs
        if abs(y) <= h and abs(y) <= math.sqrt(3.0) * (r - abs(x)):
            acc += x * x + y * y
            kept += 1
    box = area  # kept points are uniform on the hexagon of this area
    return acc / kept * box


def gaussian_power_integral_2d(power: float):
    """∫_{R²} φ(x)^power dx for the standard 2D normal density."""
    f = lambda y, x: ((1.0 / (2.0 * math.pi)) * math.exp(-(x * x + y * y) / 2.0)) ** power
    val, err = integrate.dblquad(f, -12, 12, lambda _: -12, lambda _: 12, epsabs=1e-12, epsrel=1e-12)
    return val, err


def gaussian_radial_moment_3d(theta: float):
    """E‖X‖^θ for the standard 3D normal via the radial density."""
    f = lambda r: r ** theta * (r * r) * math.exp(-r * r / 2.0)
    val, _ = integrate.quad(f, 0, 40, epsabs=1e-13, epsrel=1e-13)
    return val * 4.0 * math.pi / (2.0 * math.pi) ** 1.5


def staircase_chunk_oracle():
    """chunk_1d target: doubling-staircase density on [0,1], 8 cells, n=2, p=2.

    Returns the exact chunk boundary, the closed-form chunk means, and the
    200-point grid-search minimizers of the continuous within-chunk objective.
    """
    masses = [2.0 ** i for i in range(8)]
    total = sum(masses)
    masses = [m / total for m in masses]
    h = 1.0 / 8.0
    dens = [m / h for m in masses]

    # CDF inversion for F(x) = 1/2
    target = 0.5
    acc = 0.0
    boundary = None
    for i, m in enumerate(masses):
        if acc + m >= target:
            boundary = i * h + h * (target - acc) / m
            break
        acc += m
    chunks = [(0.0, boundary), (boundary, 1.0)]

    def mass_between(a, b):
        out = 0.0
        for i in range(8):
            lo, hi = max(a, i * h), min(b, (i + 1) * h)
            if hi > lo:
                out += dens[i] * (hi - lo)
        return out

    def mean_between(a, b):
        out = 0.0
        for i in range(8):
            lo, hi = max(a, i * h), min(b, (i + 1) * h)
            if hi > lo:
                out += dens[i] * (hi * hi - lo * lo) / 2.0
        return out / mass_between(a, b)

    def objective(a, b, c):
        out = 0.0
        for i in range(8):
            lo, hi = max(a, i * h), min(b, (i + 1) * h)
            if hi > lo:
                f = lambda x: dens[i] * (x - c) ** 2
                v, _ = integrate.quad(f, lo, hi, epsabs=1e-14)
                out += v
        return out

    means, searched = [], []
    for a, b in chunks:
        means.append(mean_between(a, b))
        grid = np.linspace(a, b, 200)
        vals = [objective(a, b, c) for c in grid]
        searched.append(float(grid[int(np.argmin(vals))]))
    return {
        "masses_unnormalized": [2 ** i for i in range(8)],
        "boundary": boundary,
        "chunk_means": means,
        "grid_search_points": searched,
        "grid_search_step": float((chunks[0][1] - chunks[0][0]) / 199.0),
    }


def fermat_point_oracle():
    """p=1 centroid target: geometric median of unit masses at (0,0),(1,0),(0,1)."""
    pts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    f = lambda c: sum(math.hypot(c[0] - px, c[1] - py) for px, py in pts)
    best, best_v = None, float("inf")
    for xi in np.linspace(0.0, 1.0, 100):
        for yi in np.linspace(0.0, 1.0, 100):
            v = f((xi, yi))
            if v < best_v:
                best, best_v = (float(xi), float(yi)), v
    # golden-section refine along the diagonal (symmetric problem)
    lo, hi = 0.0, 0.5
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = hi - invphi * (hi - lo), lo + invphi * (hi - lo)
    for _ in range(200):
        if f((a, a)) < f((b, b)):
            hi = b
        else:
            lo = a
        a, b = hi - invphi * (hi - lo), lo + invphi * (hi - lo)
    t = 0.5 * (lo + hi)
    return {"grid_search": best, "refined": [t, t], "objective": f((t, t))}


def u1_exact(p: int, n: int):
    """ẽ_{p,n}(U_1) = 1/((p+1)^{1/p}·2n)."""
    return 1.0 / ((p + 1.0) ** (1.0 / p) * 2.0 * n)


def main():
    out = {}

    # The plain integral over the unit-area regular hexagon is 5/(18√3).
    # (5/(36√3) is the dimension-normalized variant J/(d·A²), d=2 — a
    # different constant that must not be confused with this one.)
    verts = hexagon_vertices(1.0)
    green = polygon_second_moment(verts)
    closed = 5.0 / (18.0 * math.sqrt(3.0))
    mc = hexagon_moment_mc(1.0, 2_000_000, seed=20260818)
    assert abs(green - closed) < 1e-14, (green, closed)
    assert abs(mc - closed) < 5e-4, (mc, closed)
    out["hexagon_second_moment"] = green
    out["hexagon_constant"] = math.sqrt(green)
    out["hexagon_mc_estimate"] = mc
    out["hexagon_second_moment_dim_normalized"] = green / 2.0

    half, err_half = gaussian_power_integral_2d(0.5)
    two_thirds, err_tt = gaussian_power_integral_2d(2.0 / 3.0)
    closed_half = 2.0 * math.sqrt(2.0 * math.pi)
    closed_tt = 3.0 * math.pi / (2.0 * math.pi) ** (2.0 / 3.0)
    assert abs(half - closed_half) < 1e-8, (half, closed_half)
    assert abs(two_thirds - closed_tt) < 1e-8, (two_thirds, closed_tt)
    out["gauss2d_phi_pow_half"] = half
    out["gauss2d_phi_pow_two_thirds"] = two_thirds

    m8 = gaussian_radial_moment_3d(8.0)
    m1 = gaussian_radial_moment_3d(1.0)
    m2 = gaussian_radial_moment_3d(2.0)
    assert abs(m8 - 945.0) < 1e-8, m8
    assert abs(m2 - 3.0) < 1e-10, m2
    assert abs(m1 - 2.0 * math.sqrt(2.0 / math.pi)) < 1e-10, m1
    out["gauss3d_moment_theta8"] = m8
    out["gauss3d_moment_theta1"] = m1
    out["gauss3d_moment_theta2"] = m2

    out["u2_second_moment"] = 2.0 / 3.0  # ∫_{[0,1]²}(x²+y²) closed form
    out["staircase_chunk"] = staircase_chunk_oracle()
    out["fermat_point"] = fermat_point_oracle()
    out["u1_exact_samples"] = {
        f"p{p}_n{n}": u1_exact(p, n) for p in (1, 2, 3) for n in (1, 2, 7, 64)
    }
    out["distant_bound_n3_p1"] = 1.0 / 12.0
    out["distant_bound_n3_p2"] = 0.5 * math.sqrt(0.5 / 3.0)
    out["pierce_r2_example"] = (2.0 * 4.0 * 1.0 / 2.0) ** 0.25

    with open("frozen.json", "w") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
    for k, v in sorted(out.items()):
        print(f"{k}: {v}")


if __name__ == "__main__":
    main()
