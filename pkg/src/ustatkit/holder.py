"""Holder norms of piecewise-linear paths and a dyadic increment statistic.

The norm ||x||_a = |x(0)| + sup_{s<t} |x(s) - x(t)| / (t - s)^a is computed
exactly for interpolated paths by scanning breakpoint pairs.  For a fixed s
the ratio along one segment of t-values is D(u) u^(-a) with D piecewise
linear in u = t - s, and such a function attains its maximum at an endpoint
of each linear piece (interior critical points are minima when the slope
and difference share a sign, and the ratio is monotone otherwise).  The
same argument applies in s for fixed t, so the supremum sits on a pair of
breakpoints.  A guarded interior refinement for opposite-slope segment
pairs is kept anyway; it evaluates true ratios only, so it can sharpen but
never overshoot, and a cheap upper bound prunes it to near zero work.

The dyadic statistic counts, per cell (j, k), how often the raw partial
sum increment |S_floor(n(k+1)/2^j) - S_floor(nk/2^j)| exceeds
n^(d/2) 2^(-a j) eps, and reports the tail sums over j >= J whose decay is
the tightness diagnostic for interpolated U-statistic processes.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import floor, log2

import numpy as np

__all__ = [
    "DyadicExceedanceTable",
    "HolderParams",
    "calibrate_epsilon",
    "dyadic_increment_exceedance",
    "holder_norm",
    "holder_norm_grid",
]

# The pair scan is quadratic in the breakpoint count.
MAX_SCAN_BREAKPOINTS = 8192


@dataclass(frozen=True)
class HolderParams:
    """Exponent bundle for the functional-limit regime."""

    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 0.5:
            raise ValueError(f"alpha={self.alpha} outside (0, 1/2)")

    @property
    def p_of_alpha(self) -> float:
        """Critical tail exponent 1 / (1/2 - alpha), always > 2."""
        return 1.0 / (0.5 - self.alpha)


def _path_arrays(path) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(path, "breakpoints") and hasattr(path, "values"):
        t = np.asarray(path.breakpoints, dtype=np.float64)
        y = np.asarray(path.values, dtype=np.float64)
    else:
        y = np.asarray(path, dtype=np.float64)
        if y.ndim != 1 or y.size < 1:
            raise ValueError("path must be 1-d with at least one value")
        t = np.linspace(0.0, 1.0, y.size) if y.size > 1 else np.zeros(1)
    if t.shape != y.shape:
        raise ValueError("breakpoints and values must align")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("breakpoints must be strictly increasing")
    return t, y


def _refine_pair(t, y, slopes, i, j, alpha, best) -> float:
    """Search s in segment i, t in segment j > i for a larger ratio.

    For fixed s the inner maximum over segment j is either an endpoint or
    the critical point of (x(t) - x(s)) (t - s)^(-alpha), which solves
    v_j (t - s) = alpha (x(t) - x(s)) in closed form.  The outer variable
    is then squeezed by ternary search.
    """
    lo, hi = float(t[i]), float(t[i + 1])
    tj0, tj1 = float(t[j]), float(t[j + 1])
    vi, vj = float(slopes[i]), float(slopes[j])
    yi, yj = float(y[i]), float(y[j])
    tiny = 1e-300

    def ratio(s: float, tt: float) -> float:
        span = tt - s
        if span <= tiny:
            return 0.0
        xs = yi + vi * (s - float(t[i]))
        xt = yj + vj * (tt - tj0)
        return abs(xt - xs) / span**alpha

    def inner(s: float) -> float:
        cands = [tj0, tj1]
        if vj != 0.0 and alpha != 1.0:
            xs = yi + vi * (s - float(t[i]))
            crit = (alpha * (yj - xs - vj * tj0) + vj * s) / (vj * (1.0 - alpha))
            if tj0 < crit < tj1:
                cands.append(crit)
        return max(ratio(s, tt) for tt in cands)

    for _ in range(200):
        third = (hi - lo) / 3.0
        if third <= 0.0:
            break
        m1, m2 = lo + third, hi - third
        if inner(m1) < inner(m2):
            lo = m1
        else:
            hi = m2
    probe = max(inner(float(t[i])), inner(float(t[i + 1])), inner(0.5 * (lo + hi)))
    return max(best, probe)


def holder_norm(path, alpha: float) -> float:
    """|x(0)| plus the exact increment supremum of a piecewise-linear path."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha={alpha} outside (0, 1)")
    t, y = _path_arrays(path)
    npts = y.size
    if npts == 1:
        return abs(float(y[0]))
    if npts > MAX_SCAN_BREAKPOINTS + 1:
        raise ValueError(
            f"{npts} breakpoints exceed the pair-scan cap "
            f"{MAX_SCAN_BREAKPOINTS}; use the dyadic statistic instead"
        )

    best = 0.0
    for lag in range(1, npts):
        diffs = np.abs(y[lag:] - y[:-lag])
        gaps = t[lag:] - t[:-lag]
        best = max(best, float(np.max(diffs / gaps**alpha)))

    # Safety net: revisit opposite-slope segment pairs whose interior could
    # in principle beat the corners.  The bound below uses the largest
    # corner difference over the smallest gap, so surviving pairs are rare.
    nseg = npts - 1
    seg_span = np.diff(t)
    slopes = np.diff(y) / seg_span
    for lag in range(1, nseg):
        a = np.arange(nseg - lag)
        b = a + lag
        opposite = slopes[a] * slopes[b] < 0.0
        if not np.any(opposite):
            continue
        corner = np.maximum.reduce(
            [
                np.abs(y[b] - y[a]),
                np.abs(y[b] - y[a + 1]),
                np.abs(y[b + 1] - y[a]),
                np.abs(y[b + 1] - y[a + 1]),
            ]
        )
        if lag == 1:
            lip = np.maximum(np.abs(slopes[a]), np.abs(slopes[b]))
            bound = lip * (t[b + 1] - t[a]) ** (1.0 - alpha)
        else:
            bound = corner / (t[b] - t[a + 1]) ** alpha
        for i in np.nonzero(opposite & (bound > best))[0]:
            best = _refine_pair(t, y, slopes, int(a[i]), int(b[i]), alpha, best)

    return abs(float(y[0])) + best


def holder_norm_grid(path, alpha: float, points: int = 20000) -> float:
    """Brute-force lower bound over a uniform evaluation grid.

    Oracle companion to holder_norm: it knows nothing about segments and
    simply maximizes over all grid pairs, so it can only undershoot the
    true supremum by the grid resolution.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha={alpha} outside (0, 1)")
    if points < 2:
        raise ValueError("need at least two grid points")
    t, y = _path_arrays(path)
    if y.size == 1:
        return abs(float(y[0]))
    grid = np.linspace(t[0], t[-1], points)
    vals = np.interp(grid, t, y)
    dt = grid[1] - grid[0]
    best = 0.0
    for lag in range(1, points):
        diffs = vals[lag:] - vals[:-lag]
        np.abs(diffs, out=diffs)
        best = max(best, float(diffs.max()) / (lag * dt) ** alpha)
    return abs(float(vals[0])) + best


# ---------------------------------------------------------------------------
# dyadic increment exceedance


def _raw_paths_matrix(paths) -> np.ndarray:
    rows = []
    for path in paths:
        raw = path.raw if hasattr(path, "raw") else path
        rows.append(np.asarray(raw, dtype=np.float64))
    if not rows:
        raise ValueError("need at least one path")
    width = rows[0].size
    if any(r.size != width for r in rows):
        raise ValueError("all paths must share the same breakpoint count")
    if width < 2:
        raise ValueError("paths must have at least one increment")
    return np.stack(rows, axis=0)


@dataclass(frozen=True)
class DyadicExceedanceTable:
    """Per-cell exceedance frequencies and their dyadic layer aggregates.

    rows:       one dict per cell (j, k) with the sampled increment window
                [low, high] and the exceedance frequency across paths.
    layer_sums: (j, sum of frequencies over k) for each level.
    tail_sums:  (J, sum of layer sums for j >= J); the diagnostic curve.
    """

    n: int
    d: int
    alpha: float
    eps: float
    path_count: int
    rows: list
    layer_sums: list
    tail_sums: list

    def tail_sum(self, J: int) -> float:
        for level, value in self.tail_sums:
            if level == J:
                return value
        raise KeyError(f"no tail sum recorded for J={J}")


def _cell_bounds(n: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(2**j, dtype=np.int64)
    low = (n * k) >> j
    high = (n * (k + 1)) >> j
    return low, high


def dyadic_increment_exceedance(
    paths, alpha: float, eps: float, d: int, j_max: int
) -> DyadicExceedanceTable:
    """Tabulate dyadic increment exceedances of raw partial sum paths.

    For each level j in [0, j_max] and cell k in [0, 2^j) the statistic is
    the fraction of paths with |S_high - S_low| > n^(d/2) 2^(-alpha j) eps,
    where low and high are the floored dyadic positions.  Raw breakpoint
    values are used; any path normalization is ignored on purpose, since
    the threshold carries the n^(d/2) scaling itself.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha={alpha} outside (0, 1)")
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if d < 1:
        raise ValueError("degeneracy order d must be >= 1")
    S = _raw_paths_matrix(paths)
    n = S.shape[1] - 1
    levels = floor(log2(n))
    if j_max > levels:
        raise ValueError(f"j_max={j_max} exceeds floor(log2({n})) = {levels}")
    if j_max < 0:
        raise ValueError("j_max must be nonnegative")

    rows = []
    layer_sums = []
    scale = float(n) ** (d / 2.0)
    for j in range(j_max + 1):
        low, high = _cell_bounds(n, j)
        inc = np.abs(S[:, high] - S[:, low])
        threshold = scale * 2.0 ** (-alpha * j) * eps
        freq = (inc > threshold).mean(axis=0)
        for k in range(2**j):
            rows.append(
                {
                    "j": j,
                    "k": k,
                    "frequency": float(freq[k]),
                    "low": int(low[k]),
                    "high": int(high[k]),
                }
            )
        layer_sums.append((j, float(freq.sum())))

    tails = []
    running = 0.0
    for j, s in reversed(layer_sums):
        running += s
        tails.append((j, running))
    tails.reverse()

    return DyadicExceedanceTable(
        n=n,
        d=d,
        alpha=alpha,
        eps=eps,
        path_count=S.shape[0],
        rows=rows,
        layer_sums=layer_sums,
        tail_sums=tails,
    )


def calibrate_epsilon(paths, alpha: float, d: int, j_max: int, level: float = 0.9):
    """Pooled quantile of normalized dyadic increments, used to pick eps.

    Collects |S_high - S_low| / (n^(d/2) 2^(-alpha j)) over every cell of
    every level up to j_max and across all paths, then returns the
    requested quantile.  Calibrating eps this way guarantees a nontrivial
    fraction of exceedances without hand-tuning per kernel.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must be inside (0, 1)")
    S = _raw_paths_matrix(paths)
    n = S.shape[1] - 1
    levels = floor(log2(n))
    if j_max > levels:
        raise ValueError(f"j_max={j_max} exceeds floor(log2({n})) = {levels}")
    scale = float(n) ** (d / 2.0)
    pool = []
    for j in range(j_max + 1):
        low, high = _cell_bounds(n, j)
        inc = np.abs(S[:, high] - S[:, low]) / (scale * 2.0 ** (-alpha * j))
        pool.append(inc.ravel())
    pooled = np.concatenate(pool)
    return float(np.quantile(pooled, level))
