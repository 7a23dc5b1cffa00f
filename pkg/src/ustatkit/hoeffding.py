"""Hoeffding projections, degeneracy certification, and reconstruction.

For a kernel h of arity m and positions I inside range(m), the projected
component is the alternating sum over subsets J of I

    h^I((x_u)_{u in I}) = sum_{J subset I} (-1)^{|I|-|J|} E[h(V)],

where V fixes the supplied value at each position in J and draws a fresh
i.i.d. coordinate everywhere else (positions of I \\ J included).  Summing
h^I over all I reconstructs h pointwise.  For symmetric kernels the level-c
projection

    h^(c)(x_1..x_c) = sum_{k=0}^{c} (-1)^{c-k} sum_{|S|=k} E[h(x_S, fresh)]

collapses the subset decomposition onto arities; levels below the kernel's
degeneracy order vanish.

Two evaluation paths back every conditional expectation: exact enumeration
of the law's support when it is finite, and a fixed inner Monte Carlo draw
table otherwise.  All subterm estimates for a given seed share that table,
keyed only by the fixed-position set, so the alternating sums telescope the
same way the exact quantities do.

Degeneracy verdicts use a split-sample statistic: the inner draws are
halved, and the mean product of the two half-averages estimates the squared
norm of the conditional mean without the positive bias a plain norm of an
average carries.  A conditional mean is declared zero when that statistic
sits within 3 standard errors of zero and the implied norm is below
1e-3 * scale plus the estimator's own resolution floor, nonzero beyond 5
standard errors, and inconclusive in between.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb, sqrt

import numpy as np

from .kernels import Distribution, Kernel, evaluate_batch, stream
from .spaces import BanachSpaceDescriptor

__all__ = [
    "DegeneracyEntry",
    "DegeneracyReport",
    "HoeffdingComponent",
    "ReconstructionCheck",
    "check_degeneracy",
    "project_component",
    "project_degenerate_level",
    "reconstruct_identity_check",
]

_EXACT_ZERO_RTOL = 1e-10
_RELATIVE_ZERO_FLOOR = 1e-3
_EVAL_SLAB = 1 << 24


def _support_combos(atoms: np.ndarray, probs: np.ndarray, k: int):
    """Columns of support^k and the product weights, shapes (K, k) and (K,)."""
    if k == 0:
        return np.zeros((1, 0)), np.ones(1)
    grids = np.meshgrid(*([atoms] * k), indexing="ij")
    cols = np.stack([g.ravel() for g in grids], axis=1)
    wgrids = np.meshgrid(*([probs] * k), indexing="ij")
    w = np.ones(cols.shape[0])
    for g in wgrids:
        w = w * g.ravel()
    return cols, w


class _ConditionalEstimator:
    """E[h(V)] with chosen positions fixed, shared across all subterms.

    The free coordinates come either from exact support enumeration or from
    one fixed Monte Carlo table, so the estimate depends only on the fixed
    position set and the fixed values.  raw=True returns the per-draw values
    before averaging (Monte Carlo path only), for standard errors.
    """

    def __init__(self, h: Kernel, dist: Distribution, inner: int, seed: int,
                 index: tuple[int, ...] | None):
        self.h = h
        self.m = h.arity
        self.vector = h.codomain.dimension > 1
        self.index = index
        support = dist.support()
        self.exact = support is not None
        if self.exact:
            atoms, probs = support
            self.atoms = np.asarray(atoms, dtype=np.float64)
            self.probs = np.asarray(probs, dtype=np.float64)
            self.table = None
        else:
            if inner < 2:
                raise ValueError("inner Monte Carlo size must be at least 2")
            rng = stream(seed, "hoeffding-table")
            self.table = dist.sample(rng, inner * self.m).reshape(inner, self.m)
        self.inner = inner

    def _index_columns(self):
        if not self.h.weighted:
            return None
        if self.index is None:
            raise ValueError("index-weighted kernel requires a fixed index tuple")
        return [np.float64(i) for i in self.index]

    def __call__(self, fixed_positions: tuple[int, ...], fixed_values, raw: bool = False):
        cols: list = [None] * self.m
        for pos, val in zip(fixed_positions, fixed_values):
            cols[pos] = np.asarray(val, dtype=np.float64)[..., None]
        free = [j for j in range(self.m) if j not in fixed_positions]
        if self.exact:
            combos, weights = _support_combos(self.atoms, self.probs, len(free))
            for a, j in enumerate(free):
                cols[j] = combos[:, a]
            out = evaluate_batch(self.h, cols, self._index_columns())
            if raw:
                return out, weights
            if self.vector:
                return np.einsum("...kd,k->...d", out, weights)
            return out @ weights
        for j in free:
            cols[j] = self.table[:, j]
        out = evaluate_batch(self.h, cols, self._index_columns())
        if raw:
            return out, np.full(self.inner, 1.0 / self.inner)
        if self.vector:
            return out.mean(axis=-2)
        return out.mean(axis=-1)


@dataclass
class HoeffdingComponent:
    """One projected component: a subset h^I or a symmetric level h^(c)."""

    subset: tuple[int, ...] | None
    level: int | None
    arity: int
    codomain: BanachSpaceDescriptor
    inner: int
    exact: bool
    _subterms: list = field(repr=False)  # (sign, slots, fixed_positions)
    _estimator: _ConditionalEstimator = field(repr=False)

    def evaluate_batch(self, columns) -> np.ndarray:
        """Evaluate on broadcastable value columns, one per component slot."""
        if len(columns) != self.arity:
            raise ValueError(f"component has arity {self.arity}, got {len(columns)}")
        xs = [np.asarray(c, dtype=np.float64) for c in columns]
        shape = np.broadcast_shapes(*(x.shape for x in xs)) if xs else ()
        points = int(np.prod(shape, dtype=np.int64)) if shape else 1
        if not self.exact and points * self.inner > _EVAL_SLAB:
            # every evaluation point fans out over the Monte Carlo table, so
            # big broadcast grids are walked in flat slabs to bound memory
            flat = [np.broadcast_to(x, shape).reshape(-1) for x in xs]
            step = max(1, _EVAL_SLAB // self.inner)
            pieces = [
                self.evaluate_batch([c[s : s + step] for c in flat])
                for s in range(0, points, step)
            ]
            out = np.concatenate(pieces, axis=0)
            if self.codomain.dimension > 1:
                return out.reshape(shape + (self.codomain.dimension,))
            return out.reshape(shape)
        total = None
        for sign, slots, fixed_positions in self._subterms:
            est = self._estimator(fixed_positions, [xs[s] for s in slots])
            term = sign * est
            total = term if total is None else total + term
        return np.asarray(total, dtype=np.float64)

    def evaluate(self, values):
        out = self.evaluate_batch([np.float64(v) for v in values])
        if self.codomain.dimension == 1:
            return float(out)
        return np.asarray(out, dtype=np.float64).reshape(self.codomain.dimension)

    def standard_error_batch(self, columns) -> np.ndarray:
        """Per-point standard error of the alternating sum; zeros when exact."""
        xs = [np.asarray(c, dtype=np.float64) for c in columns]
        shape = np.broadcast_shapes(*(x.shape for x in xs)) if xs else ()
        if self.exact:
            return np.zeros(shape)
        per_draw = None
        for sign, slots, fixed_positions in self._subterms:
            raw, _ = self._estimator(fixed_positions, [xs[s] for s in slots], raw=True)
            raw = np.broadcast_to(
                raw,
                shape + raw.shape[len(raw.shape) - (2 if self.codomain.dimension > 1 else 1):],
            )
            term = sign * raw
            per_draw = term if per_draw is None else per_draw + term
        axis = -2 if self.codomain.dimension > 1 else -1
        sd = per_draw.std(axis=axis, ddof=1)
        if self.codomain.dimension > 1:
            sd = np.sqrt(np.sum(sd**2, axis=-1))
        return sd / sqrt(self.inner)

    def as_kernel(self) -> Kernel | None:
        """Wrap as a Kernel; None for the arity-0 (constant) component."""
        if self.arity == 0:
            return None
        comp = self

        def body(xs, idx):
            return comp.evaluate_batch(list(xs))

        label = f"level-{self.level}" if self.level is not None else f"subset-{self.subset}"
        return Kernel(arity=self.arity, body=body, symmetric=self.level is not None,
                      codomain=self.codomain, name=f"hoeffding-{label}")

    @property
    def constant(self):
        """Value of the arity-0 component."""
        if self.arity != 0:
            raise ValueError("component has positive arity")
        return self.evaluate(())


def project_component(
    h: Kernel,
    subset: tuple[int, ...],
    dist: Distribution,
    inner: int = 1024,
    seed: int = 0,
    index: tuple[int, ...] | None = None,
) -> HoeffdingComponent:
    """Project h onto the coordinate positions in `subset` (0-based)."""
    subset = tuple(sorted(int(j) for j in subset))
    if len(set(subset)) != len(subset):
        raise ValueError("subset positions must be distinct")
    if subset and (subset[0] < 0 or subset[-1] >= h.arity):
        raise ValueError(f"subset positions must lie in [0, {h.arity})")
    estimator = _ConditionalEstimator(h, dist, inner, seed, index)
    k = len(subset)
    subterms = []
    for j_size in range(k + 1):
        sign = (-1.0) ** (k - j_size)
        for slots in itertools.combinations(range(k), j_size):
            fixed_positions = tuple(subset[s] for s in slots)
            subterms.append((sign, slots, fixed_positions))
    return HoeffdingComponent(
        subset=subset, level=None, arity=k, codomain=h.codomain,
        inner=inner, exact=estimator.exact,
        _subterms=subterms, _estimator=estimator,
    )


def project_degenerate_level(
    h: Kernel,
    level: int,
    dist: Distribution,
    inner: int = 1024,
    seed: int = 0,
) -> HoeffdingComponent:
    """Level-c projection of a symmetric kernel; fixed values go to the
    leading positions, which symmetry makes immaterial."""
    if not h.symmetric:
        raise ValueError("level projection requires a symmetric kernel")
    if h.weighted:
        raise ValueError("level projection requires an index-independent kernel")
    if not 0 <= level <= h.arity:
        raise ValueError(f"level must lie in [0, {h.arity}]")
    estimator = _ConditionalEstimator(h, dist, inner, seed, None)
    subterms = []
    for k in range(level + 1):
        sign = (-1.0) ** (level - k)
        for slots in itertools.combinations(range(level), k):
            fixed_positions = tuple(range(k))
            subterms.append((sign, slots, fixed_positions))
    return HoeffdingComponent(
        subset=None, level=level, arity=level, codomain=h.codomain,
        inner=inner, exact=estimator.exact,
        _subterms=subterms, _estimator=estimator,
    )


# ---------------------------------------------------------------------------
# degeneracy certification


@dataclass(frozen=True)
class DegeneracyEntry:
    """Verdict for one conditional mean."""

    label: str
    norm_estimate: float
    squared_statistic: float
    squared_se: float
    verdict: str

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "norm_estimate": self.norm_estimate,
            "squared_statistic": self.squared_statistic,
            "squared_se": self.squared_se,
            "verdict": self.verdict,
        }


@dataclass(frozen=True)
class DegeneracyReport:
    arity: int
    exact: bool
    scale: float
    coordinate_entries: tuple[DegeneracyEntry, ...]
    level_entries: tuple[DegeneracyEntry, ...]

    @property
    def degenerate(self) -> bool | None:
        """All-but-one conditional means vanish for every coordinate."""
        verdicts = [e.verdict for e in self.coordinate_entries]
        if any(v == "nonzero" for v in verdicts):
            return False
        if all(v == "zero" for v in verdicts):
            return True
        return None

    @property
    def order(self) -> int | None:
        """Smallest j with a nonvanishing prefix conditional mean.

        Order 0 flags a non-centered kernel; valid degeneracy orders start
        at 1.  None means an inconclusive entry blocks the call.
        """
        for j, entry in enumerate(self.level_entries):
            if entry.verdict == "nonzero":
                return j
            if entry.verdict == "inconclusive":
                return None
        return None

    def to_dict(self) -> dict:
        return {
            "arity": self.arity,
            "exact": self.exact,
            "scale": self.scale,
            "degenerate": self.degenerate,
            "order": self.order,
            "coordinate_entries": [e.to_dict() for e in self.coordinate_entries],
            "level_entries": [e.to_dict() for e in self.level_entries],
        }


def _verdict_exact(norm_value: float, scale: float) -> str:
    return "zero" if norm_value <= _EXACT_ZERO_RTOL * scale else "nonzero"


def _verdict_mc(w: float, se: float, scale: float) -> str:
    norm_est = sqrt(max(w, 0.0))
    floor = sqrt(3.0 * se) if se > 0 else 0.0
    if w <= 3.0 * se and norm_est <= _RELATIVE_ZERO_FLOOR * scale + floor:
        return "zero"
    if w >= 5.0 * se and w > 0:
        return "nonzero"
    return "inconclusive"


def _exact_conditional_norms(
    h: Kernel, atoms, probs, conditioned: list[int], space: BanachSpaceDescriptor
) -> float:
    """E[ || E[h | positions in `conditioned`] || ] by full enumeration."""
    m = h.arity
    free = [j for j in range(m) if j not in conditioned]
    outer_cols, outer_w = _support_combos(atoms, probs, len(conditioned))
    inner_cols, inner_w = _support_combos(atoms, probs, len(free))
    cols: list = [None] * m
    for a, j in enumerate(conditioned):
        cols[j] = outer_cols[:, a][:, None]
    for a, j in enumerate(free):
        cols[j] = inner_cols[:, a][None, :]
    out = evaluate_batch(h, cols)
    if h.codomain.dimension > 1:
        cond_mean = np.einsum("okd,k->od", out, inner_w)
    else:
        cond_mean = out @ inner_w
    return float(np.dot(space.norms(cond_mean), outer_w))


def _mc_split_statistic(
    h: Kernel,
    dist: Distribution,
    conditioned: list[int],
    outer: int,
    inner: int,
    seed: int,
    tag: int,
) -> tuple[float, float]:
    """Split-sample estimate of E||E[h | conditioned]||_2^2 with its SE."""
    m = h.arity
    free = [j for j in range(m) if j not in conditioned]
    rng_outer = stream(seed, "degeneracy", tag, 0)
    rng_inner = stream(seed, "degeneracy", tag, 1)
    cols: list = [None] * m
    if conditioned:
        draws = dist.sample(rng_outer, outer * len(conditioned))
        draws = draws.reshape(outer, len(conditioned))
        for a, j in enumerate(conditioned):
            cols[j] = draws[:, a][:, None]
    if free:
        fresh = dist.sample(rng_inner, outer * inner * len(free))
        fresh = fresh.reshape(len(free), outer, inner)
        for a, j in enumerate(free):
            cols[j] = fresh[a]
    else:
        for j in conditioned:
            cols[j] = cols[j] * np.ones((1, 2))  # two identical "draws"
    out = evaluate_batch(h, cols)
    half = out.shape[1] // 2 if free else 1
    if h.codomain.dimension > 1:
        a_mean = out[:, :half].mean(axis=1)
        b_mean = out[:, half:].mean(axis=1)
        prods = np.sum(a_mean * b_mean, axis=-1)
    else:
        a_mean = out[:, :half].mean(axis=1)
        b_mean = out[:, half:].mean(axis=1)
        prods = a_mean * b_mean
    w = float(prods.mean())
    se = float(prods.std(ddof=1) / sqrt(prods.size)) if prods.size > 1 else 0.0
    return w, se


def check_degeneracy(
    h: Kernel,
    dist: Distribution,
    inner: int = 1024,
    outer: int = 256,
    seed: int = 0,
    space: BanachSpaceDescriptor | None = None,
) -> DegeneracyReport:
    """Certify which conditional means of h vanish under `dist`.

    Produces one entry per coordinate (conditioning on every other
    position, the all-but-one test) and one per prefix level j = 0..m
    (conditioning on the first j positions, which locates the degeneracy
    order of a symmetric kernel).
    """
    if h.weighted:
        raise ValueError("degeneracy certification requires an index-independent kernel")
    m = h.arity
    space = space if space is not None else h.codomain
    support = dist.support()
    exact = support is not None

    if exact:
        atoms, probs = support
        full_cols, full_w = _support_combos(np.asarray(atoms), np.asarray(probs), m)
        vals = evaluate_batch(h, [full_cols[:, k] for k in range(m)])
        scale = float(np.dot(space.norms(vals), full_w))
    else:
        draws = dist.sample(stream(seed, "degeneracy-scale"), 4096 * m).reshape(4096, m)
        scale = float(space.norms(evaluate_batch(h, [draws[:, k] for k in range(m)])).mean())

    def entry_for(conditioned: list[int], label: str, tag: int) -> DegeneracyEntry:
        if exact:
            t = _exact_conditional_norms(h, np.asarray(atoms), np.asarray(probs),
                                         conditioned, space)
            return DegeneracyEntry(
                label=label, norm_estimate=t, squared_statistic=t * t,
                squared_se=0.0, verdict=_verdict_exact(t, scale),
            )
        w, se = _mc_split_statistic(h, dist, conditioned, outer, inner, seed, tag)
        return DegeneracyEntry(
            label=label, norm_estimate=sqrt(max(w, 0.0)), squared_statistic=w,
            squared_se=se, verdict=_verdict_mc(w, se, scale),
        )

    coordinate_entries = tuple(
        entry_for([j for j in range(m) if j != l0], f"all-but-{l0}", l0)
        for l0 in range(m)
    )
    level_entries = tuple(
        entry_for(list(range(j)), f"prefix-{j}", m + j) for j in range(m + 1)
    )
    return DegeneracyReport(
        arity=m, exact=exact, scale=scale,
        coordinate_entries=coordinate_entries, level_entries=level_entries,
    )


# ---------------------------------------------------------------------------
# reconstruction


@dataclass(frozen=True)
class ReconstructionCheck:
    max_deviation: float
    tolerance: float
    exact: bool

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance


def reconstruct_identity_check(
    h: Kernel,
    dist: Distribution,
    samples: int = 32,
    inner: int = 1024,
    seed: int = 0,
    index: tuple[int, ...] | None = None,
) -> ReconstructionCheck:
    """Max over test points of || sum_I h^I(x_I) - h(x) ||.

    All components share one seed, hence one inner draw table, so the
    Monte Carlo path telescopes like the exact one; the tolerance is
    1e-10 * scale on the exact path and 5 aggregate standard errors
    otherwise.
    """
    m = h.arity
    space = h.codomain
    points = dist.sample(stream(seed, "reconstruct"), samples * m).reshape(samples, m)
    h_vals = evaluate_batch(
        h, [points[:, k] for k in range(m)],
        [np.float64(i) for i in index] if h.weighted else None,
    )
    total = np.zeros_like(np.asarray(h_vals, dtype=np.float64))
    agg_var = np.zeros(samples)
    exact = True
    for k in range(m + 1):
        for subset in itertools.combinations(range(m), k):
            component = project_component(h, subset, dist, inner=inner, seed=seed,
                                          index=index)
            exact = exact and component.exact
            cols = [points[:, j] for j in subset]
            vals = component.evaluate_batch(cols) if k else component.constant
            total = total + vals
            if not component.exact and k:
                agg_var = agg_var + component.standard_error_batch(cols) ** 2
    deviations = space.norms(np.asarray(total) - np.asarray(h_vals, dtype=np.float64))
    max_dev = float(deviations.max()) if samples else 0.0
    if exact:
        scale = max(float(space.norms(np.asarray(h_vals, dtype=np.float64)).max()), 1.0)
        tol = 1e-10 * scale
    else:
        tol = 5.0 * float(np.sqrt(agg_var).max()) if samples else 0.0
    return ReconstructionCheck(max_deviation=max_dev, tolerance=tol, exact=exact)
