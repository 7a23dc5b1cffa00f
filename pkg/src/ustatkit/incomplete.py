"""Subsampled U-statistics over randomly selected index tuples.

Three selection designs are supported: a uniform random subset of the
increasing tuples (fixed number of draws without replacement), i.i.d.
uniform draws with replacement (multiplicities become integer weights),
and Bernoulli selection where every tuple is kept independently with
probability p_n.  Bernoulli designs are materialized sparsely: the number
of kept tuples is drawn from the exact Binomial law, then that many
distinct colex ranks are sampled uniformly.  The joint distribution is
identical to flipping one coin per tuple, at a cost proportional to the
selected set instead of C(n, m).

The module also carries the Bernoulli-sum moment check used to validate
the moment bound for subsampled sums: for Y = sum_{a in A} (sum_{b in B}
Y_{a,b})^p with i.i.d. Bernoulli(y) entries and q >= p,

    E[Y^(q/p)] <= C (|A|^(q/p) |B|^q y^q
                     + |A|^(q/p) |B|^(q/p) y^(q/p)
                     + |A| |B| y),

and the end-to-end moment growth experiment for subsampled statistics of
degenerate kernels, whose bound shape in (n, p_n) is

    n^(q(m-d) + dq/p) p_n^q + n^(mq/p) p_n^(q/p) + n^m p_n.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Iterator

import numpy as np

from .combinatorics import count_tuples, unrank_many, unrank_tuple
from .kernels import Distribution, Kernel, stream
from .reporting import InequalityReport, ratio_summary
from .spaces import BanachSpaceDescriptor
from ._parallel import parallel_map
from .ustat import (
    MAX_EVALUATION_TERMS,
    EvaluationBudgetError,
    UStatResult,
    _CHUNK,
    _as_value,
    _zero,
    ranked_term_sum,
)

__all__ = [
    "BernoulliMomentCheck",
    "SamplingDesign",
    "WeightSet",
    "bernoulli_sum_moment_check",
    "draw_design",
    "incomplete_moment_experiment",
    "incomplete_ustat",
]

# Colex ranks are manipulated as int64; leave headroom below 2^63.
_RANK_SPACE_LIMIT = 2**62

_VARIANTS = ("without_replacement", "with_replacement", "bernoulli")


@dataclass(frozen=True)
class SamplingDesign:
    """Recipe for selecting index tuples.

    variant: one of "without_replacement", "with_replacement", "bernoulli".
    draws:   number of tuples to pick (first two variants).
    rate:    per-tuple selection probability p_n (bernoulli only).
    """

    variant: str
    draws: int | None = None
    rate: float | None = None

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown design variant {self.variant!r}")
        if self.variant == "bernoulli":
            if self.rate is None or not 0.0 <= self.rate <= 1.0:
                raise ValueError("bernoulli design needs rate in [0, 1]")
            if self.draws is not None:
                raise ValueError("bernoulli design takes no draw count")
        else:
            if self.rate is not None:
                raise ValueError(f"{self.variant} design takes no rate")
            if self.draws is None or self.draws < 0:
                raise ValueError(f"{self.variant} design needs draws >= 0")

    @classmethod
    def without_replacement(cls, draws: int) -> "SamplingDesign":
        return cls("without_replacement", draws=int(draws))

    @classmethod
    def with_replacement(cls, draws: int) -> "SamplingDesign":
        return cls("with_replacement", draws=int(draws))

    @classmethod
    def bernoulli(cls, rate: float) -> "SamplingDesign":
        return cls("bernoulli", rate=float(rate))

    def validate_for(self, n: int, m: int) -> None:
        total = count_tuples(n, m)
        if self.variant == "without_replacement" and self.draws > total:
            raise ValueError(
                f"cannot draw {self.draws} distinct tuples from C({n},{m})={total}"
            )

    def to_dict(self) -> dict:
        d = {"variant": self.variant}
        if self.variant == "bernoulli":
            d["p_n"] = self.rate
        else:
            d["draws"] = self.draws
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SamplingDesign":
        variant = d.get("variant")
        if variant == "bernoulli":
            if "p_n" not in d:
                raise ValueError("bernoulli design dict needs key 'p_n'")
            return cls.bernoulli(d["p_n"])
        if variant in ("without_replacement", "with_replacement"):
            if "draws" not in d:
                raise ValueError(f"{variant} design dict needs key 'draws'")
            return cls(variant, draws=int(d["draws"]))
        raise ValueError(f"unknown design variant {variant!r}")


@dataclass(frozen=True)
class WeightSet:
    """Sparse nonnegative integer weights on increasing tuples.

    Keys are colex ranks, kept sorted ascending so that evaluation visits
    selected tuples in the same order as complete enumeration does.
    """

    n: int
    m: int
    ranks: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        ranks = np.asarray(self.ranks, dtype=np.int64)
        weights = np.asarray(self.weights, dtype=np.int64)
        if ranks.shape != weights.shape or ranks.ndim != 1:
            raise ValueError("ranks and weights must be 1-d and aligned")
        if ranks.size:
            if np.any(np.diff(ranks) <= 0):
                raise ValueError("ranks must be strictly increasing")
            if ranks[0] < 0 or ranks[-1] >= count_tuples(self.n, self.m):
                raise ValueError("rank outside [0, C(n, m))")
            if np.any(weights < 0):
                raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "ranks", ranks)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        """Number of distinct selected tuples."""
        return int(self.ranks.size)

    @property
    def total_weight(self) -> int:
        return int(self.weights.sum())

    def indices(self) -> np.ndarray:
        """Materialize the selected tuples, one row per rank, shape (size, m)."""
        if self.size == 0:
            return np.empty((0, self.m), dtype=np.int64)
        cols = unrank_many(self.ranks, self.n, self.m)
        return np.stack(cols, axis=1)

    def weight_of(self, indices) -> int:
        from .combinatorics import rank_tuple, validate_tuple

        t = tuple(int(i) for i in indices)
        validate_tuple(t, self.n, self.m)
        r = rank_tuple(t)
        pos = int(np.searchsorted(self.ranks, r))
        if pos < self.size and self.ranks[pos] == r:
            return int(self.weights[pos])
        return 0

    def items(self) -> Iterator[tuple[tuple[int, ...], int]]:
        for r, w in zip(self.ranks.tolist(), self.weights.tolist()):
            yield unrank_tuple(r, self.n, self.m), int(w)


def _distinct_ranks(rng: np.random.Generator, total: int, count: int) -> np.ndarray:
    """Uniform random count-subset of [0, total) by Floyd's algorithm."""
    if count > total:
        raise ValueError(f"cannot pick {count} distinct ranks out of {total}")
    if count == total:
        return np.arange(total, dtype=np.int64)
    chosen: set[int] = set()
    for j in range(total - count, total):
        t = int(rng.integers(0, j + 1))
        chosen.add(j if t in chosen else t)
    return np.sort(np.fromiter(chosen, dtype=np.int64, count=count))


def _design_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return stream(seed, "design")


def draw_design(design: SamplingDesign, n: int, m: int, seed) -> WeightSet:
    """Realize a design as a sparse weight set.

    seed may be an integer (a dedicated stream is derived from it) or an
    already-positioned numpy Generator, which experiments use to hand each
    replication its own stream.
    """
    total = count_tuples(n, m)
    if total > _RANK_SPACE_LIMIT:
        raise EvaluationBudgetError(
            f"C({n}, {m}) = {total} exceeds the int64 rank space"
        )
    design.validate_for(n, m)
    rng = _design_rng(seed)

    if design.variant == "without_replacement":
        ranks = _distinct_ranks(rng, total, design.draws)
        weights = np.ones(ranks.size, dtype=np.int64)
    elif design.variant == "with_replacement":
        raw = rng.integers(0, total, size=design.draws, dtype=np.int64)
        ranks, counts = np.unique(raw, return_counts=True)
        weights = counts.astype(np.int64)
    else:
        count = int(rng.binomial(total, design.rate)) if total else 0
        ranks = _distinct_ranks(rng, total, count)
        weights = np.ones(ranks.size, dtype=np.int64)
    return WeightSet(n=n, m=m, ranks=ranks, weights=weights)


def _rank_chunks(ranks: np.ndarray):
    for a in range(0, ranks.size, _CHUNK):
        yield ranks[a : a + _CHUNK]


def _weight_chunks(weights: np.ndarray):
    for a in range(0, weights.size, _CHUNK):
        yield weights[a : a + _CHUNK].astype(np.float64)


def incomplete_ustat(h: Kernel, sample, weights: WeightSet) -> UStatResult:
    """Weighted sum of h over the selected tuples.

    With every weight equal to one over the full rank range this reproduces
    complete_ustat bit for bit: both run the same chunked rank pipeline and
    multiplying by 1.0 is exact.
    """
    sample = np.asarray(sample, dtype=np.float64)
    if h.arity != weights.m:
        raise ValueError(f"kernel arity {h.arity} != weight arity {weights.m}")
    if weights.n > len(sample):
        raise ValueError(
            f"weights address n={weights.n} points, sample has {len(sample)}"
        )
    if weights.size > MAX_EVALUATION_TERMS:
        raise EvaluationBudgetError(
            f"{weights.size} selected tuples exceed the cap {MAX_EVALUATION_TERMS}"
        )
    if weights.size == 0:
        return UStatResult(_as_value(h, _zero(h)), weights.n, weights.m, 0, 0.0)
    total, weight_total = ranked_term_sum(
        h,
        sample,
        weights.n,
        _rank_chunks(weights.ranks),
        _weight_chunks(weights.weights),
    )
    return UStatResult(
        _as_value(h, total), weights.n, weights.m, weights.size, weight_total
    )


@dataclass(frozen=True)
class BernoulliMomentCheck:
    a_size: int
    b_size: int
    rate: float
    p: float
    q: float
    estimate: float
    standard_error: float
    bound_shape: float
    ratio: float


def bernoulli_sum_moment_check(
    a_size: int,
    b_size: int,
    y: float,
    p: float,
    q: float,
    replications: int = 10**5,
    seed: int = 0,
) -> BernoulliMomentCheck:
    """Monte Carlo check of the moment bound for doubly indexed Bernoulli sums.

    Simulates Y = sum_{a} (sum_{b} Y_{a,b})^p with Y_{a,b} i.i.d.
    Bernoulli(y), estimates E[Y^(q/p)], and reports it against the
    three-term bound shape.  The inner sums are Binomial(b_size, y), which
    is what gets simulated.
    """
    if not q >= p > 1.0:
        raise ValueError(f"need q >= p > 1, got p={p}, q={q}")
    if not 0.0 <= y <= 1.0:
        raise ValueError(f"rate y={y} outside [0, 1]")
    if a_size < 1 or b_size < 1:
        raise ValueError("a_size and b_size must be positive")
    rng = stream(seed, "bernoulli-moment")
    s = q / p
    total = 0.0
    total_sq = 0.0
    done = 0
    # Cap the simulation matrix at ~10^7 entries per slab.
    step = max(1, min(replications, 10**7 // a_size))
    while done < replications:
        r = min(step, replications - done)
        counts = rng.binomial(b_size, y, size=(r, a_size))
        yvals = np.power(counts.astype(np.float64), p).sum(axis=1)
        powered = np.power(yvals, s)
        total += float(powered.sum())
        total_sq += float(np.square(powered).sum())
        done += r
    estimate = total / replications
    var = max(total_sq / replications - estimate**2, 0.0)
    se = float(np.sqrt(var / replications))
    shape = (
        a_size**s * b_size**q * y**q
        + a_size**s * b_size**s * y**s
        + a_size * b_size * y
    )
    ratio = estimate / shape if shape > 0 else 0.0
    return BernoulliMomentCheck(
        a_size=a_size,
        b_size=b_size,
        rate=y,
        p=p,
        q=q,
        estimate=estimate,
        standard_error=se,
        bound_shape=shape,
        ratio=ratio,
    )


def _norm_of(value, space: BanachSpaceDescriptor | None) -> float:
    if space is not None:
        return space.norm(value)
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        return abs(float(arr))
    return float(np.linalg.norm(arr))


def incomplete_moment_experiment(
    h: Kernel,
    dist: Distribution,
    grid,
    p: float,
    q: float,
    d: int,
    replications: int = 1000,
    seed: int = 0,
    threads: int | None = None,
    space: BanachSpaceDescriptor | None = None,
    certify: bool = True,
    stability_factor: float = 5.0,
) -> InequalityReport:
    """Moment growth of Bernoulli-subsampled statistics across an (n, p_n) grid.

    Each grid entry (n, p_n) yields a Monte Carlo estimate of
    E[||U_inc||^q] and the theoretical bound shape in (n, p_n); the
    expectation factor E||h||^q is constant across the grid placement and
    is deliberately left out of the shape so the fitted constant absorbs
    it.  The kernel must be symmetric, unweighted, and degenerate of the
    claimed order d (checked up front unless certify=False).
    """
    if not q >= p > 1.0:
        raise ValueError(f"need q >= p > 1, got p={p}, q={q}")
    if not 1 <= d <= h.arity:
        raise ValueError(f"claimed order d={d} outside [1, {h.arity}]")
    if h.weighted or not h.symmetric:
        raise ValueError("experiment needs a symmetric, index-free kernel")
    grid = [(int(n), float(rate)) for n, rate in grid]
    for n, rate in grid:
        if n < h.arity:
            raise ValueError(f"grid n={n} smaller than kernel arity {h.arity}")
        if not 0.0 <= rate <= 1.0:
            raise ValueError(f"grid rate {rate} outside [0, 1]")

    if certify:
        from .hoeffding import check_degeneracy

        report = check_degeneracy(h, dist, seed=seed, space=space)
        if report.order != d:
            raise ValueError(
                f"kernel certifies to degeneracy order {report.order}, "
                f"experiment claims d={d}"
            )

    m = h.arity

    def run_cell(cell_idx: int, n: int, rate: float) -> tuple[float, float]:
        design = SamplingDesign.bernoulli(rate)

        def one_rep(rep: int) -> float:
            sample = dist.sample(stream(seed, "inc-moment", cell_idx, rep, 0), n)
            ws = draw_design(design, n, m, stream(seed, "inc-moment", cell_idx, rep, 1))
            value = incomplete_ustat(h, sample, ws).value
            return _norm_of(value, space) ** q

        powered = np.array(parallel_map(one_rep, replications, threads))
        est = float(powered.mean())
        se = float(powered.std(ddof=1) / np.sqrt(replications)) if replications > 1 else 0.0
        return est, se

    rows = []
    for idx, (n, rate) in enumerate(grid):
        est, se = run_cell(idx, n, rate)
        shape = (
            n ** (q * (m - d) + d * q / p) * rate**q
            + n ** (m * q / p) * rate ** (q / p)
            + n**m * rate
        )
        rows.append(
            {
                "n": n,
                "p_n": rate,
                "moment_estimate": est,
                "bound_shape": shape,
                "ratio": est / shape if shape > 0 else 0.0,
                "standard_error": se,
            }
        )

    fitted, stability, spread = ratio_summary([row["ratio"] for row in rows])
    return InequalityReport(
        kind="incomplete-moment",
        rows=rows,
        fitted_constant=fitted,
        stability=stability,
        passed=bool(np.isfinite(fitted) and fitted > 0 and spread <= stability_factor),
        details={
            "p": p,
            "q": q,
            "d": d,
            "m": m,
            "replications": replications,
            "ratio_spread": spread,
        },
    )
