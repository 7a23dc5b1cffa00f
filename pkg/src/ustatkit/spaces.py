"""Finite-dimensional codomains with an l^s norm and their smoothness data.

R^dim under the l^s norm is r-smooth with r = min(s, 2) as soon as s > 1;
the exponent range usable by the inequality machinery is then 1 < p <= r.
The martingale smoothness constant attached to such a space is finite but
has no closed form here, so it is exposed only as an opaque sentinel and a
numeric value is never assigned to it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BanachSpaceDescriptor",
    "FINITE_UNKNOWN_CONSTANT",
    "real_line",
]


class _FiniteUnknownConstant:
    """Sentinel for a constant known to be finite but never evaluated."""

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return "<finite constant, value unknown>"

    def __bool__(self) -> bool:
        return True


FINITE_UNKNOWN_CONSTANT = _FiniteUnknownConstant()


@dataclass(frozen=True)
class BanachSpaceDescriptor:
    """R^dimension equipped with the l^norm_exponent norm."""

    dimension: int
    norm_exponent: float = 2.0

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError("dimension must be at least 1")
        if not self.norm_exponent > 1.0:
            raise ValueError(
                "norm_exponent must exceed 1; the l^1 norm is not smooth "
                "and supplies no usable exponent range"
            )

    @property
    def smoothness(self) -> float:
        """Smoothness degree r = min(norm_exponent, 2)."""
        return min(self.norm_exponent, 2.0)

    @property
    def smoothness_constant(self):
        """The associated martingale constant: finite, value unknown."""
        return FINITE_UNKNOWN_CONSTANT

    def admissible_p_range(self) -> tuple[float, float]:
        """Open-left, closed-right interval (1, r] of usable exponents p."""
        return (1.0, self.smoothness)

    def contains_p(self, p: float) -> bool:
        lo, hi = self.admissible_p_range()
        return lo < p <= hi

    def norm(self, point) -> float:
        """l^s norm of a single point (scalar allowed when dimension == 1)."""
        arr = np.asarray(point, dtype=np.float64)
        if arr.ndim == 0:
            if self.dimension != 1:
                raise ValueError("scalar point in a space of dimension > 1")
            return float(abs(arr))
        if arr.shape != (self.dimension,):
            raise ValueError(
                f"point has shape {arr.shape}, expected ({self.dimension},)"
            )
        s = self.norm_exponent
        return float(np.sum(np.abs(arr) ** s) ** (1.0 / s))

    def norms(self, batch) -> np.ndarray:
        """Norms of a batch: shape (B,) for scalars, (B, dimension) for vectors."""
        arr = np.asarray(batch, dtype=np.float64)
        if self.dimension == 1:
            if arr.ndim == 2 and arr.shape[-1] == 1:
                arr = arr[..., 0]
            return np.abs(arr)
        if arr.ndim < 1 or arr.shape[-1] != self.dimension:
            raise ValueError(
                f"batch has shape {arr.shape}, expected (..., {self.dimension})"
            )
        s = self.norm_exponent
        return np.sum(np.abs(arr) ** s, axis=-1) ** (1.0 / s)

    def zero(self):
        """Additive identity in the engine's point representation."""
        if self.dimension == 1:
            return 0.0
        return np.zeros(self.dimension)

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "norm_exponent": self.norm_exponent}

    @classmethod
    def from_dict(cls, d: dict) -> "BanachSpaceDescriptor":
        return cls(
            dimension=int(d.get("dimension", 1)),
            norm_exponent=float(d.get("norm_exponent", 2.0)),
        )


def real_line() -> BanachSpaceDescriptor:
    """The default codomain: R with the absolute value."""
    return BanachSpaceDescriptor(dimension=1, norm_exponent=2.0)
