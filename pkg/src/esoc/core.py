"""Data model for the extended second order cone and its dual.

The ambient space is R^p x R^q. A point is written ``(z, w)`` with the
order block ``z`` of length p and the norm block ``w`` of length q.

The cone L is ``{(x, u) : x >= ||u|| e}`` (componentwise), its dual M is
``{(x, u) : <x, e> >= ||u||, x >= 0}``. For p = 1 both reduce to the
ordinary second order cone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

__all__ = [
    "EsocError",
    "DimensionError",
    "ConeDims",
    "AmbientPoint",
    "Membership",
    "MoreauCertificate",
    "stable_norm",
    "pos_part",
    "neg_part",
    "in_L",
    "in_M",
    "moreau_certificate",
]


class EsocError(ValueError):
    """Base class for errors raised by this package."""


class DimensionError(EsocError):
    """Block sizes of two objects do not agree."""


def stable_norm(v) -> float:
    """Euclidean norm that does not overflow or underflow for extreme entries.

    ``math.hypot`` scales internally and is correctly rounded in most cases.
    """
    return math.hypot(*np.asarray(v, dtype=float).ravel().tolist())


def pos_part(v) -> np.ndarray:
    """Componentwise ``max(v_i, 0)``; the projection onto the orthant."""
    return np.maximum(np.asarray(v, dtype=float), 0.0)


def neg_part(v) -> np.ndarray:
    """Componentwise ``max(-v_i, 0)``, so that ``v = pos_part(v) - neg_part(v)``."""
    return np.maximum(-np.asarray(v, dtype=float), 0.0)


@dataclass(frozen=True)
class ConeDims:
    """Block sizes ``(p, q)`` of the ambient space R^p x R^q."""

    p: int
    q: int

    def __post_init__(self):
        for name in ("p", "q"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, (int, np.integer)):
                raise DimensionError(f"{name} must be an integer, got {val!r}")
            if val < 1:
                raise DimensionError(f"{name} must be >= 1, got {val}")


def _as_block(v, name: str) -> np.ndarray:
    arr = np.array(v, dtype=float).reshape(-1)
    if not np.isfinite(arr).all():
        raise EsocError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AmbientPoint:
    """A point ``(z, w)`` of R^p x R^q.

    Both blocks are stored as read-only float arrays. Supports addition,
    subtraction, negation and scaling by a real number, which is all the
    linear algebra the projection formulas need.
    """

    z: np.ndarray
    w: np.ndarray
    dims: ConeDims = field(default=None)

    def __post_init__(self):
        z = _as_block(self.z, "z")
        w = _as_block(self.w, "w")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "w", w)
        if self.dims is None:
            object.__setattr__(self, "dims", ConeDims(z.size, w.size))
        elif (self.dims.p, self.dims.q) != (z.size, w.size):
            raise DimensionError(
                f"block lengths ({z.size}, {w.size}) do not match "
                f"dims ({self.dims.p}, {self.dims.q})")

    @classmethod
    def zeros(cls, dims: ConeDims) -> "AmbientPoint":
        return cls(np.zeros(dims.p), np.zeros(dims.q))

    @cached_property
    def wnorm(self) -> float:
        return stable_norm(self.w)

    @cached_property
    def norm(self) -> float:
        return stable_norm(np.concatenate([self.z, self.w]))

    @property
    def z_pos(self) -> np.ndarray:
        return pos_part(self.z)

    @property
    def z_neg(self) -> np.ndarray:
        return neg_part(self.z)

    @property
    def z_abs(self) -> np.ndarray:
        return np.abs(self.z)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.z, self.w])

    def dot(self, other: "AmbientPoint") -> float:
        self._check(other)
        return math.fsum(np.concatenate([self.z * other.z, self.w * other.w]))

    def _check(self, other):
        if not isinstance(other, AmbientPoint):
            return NotImplemented
        if self.dims != other.dims:
            raise DimensionError(f"dims {self.dims} and {other.dims} differ")

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return AmbientPoint(self.z + other.z, self.w + other.w)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return AmbientPoint(self.z - other.z, self.w - other.w)

    def __neg__(self):
        return AmbientPoint(-self.z, -self.w)

    def __mul__(self, t):
        return AmbientPoint(t * self.z, t * self.w)

    __rmul__ = __mul__

    def allclose(self, other: "AmbientPoint", rtol=1e-12, atol=0.0) -> bool:
        return self.dims == other.dims and np.allclose(
            self.as_vector(), other.as_vector(), rtol=rtol, atol=atol)

    def __repr__(self):
        return f"AmbientPoint(z={self.z.tolist()}, w={self.w.tolist()})"


class Membership(NamedTuple):
    inside: bool
    margin: float


def in_L(a: AmbientPoint, tol: float = 0.0) -> Membership:
    """Membership test for L.

    The margin is ``min_i z_i - ||w||``. The point passes when the margin
    is at least ``-tol * (1 + ||a||)``.
    """
    margin = float(a.z.min()) - a.wnorm
    return Membership(margin >= -tol * (1.0 + a.norm), margin)


def in_M(a: AmbientPoint, tol: float = 0.0) -> Membership:
    """Membership test for M; margin is ``min(min_i z_i, <z, e> - ||w||)``."""
    margin = min(float(a.z.min()), math.fsum(a.z) - a.wnorm)
    return Membership(margin >= -tol * (1.0 + a.norm), margin)


@dataclass(frozen=True)
class MoreauCertificate:
    """Residuals of the decomposition ``original = primal - dual``.

    All four residuals vanish exactly when ``primal = P_L(original)`` and
    ``dual = P_M(-original)``.
    """

    primal: AmbientPoint
    dual: AmbientPoint
    decomposition_residual: float
    orthogonality_residual: float
    primal_feasibility: float
    dual_feasibility: float
    scale: float = 0.0

    def __post_init__(self):
        for name in self.residual_names:
            if not getattr(self, name) >= 0.0:
                raise EsocError(f"{name} must be nonnegative")

    residual_names = (
        "decomposition_residual",
        "orthogonality_residual",
        "primal_feasibility",
        "dual_feasibility",
    )

    @property
    def residuals(self) -> dict:
        return {name: getattr(self, name) for name in self.residual_names}

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())

    def passes(self, tol: float) -> bool:
        return self.max_residual <= tol * (1.0 + self.scale)


def moreau_certificate(original: AmbientPoint, primal: AmbientPoint,
                       dual: AmbientPoint) -> MoreauCertificate:
    """Check a candidate pair ``(P_L(original), P_M(-original))``.

    Raises
    ------
    DimensionError
        If the three points do not share block sizes.
    """
    if not (original.dims == primal.dims == dual.dims):
        raise DimensionError(
            f"dims differ: {original.dims}, {primal.dims}, {dual.dims}")
    gap = np.concatenate([original.z - primal.z + dual.z,
                          original.w - primal.w + dual.w])
    return MoreauCertificate(
        primal=primal,
        dual=dual,
        decomposition_residual=stable_norm(gap),
        orthogonality_residual=abs(primal.dot(dual)),
        primal_feasibility=max(0.0, -in_L(primal).margin),
        dual_feasibility=max(0.0, -in_M(dual).margin),
        scale=original.norm,
    )
