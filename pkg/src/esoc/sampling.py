"""Random points of the ambient space, of the cones, and of each case."""

from __future__ import annotations

import numpy as np

from .core import AmbientPoint, ConeDims, EsocError
from .projector import Case, classify

__all__ = [
    "sample_L",
    "sample_M",
    "random_point",
    "random_contractive",
]


def _ball(rng, n, q):
    d = rng.standard_normal((n, q))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * rng.random((n, 1)) ** (1.0 / q)


def sample_L(dims: ConeDims, n: int, rng) -> tuple:
    """``n`` points of L as arrays of shape ``(n, p)`` and ``(n, q)``.

    ``u`` is uniform on the unit ball, ``x = ||u|| e + U[0,1]^p``, and each
    point is scaled by an exponential factor so the whole cone is covered.
    """
    u = _ball(rng, n, dims.q)
    x = np.linalg.norm(u, axis=1, keepdims=True) + rng.random((n, dims.p))
    t = rng.exponential(1.0, (n, 1))
    return t * x, t * u


def sample_M(dims: ConeDims, n: int, rng) -> tuple:
    """``n`` points of M: ``x`` in ``[0,1]^p``, ``||u|| <= <x, e>``."""
    x = rng.random((n, dims.p))
    u = _ball(rng, n, dims.q) * x.sum(axis=1, keepdims=True)
    t = rng.exponential(1.0, (n, 1))
    return t * x, t * u


def _propose(dims: ConeDims, case: Case, rng) -> AmbientPoint:
    w = rng.standard_normal(dims.q)
    r = float(np.linalg.norm(w))
    if case is Case.DUAL_W_ZERO:
        z = r + rng.exponential(1.0, dims.p)
    elif case is Case.PRIMAL_W_ZERO:
        z = rng.standard_normal(dims.p)
        j = rng.integers(dims.p)
        z[j] = -(r + 0.5 * rng.exponential(1.0))
    else:
        z = rng.standard_normal(dims.p)
        neg = float(np.sum(np.maximum(-z, 0.0)))
        target = neg + rng.exponential(1.0)
        w *= target / r
    return AmbientPoint(z, w)


def random_point(dims: ConeDims, case: Case, rng,
                 max_attempts: int = 1000) -> AmbientPoint:
    """Draw a point that :func:`classify` puts in ``case``.

    Proposals are rejected until the classification matches.

    Raises
    ------
    EsocError
        If ``max_attempts`` proposals all miss.
    """
    case = Case(case)
    for _ in range(max_attempts):
        a = _propose(dims, case, rng)
        if classify(a) is case:
            return a
    raise EsocError(f"no {case.name} point for {dims} in {max_attempts} attempts")


def random_contractive(dims: ConeDims, ratio_max: float, rng) -> AmbientPoint:
    """Point with ``<e, |z|> / ||w||`` uniform in ``(0, ratio_max)``.

    Such points always fall in case 3.
    """
    while True:
        z = rng.standard_normal(dims.p)
        w = rng.standard_normal(dims.q)
        ratio = ratio_max * (1.0 - rng.random())  # in (0, ratio_max]
        w *= np.sum(np.abs(z)) / (ratio * np.linalg.norm(w))
        a = AmbientPoint(z, w)
        # rounding can push the ratio onto the bound; redraw then
        if np.sum(a.z_abs) < ratio_max * a.wnorm:
            return a
