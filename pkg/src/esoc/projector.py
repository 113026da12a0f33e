"""Exact projections onto L and M.

Three regimes, decided from ``z`` and ``||w||`` alone:

1. ``z^+ >= ||w|| e``: ``P_L(z, w) = (z^+, w)``, ``P_M(-z, -w) = (z^-, 0)``.
2. ``<z^-, e> >= ||w||``: ``P_L(z, w) = (z^+, 0)``, ``P_M(-z, -w) = (z^-, -w)``.
3. otherwise, with ``lam > 0`` the root of psi and ``c = ||w|| / (lam + 1)``::

       P_L(z, w)   = ([z - c e]^+ + c e,  w / (lam + 1))
       P_M(-z, -w) = ([z - c e]^-,       -lam w / (lam + 1))

Every result carries a Moreau certificate checked before it is returned.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import (AmbientPoint, EsocError, MoreauCertificate,
                   moreau_certificate, neg_part, pos_part)
from .psi import Method, PsiProblem, SolverConfig, SolveTrace, solve

__all__ = [
    "Case",
    "ProjectionError",
    "ProjectionResult",
    "classify",
    "project_L",
    "project_M",
    "project_soc",
]

log = logging.getLogger(__name__)

DEFAULT_CERT_TOL = 1e-10


class Case(enum.IntEnum):
    DUAL_W_ZERO = 1      # w-part of P_M(-z,-w) vanishes
    PRIMAL_W_ZERO = 2    # w-part of P_L(z,w) vanishes
    GENERAL = 3


class ProjectionError(EsocError):
    """The computed pair failed its own certificate."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


@dataclass(frozen=True)
class ProjectionResult:
    """Outcome of projecting ``point`` onto L.

    ``proj_L`` is ``P_L(point)`` and ``proj_M_neg`` is ``P_M(-point)``.
    ``lam`` is the multiplier of case 3 and 0 otherwise. When the result
    comes from :func:`project_M`, ``target`` is ``"M"`` and ``point`` is the
    negated input, so that ``projection`` gives ``P_M`` of the input.
    """

    case: Case
    point: AmbientPoint
    proj_L: AmbientPoint
    proj_M_neg: AmbientPoint
    lam: float
    certificate: MoreauCertificate
    trace: Optional[SolveTrace] = None
    target: str = "L"

    @property
    def projection(self) -> AmbientPoint:
        if self.target == "L":
            return self.proj_L
        return self.proj_M_neg

    @property
    def iterations(self) -> int:
        return self.trace.iterations if self.trace is not None else 0


def _case3_holds(a: AmbientPoint) -> bool:
    r = a.wnorm
    z_pos = a.z_pos
    return bool(np.any((0.0 <= z_pos) & (z_pos < r))) and 0.0 <= float(a.z_neg.sum()) < r


def classify(a: AmbientPoint) -> Case:
    r = a.wnorm
    if (a.z_pos >= r).all():
        return Case.DUAL_W_ZERO
    if float(a.z_neg.sum()) >= r:
        return Case.PRIMAL_W_ZERO
    assert _case3_holds(a), f"case-3 restatement disagrees for {a!r}"
    return Case.GENERAL


def _case1(a: AmbientPoint):
    return AmbientPoint(a.z_pos, a.w), AmbientPoint(a.z_neg, np.zeros_like(a.w))


def _case2(a: AmbientPoint):
    return AmbientPoint(a.z_pos, np.zeros_like(a.w)), AmbientPoint(a.z_neg, -a.w)


def _case3(a: AmbientPoint, lam: float):
    scale = 1.0 / (lam + 1.0)
    c = a.wnorm * scale
    shifted = a.z - c
    primal = AmbientPoint(pos_part(shifted) + c, a.w * scale)
    dual = AmbientPoint(neg_part(shifted), -(lam * scale) * a.w)
    return primal, dual


def project_L(a: AmbientPoint, cfg: SolverConfig = SolverConfig(),
              cert_tol: float = DEFAULT_CERT_TOL) -> ProjectionResult:
    """Project ``a`` onto L (and ``-a`` onto M as a by-product).

    Raises
    ------
    SolverError
        Propagated from the scalar solver in case 3.
    ProjectionError
        If no candidate passes the Moreau certificate at ``cert_tol``.
    """
    case = classify(a)
    trace = None
    lam = 0.0
    if case is Case.DUAL_W_ZERO:
        primal, dual = _case1(a)
    elif case is Case.PRIMAL_W_ZERO:
        primal, dual = _case2(a)
    else:
        trace = solve(PsiProblem.from_point(a), cfg)
        lam = trace.solution
        primal, dual = _case3(a, lam)
    cert = moreau_certificate(a, primal, dual)
    result = ProjectionResult(case, a, primal, dual, lam, cert, trace)
    if cert.passes(cert_tol):
        return result
    return _recover(result, cfg, cert_tol)


def _recover(first: ProjectionResult, cfg: SolverConfig,
             cert_tol: float) -> ProjectionResult:
    # near a case boundary rounding can pick the wrong branch; try them all
    a = first.point
    log.warning("certificate failed (max residual %g) for %r; retrying",
                first.certificate.max_residual, a)
    candidates = [first]
    for case, formula in ((Case.DUAL_W_ZERO, _case1), (Case.PRIMAL_W_ZERO, _case2)):
        primal, dual = formula(a)
        candidates.append(ProjectionResult(
            case, a, primal, dual, 0.0, moreau_certificate(a, primal, dual)))
    prob = PsiProblem.from_point(a)
    if prob.is_valid():
        trace = solve(prob, replace(cfg, method=Method.BISECTION))
        primal, dual = _case3(a, trace.solution)
        candidates.append(ProjectionResult(
            Case.GENERAL, a, primal, dual, trace.solution,
            moreau_certificate(a, primal, dual), trace))
    best = min(candidates, key=lambda c: c.certificate.max_residual)
    if not best.certificate.passes(cert_tol):
        raise ProjectionError(
            f"no candidate passes the certificate for {a!r}: "
            f"best max residual {best.certificate.max_residual:g}",
            best.certificate)
    return best


def project_M(a: AmbientPoint, cfg: SolverConfig = SolverConfig(),
              cert_tol: float = DEFAULT_CERT_TOL) -> ProjectionResult:
    """Project ``a`` onto M via ``P_M(a) = a + P_L(-a)``.

    The returned result describes the projection of ``-a`` onto L;
    ``result.projection`` is ``P_M(a)``.
    """
    return replace(project_L(-a, cfg, cert_tol), target="M")


def project_soc(a: AmbientPoint, cert_tol: float = DEFAULT_CERT_TOL) -> ProjectionResult:
    """Closed-form projection onto the second order cone (p = 1).

    With ``lo = [z - ||w||]^+`` and ``hi = [z + ||w||]^+`` the projection is
    ``((lo + hi) / 2, (hi - lo) / 2 * w / ||w||)`` for ``w != 0`` and
    ``(z^+, 0)`` for ``w = 0``.
    """
    if a.dims.p != 1:
        raise EsocError(f"project_soc needs p = 1, got p = {a.dims.p}")
    z = float(a.z[0])
    r = a.wnorm
    if r == 0.0:
        primal = AmbientPoint([max(z, 0.0)], np.zeros_like(a.w))
    else:
        lo = max(z - r, 0.0)
        hi = max(z + r, 0.0)
        primal = AmbientPoint([0.5 * (lo + hi)], (0.5 * (hi - lo) / r) * a.w)
    dual = primal - a
    case = classify(a)
    lam = (r - z) / (r + z) if case is Case.GENERAL else 0.0
    return ProjectionResult(case, a, primal, dual, lam,
                            moreau_certificate(a, primal, dual))
