"""Scalar piecewise linear equation behind the general projection case.

For data ``z`` in R^p and ``r = ||w|| > 0`` define

    psi(lam) = -lam * r + sum_i max(r - (lam + 1) * z_i, 0),   lam >= 0.

psi is convex. When some ``z_i^+ < r`` and ``sum_i z_i^- < r`` it has a
strictly negative subgradient everywhere and a single positive zero, which
is the multiplier of the projection onto L. Four solvers are provided:
semi-smooth Newton, Picard fixed-point iteration, bisection and exhaustive
enumeration of the 2^p linear pieces.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .core import EsocError

__all__ = [
    "Method",
    "Status",
    "SolverError",
    "PsiProblem",
    "SolverConfig",
    "SolveTrace",
    "psi_eval",
    "psi_subgradient",
    "newton_solve",
    "picard_solve",
    "bisection_solve",
    "enumerate_solve",
    "enumeration_trace",
    "solve",
]

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps


class Method(str, enum.Enum):
    NEWTON = "newton"
    PICARD = "picard"
    BISECTION = "bisection"
    ENUMERATION = "enumeration"
    AUTO = "auto"


class Status(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITER_EXCEEDED = "max_iter_exceeded"
    CONTRACTION_VIOLATED = "contraction_violated"
    INVALID_PROBLEM = "invalid_problem"


class SolverError(EsocError):
    """A scalar solve did not produce a root.

    ``status`` says why; ``trace`` holds whatever iterates were produced.
    """

    def __init__(self, status: Status, message: str, trace=None):
        super().__init__(message)
        self.status = Status(status)
        self.trace = trace


@dataclass(frozen=True, eq=False)
class PsiProblem:
    """The data ``(z, ||w||)`` defining psi."""

    z: np.ndarray
    wnorm: float

    def __post_init__(self):
        z = np.array(self.z, dtype=float).reshape(-1)
        if z.size == 0 or not np.all(np.isfinite(z)):
            raise EsocError("z must be a nonempty finite vector")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "wnorm", float(self.wnorm))
        if not (math.isfinite(self.wnorm) and self.wnorm >= 0.0):
            raise EsocError(f"wnorm must be finite and >= 0, got {self.wnorm}")

    @classmethod
    def from_point(cls, point) -> "PsiProblem":
        return cls(point.z, point.wnorm)

    @property
    def p(self) -> int:
        return self.z.size

    @property
    def abs_sum(self) -> float:
        """``<e, |z|>``, the Lipschitz constant of the summation term."""
        return math.fsum(np.abs(self.z))

    @property
    def neg_sum(self) -> float:
        return math.fsum(np.maximum(-self.z, 0.0))

    def is_valid(self) -> bool:
        r = self.wnorm
        return r > 0.0 and bool(np.any(self.z < r)) and self.neg_sum < r

    def validate(self):
        if self.wnorm <= 0.0:
            raise SolverError(Status.INVALID_PROBLEM, "wnorm must be > 0")
        if not np.any(self.z < self.wnorm):
            raise SolverError(
                Status.INVALID_PROBLEM,
                "z^+ >= ||w|| e: the projection is (z^+, w), no root to find")
        if self.neg_sum >= self.wnorm:
            raise SolverError(
                Status.INVALID_PROBLEM,
                "<z^-, e> >= ||w||: the projection is (z^+, 0), no root to find")


@dataclass(frozen=True)
class SolverConfig:
    method: Method = Method.AUTO
    tol: float = 1e-12
    max_iter: int = 200
    lambda0: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not self.tol > 0:
            raise EsocError(f"tol must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise EsocError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.lambda0 > 0:
            raise EsocError(f"lambda0 must be > 0, got {self.lambda0}")


@dataclass
class SolveTrace:
    """Iterate history of one scalar solve.

    ``iterates`` holds ``(lam_k, psi(lam_k), s_k)`` triples, starting from
    the initial point.
    """

    method: Method
    iterates: list = field(default_factory=list)
    status: Status = Status.MAX_ITER_EXCEEDED
    solution: float = math.nan
    iterations: int = 0

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([it[0] for it in self.iterates])

    @property
    def residual(self) -> float:
        return abs(self.iterates[-1][1]) if self.iterates else math.nan

    def error_ratios(self, lam_star: float) -> np.ndarray:
        """Observed ``|lam_* - lam_{k+1}| / |lam_* - lam_k|`` per step."""
        err = np.abs(self.lambdas - lam_star)
        with np.errstate(divide="ignore", invalid="ignore"):
            return err[1:] / err[:-1]


def _check_lambda(lam: float):
    if not lam >= 0.0:
        raise EsocError(f"lambda must be >= 0, got {lam}")


def _terms(prob: PsiProblem, lam: float) -> np.ndarray:
    return prob.wnorm - (lam + 1.0) * prob.z


def psi_eval(prob: PsiProblem, lam: float) -> float:
    _check_lambda(lam)
    t = _terms(prob, lam)
    return math.fsum(np.append(np.maximum(t, 0.0), -lam * prob.wnorm))


def _active(prob: PsiProblem, lam: float) -> np.ndarray:
    # sgn(0) = 0: a coordinate sitting exactly on its kink is inactive
    return _terms(prob, lam) > 0.0


def psi_subgradient(prob: PsiProblem, lam: float) -> float:
    """The subgradient ``-||w|| + <e, N(lam) z>`` of psi at ``lam``.

    ``N(lam)`` is diagonal with entry -1 where ``(lam + 1) z_i < ||w||``
    and 0 elsewhere.
    """
    _check_lambda(lam)
    return -prob.wnorm - math.fsum(prob.z[_active(prob, lam)])


def _psi_noise(prob: PsiProblem, lam: float) -> float:
    """Rounding level of a computed psi value at ``lam``."""
    return 8.0 * EPS * (lam * prob.wnorm + prob.wnorm + (lam + 1.0) * prob.abs_sum)


def _residual_ok(prob: PsiProblem, lam: float, value: float, tol: float) -> bool:
    # near very large roots |psi| cannot go below a few ulps of lam * ||w||
    return abs(value) <= max(tol * (1.0 + prob.wnorm), _psi_noise(prob, lam))


def _record(trace: SolveTrace, prob: PsiProblem, lam: float) -> float:
    value = psi_eval(prob, lam)
    trace.iterates.append((lam, value, psi_subgradient(prob, lam)))
    return value


def _finish(trace: SolveTrace, lam: float, iterations: int) -> SolveTrace:
    trace.status = Status.CONVERGED
    trace.solution = lam
    trace.iterations = iterations
    return trace


def newton_solve(prob: PsiProblem, cfg: SolverConfig = SolverConfig()) -> SolveTrace:
    """Semi-smooth Newton iteration on psi.

    Each step solves the linear piece selected by the current active set::

        lam_{k+1} = sum_{i in A_k} (r - z_i) / (r + sum_{i in A_k} z_i)

    which is the Newton update with subgradient ``-r + <e, N_k z>``. The
    sequence is nondecreasing after the first step and stops after at most
    2^p updates, when the active set repeats.
    """
    prob.validate()
    r = prob.wnorm
    trace = SolveTrace(Method.NEWTON)
    lam = float(cfg.lambda0)
    for k in range(cfg.max_iter + 1):
        value = _record(trace, prob, lam)
        if _residual_ok(prob, lam, value, cfg.tol):
            return _finish(trace, lam, k)
        if k == cfg.max_iter:
            break
        active = _active(prob, lam)
        denom = r + math.fsum(prob.z[active])
        if denom <= 0.0:
            # impossible under the validity conditions; rounding only
            raise SolverError(Status.INVALID_PROBLEM,
                              f"nonnegative subgradient {-denom} at lambda={lam}",
                              trace)
        lam_next = math.fsum(r - prob.z[active]) / denom
        if lam_next == lam:
            return _finish(trace, lam, k)
        lam = lam_next
    trace.iterations = cfg.max_iter
    raise SolverError(Status.MAX_ITER_EXCEEDED,
                      f"newton did not converge in {cfg.max_iter} steps", trace)


def picard_solve(prob: PsiProblem, cfg: SolverConfig = SolverConfig()) -> SolveTrace:
    """Fixed-point iteration ``lam <- <e, [(lam + 1) z - r e]^-> / r``.

    The map is a contraction with factor ``rho = <e, |z|> / r``; when that
    factor is not below one the solve is refused with
    ``CONTRACTION_VIOLATED``.

    Stops when the step is below ``tol * (1 + lam)`` and the residual is
    below ``tol * (1 + r)``. In floating point the map carries rounding
    noise that the iteration amplifies by up to ``1 / (1 - rho)``, so a
    tight tolerance may be out of reach. In exact arithmetic ``|psi|``
    shrinks by at least ``rho`` per step; if the best residual seen has not
    improved for ``8 / (1 - rho)`` steps the solve ends at that best iterate.
    """
    r = prob.wnorm
    rho = prob.abs_sum / r
    if not rho < 1.0:
        raise SolverError(
            Status.CONTRACTION_VIOLATED,
            f"<e,|z|> = {prob.abs_sum} >= ||w|| = {r}; picard is not a contraction")
    prob.validate()
    trace = SolveTrace(Method.PICARD)
    lam = float(cfg.lambda0)
    best_val, best_lam, best_k = abs(_record(trace, prob, lam)), lam, 0
    patience = max(16, math.ceil(8.0 / (1.0 - rho)))
    for k in range(1, cfg.max_iter + 1):
        lam_next = math.fsum(np.maximum(_terms(prob, lam), 0.0)) / r
        value = _record(trace, prob, lam_next)
        step = abs(lam_next - lam)
        lam = lam_next
        if (step <= max(cfg.tol * (1.0 + lam), _psi_noise(prob, lam) / r)
                and _residual_ok(prob, lam, value, cfg.tol)):
            return _finish(trace, lam, k)
        if abs(value) < best_val:
            best_val, best_lam, best_k = abs(value), lam, k
        elif k - best_k >= patience:
            log.debug("picard stagnated at |psi| = %g after %d steps", best_val, k)
            return _finish(trace, best_lam, k)
    trace.iterations = cfg.max_iter
    raise SolverError(Status.MAX_ITER_EXCEEDED,
                      f"picard did not converge in {cfg.max_iter} steps", trace)


# hard stop on halvings; float64 bracket collapses long before this
_MAX_HALVINGS = 2200


def bisection_solve(prob: PsiProblem, cfg: SolverConfig = SolverConfig()) -> SolveTrace:
    """Bracketing bisection.

    ``psi(0) > 0`` under the validity conditions; the upper end starts at 1
    and doubles until psi turns negative (at most ``cfg.max_iter``
    doublings), then the bracket is halved until its width is at most
    ``tol * (1 + hi)``.
    """
    trace = SolveTrace(Method.BISECTION)
    lo = 0.0
    f_lo = _record(trace, prob, lo)
    if not f_lo > 0.0:
        raise SolverError(Status.INVALID_PROBLEM,
                          f"psi(0) = {f_lo} <= 0; no positive root", trace)
    prob.validate()
    hi = 1.0
    steps = 0
    while True:
        f_hi = _record(trace, prob, hi)
        steps += 1
        if f_hi <= 0.0:
            break
        if steps >= cfg.max_iter:
            trace.iterations = steps
            raise SolverError(Status.MAX_ITER_EXCEEDED,
                              f"no sign change found up to lambda={hi}", trace)
        lo, hi = hi, 2.0 * hi
    if f_hi == 0.0:
        return _finish(trace, hi, steps)
    for _ in range(_MAX_HALVINGS):
        if hi - lo <= cfg.tol * (1.0 + hi):
            break
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        f_mid = _record(trace, prob, mid)
        steps += 1
        if f_mid == 0.0:
            return _finish(trace, mid, steps)
        if f_mid > 0.0:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    _record(trace, prob, lam)
    return _finish(trace, lam, steps)


@lru_cache(maxsize=32)
def _patterns(p: int) -> np.ndarray:
    """All 2^p boolean active sets, one per row."""
    codes = np.arange(2 ** p, dtype=np.int64)[:, None]
    return ((codes >> np.arange(p)) & 1).astype(bool)


def _enumerate(prob: PsiProblem, max_p: int):
    p = prob.p
    if p > max_p:
        raise EsocError(f"p = {p} exceeds enumeration limit {max_p}")
    prob.validate()
    r = prob.wnorm
    masks = _patterns(p)
    z = prob.z
    # lam * r = sum_A (r - (lam+1) z_i)  =>  lam = sum_A (r - z_i) / (r + sum_A z_i)
    num = masks @ (r - z)
    den = r + masks @ z
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = num / den
    slack = 1e-12 * (1.0 + r)
    g = (lam[:, None] + 1.0) * z[None, :] - r
    # inside A we need g < 0, outside g >= 0, up to slack at ties
    viol = np.where(masks, g, -g)
    worst = np.max(np.maximum(viol, 0.0), axis=1)
    worst = np.where((den > 0) & (lam > 0) & np.isfinite(lam), worst, np.inf)
    return masks, lam, worst, slack


def enumerate_solve(prob: PsiProblem, max_p: int = 20) -> float:
    """Solve psi = 0 by trying every active set.

    For each subset A of coordinates, solve the linear equation of the
    piece that A selects and keep the solution if its sign pattern agrees
    with A. Costs O(p 2^p).

    Raises
    ------
    SolverError
        If no pattern is consistent; the message names the closest miss.
    """
    masks, lam, worst, slack = _enumerate(prob, max_p)
    ok = np.flatnonzero(worst <= slack)
    if ok.size == 0:
        best = int(np.argmin(worst))
        pattern = np.flatnonzero(masks[best]).tolist()
        raise SolverError(
            Status.INVALID_PROBLEM,
            f"no consistent sign pattern; nearest miss A={pattern} "
            f"lambda={lam[best]!r} violation={worst[best]!r}")
    cands = lam[ok]
    if cands.size > 1:
        spread = float(np.ptp(cands))
        if spread > 1e-9 * (1.0 + float(np.max(cands))):
            log.warning("enumeration: %d consistent patterns spread by %g",
                        cands.size, spread)
        resid = [abs(psi_eval(prob, float(c))) for c in cands]
        return float(cands[int(np.argmin(resid))])
    return float(cands[0])


def enumeration_trace(prob: PsiProblem, max_p: int = 20) -> SolveTrace:
    """``enumerate_solve`` wrapped as a trace; iterations = patterns examined."""
    lam = enumerate_solve(prob, max_p)
    trace = SolveTrace(Method.ENUMERATION)
    _record(trace, prob, lam)
    return _finish(trace, lam, 2 ** prob.p)


def solve(prob: PsiProblem, cfg: SolverConfig = SolverConfig()) -> SolveTrace:
    """Dispatch on ``cfg.method``.

    ``auto`` runs Newton and falls back to bisection if a subgradient gets
    numerically close to zero or Newton fails for any other reason.
    """
    method = cfg.method
    if method is Method.NEWTON:
        return newton_solve(prob, cfg)
    if method is Method.PICARD:
        return picard_solve(prob, cfg)
    if method is Method.BISECTION:
        return bisection_solve(prob, cfg)
    if method is Method.ENUMERATION:
        return enumeration_trace(prob)
    try:
        trace = newton_solve(prob, cfg)
    except SolverError as exc:
        if exc.status is Status.INVALID_PROBLEM and not prob.is_valid():
            raise
        log.debug("newton failed (%s); falling back to bisection", exc)
        return bisection_solve(prob, cfg)
    floor = 1e-14 * (1.0 + prob.wnorm)
    if any(abs(s) < floor for _, _, s in trace.iterates):
        log.debug("tiny subgradient in newton trace; using bisection")
        return bisection_solve(prob, cfg)
    return trace
