import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esoc.core import ConeDims, EsocError
from esoc.projector import Case
from esoc.psi import (Method, PsiProblem, SolverConfig, SolverError, Status,
                      bisection_solve, enumerate_solve, enumeration_trace,
                      newton_solve, picard_solve, psi_eval, psi_subgradient,
                      solve)
from esoc.sampling import random_contractive, random_point

from conftest import exact_root


def case3_problem(rng, p, q=None):
    q = q if q is not None else int(rng.integers(1, 5))
    return PsiProblem.from_point(random_point(ConeDims(p, q), Case.GENERAL, rng))


# --- psi and its subgradient -------------------------------------------------

def test_psi_zero_at_soc_multiplier():
    assert psi_eval(PsiProblem([0.0], 1.0), 1.0) == 0.0


def test_psi_at_zero():
    assert psi_eval(PsiProblem([1, -0.5], 2.0), 0.0) == 3.5


def test_psi_root_from_oracle():
    prob = PsiProblem([1, -0.5], 2.0)
    lam = bisection_solve(prob, SolverConfig(tol=1e-12)).solution
    assert lam == pytest.approx(5 / 3, rel=1e-12)
    assert abs(psi_eval(prob, 5 / 3)) < 1e-15


def test_psi_rejects_negative_lambda():
    prob = PsiProblem([1.0], 2.0)
    with pytest.raises(EsocError):
        psi_eval(prob, -1e-9)
    with pytest.raises(EsocError):
        psi_subgradient(prob, -1.0)


@pytest.mark.parametrize("lam", [0.0, 0.5, 3.0, 1e6])
def test_subgradient_with_zero_z(lam):
    assert psi_subgradient(PsiProblem([0.0], 1.0), lam) == -1.0


def test_subgradient_active_set_change():
    prob = PsiProblem([1, -0.5], 2.0)
    assert psi_subgradient(prob, 0.0) == -2.5
    assert psi_subgradient(prob, 1.5) == -1.5
    # exactly on the kink the coordinate counts as inactive
    assert psi_subgradient(prob, 1.0) == -1.5


def test_problem_validation():
    with pytest.raises(EsocError):
        PsiProblem([], 1.0)
    with pytest.raises(EsocError):
        PsiProblem([1.0], -1.0)
    for z, r in [([2.0, 3.0], 1.0), ([-1.0, -2.0], 2.5), ([0.5], 0.0)]:
        with pytest.raises(SolverError) as exc:
            newton_solve(PsiProblem(z, r))
        assert exc.value.status is Status.INVALID_PROBLEM


def test_solver_config_validation():
    assert SolverConfig().method is Method.AUTO
    assert SolverConfig(method="picard").method is Method.PICARD
    for kw in [dict(tol=0.0), dict(max_iter=0), dict(lambda0=0.0), dict(method="x")]:
        with pytest.raises((EsocError, ValueError)):
            SolverConfig(**kw)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_psi_is_convex(p, seed):
    rng = np.random.default_rng(seed)
    prob = case3_problem(rng, p)
    a, b, c = np.sort(rng.exponential(2.0, 3))
    if not (a < b < c):
        return
    f = [psi_eval(prob, t) for t in (a, b, c)]
    slack = 1e-12 * (1 + prob.wnorm + prob.abs_sum) * (1 + c)
    assert (f[1] - f[0]) / (b - a) <= (f[2] - f[1]) / (c - b) + slack / min(b - a, c - b)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_subgradient_inequality_and_sign(p, seed):
    rng = np.random.default_rng(seed)
    prob = case3_problem(rng, p)
    lam, mu = rng.exponential(2.0, 2)
    s = psi_subgradient(prob, lam)
    assert s < 0
    slack = 1e-12 * (1 + abs(mu - lam)) * (1 + prob.wnorm + prob.abs_sum) * (1 + mu + lam)
    assert psi_eval(prob, mu) >= psi_eval(prob, lam) + s * (mu - lam) - slack


# --- Newton ------------------------------------------------------------------

def test_newton_one_step_for_nonpositive_z():
    trace = newton_solve(PsiProblem([-0.3], 1.0), SolverConfig(lambda0=5.0))
    assert trace.iterations == 1
    assert trace.solution == pytest.approx(13 / 7, rel=1e-15)


def test_newton_zero_z_hits_one_exactly():
    trace = newton_solve(PsiProblem([0.0], 1.0), SolverConfig(lambda0=0.01))
    assert trace.iterates[1][0] == 1.0
    assert trace.iterations == 1


def test_newton_p3_matches_oracle():
    prob = PsiProblem([0.4, -0.1, 0.2], 1.0)
    trace = newton_solve(prob, SolverConfig(lambda0=1.0))
    assert trace.status is Status.CONVERGED
    assert trace.solution == pytest.approx(19 / 11, rel=1e-10)
    assert trace.iterations <= 8


def test_newton_overshooting_start_on_p1():
    # lambda0 above (r - z)/z: first step lands on 0, second on the root
    trace = newton_solve(PsiProblem([0.5], 1.0), SolverConfig(lambda0=10.0))
    assert trace.lambdas[1] == 0.0
    assert trace.iterations == 2
    assert trace.solution == pytest.approx(1 / 3)


def test_newton_invariants(rng):
    for _ in range(300):
        p = int(rng.integers(1, 11))
        prob = case3_problem(rng, p)
        lam0 = float(rng.choice([1e-3, 1.0, 50.0]))
        trace = newton_solve(prob, SolverConfig(lambda0=lam0))
        lam_star = exact_root(prob.z, prob.wnorm)
        assert trace.status is Status.CONVERGED
        assert trace.iterations <= 2 ** p
        assert trace.solution == pytest.approx(lam_star, rel=1e-10)
        lams = trace.lambdas
        # nondecreasing once psi(lam_k) >= 0, i.e. from the first update on
        assert np.all(np.diff(lams[1:]) >= 0)
        assert np.all(lams[1:] <= lam_star * (1 + 1e-12) + 1e-12)


def test_newton_max_iter_exceeded():
    prob = PsiProblem([0.9, 0.8, 0.7, -0.1], 1.0)
    with pytest.raises(SolverError) as exc:
        newton_solve(prob, SolverConfig(max_iter=1, lambda0=1e-3))
    assert exc.value.status is Status.MAX_ITER_EXCEEDED
    assert exc.value.trace is not None


def test_newton_linear_rate(rng):
    alpha = 0.5
    for _ in range(200):
        a = random_contractive(ConeDims(int(rng.integers(1, 9)), 2), alpha / (1 + alpha), rng)
        prob = PsiProblem.from_point(a)
        lam_star = exact_root(prob.z, prob.wnorm)
        trace = newton_solve(prob, SolverConfig(lambda0=float(rng.exponential(3.0))))
        err = np.abs(trace.lambdas - lam_star)
        assert np.all(err[1:] <= alpha * err[:-1] + 1e-12 * (1 + lam_star))


# --- Picard ------------------------------------------------------------------

def test_picard_constant_map():
    trace = picard_solve(PsiProblem([0.0], 1.0), SolverConfig(lambda0=7.0))
    assert trace.lambdas[1] == 1.0
    assert trace.solution == 1.0


def test_picard_contracts():
    prob = PsiProblem([0.2, -0.1], 1.0)
    trace = picard_solve(prob, SolverConfig(lambda0=1.0))
    lam_star = 19 / 11
    assert trace.solution == pytest.approx(lam_star, rel=1e-11)
    err = np.abs(trace.lambdas - lam_star)
    assert np.all(err[1:] <= 0.3 * err[:-1] + 1e-12)


def test_picard_slow_contraction_large_root():
    # rho = 0.999 and lambda* = 1999: steps shrink by 1e-3 per iteration,
    # far below the rounding noise of a step at this magnitude
    z = [-0.3, -0.2, -0.499]
    lam_star = float(exact_root(z, 1.0))
    trace = picard_solve(PsiProblem(z, 1.0), SolverConfig(tol=1e-14, max_iter=1_000_000))
    assert trace.status is Status.CONVERGED
    assert trace.solution == pytest.approx(lam_star, rel=1e-11)


def test_picard_stops_at_noise_floor():
    # an unattainable tolerance ends at the best iterate instead of cycling
    prob = PsiProblem([0.55, -0.4, 0.02], 1.3)
    trace = picard_solve(prob, SolverConfig(tol=1e-300, max_iter=1_000_000))
    lam_star = float(exact_root(prob.z, 1.3))
    assert trace.status is Status.CONVERGED
    assert trace.iterations < 10_000
    assert trace.solution == pytest.approx(lam_star, rel=1e-13)
    assert abs(trace.residual) == min(abs(v) for _, v, _ in trace.iterates)


def test_picard_refuses_non_contraction():
    with pytest.raises(SolverError) as exc:
        picard_solve(PsiProblem([0.9], 0.5))
    assert exc.value.status is Status.CONTRACTION_VIOLATED


def test_picard_max_iter():
    prob = PsiProblem([0.45, -0.5], 1.0)
    with pytest.raises(SolverError) as exc:
        picard_solve(prob, SolverConfig(max_iter=3))
    assert exc.value.status is Status.MAX_ITER_EXCEEDED


# --- bisection ----------------------------------------------------------------

def test_bisection_soc_value():
    tol = 1e-12
    lam = bisection_solve(PsiProblem([0.0], 1.0), SolverConfig(tol=tol)).solution
    assert abs(lam - 1.0) <= 2 * tol


def test_bisection_matches_enumeration():
    prob = PsiProblem([1, -0.5], 2.0)
    assert bisection_solve(prob).solution == pytest.approx(enumerate_solve(prob), rel=1e-11)


def test_bisection_near_boundary():
    lam = bisection_solve(PsiProblem([0.999], 1.0), SolverConfig(tol=1e-14)).solution
    assert lam == pytest.approx(1 / 1999, rel=1e-10)


def test_bisection_residual_bound(rng):
    tol = 1e-12
    for _ in range(200):
        prob = case3_problem(rng, int(rng.integers(1, 9)))
        trace = bisection_solve(prob, SolverConfig(tol=tol))
        lam = trace.solution
        bound = tol * (1 + prob.wnorm) * (1 + prob.abs_sum) * (1 + lam)
        assert lam > 0
        assert abs(psi_eval(prob, lam)) <= bound


def test_bisection_rejects_invalid():
    with pytest.raises(SolverError) as exc:
        bisection_solve(PsiProblem([3.0, 2.0], 1.0))
    assert exc.value.status is Status.INVALID_PROBLEM


def test_bisection_bracket_budget():
    # root near 1e6 needs ~20 doublings
    prob = PsiProblem([-0.999999], 1.0)
    with pytest.raises(SolverError) as exc:
        bisection_solve(prob, SolverConfig(max_iter=5))
    assert exc.value.status is Status.MAX_ITER_EXCEEDED
    assert bisection_solve(prob).solution == pytest.approx(1.999999 / 1e-6, rel=1e-9)


# --- enumeration --------------------------------------------------------------

@pytest.mark.parametrize("z, r, expected", [
    ([0.0], 1.0, 1.0),
    ([0.4, -0.1], 1.0, 17 / 13),
    ([-0.3], 1.0, 13 / 7),
])
def test_enumeration_values(z, r, expected):
    assert enumerate_solve(PsiProblem(z, r)) == pytest.approx(expected, rel=1e-12)


def test_enumeration_handles_ties():
    # at the root 5/3 no coordinate is tight; build one where a kink is the root
    # z = (0.5, 0), r = 1: lam = 1 puts (lam+1) z_1 = r exactly
    prob = PsiProblem([0.5, 0.0], 1.0)
    assert psi_eval(prob, 1.0) == 0.0
    assert enumerate_solve(prob) == 1.0


def test_enumeration_limit_and_failure():
    with pytest.raises(EsocError):
        enumerate_solve(PsiProblem(np.zeros(5) + 0.1, 1.0), max_p=4)
    with pytest.raises(SolverError):
        enumerate_solve(PsiProblem([2.0], 1.0))


def test_enumeration_trace():
    trace = enumeration_trace(PsiProblem([0.4, -0.1], 1.0))
    assert trace.iterations == 4
    assert trace.status is Status.CONVERGED


# --- dispatch and agreement ---------------------------------------------------

def test_auto_uses_newton():
    trace = solve(PsiProblem([0.4, -0.1, 0.2], 1.0))
    assert trace.method is Method.NEWTON


def test_auto_propagates_invalid_problem():
    with pytest.raises(SolverError):
        solve(PsiProblem([2.0], 1.0))


def test_solvers_agree(rng):
    for p in range(1, 11):
        for _ in range(20):
            prob = case3_problem(rng, p)
            ref = exact_root(prob.z, prob.wnorm)
            values = [newton_solve(prob).solution, bisection_solve(prob).solution,
                      enumerate_solve(prob)]
            if prob.abs_sum < prob.wnorm:
                values.append(picard_solve(prob, SolverConfig(max_iter=10_000)).solution)
            for v in values:
                assert v == pytest.approx(ref, rel=1e-10)


def test_converged_trace_invariant(rng):
    for method in (Method.NEWTON, Method.BISECTION):
        for _ in range(100):
            prob = case3_problem(rng, int(rng.integers(1, 7)))
            trace = solve(prob, SolverConfig(method=method))
            assert trace.solution > 0
            assert math.isclose(trace.residual, abs(psi_eval(prob, trace.solution)))
