from fractions import Fraction

import numpy as np
import pytest


def exact_root(z, wnorm):
    """Exact positive zero of psi by rational arithmetic over its breakpoints.

    Independent of every solver in the package: the floats are converted to
    Fractions, psi is evaluated exactly at its kinks ``wnorm/z_i - 1`` and
    the sign-changing piece is solved in closed form.
    """
    z = [Fraction(float(v)) for v in z]
    r = Fraction(float(wnorm))

    def psi(lam):
        return -lam * r + sum(max(r - (lam + 1) * zi, 0) for zi in z)

    knots = sorted({r / zi - 1 for zi in z if zi > 0 and r / zi - 1 > 0} | {Fraction(0)})
    hi = knots[-1] * 2 + 1
    while psi(hi) > 0:
        hi *= 2
    knots.append(hi)
    for a, b in zip(knots, knots[1:]):
        fa, fb = psi(a), psi(b)
        if fa > 0 >= fb:
            return float(a + fa * (b - a) / (fa - fb))
    raise AssertionError("no sign change")


@pytest.fixture
def rng():
    return np.random.default_rng(20161)


_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_report():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
