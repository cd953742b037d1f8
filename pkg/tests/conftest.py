import numpy as np
import pytest

from plsopt.groups import random_rotation
from plsopt.model import FullParameter


def spaced_eigenvalues(rng, k, lo=0.5, hi=10.0, min_gap=0.25):
    """k distinct eigenvalues in [lo, hi], pairwise at least min_gap apart."""
    while True:
        lam = np.sort(rng.uniform(lo, hi, k))[::-1]
        if k < 2 or np.min(-np.diff(lam)) >= min_gap:
            return lam


def planted_population(rng, p, m, sigma2=1.0, min_gap=0.25):
    """Population with exactly m nonzero eigen-coordinates of beta.

    Returns (phi, Q, lambdas, gamma) with gamma the full coordinate vector.
    """
    lam = spaced_eigenvalues(rng, p, min_gap=min_gap)
    Q = random_rotation(rng, p)
    gamma = np.zeros(p)
    idx = rng.choice(p, size=m, replace=False)
    gamma[idx] = rng.choice([-1.0, 1.0], m) * rng.uniform(0.5, 2.0, m)
    sxx = (Q * lam) @ Q.T
    sxx = 0.5 * (sxx + sxx.T)
    beta = Q @ gamma
    return FullParameter(sxx, sxx @ beta, sigma2), Q, lam, gamma


def random_phi(rng, p, sigma2=None):
    """Generic SPD population with well-separated eigenvalues."""
    lam = spaced_eigenvalues(rng, p)
    Q = random_rotation(rng, p)
    sxx = (Q * lam) @ Q.T
    sxx = 0.5 * (sxx + sxx.T)
    s2 = rng.uniform(0.1, 2.0) if sigma2 is None else sigma2
    return FullParameter(sxx, rng.standard_normal(p), s2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_triple(rng, p_max=10, near_hm=False):
    """Random (phi, theta, eta) with theta the best m-term truncation of beta.

    With ``near_hm`` the population has m large and p - m small eigen-coordinates.
    """
    from plsopt.model import AlternativeReduction, reduce_to_theta

    p = int(rng.integers(1, p_max + 1))
    m = int(rng.integers(1, p + 1))
    if near_hm:
        lam = spaced_eigenvalues(rng, p)
        Q = random_rotation(rng, p)
        gamma = rng.uniform(0.5, 2.0, p) * rng.choice([-1.0, 1.0], p)
        idx = rng.choice(p, size=p - m, replace=False)
        gamma[idx] *= 10.0 ** rng.uniform(-4, -1, p - m)
        sxx = (Q * lam) @ Q.T
        sxx = 0.5 * (sxx + sxx.T)
        phi = FullParameter(sxx, sxx @ (Q @ gamma), rng.uniform(0.1, 2.0))
    else:
        phi = random_phi(rng, p)
    theta = reduce_to_theta(phi, m, strict=False)
    eta = AlternativeReduction(rng.standard_normal(p) * rng.uniform(0.1, 3.0))
    return phi, theta, eta


ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance_log():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number, passed, message):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {message}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
