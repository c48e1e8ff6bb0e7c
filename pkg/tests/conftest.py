"""Shared fixtures and independent reference implementations for the tests."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from netlqr import CostWeights, SwitchedSystem


def textbook_lqr(A, B, M, R, Q, N):
    """Classical time-varying discrete Riccati recursion, coded from scratch.

    Uses ``np.linalg.solve`` on the normal equations and the Joseph-free
    form ``P = M + A'PA - A'PB (R + B'PB)^-1 B'PA``.
    """
    P = [None] * (N + 1)
    K = [None] * N
    P[N] = np.array(Q, dtype=float)
    for k in range(N - 1, -1, -1):
        Pn = P[k + 1]
        S = R + B.T @ Pn @ B
        K[k] = -np.linalg.solve(S, B.T @ Pn @ A)
        P[k] = M + A.T @ Pn @ A + A.T @ Pn @ B @ K[k]
        P[k] = 0.5 * (P[k] + P[k].T)
    return K, P


def random_psd(rng, n, rank=None, scale=1.0):
    G = rng.standard_normal((n, rank or n))
    return scale * G @ G.T


def random_pd(rng, n):
    return random_psd(rng, n) + 0.1 * np.eye(n)


def random_switched(rng, n, q, p, m=1, idle=False):
    """Random small switched system; ``idle`` makes action 0 the zero input."""
    A = rng.standard_normal((q, n, n)) * (1.2 / np.sqrt(n))
    probs = rng.dirichlet(np.ones(q)) if q > 1 else np.ones(1)
    B = rng.standard_normal((p, n, m))
    if idle:
        B[0] = 0.0
    return SwitchedSystem(A, probs, B)


def random_weights(rng, sys, N):
    n, u = sys.n, sys.u_dim
    return CostWeights(random_psd(rng, n) + 0.05 * np.eye(n), random_pd(rng, u),
                       random_psd(rng, n) + 0.05 * np.eye(n), N)


def static_sequences(sys, N):
    return itertools.product(range(sys.n_actions), repeat=N)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py" not in getattr(rep, "nodeid", "") or rep.when != "call":
                continue
            detail = dict(rep.user_properties).get("detail", "")
            name = rep.nodeid.split("::")[-1].removeprefix("test_")
            lines.append((name, "PASS" if outcome == "passed" else "FAIL", detail))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, verdict, detail in sorted(lines):
            terminalreporter.write_line(f"{verdict}  {name}: {detail}")
