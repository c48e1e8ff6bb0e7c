"""Finite-horizon LQR for a routing schedule fixed in advance.

With the action sequence known, the system is a Markov jump linear system
with i.i.d. unmeasured modes, and the optimal input is linear in the state
with time-varying gain

    K(k) = -[R + B'P(k+1)B]^{-1} B'P(k+1) Abar
    P(k) = M + Phi(k) - Abar'P(k+1)B [R + B'P(k+1)B]^{-1} B'P(k+1)Abar

where ``Abar`` is the mean mode matrix and ``Phi(k)`` the second moment of
the mode dynamics weighted by ``P(k+1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .model import CostWeights, SwitchedSystem, _symmetrize, expected_matrices


class NumericalError(LinAlgError):
    """A factorization or definiteness check failed during a backward pass."""


@dataclass(frozen=True)
class RoutingSchedule:
    """Action index per step ``k = 0..N-1``."""

    actions: tuple[int, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(int(a) for a in self.actions))

    @classmethod
    def constant(cls, action: int, N: int, name: str = "") -> "RoutingSchedule":
        return cls((action,) * N, name)

    def __len__(self):
        return len(self.actions)

    def check(self, sys: SwitchedSystem) -> None:
        bad = [a for a in self.actions if not 0 <= a < sys.n_actions]
        if bad:
            raise ValueError(f"schedule uses action(s) {sorted(set(bad))} outside "
                             f"the catalog of {sys.n_actions}")


@dataclass(frozen=True)
class GainSchedule:
    """Solved schedule: ``K[k]`` for k < N and ``P[k]`` for k <= N (``P[N] = Q``)."""

    K: tuple[np.ndarray, ...]
    P: tuple[np.ndarray, ...]
    actions: tuple[int, ...]
    name: str = ""

    @property
    def N(self) -> int:
        return len(self.K)


def riccati_terms(B: np.ndarray, R: np.ndarray, Ptilde: np.ndarray, L: np.ndarray):
    """Minimize ``u'(R + B'PtB)u + 2u'B'Lx`` over u.

    Returns ``(K, correction)`` where ``K = -S^{-1} B'L`` and ``correction =
    L'B S^{-1} B'L`` with ``S = R + B'PtB``; the minimum is ``-x'correction x``.
    """
    S = _symmetrize(R + B.T @ Ptilde @ B)
    G = B.T @ L
    try:
        c = cho_factor(S, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise NumericalError(f"R + B'PB is not positive definite: {exc}") from exc
    SinvG = cho_solve(c, G)
    return -SinvG, _symmetrize(G.T @ SinvG)


def _check_psd(P: np.ndarray, k: int) -> None:
    scale = max(1.0, float(np.abs(P).max()))
    lam = np.linalg.eigvalsh(P).min()
    if lam < -1e-9 * scale:
        raise NumericalError(f"value matrix P({k}) lost positive semidefiniteness "
                             f"(min eigenvalue {lam:.3e})")


def solve_static(sys: SwitchedSystem, w: CostWeights,
                 schedule: RoutingSchedule | Sequence[int] | int) -> GainSchedule:
    """Backward recursion for a fixed routing schedule.

    Args:
        sys: switched system.
        w: cost weights; ``w.N`` is the horizon.
        schedule: a :class:`RoutingSchedule`, a sequence of N action
            indices, or a single action index used at every step.

    Returns:
        GainSchedule with ``K[k]`` (u_dim x n) and ``P[k]`` (n x n).

    Raises:
        NumericalError: if ``R + B'PB`` cannot be factored or a value matrix
            stops being positive semidefinite.
    """
    w.check(sys)
    if isinstance(schedule, (int, np.integer)):
        schedule = RoutingSchedule.constant(int(schedule), w.N)
    elif not isinstance(schedule, RoutingSchedule):
        schedule = RoutingSchedule(tuple(schedule))
    if len(schedule) != w.N:
        raise ValueError(f"schedule has {len(schedule)} steps, horizon is {w.N}")
    schedule.check(sys)

    P = [None] * (w.N + 1)
    K = [None] * w.N
    P[w.N] = w.Q.copy()
    for k in range(w.N - 1, -1, -1):
        B = sys.B_actions[schedule.actions[k]]
        Abar, Phi = expected_matrices(sys, P[k + 1])
        K[k], corr = riccati_terms(B, w.R, P[k + 1], P[k + 1] @ Abar)
        P[k] = _symmetrize(w.M + Phi - corr)
        _check_psd(P[k], k)
    return GainSchedule(tuple(K), tuple(P), schedule.actions, schedule.name)


def expected_cost(g: GainSchedule, x0) -> float:
    """Optimal expected cost ``x0' P(0) x0``."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != g.P[0].shape[0]:
        raise ValueError(f"x0 has length {x0.shape[0]}, system has n={g.P[0].shape[0]}")
    return float(x0 @ g.P[0] @ x0)
