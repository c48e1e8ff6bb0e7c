"""Networked plant model.

A plant actuated over ``r`` lossy, delayed routing paths is rewritten as a
switched linear system

    x(k+1) = A_sigma(k) x(k) + B_a(k) u(k)

where the augmented state stacks the plant state with one shift register per
path, ``sigma`` is the (unmeasured, i.i.d.) vector of per-path packet
arrivals and ``a`` is the vector of paths used to send the packet.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


@dataclass(frozen=True)
class PlantModel:
    """Discrete-time LTI plant ``x_P(k+1) = A_P x_P(k) + B_P v(k)``."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A_P")
        B = _as_matrix(self.B, "B_P")
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A_P must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(
                f"B_P has {B.shape[0]} rows but A_P is {A.shape[0]}x{A.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class RoutePath:
    """One routing path: integer delay (steps) and packet loss probability."""

    delay: int
    loss_prob: float
    name: str = ""

    def __post_init__(self):
        if int(self.delay) != self.delay or self.delay < 1:
            raise ValueError(f"path delay must be a positive integer, got {self.delay}")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError(f"loss probability must lie in [0, 1], got {self.loss_prob}")
        object.__setattr__(self, "delay", int(self.delay))
        object.__setattr__(self, "loss_prob", float(self.loss_prob))


@dataclass(frozen=True)
class NetworkSpec:
    plant: PlantModel
    paths: tuple[RoutePath, ...]

    def __post_init__(self):
        paths = tuple(self.paths)
        if not paths:
            raise ValueError("a network needs at least one routing path")
        object.__setattr__(self, "paths", paths)

    @property
    def n_paths(self) -> int:
        return len(self.paths)

    def path_index(self, name: str) -> int:
        for i, p in enumerate(self.paths):
            if p.name == name:
                return i
        raise KeyError(f"no path named {name!r}")

    def restrict(self, indices: Sequence[int]) -> "NetworkSpec":
        """Sub-network keeping only the given paths, in their original order."""
        idx = sorted(set(int(i) for i in indices))
        if not idx:
            raise ValueError("cannot restrict a network to zero paths")
        return NetworkSpec(self.plant, tuple(self.paths[i] for i in idx))

    @property
    def augmented_dim(self) -> int:
        m = self.plant.n_inputs
        return self.plant.n_states + m * sum(p.delay for p in self.paths)


@dataclass(frozen=True)
class RegisterLayout:
    """Where each path's shift register lives inside the augmented state.

    ``offsets[i]`` is the index of the first cell of path ``i``; that cell
    holds the packet delivered to the plant at the current step. Each cell
    is ``m`` wide and path ``i`` has ``delays[i]`` cells.
    """

    plant_dim: int
    input_dim: int
    delays: tuple[int, ...]
    offsets: tuple[int, ...]

    def feed_slice(self, i: int) -> slice:
        return slice(self.offsets[i], self.offsets[i] + self.input_dim)

    def entry_slice(self, i: int) -> slice:
        start = self.offsets[i] + (self.delays[i] - 1) * self.input_dim
        return slice(start, start + self.input_dim)


@dataclass(frozen=True)
class SwitchedSystem:
    """Mode-switched linear system with a discrete choice of input matrix.

    Attributes:
        A_modes: array ``(q, n, n)`` of mode dynamics.
        probs: array ``(q,)`` of i.i.d. mode probabilities.
        B_actions: array ``(p, n, u_dim)`` of per-action input matrices.
        mode_labels: optional per-mode labels (loss bit-vectors for networks).
        action_labels: optional per-action labels (path bit-vectors).
        layout: register layout when built from a network, else ``None``.
    """

    A_modes: np.ndarray
    probs: np.ndarray
    B_actions: np.ndarray
    mode_labels: tuple = ()
    action_labels: tuple = ()
    layout: RegisterLayout | None = None
    A_mean: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = np.array(self.A_modes, dtype=float)
        B = np.array(self.B_actions, dtype=float)
        pi = np.array(self.probs, dtype=float).reshape(-1)
        if A.ndim == 2:
            A = A[None]
        if B.ndim == 2:
            B = B[None]
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise ValueError(f"mode matrices must be square, got shape {A.shape}")
        if B.ndim != 3 or B.shape[1] != A.shape[1]:
            raise ValueError(
                f"action matrices must have {A.shape[1]} rows, got shape {B.shape}")
        if pi.shape[0] != A.shape[0]:
            raise ValueError(f"{A.shape[0]} modes but {pi.shape[0]} probabilities")
        if len(B) == 0:
            raise ValueError("action catalog is empty")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError(f"mode probabilities must be >= 0 and sum to 1, got {pi}")
        for arr in (A, B, pi):
            arr.setflags(write=False)
        object.__setattr__(self, "A_modes", A)
        object.__setattr__(self, "B_actions", B)
        object.__setattr__(self, "probs", pi)
        Abar = np.einsum("i,ijk->jk", pi, A)
        Abar.setflags(write=False)
        object.__setattr__(self, "A_mean", Abar)
        if not self.mode_labels:
            object.__setattr__(self, "mode_labels", tuple(range(len(A))))
        if not self.action_labels:
            object.__setattr__(self, "action_labels", tuple(range(len(B))))

    @property
    def n(self) -> int:
        return self.A_modes.shape[1]

    @property
    def u_dim(self) -> int:
        return self.B_actions.shape[2]

    @property
    def n_modes(self) -> int:
        return self.A_modes.shape[0]

    @property
    def n_actions(self) -> int:
        return self.B_actions.shape[0]


@dataclass(frozen=True)
class CostWeights:
    """Finite-horizon quadratic cost: stage ``x'Mx + u'Ru``, terminal ``x'Qx``."""

    M: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    N: int

    def __post_init__(self):
        M = _as_matrix(self.M, "M")
        R = _as_matrix(self.R, "R")
        Q = _as_matrix(self.Q, "Q")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"horizon N must be a positive integer, got {self.N}")
        for name, W in (("M", M), ("R", R), ("Q", Q)):
            if W.shape[0] != W.shape[1]:
                raise ValueError(f"{name} must be square, got {W.shape}")
            if not np.allclose(W, W.T, rtol=0, atol=1e-12 * max(1.0, np.abs(W).max())):
                raise ValueError(f"{name} must be symmetric")
        if M.shape != Q.shape:
            raise ValueError(f"M {M.shape} and Q {Q.shape} must have the same shape")
        for name, W in (("M", M), ("Q", Q)):
            if np.linalg.eigvalsh(W).min() < -1e-10 * max(1.0, np.abs(W).max()):
                raise ValueError(f"{name} must be positive semidefinite")
        if np.linalg.eigvalsh(R).min() <= 0:
            raise ValueError("R must be positive definite")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "N", int(self.N))

    def check(self, sys: SwitchedSystem) -> None:
        if self.M.shape != (sys.n, sys.n):
            raise ValueError(f"weights are {self.M.shape[0]}-dim, system has n={sys.n}")
        if self.R.shape != (sys.u_dim, sys.u_dim):
            raise ValueError(f"R is {self.R.shape}, system has u_dim={sys.u_dim}")


def plant_identity_weights(n: int, plant_dim: int) -> np.ndarray:
    """Block weight ``diag(I_plant, 0)`` penalising only the plant states."""
    W = np.zeros((n, n))
    W[:plant_dim, :plant_dim] = np.eye(plant_dim)
    return W


def mode_distribution(spec: NetworkSpec) -> list[tuple[tuple[int, ...], float]]:
    """All ``2**r`` arrival patterns with their probabilities, unpruned.

    Bit ``sigma_i = 1`` means the packet due on path ``i`` arrived; path
    losses are independent with ``P[sigma_i = 0] = p_i``. Patterns are
    enumerated in lexicographic order of the bit tuple.
    """
    out = []
    for sigma in itertools.product((0, 1), repeat=spec.n_paths):
        prob = 1.0
        for bit, path in zip(sigma, spec.paths):
            prob *= path.loss_prob if bit == 0 else 1.0 - path.loss_prob
        out.append((sigma, prob))
    return out


def all_actions(r: int) -> list[tuple[int, ...]]:
    """Every routing choice over ``r`` paths, idle (all zeros) first."""
    return list(itertools.product((0, 1), repeat=r))


def register_layout(spec: NetworkSpec) -> RegisterLayout:
    m = spec.plant.n_inputs
    offsets = []
    pos = spec.plant.n_states
    for p in spec.paths:
        offsets.append(pos)
        pos += m * p.delay
    return RegisterLayout(spec.plant.n_states, m,
                          tuple(p.delay for p in spec.paths), tuple(offsets))


def _mode_matrix(spec: NetworkSpec, layout: RegisterLayout, sigma) -> np.ndarray:
    l, m = layout.plant_dim, layout.input_dim
    n = spec.augmented_dim
    A = np.zeros((n, n))
    A[:l, :l] = spec.plant.A
    for i, (bit, path) in enumerate(zip(sigma, spec.paths)):
        off = layout.offsets[i]
        # plant reads the first cell of the register
        A[:l, off:off + m] = bit * spec.plant.B
        # cell j <- cell j+1
        for j in range(path.delay - 1):
            A[off + j * m:off + (j + 1) * m, off + (j + 1) * m:off + (j + 2) * m] = np.eye(m)
    return A


def _action_matrix(spec: NetworkSpec, layout: RegisterLayout, action) -> np.ndarray:
    m = layout.input_dim
    B = np.zeros((spec.augmented_dim, m * spec.n_paths))
    for i, bit in enumerate(action):
        if bit:
            B[layout.entry_slice(i), i * m:(i + 1) * m] = np.eye(m)
    return B


def build_augmented(spec: NetworkSpec, actions: Sequence[Sequence[int]] | None = None,
                    prune: bool = True) -> SwitchedSystem:
    """Assemble the switched system for a network.

    Args:
        spec: plant and ordered routing paths.
        actions: catalog of routing choices, each a 0/1 vector of length r
            (``a_i = 1`` sends on path ``i``). Defaults to all ``2**r``
            choices, idle first.
        prune: drop loss patterns with zero probability.

    A packet sent on path ``i`` at step k enters the last register cell,
    moves one cell per step and reaches the plant input at step ``k + d_i``,
    i.e. ``x_P(k+1) = A_P x_P(k) + sum_i sigma_i(k) B_P u_i(k - d_i)``.
    Inputs are stacked per path, ``u = (u_1, ..., u_r)``.
    """
    r = spec.n_paths
    if actions is None:
        actions = all_actions(r)
    actions = [tuple(int(b) for b in a) for a in actions]
    if not actions:
        raise ValueError("action catalog is empty")
    for a in actions:
        if len(a) != r or any(b not in (0, 1) for b in a):
            raise ValueError(f"action {a} is not a 0/1 vector of length {r}")

    layout = register_layout(spec)
    modes = mode_distribution(spec)
    if prune:
        modes = [(s, p) for s, p in modes if p > 0.0]
    A = np.stack([_mode_matrix(spec, layout, s) for s, _ in modes])
    B = np.stack([_action_matrix(spec, layout, a) for a in actions])
    probs = np.array([p for _, p in modes])
    return SwitchedSystem(A, probs, B,
                          mode_labels=tuple(s for s, _ in modes),
                          action_labels=tuple(actions),
                          layout=layout)


def expected_matrices(sys: SwitchedSystem, P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean dynamics ``sum_i pi_i A_i`` and second moment ``sum_i pi_i A_i' P A_i``."""
    P = np.asarray(P, dtype=float)
    if P.shape != (sys.n, sys.n):
        raise ValueError(f"P is {P.shape}, system has n={sys.n}")
    AtPA = np.swapaxes(sys.A_modes, 1, 2) @ P @ sys.A_modes
    Phi = np.tensordot(sys.probs, AtPA, axes=1)
    return sys.A_mean.copy(), _symmetrize(Phi)
