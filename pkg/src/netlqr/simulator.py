"""Seeded Monte-Carlo rollouts and exact expectations by mode enumeration."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamic_solver import PartitionPolicy, locate
from .model import CostWeights, SwitchedSystem
from .static_solver import GainSchedule

CHUNK = 256
DEFAULT_ENUMERATION_CAP = 2 ** 16


class EnumerationCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    replicates: int
    seed: int
    x0: np.ndarray
    record_trajectories: bool = True
    record_inputs: bool = True
    full_state: bool = False

    def __post_init__(self):
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise ValueError(f"replicates must be a positive integer, got {self.replicates}")
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float).reshape(-1))


@dataclass
class SimReport:
    """Outcome of a batch of replicates.

    ``traj_*`` have shape (N+1, d) where d is the plant dimension (or the
    full state when requested / no register layout is known). ``actuation``
    is the replicate-mean of the input that actually reached the plant,
    shape (N, m). ``action_counts[k, a]`` counts replicates using action a.
    """

    costs: np.ndarray
    mean: float
    std_error: float
    traj_mean: np.ndarray | None = None
    traj_min: np.ndarray | None = None
    traj_max: np.ndarray | None = None
    actuation: np.ndarray | None = None
    action_counts: np.ndarray | None = None
    fallbacks: int = 0

    @property
    def replicates(self) -> int:
        return len(self.costs)


def worker_count() -> int:
    env = os.environ.get("NETLQR_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cap))
        except ValueError:
            pass
    return cap


def mode_stream(seed: int, replicate: int, N: int, probs: np.ndarray) -> np.ndarray:
    """Mode indices for one replicate; depends only on (seed, replicate)."""
    ss = np.random.SeedSequence(int(seed) & (2 ** 64 - 1), spawn_key=(int(replicate),))
    rng = np.random.Generator(np.random.Philox(ss))
    return np.searchsorted(np.cumsum(probs), rng.random(N), side="right").clip(max=len(probs) - 1)


def _stats(costs: np.ndarray) -> tuple[float, float]:
    mean = float(costs.mean())
    if len(costs) < 2:
        return mean, 0.0
    # shifting by the first sample keeps identical replicates at exactly zero spread
    dev = costs - costs[0]
    var = float(np.var(dev, ddof=1))
    return mean, float(np.sqrt(var / len(costs)))


def _rollout_chunk(sys, w, cfg, first, count, controller):
    """Propagate ``count`` replicates; ``controller(k, X) -> (U, action_idx, fallback)``."""
    N = w.N
    modes = np.stack([mode_stream(cfg.seed, first + i, N, sys.probs) for i in range(count)])
    X = np.tile(cfg.x0, (count, 1))
    cost = np.zeros(count)
    layout = sys.layout
    rec_dim = sys.n if (cfg.full_state or layout is None) else layout.plant_dim
    traj = np.empty((N + 1, count, rec_dim)) if cfg.record_trajectories else None
    act = None
    if cfg.record_inputs and layout is not None:
        act = np.zeros((N, count, layout.input_dim))
        bits = np.array(sys.mode_labels)
    counts = np.zeros((N, sys.n_actions), dtype=np.int64)
    fallbacks = 0
    for k in range(N):
        if traj is not None:
            traj[k] = X[:, :rec_dim]
        U, a_idx, fb = controller(k, X)
        fallbacks += int(np.sum(fb))
        counts[k] = np.bincount(a_idx, minlength=sys.n_actions)
        cost += np.einsum("si,ij,sj->s", X, w.M, X) + np.einsum("si,ij,sj->s", U, w.R, U)
        s = modes[:, k]
        if act is not None:
            for i in range(len(layout.offsets)):
                act[k] += bits[s, i][:, None] * X[:, layout.feed_slice(i)]
        Xn = np.empty_like(X)
        for j in range(sys.n_modes):
            m = s == j
            if np.any(m):
                Xn[m] = X[m] @ sys.A_modes[j].T
        for a in np.unique(a_idx):
            m = a_idx == a
            Xn[m] += U[m] @ sys.B_actions[a].T
        X = Xn
    cost += np.einsum("si,ij,sj->s", X, w.Q, X)
    if traj is not None:
        traj[N] = X[:, :rec_dim]
    return cost, traj, act, counts, fallbacks


def _run(sys, w, cfg, controller) -> SimReport:
    w.check(sys)
    if cfg.x0.shape[0] != sys.n:
        raise ValueError(f"x0 has length {cfg.x0.shape[0]}, system has n={sys.n}")
    starts = list(range(0, cfg.replicates, CHUNK))
    jobs = [(s, min(CHUNK, cfg.replicates - s)) for s in starts]
    workers = min(worker_count(), len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda j: _rollout_chunk(sys, w, cfg, j[0], j[1], controller), jobs))
    else:
        parts = [_rollout_chunk(sys, w, cfg, s, c, controller) for s, c in jobs]

    costs = np.concatenate([p[0] for p in parts])
    mean, se = _stats(costs)
    rep = SimReport(costs, mean, se,
                    action_counts=sum(p[3] for p in parts),
                    fallbacks=sum(p[4] for p in parts))
    if cfg.record_trajectories:
        traj = np.concatenate([p[1] for p in parts], axis=1)
        rep.traj_mean = traj.mean(axis=1)
        rep.traj_min = traj.min(axis=1)
        rep.traj_max = traj.max(axis=1)
    if parts[0][2] is not None:
        rep.actuation = np.concatenate([p[2] for p in parts], axis=1).mean(axis=1)
    return rep


def simulate_static(sys: SwitchedSystem, w: CostWeights, g: GainSchedule,
                    cfg: SimConfig) -> SimReport:
    """Monte-Carlo closed loop ``u(k) = K(k) x(k)`` under the schedule's actions.

    Replicate ``i`` draws its loss pattern sequence from its own stream keyed
    by ``(cfg.seed, i)``, so results do not depend on chunking or threads.
    """
    if g.N != w.N:
        raise ValueError(f"gain schedule has {g.N} steps, horizon is {w.N}")

    def controller(k, X):
        a = np.full(len(X), g.actions[k])
        return X @ g.K[k].T, a, np.zeros(len(X), dtype=bool)

    return _run(sys, w, cfg, controller)


def simulate_dynamic(sys: SwitchedSystem, w: CostWeights, pol: PartitionPolicy,
                     cfg: SimConfig) -> SimReport:
    if pol.N != w.N:
        raise ValueError(f"policy has {pol.N} steps, horizon is {w.N}")

    def controller(k, X):
        regions = pol.steps[k]
        idx, fb = locate(regions, X)
        U = np.empty((len(X), sys.u_dim))
        a = np.empty(len(X), dtype=int)
        for r in np.unique(idx):
            m = idx == r
            U[m] = X[m] @ regions[r].gain.T
            a[m] = regions[r].action
        return U, a, fb

    return _run(sys, w, cfg, controller)


def exhaustive_expected_cost(sys: SwitchedSystem, w: CostWeights,
                             policy: GainSchedule | PartitionPolicy, x0,
                             cap: int = DEFAULT_ENUMERATION_CAP) -> float:
    """Exact expected cost by enumerating every mode sequence.

    Works for a solved static schedule or a partition policy; the number
    of sequences ``q**N`` must not exceed ``cap``.
    """
    w.check(sys)
    q, N = sys.n_modes, w.N
    if q ** N > cap:
        raise EnumerationCapExceeded(f"{q}^{N} = {q ** N} mode sequences exceeds cap {cap}")
    X = np.asarray(x0, dtype=float).reshape(1, -1)
    if X.shape[1] != sys.n:
        raise ValueError(f"x0 has length {X.shape[1]}, system has n={sys.n}")
    prob = np.ones(1)
    total = 0.0
    for k in range(N):
        if isinstance(policy, GainSchedule):
            U = X @ policy.K[k].T
            a = np.full(len(X), policy.actions[k])
        else:
            regions = policy.steps[k]
            idx, _ = locate(regions, X)
            U = np.stack([regions[i].gain @ x for i, x in zip(idx, X)])
            a = np.array([regions[i].action for i in idx])
        stage = np.einsum("si,ij,sj->s", X, w.M, X) + np.einsum("si,ij,sj->s", U, w.R, U)
        total += float(prob @ stage)
        BU = np.einsum("sij,sj->si", sys.B_actions[a], U)
        # next layer ordered (state, mode)
        X = (np.einsum("qij,sj->sqi", sys.A_modes, X) + BU[:, None, :]).reshape(-1, sys.n)
        prob = (prob[:, None] * sys.probs[None, :]).reshape(-1)
    total += float(prob @ np.einsum("si,ij,sj->s", X, w.Q, X))
    return total
