"""State-dependent routing: backward construction of quadratic-cone partitions.

At every step the state space is split into regions described by
conjunctions of quadratic inequalities ``x'Yx ~ 0``. Each region prescribes
a routing action, a linear gain and a value matrix, and records which
region each loss pattern sends the closed loop to at the next step.

One backward step works as follows. For each action ``a`` and each
assignment ``mu`` of a next-step region to every mode, the one-step problem
with next-step values ``P_{mu_sigma}`` is an ordinary LQR step and gives a
candidate gain ``K_{a,mu}`` and value ``P_{a,mu}``. A candidate is
*consistent* at ``x`` when every mode really does drive ``x`` into the
region it was assigned, i.e. ``(A_sigma + B_a K_{a,mu}) x`` lies in
``Omega_{mu_sigma}``; this is encoded without inverses by pushing each
successor constraint ``Y`` through the closed-loop map. The candidates'
pointwise minimum (lowest index on ties) splits the space; inside each
argmin cell the consistent piece is optimal when all its successors are,
and the remaining pieces keep the same candidate but are flagged
suboptimal. Empty cells are pruned by sampling.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .model import CostWeights, SwitchedSystem, _symmetrize, expected_matrices
from .static_solver import riccati_terms

log = logging.getLogger(__name__)

RELATIONS = ("<", "<=", ">=", ">")
_FLIP = {"<": ">=", "<=": ">", ">=": "<", ">": "<="}

DEFAULT_BUDGET = 10_000
DEFAULT_SAMPLES = 10_000


class BudgetExceeded(RuntimeError):
    """Candidate or region count at some step is above the configured budget."""

    def __init__(self, step: int, count: int, budget: int, what: str = "candidates"):
        self.step, self.count, self.budget = step, count, budget
        super().__init__(f"step {step}: {count} {what} exceeds budget {budget}")


def _compare(vals: np.ndarray, relation: str) -> np.ndarray:
    if relation == "<":
        return vals < 0
    if relation == "<=":
        return vals <= 0
    if relation == ">=":
        return vals >= 0
    if relation == ">":
        return vals > 0
    raise ValueError(f"unknown relation {relation!r}")


@dataclass(frozen=True)
class QuadConstraint:
    """``x' Y x  <relation>  0`` with symmetric ``Y``."""

    Y: np.ndarray
    relation: str

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"relation must be one of {RELATIONS}, got {self.relation!r}")
        Y = np.array(self.Y, dtype=float)
        Y.setflags(write=False)
        object.__setattr__(self, "Y", Y)

    def holds(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(_compare(np.asarray(x @ self.Y @ x), self.relation))

    def negated(self) -> "QuadConstraint":
        return QuadConstraint(self.Y, _FLIP[self.relation])


@dataclass(frozen=True)
class Region:
    constraints: tuple[QuadConstraint, ...]
    action: int
    gain: np.ndarray
    value: np.ndarray
    optimal: bool
    successors: tuple[int, ...] | None = None
    _Ys: np.ndarray = field(init=False, repr=False, compare=False)
    _rels: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cons = tuple(self.constraints)
        object.__setattr__(self, "constraints", cons)
        n = self.value.shape[0]
        Ys = np.stack([c.Y for c in cons]) if cons else np.zeros((0, n, n))
        object.__setattr__(self, "_Ys", Ys)
        object.__setattr__(self, "_rels", tuple(c.relation for c in cons))

    def contains(self, X: np.ndarray) -> np.ndarray:
        """Membership mask for a batch of states ``X`` (s, n)."""
        X = np.atleast_2d(X)
        mask = np.ones(X.shape[0], dtype=bool)
        if not self.constraints:
            return mask
        vals = np.einsum("si,cij,sj->sc", X, self._Ys, X, optimize=True)
        for j, rel in enumerate(self._rels):
            mask &= _compare(vals[:, j], rel)
        return mask


@dataclass
class PartitionPolicy:
    """Regions ``steps[k]`` for ``k = 0..N-1`` plus the terminal weight."""

    steps: list[list[Region]]
    terminal: np.ndarray
    action_labels: tuple = ()
    census: list[dict] = field(default_factory=list)

    @property
    def N(self) -> int:
        return len(self.steps)


class PolicyDecision(NamedTuple):
    action: int
    gain: np.ndarray
    value: np.ndarray
    optimal: bool
    region: int
    fallback: bool


def sample_states(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Random directions on the unit sphere scaled by log-spaced radii."""
    d = rng.standard_normal((count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    radii = np.logspace(-3, 3, 13)
    return d * radii[np.arange(count) % radii.size, None]


@dataclass
class _Candidate:
    action: int
    mu: tuple[int, ...]
    K: np.ndarray
    P: np.ndarray


def _candidates(sys: SwitchedSystem, w: CostWeights, next_values: Sequence[np.ndarray],
                step: int, budget: int) -> list[_Candidate]:
    q = sys.n_modes
    count = sys.n_actions * len(next_values) ** q
    if count > budget:
        raise BudgetExceeded(step, count, budget)
    A = sys.A_modes
    At = np.swapaxes(A, 1, 2)
    pi = sys.probs
    V = np.stack(next_values)
    PA = V[:, None] @ A[None]                      # (R, q, n, n)
    AtPA = At[None] @ PA
    out = []
    for a in range(sys.n_actions):
        B = sys.B_actions[a]
        for mu in itertools.product(range(len(next_values)), repeat=q):
            if len(set(mu)) == 1:
                # same arithmetic as the static recursion, so a one-action
                # catalog reproduces it bit for bit
                Pt = V[mu[0]]
                Abar, Phi = expected_matrices(sys, Pt)
                L = Pt @ Abar
            else:
                sel = (list(mu), list(range(q)))
                Pt = np.tensordot(pi, V[list(mu)], axes=1)
                L = np.tensordot(pi, PA[sel], axes=1)
                Phi = np.tensordot(pi, AtPA[sel], axes=1)
            K, corr = riccati_terms(B, w.R, Pt, L)
            out.append(_Candidate(a, mu, K, _symmetrize(w.M + Phi - corr)))
    return out


def _argmin_winners(values: np.ndarray, X: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Index of the smallest ``x'P_c x`` per sample, lowest index on ties."""
    best = np.full(X.shape[0], np.inf)
    arg = np.zeros(X.shape[0], dtype=int)
    for start in range(0, len(values), chunk):
        vals = np.einsum("si,cij,sj->sc", X, values[start:start + chunk], X, optimize=True)
        j = np.argmin(vals, axis=1)
        v = vals[np.arange(len(X)), j]
        better = v < best
        best[better] = v[better]
        arg[better] = start + j[better]
    return arg


def _closed_loop_constraints(sys: SwitchedSystem, cand: _Candidate,
                             next_regions: Sequence[Region]) -> list[QuadConstraint]:
    B = sys.B_actions[cand.action]
    out = []
    for s, j in enumerate(cand.mu):
        F = sys.A_modes[s] + B @ cand.K
        if not np.any(F):
            # successor is the origin whatever x is; it contributes zero cost
            continue
        for c in next_regions[j].constraints:
            out.append(QuadConstraint(_symmetrize(F.T @ c.Y @ F), c.relation))
    return out


def backward_step(sys: SwitchedSystem, w: CostWeights, next_regions: Sequence[Region],
                  *, step: int = 0, samples: np.ndarray | None = None,
                  n_samples: int = DEFAULT_SAMPLES, seed: int = 0,
                  budget: int = DEFAULT_BUDGET, last: bool = False) -> tuple[list[Region], dict]:
    """Build the step-k partition from the step-(k+1) regions.

    Returns the region list and a census dict (candidate, region and
    optimal-region counts). ``last=True`` means ``next_regions`` is the
    single unconstrained terminal region and successor maps are omitted.
    """
    w.check(sys)
    if not next_regions:
        raise ValueError("next-step partition is empty")
    cands = _candidates(sys, w, [r.value for r in next_regions], step, budget)
    values = np.stack([c.P for c in cands])
    if samples is None:
        rng = np.random.default_rng([seed, step])
        samples = sample_states(sys.n, n_samples, rng)

    winners = _argmin_winners(values, samples)
    survivors = np.unique(winners)
    log.debug("step %d: %d candidates, %d survive sampling", step, len(cands), len(survivors))

    regions: list[Region] = []
    for pos, c in enumerate(survivors):
        cand = cands[c]
        argmin = [QuadConstraint(_symmetrize(cand.P - cands[o].P), "<")
                  for o in survivors[:pos]]
        argmin += [QuadConstraint(_symmetrize(cand.P - cands[o].P), "<=")
                   for o in survivors[pos + 1:]]
        succ = None if last else tuple(cand.mu)
        succ_optimal = last or all(next_regions[j].optimal for j in cand.mu)
        gamma = [] if last else _closed_loop_constraints(sys, cand, next_regions)

        pts = samples[winners == c]
        first_fail = np.full(len(pts), -1)
        for j, g in enumerate(gamma):
            vals = np.einsum("si,ij,sj->s", pts, g.Y, pts)
            fails = (first_fail < 0) & ~_compare(vals, g.relation)
            first_fail[fails] = j
        pieces = np.unique(first_fail)

        def make(cons, optimal):
            return Region(tuple(cons), cand.action, cand.K, cand.P, optimal, succ)

        if -1 in pieces:
            regions.append(make(argmin + gamma, succ_optimal))
        for j in pieces[pieces >= 0]:
            regions.append(make(argmin + gamma[:j] + [gamma[j].negated()], False))

    if len(regions) > budget:
        raise BudgetExceeded(step, len(regions), budget, "regions")
    census = {"step": step, "candidates": len(cands), "survivors": int(len(survivors)),
              "regions": len(regions), "optimal": sum(r.optimal for r in regions)}
    return regions, census


def _terminal_region(w: CostWeights) -> Region:
    n = w.Q.shape[0]
    return Region((), -1, np.zeros((0, n)), w.Q, True)


def last_step_partition(sys: SwitchedSystem, w: CostWeights, *, n_samples: int = DEFAULT_SAMPLES,
                        seed: int = 0, budget: int = DEFAULT_BUDGET) -> list[Region]:
    """Step N-1: one region per action where that action's one-step cost is minimal."""
    regions, _ = backward_step(sys, w, [_terminal_region(w)], step=w.N - 1,
                               n_samples=n_samples, seed=seed, budget=budget, last=True)
    return regions


def solve_dynamic(sys: SwitchedSystem, w: CostWeights, *, n_samples: int = DEFAULT_SAMPLES,
                  seed: int = 0, budget: int = DEFAULT_BUDGET) -> PartitionPolicy:
    """Run the backward construction over the whole horizon ``w.N``.

    Raises:
        BudgetExceeded: a step would need more candidates or regions than
            ``budget``.
        NumericalError: ``R + B'PB`` not positive definite for some candidate.
    """
    steps: list[list[Region]] = [None] * w.N
    census = [None] * w.N
    nxt = [_terminal_region(w)]
    for k in range(w.N - 1, -1, -1):
        steps[k], census[k] = backward_step(sys, w, nxt, step=k, n_samples=n_samples,
                                            seed=seed, budget=budget, last=(k == w.N - 1))
        nxt = steps[k]
        log.info("step %d: %d regions (%d optimal)", k, census[k]["regions"],
                 census[k]["optimal"])
    return PartitionPolicy(steps, w.Q.copy(), sys.action_labels, census)


def locate(regions: Sequence[Region], X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Region index for each row of ``X`` and a fallback flag.

    States matching no region (boundary rounding, or cells the sampler never
    saw) go to the region with the smallest ``x'Px``; states matching several
    go to the lowest index. Both cases set the flag.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    hits = np.stack([r.contains(X) for r in regions], axis=1)
    count = hits.sum(axis=1)
    idx = np.argmax(hits, axis=1)
    none = count == 0
    if np.any(none):
        vals = np.einsum("si,rij,sj->sr", X[none], np.stack([r.value for r in regions]),
                         X[none], optimize=True)
        idx[none] = np.argmin(vals, axis=1)
    return idx, count != 1


def evaluate_policy(pol: PartitionPolicy, k: int, x) -> PolicyDecision:
    if not 0 <= k < pol.N:
        raise IndexError(f"step {k} outside horizon 0..{pol.N - 1}")
    x = np.asarray(x, dtype=float).reshape(1, -1)
    idx, flag = locate(pol.steps[k], x)
    r = pol.steps[k][idx[0]]
    return PolicyDecision(r.action, r.gain, r.value, r.optimal, int(idx[0]), bool(flag[0]))


def optimal_initial_set(pol: PartitionPolicy) -> list[Region]:
    return [r for r in pol.steps[0] if r.optimal]
