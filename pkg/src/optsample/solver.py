"""Belief-grid value iteration for the sampling problem.

The belief simplex is replaced by a finite grid.  For each continue action
the map pi -> sum_y V(T(pi, y, u)) sigma(pi, y, u) becomes a sparse
row-stochastic operator on grid values: with X = 2 off-grid beliefs are
linearly interpolated in pi(1); for X >= 3 they snap to the nearest lattice
point.  Sweeps are synchronous, so results do not depend on traversal order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import comb
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .costs import ActionCostVectors, build_action_costs
from .models import ModelError, SamplingModel

logger = logging.getLogger(__name__)

MAX_GRID_POINTS = 10**6
DEFAULT_RESOLUTION = {2: 1000, 3: 125}


class ConvergenceError(RuntimeError):
    def __init__(self, gap: float, iterations: int):
        super().__init__(f"value iteration did not converge after {iterations} sweeps (gap {gap:.3e})")
        self.gap = gap
        self.iterations = iterations


# ---------------------------------------------------------------------------
# Grid


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class BeliefGrid:
    """Barycentric lattice {k / divisions} on the (X-1)-simplex.

    For X = 2 the points are (p, 1 - p) with p = pi(1) ascending.
    """

    X: int
    n: int
    points: np.ndarray = field(repr=False)
    divisions: int
    _index: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def __len__(self) -> int:
        return self.size

    def _lattice_round(self, beliefs: np.ndarray) -> np.ndarray:
        """Nearest lattice compositions (integer counts summing to divisions)."""
        scaled = np.asarray(beliefs, dtype=float) * self.divisions
        k = np.rint(scaled)
        deficit = (self.divisions - k.sum(axis=1)).astype(int)
        resid = scaled - k
        if np.any(deficit != 0):
            order = np.argsort(-resid, axis=1)  # largest residual first
            for r in np.nonzero(deficit)[0]:
                dlt = deficit[r]
                if dlt > 0:
                    k[r, order[r, :dlt]] += 1
                else:
                    k[r, order[r, ::-1][: -dlt]] -= 1
        return k.astype(int)

    def nearest(self, beliefs) -> np.ndarray:
        """Index of the nearest grid point for each belief row."""
        b = np.atleast_2d(np.asarray(beliefs, dtype=float))
        k = self._lattice_round(b)
        if self.X == 2:
            return k[:, 0]
        return self._index[tuple(k[:, :-1].T)]

    def interpolation(self, beliefs) -> tuple[np.ndarray, np.ndarray]:
        """Grid indices (N, k) and weights (N, k) representing each belief."""
        b = np.atleast_2d(np.asarray(beliefs, dtype=float))
        if self.X == 2:
            x = np.clip(b[:, 0], 0.0, 1.0) * self.divisions
            lo = np.clip(np.floor(x).astype(int), 0, self.divisions - 1)
            w = x - lo
            return np.stack([lo, lo + 1], axis=1), np.stack([1.0 - w, w], axis=1)
        idx = self.nearest(b)
        return idx[:, None], np.ones((idx.size, 1))


def make_grid(X: int, n: Optional[int] = None) -> BeliefGrid:
    """Uniform belief grid.

    Args:
        X: number of states.
        n: for X = 2 the number of points including both endpoints; for
            X >= 3 the lattice subdivision, giving C(n + X - 1, X - 1) points.
    """
    if X < 2:
        raise ModelError("need X >= 2")
    if n is None:
        n = DEFAULT_RESOLUTION.get(X, 10)
    if n < 2:
        raise ModelError("grid resolution must be >= 2")
    divisions = n - 1 if X == 2 else n
    count = comb(divisions + X - 1, X - 1)
    if count > MAX_GRID_POINTS:
        raise MemoryError(f"grid with {count} points exceeds the {MAX_GRID_POINTS} point limit")
    if X == 2:
        p = np.arange(divisions + 1) / divisions
        points = np.stack([p, 1.0 - p], axis=1)
        index = np.arange(divisions + 1)
    else:
        comps = np.array(list(_compositions(divisions, X)), dtype=int)
        points = comps / divisions
        index = np.full((divisions + 1,) * (X - 1), -1, dtype=np.int64)
        index[tuple(comps[:, :-1].T)] = np.arange(len(comps))
    return BeliefGrid(X=X, n=n, points=points, divisions=divisions, _index=index)


# ---------------------------------------------------------------------------
# Operators


def transition_operators(model: SamplingModel, grid: BeliefGrid) -> list[sp.csr_matrix]:
    """P_u with (P_u V)[i] = sum_y V(T(pi_i, y, u)) sigma(pi_i, y, u), u = 1..L."""
    if grid.X != model.X:
        raise ModelError("grid and model dimensions differ")
    N = grid.size
    ops = []
    for u in range(1, model.L + 1):
        pred = grid.points @ model.interval_power(u)  # rows are (A')^{D_u} pi
        rows, cols, vals = [], [], []
        for y in range(model.Y):
            unnorm = pred * model.B[:, y]
            sigma = unnorm.sum(axis=1)
            live = sigma > 0
            post = unnorm[live] / sigma[live, None]
            idx, w = grid.interpolation(post)
            src = np.nonzero(live)[0]
            rows.append(np.repeat(src, idx.shape[1]))
            cols.append(idx.ravel())
            vals.append((w * sigma[live, None]).ravel())
        P = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
        )
        P.sum_duplicates()
        ops.append(P)
    return ops


# ---------------------------------------------------------------------------
# Value iteration


@dataclass
class Policy:
    grid: BeliefGrid
    actions: np.ndarray

    def action_at(self, pi) -> int:
        return int(self.actions[self.grid.nearest(pi)[0]])

    @property
    def stopping(self) -> np.ndarray:
        return self.actions == 0


@dataclass
class Solution:
    grid: BeliefGrid
    values: np.ndarray
    policy: Policy
    q: np.ndarray
    iterations: int
    gap: float
    history: list = field(default_factory=list, repr=False)


def _q_values(Cg: np.ndarray, ops, V: np.ndarray) -> np.ndarray:
    Q = Cg.copy()
    for u, P in enumerate(ops, start=1):
        Q[:, u] += P @ V
    return Q


def value_iterate(
    model: SamplingModel,
    costs: Optional[ActionCostVectors] = None,
    grid: Optional[BeliefGrid] = None,
    tol: float = 1e-6,
    max_iter: int = 100_000,
    ops=None,
    keep_history: bool = False,
) -> Solution:
    """Successive approximation of Bellman's equation from V_0 = 0.

    Stops once sup |V_N - V_{N-1}| < tol; the returned policy is greedy with
    respect to the final V with ties broken toward the smallest action.

    Raises:
        ConvergenceError: if ``max_iter`` sweeps do not reach ``tol``.
    """
    if tol <= 0:
        raise ModelError("tol must be positive")
    costs = costs if costs is not None else build_action_costs(model)
    grid = grid if grid is not None else make_grid(model.X)
    ops = ops if ops is not None else transition_operators(model, grid)
    Cg = costs.on(grid.points)
    V = np.zeros(grid.size)
    history = []
    gap = np.inf
    for it in range(1, max_iter + 1):
        Vn = _q_values(Cg, ops, V).min(axis=1)
        gap = float(np.max(np.abs(Vn - V)))
        if keep_history:
            history.append(Vn)
        V = Vn
        if gap < tol:
            break
    else:
        raise ConvergenceError(gap, max_iter)
    Q = _q_values(Cg, ops, V)
    actions = np.argmin(Q, axis=1)
    logger.debug("value iteration converged in %d sweeps (gap %.3e)", it, gap)
    return Solution(grid, V, Policy(grid, actions), Q, it, gap, history)


def policy_evaluate(
    model: SamplingModel,
    policy: Policy,
    costs: Optional[ActionCostVectors] = None,
    tol: float = 1e-10,
    max_iter: int = 1_000_000,
    ops=None,
) -> np.ndarray:
    """Cost J_mu on the grid of a fixed grid policy (argmin replaced by the policy)."""
    grid = policy.grid
    costs = costs if costs is not None else build_action_costs(model)
    ops = ops if ops is not None else transition_operators(model, grid)
    Cg = costs.on(grid.points)
    N = grid.size
    a = policy.actions
    c = Cg[np.arange(N), a]
    rows = []
    for u, P in enumerate(ops, start=1):
        mask = sp.diags((a == u).astype(float))
        rows.append(mask @ P)
    P_mu = sum(rows).tocsr()
    J = np.zeros(N)
    for _ in range(max_iter):
        Jn = c + P_mu @ J
        gap = float(np.max(np.abs(Jn - J)))
        J = Jn
        if gap < tol:
            return J
    raise ConvergenceError(gap, max_iter)


# ---------------------------------------------------------------------------
# Structure of the solution


@dataclass
class ThresholdSet:
    """pi(1) thresholds: mu = u on [pi*_{u+1}, pi*_u), stop on [pi*_1, 1]."""

    thresholds: list
    monotone: bool


def extract_thresholds(policy: Policy) -> ThresholdSet:
    """Threshold representation of an X = 2 policy, if it is monotone.

    A monotone policy is nonincreasing in pi(1).  Threshold u sits halfway
    between the last grid point with action >= u and the next one; it is 0
    when no point uses an action >= u and 1 when every point does.
    """
    grid = policy.grid
    if grid.X != 2:
        raise ModelError("thresholds are defined for X = 2")
    a = policy.actions
    monotone = bool(np.all(np.diff(a) <= 0))
    if not monotone:
        return ThresholdSet([], False)
    p = grid.points[:, 0]
    L = int(max(a.max(), 1))
    out = []
    for u in range(1, L + 1):
        at_least = np.nonzero(a >= u)[0]
        if at_least.size == 0:
            out.append(0.0)
        elif at_least[-1] == len(a) - 1:
            out.append(1.0)
        else:
            last = at_least[-1]
            out.append(0.5 * (p[last] + p[last + 1]))
    return ThresholdSet(out, True)


@dataclass
class StoppingSetReport:
    members: np.ndarray
    convex: bool
    contains_target: bool
    interval: Optional[tuple] = None
    violations: int = 0


def analyze_stopping_set(policy: Policy, chunk: int = 512) -> StoppingSetReport:
    """Convexity of the stopping region on the grid.

    X = 2: the stopping points must be one contiguous run ending at pi(1) = 1.
    X >= 3: for every pair of stopping points the grid point nearest their
    midpoint must also stop; a midpoint equidistant from several lattice
    points passes if any of them stops.
    """
    grid = policy.grid
    members = policy.actions == 0
    target = int(np.argmax(grid.points[:, 0]))
    contains_target = bool(members[target])
    idx = np.nonzero(members)[0]
    if idx.size == 0:
        return StoppingSetReport(members, True, False, None, 0)
    if grid.X == 2:
        contiguous = bool(idx[-1] - idx[0] + 1 == idx.size)
        p = grid.points[:, 0]
        return StoppingSetReport(members, contiguous, contains_target,
                                 (float(p[idx[0]]), float(p[idx[-1]])),
                                 0 if contiguous else int(idx[-1] - idx[0] + 1 - idx.size))
    comps = np.rint(grid.points[idx] * grid.divisions).astype(np.int64)
    X = grid.X
    # subsets of coordinates rounded up when a midpoint has half-integer entries
    patterns = [np.array([(mask >> j) & 1 for j in range(X)], dtype=np.int64) for mask in range(1 << X)]
    violations = 0
    for start in range(0, idx.size, chunk):
        total = (comps[start:start + chunk, None, :] + comps[None, :, :]).reshape(-1, X)
        odd = total % 2
        base = total // 2
        need = odd.sum(axis=1) // 2
        ok = np.zeros(total.shape[0], dtype=bool)
        for pat in patterns:
            valid = np.all(pat <= odd, axis=1) & (pat.sum() == need)
            if not np.any(valid):
                continue
            cand = base[valid] + pat
            ok[np.nonzero(valid)[0]] |= members[grid._index[tuple(cand[:, :-1].T)]]
        violations += int(np.count_nonzero(~ok))
    return StoppingSetReport(members, violations == 0, contains_target, None, violations)
