"""Assumption checks, myopic bound policies and filter-dominance probes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .costs import (
    ActionCostVectors,
    a7_alpha,
    build_action_costs,
    transform_bar,
    transform_underline,
)
from .models import (
    ModelError,
    SamplingModel,
    fosd_compare,
    mlr_compare,
    predict,
    tp2_violation,
    transition_order_geq,
    transition_order_violation,
)
from .solver import BeliefGrid, Policy, Solution

PASS, FAIL, NA, PENDING = "pass", "fail", "not-applicable", "pending"
TOL = 1e-12


@dataclass
class Verdict:
    status: str
    applicable: bool = True
    witness: Optional[tuple] = None
    margin: Optional[float] = None
    note: str = ""

    def to_dict(self) -> dict:
        return {"status": self.status, "applicable": self.applicable,
                "witness": list(self.witness) if self.witness else None,
                "margin": self.margin, "note": self.note}


@dataclass
class AssumptionReport:
    verdicts: dict = field(default_factory=dict)

    def __getitem__(self, key: str) -> Verdict:
        return self.verdicts[key]

    @property
    def passed(self) -> bool:
        """No applicable assumption failed (pending checks do not count)."""
        return not any(v.status == FAIL for v in self.verdicts.values() if v.applicable)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "assumptions": {k: v.to_dict() for k, v in self.verdicts.items()}}

    def record_solution(self, solution: Solution) -> None:
        """Fill in A1(ii): the target belief e_1 must be in the stopping set."""
        grid = solution.grid
        target = int(np.argmax(grid.points[:, 0]))
        stops = bool(solution.policy.actions[target] == 0)
        old = self.verdicts.get("A1(ii)")
        self.verdicts["A1(ii)"] = Verdict(PASS if stops else FAIL, old.applicable if old else True,
                                          None if stops else (1,), None, "checked on the solved policy")


def _from_violation(found, note="") -> Verdict:
    if found is None:
        return Verdict(PASS, note=note)
    witness, margin = found
    return Verdict(FAIL, witness=tuple(witness), margin=margin, note=note)


def _increasing_violation(C: np.ndarray, tol: float):
    """First (u, i) with C[u, i+1] < C[u, i] - tol (1-based state index)."""
    diffs = np.diff(C, axis=1)
    bad = np.argwhere(diffs < -tol)
    if bad.size:
        u, i = bad[0]
        return (int(u), int(i) + 1), float(diffs[u, i])
    return None


def _submodular_violation(C: np.ndarray, tol: float):
    """A4: C(e_i,u+1) - C(e_i,u) nonincreasing in i for u = 1..L-1."""
    cont = C[1:]
    step = np.diff(cont, axis=0)  # step[u-1, i] = C(e_i,u+1) - C(e_i,u)
    growth = np.diff(step, axis=1)
    bad = np.argwhere(growth > tol)
    if bad.size:
        u, i = bad[0]
        return (int(u) + 1, int(i) + 1), float(-growth[u, i])
    return None


def _a5_violation(model: SamplingModel, tol: float):
    """A5(i): tail sums of A^{D_{u+1}} - A^{D_u} nonincreasing in the row index."""
    for u in range(1, model.L):
        delta = model.interval_power(u + 1) - model.interval_power(u)
        tails = np.cumsum(delta[:, ::-1], axis=1)[:, ::-1]
        growth = np.diff(tails, axis=0)
        bad = np.argwhere(growth > tol)
        if bad.size:
            i, q = bad[0]
            return (u, int(i) + 1, int(q) + 1), float(-growth[i, q])
    return None


def _a5ii_violation(model: SamplingModel, tol: float):
    for (r, c) in ((1, 1), (0, 1)):
        seq = np.array([model.interval_power(u)[r, c] for u in range(1, model.L + 1)])
        bad = np.nonzero(np.diff(seq) > tol)[0]
        if bad.size:
            return (r + 1, c + 1, int(bad[0]) + 1), float(-np.diff(seq)[bad[0]])
    return None


def _a7ii_violation(model: SamplingModel, alpha: float, tol: float):
    """sum_{l=1}^{D_u-1} A^l[i,1] + alpha (A[i,1] - A^{D_u+1}[i,1]) nonincreasing in i >= 2."""
    for u, D in enumerate(model.intervals, start=1):
        g = sum((model.power(l)[:, 0] for l in range(1, D)), np.zeros(model.X))
        g = g + alpha * (model.A[:, 0] - model.power(D + 1)[:, 0])
        growth = np.diff(g[1:])
        bad = np.nonzero(growth > tol)[0]
        if bad.size:
            return (u, int(bad[0]) + 2), float(-growth[bad[0]])
    return None


def applicable_assumptions(model: SamplingModel) -> set:
    quickest = model.costs is not None and model.costs.quickest
    if model.X == 2:
        names = {"A1(i)", "A1(ii)", "A2", "A3", "A4", "A5(i)", "A5(ii)"}
        if quickest:
            names |= {"A6", "A7(i)", "A7(ii)"}
        return names
    if quickest:
        return {"A1(ii)", "A2", "A3", "A6", "A7(i)", "A7(ii)"}
    return {"A1(i)", "A1(ii)", "A2", "A3", "A6"}


def check_assumptions(model: SamplingModel, costs: Optional[ActionCostVectors] = None,
                      alpha: Optional[float] = None, tol: float = TOL) -> AssumptionReport:
    """Evaluate A1-A7 by finite index scans.

    For two-state quickest-detection models A1(i) and A4 are judged on the
    transform_underline costs (default alpha), which leave the optimal policy
    unchanged.  A1(ii) stays pending until :meth:`AssumptionReport.record_solution`.
    ``alpha`` feeds A7 and defaults to f / (d (1 - A_21)).
    """
    costs = costs if costs is not None else build_action_costs(model)
    quickest = model.costs is not None and model.costs.quickest
    use = applicable_assumptions(model)
    rep = AssumptionReport()

    cost_note = ""
    C = costs.C
    if quickest and model.X == 2 and model.is_ph():
        try:
            C = transform_underline(costs, model).C
            cost_note = "on transformed costs (default alpha)"
        except ZeroDivisionError:
            cost_note = "chain never jumps; raw costs"
    rep.verdicts["A1(i)"] = _from_violation(_increasing_violation(C, tol), cost_note)
    rep.verdicts["A1(ii)"] = Verdict(PENDING, note="needs a solved policy")
    rep.verdicts["A2"] = _from_violation(tp2_violation(model.A, tol))
    rep.verdicts["A3"] = _from_violation(tp2_violation(model.B, tol))
    rep.verdicts["A4"] = _from_violation(_submodular_violation(C, tol), cost_note)
    rep.verdicts["A5(i)"] = _from_violation(_a5_violation(model, tol))
    rep.verdicts["A5(ii)"] = _from_violation(_a5ii_violation(model, tol))
    rep.verdicts["A6"] = _from_violation(transition_order_violation(model.A, model.A @ model.A, tol))

    if quickest and model.is_ph():
        floor = a7_alpha(model)
        a = floor if alpha is None else float(alpha)
        ok = a >= floor * (1 - 1e-12)
        rep.verdicts["A7(i)"] = Verdict(PASS if ok else FAIL, witness=None if ok else (1,),
                                        margin=a - floor, note=f"alpha={a:.12g}, floor={floor:.12g}")
        rep.verdicts["A7(ii)"] = _from_violation(_a7ii_violation(model, a, tol), f"alpha={a:.12g}")
    else:
        rep.verdicts["A7(i)"] = Verdict(NA, note="needs quickest-detection costs")
        rep.verdicts["A7(ii)"] = Verdict(NA, note="needs quickest-detection costs")

    for name, v in rep.verdicts.items():
        v.applicable = name in use
    return rep


# ---------------------------------------------------------------------------
# Myopic policies


def myopic_stop_set(costs: ActionCostVectors, grid: BeliefGrid) -> np.ndarray:
    """Beliefs with C(pi, 0) < C(pi, u) for every continue action (strict)."""
    Cg = costs.on(grid.points)
    return np.all(Cg[:, :1] < Cg[:, 1:], axis=1)


def myopic_lower(costs: ActionCostVectors, grid: BeliefGrid) -> Policy:
    """argmin_u C(pi, u) over all L+1 actions, ties to the smallest index."""
    return Policy(grid, np.argmin(costs.on(grid.points), axis=1))


def myopic_upper(model: SamplingModel, costs: ActionCostVectors, grid: BeliefGrid,
                 alpha: float) -> Policy:
    """Upper-bound policy from the transformed continue costs.

    Stops on the strict myopic stopping set and otherwise takes
    argmin_{u >= 1} of the alpha-transformed costs.

    Raises:
        ModelError: if alpha is below f / (d (1 - A_21)).
    """
    floor = a7_alpha(model)
    if alpha < floor * (1 - 1e-12):
        raise ModelError(f"alpha={alpha} violates alpha >= f/(d(1-A21)) = {floor}")
    bar = transform_bar(costs, model, alpha).on(grid.points)
    actions = 1 + np.argmin(bar[:, 1:], axis=1)
    actions[myopic_stop_set(costs, grid)] = 0
    return Policy(grid, actions)


@dataclass
class BoundVerdict:
    violations: np.ndarray
    subset_violations: np.ndarray

    @property
    def violation_count(self) -> int:
        return int(self.violations.size)

    @property
    def subset_ok(self) -> bool:
        return self.subset_violations.size == 0

    @property
    def passed(self) -> bool:
        return self.violation_count == 0 and self.subset_ok


def verify_policy_bounds(optimal: Policy, myopic: Policy, direction: str,
                         mask: Optional[np.ndarray] = None,
                         myopic_stop: Optional[np.ndarray] = None) -> BoundVerdict:
    """Pointwise check of mu* >= myopic (``lower``) or myopic >= mu* (``upper``).

    Points where ``mask`` is true are skipped.  If ``myopic_stop`` is given,
    every point in it must also stop under the optimal policy.
    """
    if optimal.grid is not myopic.grid and optimal.actions.shape != myopic.actions.shape:
        raise ModelError("policies live on different grids")
    a, b = optimal.actions, myopic.actions
    if direction == "lower":
        bad = a < b
    elif direction == "upper":
        bad = b < a
    else:
        raise ValueError("direction must be 'lower' or 'upper'")
    if mask is not None:
        bad &= ~mask
    sub = np.zeros_like(bad) if myopic_stop is None else myopic_stop & (a != 0)
    return BoundVerdict(np.nonzero(bad)[0], np.nonzero(sub)[0])


# ---------------------------------------------------------------------------
# Filter dominance probes


def random_tp2(rng: np.random.Generator, rows: int, cols: int, tries: int = 10_000,
               tol: float = TOL) -> np.ndarray:
    """Random row-stochastic TP2 matrix by rejection sampling.

    Each row is a positive vector tilted by an increasing geometric factor
    (cumulative product of ratios >= 1), so likelihood ratios tend to
    increase down the rows; candidates failing the minor check are redrawn.
    """
    for _ in range(tries):
        base = rng.gamma(2.0, size=cols) + 0.05
        tilt = np.cumprod(1.0 + rng.exponential(1.0, size=rows))
        tilt = tilt / tilt[0]
        M = base[None, :] * tilt[:, None] ** np.arange(cols)[None, :]
        M = M * rng.uniform(0.5, 1.5, size=(rows, cols)) ** 0.2
        if rng.random() < 0.3:
            M[rng.random(size=M.shape) < 0.15] = 0.0
        M = M[:, :] / np.maximum(M.sum(axis=1, keepdims=True), 1e-300)
        if np.all(M.sum(axis=1) > 0) and tp2_violation(M, tol) is None:
            return M
    raise RuntimeError("could not draw a TP2 matrix")


def random_belief(rng: np.random.Generator, X: int) -> np.ndarray:
    p = rng.dirichlet(np.full(X, 0.7))
    if rng.random() < 0.1:
        p[rng.integers(X)] = 0.0
        p = p / p.sum() if p.sum() > 0 else np.full(X, 1.0 / X)
    return p


def mlr_pair(rng: np.random.Generator, X: int) -> tuple[np.ndarray, np.ndarray]:
    """(pi1, pi2) with pi1 >=_r pi2, built by an increasing likelihood tilt."""
    p2 = random_belief(rng, X)
    lik = np.cumprod(np.concatenate([[1.0], 1.0 + rng.exponential(1.0, size=X - 1)]))
    p1 = p2 * lik
    return p1 / p1.sum(), p2


def dominated_transition(rng: np.random.Generator, Abar: np.ndarray, tries: int = 200) -> Optional[np.ndarray]:
    """A with A >= Abar, from Abar by a diagonal tilt toward higher states."""
    X = Abar.shape[0]
    for _ in range(tries):
        t = np.cumprod(np.concatenate([[1.0], 1.0 + rng.exponential(2.0, size=X - 1)]))
        A = Abar * t[None, :]
        A /= A.sum(axis=1, keepdims=True)
        if transition_order_geq(A, Abar, 1e-12):
            return A
    return None


DEFAULT_PARTS = ("1", "2", "3", "4", "5a", "5b", "6a", "6b")


@dataclass
class ProbeReport:
    trials: dict = field(default_factory=dict)
    violations: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)

    @property
    def total_violations(self) -> int:
        return sum(len(v) for v in self.violations.values())

    def summary(self) -> dict:
        return {p: {"trials": self.trials.get(p, 0), "violations": len(self.violations.get(p, [])),
                    "skipped": self.skipped.get(p, 0)} for p in self.trials}


def _sigma(pi, A, B, D):
    return B.T @ (np.linalg.matrix_power(A, D).T @ pi)


def _filt(pi, A, B, D, y):
    un = B[:, y] * (np.linalg.matrix_power(A, D).T @ pi)
    s = un.sum()
    return None if s <= 0 else un / s


def _probe_once(part: str, rng: np.random.Generator, X: int, tol: float) -> Optional[bool]:
    """One randomized check of a filter property; None if the trial is vacuous."""
    Y = int(rng.integers(2, 5))
    A = random_tp2(rng, X, X)
    if part == "1":
        B = rng.dirichlet(np.ones(Y), size=X)  # only A needs to be TP2 here
    else:
        B = random_tp2(rng, X, Y)
    D = int(rng.integers(1, 4))
    if part == "1":
        p1, p2 = mlr_pair(rng, X)
        y = int(rng.integers(Y))
        t1, t2 = _filt(p1, A, B, D, y), _filt(p2, A, B, D, y)
        if t1 is None or t2 is None:
            return None
        return mlr_compare(t1, t2, tol).geq()
    if part == "2":
        p1, p2 = mlr_pair(rng, X)
        return fosd_compare(_sigma(p1, A, B, D), _sigma(p2, A, B, D), tol).geq()
    if part == "3":
        D1 = int(rng.integers(1, 3))
        D2 = D1 + int(rng.integers(1, 3))
        delta = np.linalg.matrix_power(A, D2) - np.linalg.matrix_power(A, D1)
        tails = np.cumsum(delta[:, ::-1], axis=1)[:, ::-1]
        if np.any(np.diff(tails, axis=0) > tol):
            return None  # A5(i) fails for this draw
        p1, p2 = mlr_pair(rng, X)
        d1 = _sigma(p1, A, B, D2) - _sigma(p1, A, B, D1)
        d2 = _sigma(p2, A, B, D2) - _sigma(p2, A, B, D1)
        t1 = np.cumsum(d1[::-1])[::-1]
        t2 = np.cumsum(d2[::-1])[::-1]
        return bool(np.all(t1 <= t2 + tol))
    if part == "4":
        pi = random_belief(rng, X)
        y2, y1 = sorted(rng.choice(Y, size=2, replace=False))
        hi, lo = _filt(pi, A, B, D, y1), _filt(pi, A, B, D, y2)
        if hi is None or lo is None:
            return None
        return mlr_compare(hi, lo, tol).geq()
    Abar = A
    A_hi = dominated_transition(rng, Abar)
    if A_hi is None:
        return None
    pi = random_belief(rng, X)
    if part == "5a":
        return mlr_compare(predict(pi, A_hi, 1), predict(pi, Abar, 1), tol).geq()
    if part == "5b":
        if tp2_violation(A_hi, TOL) is not None:
            return None
        l = int(rng.integers(1, 6))
        return mlr_compare(predict(pi, A_hi, l), predict(pi, Abar, l), tol).geq()
    if part == "6a":
        if D > 1 and tp2_violation(A_hi, TOL) is not None:
            return None
        y = int(rng.integers(Y))
        t1, t2 = _filt(pi, A_hi, B, D, y), _filt(pi, Abar, B, D, y)
        if t1 is None or t2 is None:
            return None
        return mlr_compare(t1, t2, tol).geq()
    if part == "6b":
        if D > 1 and tp2_violation(A_hi, TOL) is not None:
            return None
        return fosd_compare(_sigma(pi, A_hi, B, D), _sigma(pi, Abar, B, D), tol).geq()
    raise ValueError(f"unknown part {part!r}")


def filter_dominance_probe(trials: int = 1000, seed: int = 42, parts=DEFAULT_PARTS,
                           dims=(2, 3), tol: float = 1e-10) -> ProbeReport:
    """Randomized falsification of the filter dominance properties.

    Every trial draws fresh TP2 matrices and MLR-ordered beliefs from its own
    seed, ``(seed, part index, trial)``, recorded with each violation.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rep = ProbeReport()
    for pi_, part in enumerate(parts):
        rep.trials[part] = 0
        rep.violations[part] = []
        rep.skipped[part] = 0
        k = 0
        attempts = 0
        while k < trials and attempts < 50 * trials:
            rng = np.random.default_rng([seed, pi_, attempts])
            X = int(dims[attempts % len(dims)])
            attempts += 1
            ok = _probe_once(part, rng, X, tol)
            if ok is None:
                rep.skipped[part] += 1
                continue
            k += 1
            if not ok:
                rep.violations[part].append((seed, pi_, attempts - 1))
        rep.trials[part] = k
    return rep
