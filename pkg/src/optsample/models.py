"""Core model types, the HMM filter, phase-type change times and stochastic orders.

Beliefs are plain 1-D numpy arrays on the probability simplex; states and
observations are 0-based internally (state 1 of the literature is index 0).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .simplex import solve_feasibility

SUM_TOL = 1e-12
ORDER_TOL = 1e-12


class ModelError(ValueError):
    """Raised for invalid model parameters."""


class ZeroLikelihoodError(ValueError):
    """The observation has zero probability under the predicted belief."""


class StructureError(ValueError):
    """The transition matrix lacks the required phase-type structure."""


def as_belief(pi: Sequence[float], tol: float = SUM_TOL) -> np.ndarray:
    """Validate and return ``pi`` as a float belief vector."""
    p = np.asarray(pi, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise ModelError(f"belief must be a vector with at least 2 entries, got shape {p.shape}")
    if np.any(p < -tol) or np.any(p > 1 + tol):
        raise ModelError(f"belief entries must lie in [0, 1]: {p}")
    if abs(p.sum() - 1.0) > max(tol, 1e-12):
        raise ModelError(f"belief must sum to 1 (sum={p.sum()!r})")
    return p


def unit(i: int, X: int) -> np.ndarray:
    """Unit belief e_i (0-based ``i``)."""
    e = np.zeros(X)
    e[i] = 1.0
    return e


def _check_stochastic(M: np.ndarray, name: str, tol: float = SUM_TOL) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ModelError(f"{name} must be a 2-D matrix")
    if np.any(M < -tol) or np.any(M > 1 + tol):
        raise ModelError(f"{name} entries must lie in [0, 1]")
    bad = np.abs(M.sum(axis=1) - 1.0) > tol
    if np.any(bad):
        raise ModelError(f"{name} row {int(np.argmax(bad)) + 1} does not sum to 1")
    return M


def check_transition_matrix(A) -> np.ndarray:
    A = _check_stochastic(A, "transition matrix")
    if A.shape[0] != A.shape[1] or A.shape[0] < 2:
        raise ModelError(f"transition matrix must be square with X >= 2, got {A.shape}")
    return A


# ---------------------------------------------------------------------------
# Observation models


@dataclass(frozen=True)
class ObservationModel:
    """Finite observation kernel, possibly produced by discretizing a density.

    ``matrix`` is the effective X x Y row-stochastic matrix every downstream
    computation uses; ``params`` keeps the generating parameters so two
    continuous models can be re-discretized onto a common grid.
    """

    kind: str
    matrix: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        M = _check_stochastic(self.matrix, "observation matrix")
        if M.shape[1] < 1:
            raise ModelError("observation matrix needs at least one column")
        object.__setattr__(self, "matrix", M)

    @property
    def X(self) -> int:
        return self.matrix.shape[0]

    @property
    def Y(self) -> int:
        return self.matrix.shape[1]


def discrete_observations(B) -> ObservationModel:
    return ObservationModel("discrete", np.asarray(B, dtype=float), {"matrix": np.asarray(B, float).tolist()})


def gaussian_observations(
    means: Sequence[float],
    variances: Sequence[float],
    nodes: int = 101,
    span: float = 5.0,
    lo: Optional[float] = None,
    hi: Optional[float] = None,
) -> ObservationModel:
    """Discretize per-state Gaussian densities onto ``nodes`` equispaced cells.

    The grid covers [min mean - span*max sd, max mean + span*max sd] unless
    explicit ``lo``/``hi`` are given; each node gets the probability mass of
    its cell and rows are renormalized.
    """
    means = np.asarray(means, dtype=float)
    variances = np.asarray(variances, dtype=float)
    if means.shape != variances.shape or means.ndim != 1:
        raise ModelError("means and variances must be vectors of equal length")
    if np.any(variances <= 0):
        raise ModelError("invalid-parameter: Gaussian variances must be positive")
    if nodes < 2:
        raise ModelError("invalid-grid: need at least 2 discretization nodes")
    sd = np.sqrt(variances)
    if lo is None:
        lo = float(means.min() - span * sd.max())
    if hi is None:
        hi = float(means.max() + span * sd.max())
    y = np.linspace(lo, hi, nodes)
    h = y[1] - y[0]
    edges = np.concatenate([y - h / 2, [y[-1] + h / 2]])
    cdf = stats.norm.cdf(edges[None, :], loc=means[:, None], scale=sd[:, None])
    mass = np.diff(cdf, axis=1)
    mass /= mass.sum(axis=1, keepdims=True)
    params = {"means": means.tolist(), "variances": variances.tolist(), "nodes": nodes,
              "span": span, "lo": lo, "hi": hi}
    return ObservationModel("gaussian", mass, params)


def poisson_observations(rates: Sequence[float], tail: float = 1e-10,
                         support: Optional[int] = None) -> ObservationModel:
    """Shifted Poisson kernel B[x, y-1] = rate^(y-1) e^-rate / (y-1)!, y = 1, 2, ...

    Truncated at the first support size whose tail mass is below ``tail`` for
    every state (or at ``support`` if given), then renormalized.
    """
    rates = np.asarray(rates, dtype=float)
    if np.any(rates <= 0):
        raise ModelError("invalid-parameter: Poisson rates must be positive")
    if support is None:
        support = 1
        while np.max(stats.poisson.sf(support - 1, rates)) >= tail:
            support += 1
    k = np.arange(support)
    mass = stats.poisson.pmf(k[None, :], rates[:, None])
    mass /= mass.sum(axis=1, keepdims=True)
    return ObservationModel("poisson", mass, {"rates": rates.tolist(), "tail": tail, "support": support})


def discretize_observations(kind: str, **params) -> ObservationModel:
    """Build an :class:`ObservationModel` from a kind tag and its parameters."""
    if kind == "discrete":
        return discrete_observations(params["matrix"])
    if kind == "gaussian":
        return gaussian_observations(**params)
    if kind == "poisson":
        return poisson_observations(**params)
    raise ModelError(f"unknown observation kind {kind!r}")


# ---------------------------------------------------------------------------
# Sampling model


@dataclass(frozen=True)
class SamplingModel:
    """theta = (A, B) together with sampling intervals and the cost spec."""

    A: np.ndarray
    obs: ObservationModel
    intervals: tuple
    costs: object = None  # costs.CostSpec; kept untyped to avoid an import cycle

    def __post_init__(self):
        A = check_transition_matrix(self.A)
        object.__setattr__(self, "A", A)
        if isinstance(self.obs, ObservationModel):
            obs = self.obs
        else:
            obs = discrete_observations(self.obs)
            object.__setattr__(self, "obs", obs)
        if obs.X != A.shape[0]:
            raise ModelError(f"observation model has {obs.X} rows, transition matrix has {A.shape[0]}")
        D = tuple(int(d) for d in self.intervals)
        if len(D) < 1:
            raise ModelError("need at least one sampling interval")
        if any(d <= 0 for d in D) or any(b <= a for a, b in zip(D, D[1:])):
            raise ModelError(f"intervals must be strictly increasing positive integers: {D}")
        object.__setattr__(self, "intervals", D)

    @property
    def X(self) -> int:
        return self.A.shape[0]

    @property
    def Y(self) -> int:
        return self.obs.Y

    @property
    def L(self) -> int:
        return len(self.intervals)

    @property
    def B(self) -> np.ndarray:
        return self.obs.matrix

    def power(self, k: int) -> np.ndarray:
        """A^k, cached up to max(D) + 1."""
        if k < len(self._powers):
            return self._powers[k]
        return np.linalg.matrix_power(self.A, k)

    @cached_property
    def _powers(self) -> list:
        out = [np.eye(self.X)]
        for _ in range(max(self.intervals) + 1):
            out.append(out[-1] @ self.A)
        return out

    def interval_power(self, u: int) -> np.ndarray:
        """A^{D_u} for a continue action u in 1..L."""
        return self.power(self.intervals[u - 1])

    def with_costs(self, costs) -> "SamplingModel":
        return SamplingModel(self.A, self.obs, self.intervals, costs)

    def with_observations(self, obs: ObservationModel) -> "SamplingModel":
        return SamplingModel(self.A, obs, self.intervals, self.costs)

    def is_ph(self, tol: float = SUM_TOL) -> bool:
        """True if state 1 (index 0) is absorbing."""
        return bool(np.all(np.abs(self.A[0] - unit(0, self.X)) <= tol))


# ---------------------------------------------------------------------------
# Filter and predictor


def predict(pi, A, l: int = 1) -> np.ndarray:
    """l-step predictor (A')^l pi."""
    if l < 1:
        raise ModelError("prediction horizon must be a positive integer")
    A = np.asarray(A, dtype=float)
    return np.linalg.matrix_power(A, l).T @ np.asarray(pi, dtype=float)


def filter_update(pi, y: int, u: int, model: SamplingModel) -> tuple[np.ndarray, float]:
    """Bayesian update T(pi, y, u) and its normalization sigma(pi, y, u).

    Args:
        pi: current belief.
        y: 0-based observation index.
        u: continue action in 1..L; the prediction uses A^{D_u}.
        model: the sampling model.

    Raises:
        ZeroLikelihoodError: if sigma(pi, y, u) = 0.
    """
    if not 1 <= u <= model.L:
        raise ModelError(f"action {u} is not a continue action in 1..{model.L}")
    if not 0 <= y < model.Y:
        raise ModelError(f"observation index {y} outside 0..{model.Y - 1}")
    unnorm = model.B[:, y] * (model.interval_power(u).T @ np.asarray(pi, dtype=float))
    sigma = float(unnorm.sum())
    if sigma <= 0.0:
        raise ZeroLikelihoodError(f"observation {y} impossible under action {u}")
    return unnorm / sigma, sigma


def observation_likelihoods(pi, u: int, model: SamplingModel) -> np.ndarray:
    """Vector (sigma(pi, y, u))_y over all observations."""
    return model.B.T @ (model.interval_power(u).T @ np.asarray(pi, dtype=float))


# ---------------------------------------------------------------------------
# Phase-type change time


def change_time_pmf(A, pi0, t: int, tol: float = SUM_TOL) -> float:
    """P(t* = t) for the absorbing chain A started from pi0."""
    A = np.asarray(A, dtype=float)
    pi0 = np.asarray(pi0, dtype=float)
    X = A.shape[0]
    if np.any(np.abs(A[0] - unit(0, X)) > tol):
        raise StructureError("state 1 must be absorbing for a phase-type change time")
    if t < 0:
        raise ModelError("change time must be nonnegative")
    if t == 0:
        return float(pi0[0])
    Abar = A[1:, 1:]
    Aund = A[1:, 0]
    return float(pi0[1:] @ np.linalg.matrix_power(Abar, t - 1) @ Aund)


# ---------------------------------------------------------------------------
# Stochastic orders


class OrderVerdict(enum.Enum):
    GREATER = "greater"
    LESS = "less"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"

    def geq(self) -> bool:
        return self in (OrderVerdict.GREATER, OrderVerdict.EQUAL)


def _verdict(geq: bool, leq: bool) -> OrderVerdict:
    if geq and leq:
        return OrderVerdict.EQUAL
    if geq:
        return OrderVerdict.GREATER
    if leq:
        return OrderVerdict.LESS
    return OrderVerdict.INCOMPARABLE


def _pair(p1, p2):
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if p1.shape != p2.shape:
        raise ModelError(f"dimension mismatch: {p1.shape} vs {p2.shape}")
    return p1, p2


def mlr_compare(p1, p2, tol: float = ORDER_TOL) -> OrderVerdict:
    """Monotone likelihood ratio comparison of two beliefs."""
    p1, p2 = _pair(p1, p2)
    # cross[i, j] = p1(i) p2(j) - p2(i) p1(j); p1 >=_r p2 iff cross <= 0 for i < j
    cross = np.outer(p1, p2) - np.outer(p2, p1)
    upper = cross[np.triu_indices(p1.size, k=1)]
    return _verdict(bool(np.all(upper <= tol)), bool(np.all(upper >= -tol)))


def fosd_compare(p1, p2, tol: float = ORDER_TOL) -> OrderVerdict:
    """First-order stochastic dominance via upper tail sums."""
    p1, p2 = _pair(p1, p2)
    t1 = np.cumsum(p1[::-1])[::-1]
    t2 = np.cumsum(p2[::-1])[::-1]
    return _verdict(bool(np.all(t1 >= t2 - tol)), bool(np.all(t1 <= t2 + tol)))


def tp2_violation(M, tol: float = ORDER_TOL):
    """First 2x2 minor below -tol as ((i, j, i', j') 1-based, value), or None."""
    M = np.asarray(M, dtype=float)
    rows, cols = M.shape
    for i in range(rows - 1):
        for k in range(i + 1, rows):
            # minors[j, l] = M[i,j] M[k,l] - M[i,l] M[k,j], need j < l
            minors = M[i][:, None] * M[k][None, :] - M[i][None, :] * M[k][:, None]
            iu = np.triu_indices(cols, k=1)
            vals = minors[iu]
            bad = np.nonzero(vals < -tol)[0]
            if bad.size:
                b = bad[0]
                return (i + 1, int(iu[0][b]) + 1, k + 1, int(iu[1][b]) + 1), float(vals[b])
    return None


def is_tp2(M, tol: float = ORDER_TOL) -> bool:
    """True iff every 2x2 minor of M is >= -tol."""
    return tp2_violation(M, tol) is None


def transition_order_violation(A1, A2, tol: float = ORDER_TOL):
    """First (i, j, m) (1-based) breaking A1 >= A2 in the copositive order, or None."""
    A1 = np.asarray(A1, dtype=float)
    A2 = np.asarray(A2, dtype=float)
    if A1.shape != A2.shape:
        raise ModelError("transition matrices must have equal dimensions")
    X = A1.shape[0]
    for j in range(X - 1):
        # lhs[i, m] = A1[i,j] A2[m,j+1], rhs[i, m] = A2[i,j] A1[m,j+1]
        lhs = np.outer(A1[:, j], A2[:, j + 1])
        rhs = np.outer(A2[:, j], A1[:, j + 1])
        bad = np.argwhere(lhs > rhs + tol)
        if bad.size:
            i, m = bad[0]
            return (int(i) + 1, j + 1, int(m) + 1), float(rhs[i, m] - lhs[i, m])
    return None


def transition_order_geq(A1, A2, tol: float = ORDER_TOL) -> bool:
    """A1 >= A2: A1[i,j] A2[m,j+1] <= A2[i,j] A1[m,j+1] for all i, m, j."""
    return transition_order_violation(A1, A2, tol) is None


@dataclass
class BlackwellResult:
    holds: bool
    kernel: Optional[np.ndarray]
    residual: float

    def __bool__(self) -> bool:
        return self.holds


def blackwell_geq(Bbar, B, tol: float = 1e-9) -> BlackwellResult:
    """Test Bbar = B R for some row-stochastic kernel R (Bbar is a garbling of B).

    Solved as a phase-1 linear feasibility problem over the entries of R.
    """
    Bbar = Bbar.matrix if isinstance(Bbar, ObservationModel) else np.asarray(Bbar, dtype=float)
    B = B.matrix if isinstance(B, ObservationModel) else np.asarray(B, dtype=float)
    if Bbar.shape[0] != B.shape[0]:
        raise ModelError("observation models must share the state dimension")
    X, Y = B.shape
    Yb = Bbar.shape[1]
    # unknowns r[l, k] flattened row-major (l over Y, k over Yb)
    n = Y * Yb
    rows = []
    rhs = []
    for x in range(X):
        for k in range(Yb):
            row = np.zeros(n)
            row[k::Yb] = B[x]
            rows.append(row)
            rhs.append(Bbar[x, k])
    for l in range(Y):
        row = np.zeros(n)
        row[l * Yb:(l + 1) * Yb] = 1.0
        rows.append(row)
        rhs.append(1.0)
    sol = solve_feasibility(np.array(rows), np.array(rhs))
    if sol is None:
        return BlackwellResult(False, None, float("inf"))
    R = np.clip(sol.reshape(Y, Yb), 0.0, None)
    R /= np.where(R.sum(axis=1, keepdims=True) > 0, R.sum(axis=1, keepdims=True), 1.0)
    residual = float(np.max(np.abs(Bbar - B @ R)))
    return BlackwellResult(residual <= tol, R, residual)
